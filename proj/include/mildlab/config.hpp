#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mildlab/convergence.hpp"

namespace mildlab {

struct ExperimentOutput {
    ConvergenceReport report;
    // Extra CSV files written next to report.csv, as (file name, content).
    std::vector<std::pair<std::string, std::string>> files;
};

struct ExperimentPlan {
    std::string name;     // output subdirectory, unique within a config
    std::string theorem;  // registry id
    std::function<ExperimentOutput()> run;
};

struct ExperimentConfig {
    std::string text;    // the bytes hashed into the manifest
    std::string sha256;  // lowercase hex of text
    std::uint64_t base_seed = 0;
    std::string output_dir;
    std::vector<ExperimentPlan> experiments;
};

// Parses and validates a JSON configuration. Every referenced id, family and
// dimension is resolved here; failures throw ConfigInvalid.
ExperimentConfig parse_config(const std::string& text, std::optional<std::uint64_t> seed_override = std::nullopt);
ExperimentConfig load_config(const std::filesystem::path& path,
                             std::optional<std::uint64_t> seed_override = std::nullopt);

struct ExperimentOutcome {
    std::string name;
    std::string theorem;
    bool pass = false;
    std::string error;  // exception text when the experiment could not complete
};

struct RunSummary {
    std::filesystem::path output_dir;
    std::vector<ExperimentOutcome> outcomes;
    bool all_pass = false;
};

// Runs the experiments in order and writes <out>/<name>/report.csv, plot.csv,
// extra files and <out>/manifest.json.
RunSummary run_config(const ExperimentConfig& config, std::optional<std::filesystem::path> output_override = std::nullopt);

std::string sha256_hex(const std::string& bytes);

}  // namespace mildlab
