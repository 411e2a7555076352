#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "mildlab/config.hpp"
#include "mildlab/error.hpp"
#include "mildlab/parallel.hpp"
#include "mildlab/registry.hpp"

namespace {

constexpr int kExitFailed = 1;
constexpr int kExitInvalid = 2;

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Continuous-dependence experiments for stochastic evolution equations"};
    app.require_subcommand(1);
    unsigned workers = 0;
    app.add_option("--workers", workers, "Worker threads (0 = hardware concurrency)");

    auto* run = app.add_subcommand("run", "Run the experiments of a configuration file");
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    run->add_option("config", config_path, "JSON configuration")->required();
    run->add_option("--out", out_dir, "Output directory (overrides the config)");
    run->add_option("--seed", seed, "Base seed (overrides the config)");
    run->add_option("--workers", workers, "Worker threads (0 = hardware concurrency)");

    auto* list = app.add_subcommand("list", "List registered theorem ids");
    std::string filter;
    list->add_option("filter", filter, "Substring of an id or category");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    if (list->parsed()) {
        for (const auto& e : mildlab::list_theorems(filter))
            std::cout << e.id << "\t" << e.category << "\t" << e.description << "\n";
        return 0;
    }

    mildlab::set_worker_count(workers);
    try {
        const auto config = mildlab::load_config(config_path, seed);
        const auto summary = mildlab::run_config(
            config, out_dir.empty() ? std::nullopt : std::optional<std::filesystem::path>(out_dir));
        for (const auto& o : summary.outcomes) {
            std::cout << (o.pass ? "PASS " : "FAIL ") << o.name << " (" << o.theorem << ")";
            if (!o.error.empty()) std::cout << ": " << o.error;
            std::cout << "\n";
        }
        std::cout << "reports written to " << summary.output_dir.string() << "\n";
        if (!summary.all_pass) throw mildlab::ExperimentFailed("at least one experiment failed");
    } catch (const mildlab::ConfigInvalid& e) {
        std::cerr << "invalid configuration: " << e.what() << "\n";
        return kExitInvalid;
    } catch (const mildlab::ExperimentFailed& e) {
        std::cerr << e.what() << "\n";
        return kExitFailed;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailed;
    }
    return 0;
}
