#include <gtest/gtest.h>

#include <array>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "mildlab/config.hpp"
#include "mildlab/error.hpp"

namespace fs = std::filesystem;
using namespace mildlab;

namespace {

struct Result {
    int status = -1;
    std::string out;
};

Result run(const std::string& args) {
    const std::string cmd = std::string(MILDLAB_CLI_PATH) + " " + args + " 2>/dev/null";
    Result r;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return r;
    std::array<char, 512> buf{};
    while (fgets(buf.data(), buf.size(), pipe)) r.out += buf.data();
    const int raw = pclose(pipe);
    r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    return r;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path smoke_config() { return fs::path(MILDLAB_SOURCE_DIR) / "configs" / "smoke.cfg"; }

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("mildlab_cli_" + name);
    fs::remove_all(dir);
    return dir;
}

std::string minimal_config(const std::string& ensemble) {
    return R"({"base_seed": 3, "space": {"dimension": 1, "eigenvalues": [1.0]},
              "driver": {"kind": "wiener", "q": [1.0]},
              "coefficients": {"diffusion": {"family": "additive_constant", "scale": 1.0}},
              "initial": {"mean": 1.0}, "grid": {"T": 1.0, "steps": 10}, "ensemble": )" +
           ensemble + R"(, "experiments": [{"theorem": "yo2sc", "lambdas": [0.1, 0.01]}]})";
}

}  // namespace

TEST(Cli, SmokeConfigPassesQuickly) {
    const fs::path out = scratch("smoke");
    const auto start = std::chrono::steady_clock::now();
    const Result r = run("run " + smoke_config().string() + " --out " + out.string());
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    EXPECT_EQ(r.status, 0) << r.out;
    EXPECT_LT(seconds, 10.0);
    EXPECT_EQ(r.out.find("FAIL"), std::string::npos) << r.out;
    EXPECT_TRUE(fs::exists(out / "manifest.json"));
    EXPECT_TRUE(fs::exists(out / "yo2sc" / "report.csv"));
    EXPECT_TRUE(fs::exists(out / "nyo2" / "decomposition.csv"));
}

TEST(Cli, ManifestRecordsConfigHash) {
    const fs::path out = scratch("hash");
    ASSERT_EQ(run("run " + smoke_config().string() + " --out " + out.string()).status, 0);
    const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
    EXPECT_EQ(manifest.at("config_sha256").get<std::string>(), sha256_hex(slurp(smoke_config())));
    EXPECT_EQ(manifest.at("base_seed").get<std::uint64_t>(), 20240601u);
    EXPECT_TRUE(manifest.at("all_pass").get<bool>());
}

TEST(Cli, SHA256KnownVector) {
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Cli, RerunsAreByteIdentical) {
    const fs::path a = scratch("rerun_a"), b = scratch("rerun_b");
    ASSERT_EQ(run("run " + smoke_config().string() + " --out " + a.string() + " --workers 1").status, 0);
    ASSERT_EQ(run("run " + smoke_config().string() + " --out " + b.string() + " --workers 4").status, 0);
    int compared = 0;
    for (const auto& entry : fs::recursive_directory_iterator(a)) {
        if (!entry.is_regular_file()) continue;
        const fs::path rel = fs::relative(entry.path(), a);
        EXPECT_EQ(slurp(entry.path()), slurp(b / rel)) << rel;
        ++compared;
    }
    EXPECT_GT(compared, 10);
}

TEST(Cli, SeedOverrideChangesNumbers) {
    const fs::path a = scratch("seed_a"), b = scratch("seed_b");
    ASSERT_EQ(run("run " + smoke_config().string() + " --out " + a.string()).status, 0);
    run("run " + smoke_config().string() + " --out " + b.string() + " --seed 7");
    EXPECT_NE(slurp(a / "yo2sc" / "report.csv"), slurp(b / "yo2sc" / "report.csv"));
    const auto manifest = nlohmann::json::parse(slurp(b / "manifest.json"));
    EXPECT_EQ(manifest.at("base_seed").get<std::uint64_t>(), 7u);
}

TEST(Cli, SinglePathEnsembleIsInvalid) {
    const fs::path dir = scratch("invalid");
    fs::create_directories(dir);
    std::ofstream(dir / "one.cfg") << minimal_config(R"({"paths": 1})");
    const Result r = run("run " + (dir / "one.cfg").string() + " --out " + (dir / "out").string());
    EXPECT_EQ(r.status, 2);
    EXPECT_THROW(parse_config(minimal_config(R"({"paths": 1})")), ConfigInvalid);
}

TEST(Cli, MissingConfigIsInvalid) {
    EXPECT_EQ(run("run /nonexistent/none.cfg").status, 2);
}

TEST(Cli, ParseRejectsBadSections) {
    EXPECT_NO_THROW(parse_config(minimal_config(R"({"paths": 20})")));
    EXPECT_THROW(parse_config("{not json"), ConfigInvalid);
    std::string unknown = minimal_config(R"({"paths": 20})");
    unknown.replace(unknown.find("yo2sc"), 5, "nyo99");
    EXPECT_THROW(parse_config(unknown), ConfigInvalid);
    std::string bad_grid = minimal_config(R"({"paths": 20})");
    bad_grid.replace(bad_grid.find("\"steps\": 10"), 11, "\"steps\": 0");
    EXPECT_THROW(parse_config(bad_grid), ConfigInvalid);
}

TEST(Cli, ListAll) {
    const Result r = run("list");
    EXPECT_EQ(r.status, 0);
    EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 15);
}

TEST(Cli, ListFilter) {
    const Result r = run("list yosida");
    EXPECT_EQ(r.status, 0);
    std::istringstream lines(r.out);
    std::string line;
    std::vector<std::string> ids;
    while (std::getline(lines, line)) ids.push_back(line.substr(0, line.find('\t')));
    EXPECT_EQ(ids, (std::vector<std::string>{"yo2sc", "yopsc"}));
}

TEST(Cli, UnknownFilterListsNothing) {
    const Result r = run("list nothing-matches-this");
    EXPECT_EQ(r.status, 0);
    EXPECT_TRUE(r.out.empty());
}
