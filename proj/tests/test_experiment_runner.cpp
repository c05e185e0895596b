#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <json.hpp>
#include <sstream>

#include "fibersync/error.hpp"
#include "fibersync/experiment_runner.hpp"

using namespace fibersync;
using namespace fibersync::experiment;
namespace fs = std::filesystem;

namespace {

const char* const kShortClosedLoop = R"(
[scenario]
name = short_closed
kind = closed_loop
seed = 7
duration_s = 20

[link]
thermal_amplitude_s = 900e-12
thermal_period_s = 200

[pps]
max_epochs = 4

[loop]
settle_time_s = 5
)";

ScenarioConfig parse(const std::string& text, std::optional<std::uint64_t> seed = {}) {
    std::istringstream in(text);
    return parse_config(in, "test.ini", seed);
}

std::vector<std::string> issues_of(const std::string& text) {
    try {
        parse(text);
    } catch (const ConfigError& e) {
        return e.issues();
    }
    return {};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("fibersync_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(FIBERSYNC_CLI) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

}  // namespace

TEST(Config, DefaultsAndOverrides) {
    const auto cfg = parse(kShortClosedLoop);
    EXPECT_EQ(cfg.name, "short_closed");
    EXPECT_EQ(cfg.kind, ScenarioKind::closed_loop);
    EXPECT_EQ(cfg.seed, 7u);
    EXPECT_DOUBLE_EQ(cfg.duration, 20.0);
    EXPECT_DOUBLE_EQ(cfg.link.thermal_period, 200.0);
    EXPECT_DOUBLE_EQ(cfg.wavelength_forward_nm, 1550.1);
    EXPECT_DOUBLE_EQ(cfg.wavelength_return_nm, 1549.3);
    EXPECT_DOUBLE_EQ(cfg.link.static_delay(), 110e3 * 1.468 / optics::kSpeedOfLight);
    EXPECT_EQ(parse(kShortClosedLoop, 99).seed, 99u);
}

TEST(Config, AllProblemsReportedTogether) {
    const auto issues = issues_of(R"(
[scenario]
kind = sideways
duration_s = abc

[link]
colour = blue

[nonsense]
x = 1
)");
    ASSERT_GE(issues.size(), 4u);
    auto has = [&](const std::string& needle) {
        return std::any_of(issues.begin(), issues.end(),
                           [&](const std::string& s) { return s.find(needle) != std::string::npos; });
    };
    EXPECT_TRUE(has("scenario.kind"));
    EXPECT_TRUE(has("scenario.duration_s"));
    EXPECT_TRUE(has("link.colour"));
    EXPECT_TRUE(has("nonsense.x"));
    EXPECT_TRUE(has("scenario.seed is required"));
}

TEST(Config, SeedOverrideSatisfiesRequirement) {
    std::istringstream in("[scenario]\nkind = open_loop\n");
    EXPECT_EQ(parse_config(in, "x", 5).seed, 5u);
}

TEST(Config, SemanticValidation) {
    auto cfg = parse(kShortClosedLoop);
    cfg.actuator.crossover = 5000.0;
    cfg.wavelength_return_nm = 1600.0;
    cfg.time_compression = 0.0;
    const auto issues = cfg.validation_issues();
    EXPECT_GE(issues.size(), 3u);
    EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Config, HashIsCanonicalAndIgnoresOutputDir) {
    auto a = parse(kShortClosedLoop);
    auto b = parse(std::string(kShortClosedLoop) + "\n[output]\ndir = elsewhere\n");
    EXPECT_EQ(a.hash(), b.hash());
    EXPECT_EQ(a.hash().size(), 16u);
    b.seed = 8;
    EXPECT_NE(a.hash(), b.hash());
    // Key order in the file does not matter.
    const auto c = parse("[pps]\nmax_epochs = 4\n[loop]\nsettle_time_s = 5\n[link]\nthermal_period_s = 200\n"
                         "thermal_amplitude_s = 900e-12\n[scenario]\nduration_s = 20\nseed = 7\nkind = closed_loop\n"
                         "name = short_closed\n");
    EXPECT_EQ(a.canonical(), c.canonical());
    // The canonical text parses back to the same configuration.
    std::string ini;
    std::string section;
    std::istringstream lines(a.canonical());
    for (std::string line; std::getline(lines, line);) {
        const auto dot = line.find('.');
        const auto sec = line.substr(0, dot);
        if (sec != section) {
            ini += "[" + sec + "]\n";
            section = sec;
        }
        ini += line.substr(dot + 1) + "\n";
    }
    EXPECT_EQ(parse(ini).hash(), a.hash());
}

TEST(Config, MissingFileIsIoError) {
    EXPECT_THROW(load_config("/nonexistent/x.ini"), IoError);
}

TEST(Config, ShippedConfigsLoad) {
    for (const auto& entry : fs::directory_iterator(FIBERSYNC_CONFIG_DIR)) {
        if (entry.path().extension() == ".ini") {
            EXPECT_NO_THROW(load_config(entry.path())) << entry.path();
        }
    }
}

TEST(Runner, ClosedLoopRunWritesTablesAndReport) {
    auto cfg = parse(kShortClosedLoop);
    cfg.output_dir = scratch("closed");
    const auto report = run_scenario(cfg);
    for (const char* f : {"trace.csv", "tic_offsets.csv", "adev.csv", "tdev.csv"}) {
        EXPECT_TRUE(fs::exists(cfg.output_dir / f)) << f;
    }
    EXPECT_EQ(report.config_hash, cfg.hash());
    EXPECT_EQ(report.summary.pps.epochs, 4u);
    EXPECT_LT(report.summary.residual_time_pp, 0.2e-12);
    EXPECT_LT(report.summary.identity_max_deviation, 1e-12);
    ASSERT_TRUE(report.summary.cross_engine_max_deviation.has_value());
    EXPECT_LT(*report.summary.cross_engine_max_deviation, 1e-6);
    EXPECT_LT(report.summary.pps.offset_pp, 1e-12);

    const auto path = emit_report(report, ReportFormat::json, cfg.output_dir);
    const auto j = nlohmann::json::parse(slurp(path));
    EXPECT_EQ(j["scenario"], "short_closed");
    EXPECT_EQ(j["seed"], 7);
    EXPECT_EQ(j["outputs"]["trace"], "trace.csv");
    EXPECT_TRUE(j["summary"].contains("suppression_db"));
    EXPECT_TRUE(j["reference_targets"].contains("adev_1s"));
    const auto text = emit_report(report, ReportFormat::text, cfg.output_dir);
    EXPECT_NE(slurp(text).find("short_closed"), std::string::npos);
}

TEST(Runner, OpenLoopPassesDrift) {
    auto cfg = parse(kShortClosedLoop);
    cfg.kind = ScenarioKind::open_loop;
    cfg.link.thermal_period = 20.0;
    cfg.max_pps_epochs = 21;
    cfg.output_dir = scratch("open");
    const auto report = run_scenario(cfg);
    EXPECT_NEAR(report.summary.remote_offset_pp, 1800e-12, 18e-12);
    EXPECT_NEAR(report.summary.pps.offset_pp, report.summary.remote_offset_pp, 1e-12);
}

TEST(Runner, IdenticalConfigsGiveIdenticalBytes) {
    auto cfg = parse(kShortClosedLoop);
    cfg.output_dir = scratch("det_a");
    const auto a = run_scenario(cfg);
    const auto ja = emit_report(a, ReportFormat::json, cfg.output_dir);
    auto cfg2 = parse(kShortClosedLoop);
    cfg2.output_dir = scratch("det_b");
    const auto b = run_scenario(cfg2);
    const auto jb = emit_report(b, ReportFormat::json, cfg2.output_dir);
    EXPECT_EQ(slurp(ja), slurp(jb));
    for (const char* f : {"trace.csv", "tic_offsets.csv", "adev.csv", "tdev.csv"}) {
        EXPECT_EQ(slurp(cfg.output_dir / f), slurp(cfg2.output_dir / f)) << f;
    }
    cfg2.seed = 8;
    cfg2.link.jitter_psd = 1e-28;
    cfg.link.jitter_psd = 1e-28;
    cfg2.output_dir = scratch("det_c");
    cfg.output_dir = scratch("det_d");
    run_scenario(cfg);
    run_scenario(cfg2);
    EXPECT_NE(slurp(cfg.output_dir / "trace.csv"), slurp(cfg2.output_dir / "trace.csv"));
}

TEST(Runner, InvalidConfigRunsNothing) {
    auto cfg = parse(kShortClosedLoop);
    cfg.output_dir = fs::temp_directory_path() / "fibersync_test_never";
    fs::remove_all(cfg.output_dir);
    cfg.actuator.crossover = 0.0;
    EXPECT_THROW(run_scenario(cfg), ConfigError);
    EXPECT_FALSE(fs::exists(cfg.output_dir));
}

TEST(Cli, ExitCodes) {
    const auto dir = scratch("cli");
    write_file(dir / "good.ini", kShortClosedLoop);
    write_file(dir / "bad.ini", "[scenario]\nkind = closed_loop\nbogus = 1\n");

    EXPECT_EQ(run_cli(""), 1);
    EXPECT_EQ(run_cli("run"), 1);
    EXPECT_EQ(run_cli("run " + (dir / "good.ini").string() + " --format xml"), 1);
    EXPECT_EQ(run_cli("run " + (dir / "missing.ini").string()), 4);
    EXPECT_EQ(run_cli("run " + (dir / "bad.ini").string()), 2);
    EXPECT_EQ(run_cli("run " + (dir / "good.ini").string() + " --out " + (dir / "out").string()), 0);
    EXPECT_TRUE(fs::exists(dir / "out" / "report.json"));
    EXPECT_EQ(run_cli("run " + (dir / "good.ini").string() + " --format text --out " + (dir / "out_text").string()), 0);
    EXPECT_TRUE(fs::exists(dir / "out_text" / "report.txt"));

    EXPECT_EQ(run_cli("noise WFM 1e-22 64 --seed 3 --out " + (dir / "noise.csv").string()), 0);
    EXPECT_EQ(run_cli("metrics " + (dir / "noise.csv").string() + " --out " + (dir / "dev").string()), 0);
    EXPECT_TRUE(fs::exists(dir / "dev" / "oadev.csv"));
    EXPECT_EQ(run_cli("noise PINK 1e-22 64"), 2);
    EXPECT_EQ(run_cli("metrics " + (dir / "missing.csv").string()), 4);
}

TEST(Cli, BatchValidatesEverythingFirst) {
    const auto dir = scratch("batch");
    fs::create_directories(dir / "cfg");
    write_file(dir / "cfg" / "a.ini", kShortClosedLoop);
    write_file(dir / "cfg" / "b.ini", "[scenario]\nkind = closed_loop\nseed = 1\nbogus = 1\n");
    EXPECT_EQ(run_cli("batch " + (dir / "cfg").string() + " --out " + (dir / "out").string()), 2);
    EXPECT_FALSE(fs::exists(dir / "out"));
    fs::remove(dir / "cfg" / "b.ini");
    EXPECT_EQ(run_cli("batch " + (dir / "cfg").string() + " --out " + (dir / "out").string()), 0);
    EXPECT_TRUE(fs::exists(dir / "out" / "a" / "report.json"));
}
