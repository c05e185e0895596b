#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "fibersync/error.hpp"
#include "fibersync/experiment_runner.hpp"
#include "fibersync/stability_metrics.hpp"

namespace fs = std::filesystem;
using namespace fibersync;

namespace {

enum Exit { ok = 0, usage = 1, config = 2, simulation = 3, io = 4 };

struct Options {
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string format = "json";
};

experiment::RunReport run_one(const fs::path& path, const Options& opt, const std::optional<fs::path>& out_dir,
                              fs::path& report_path) {
    auto cfg = experiment::load_config(path, opt.seed);
    if (out_dir) {
        cfg.output_dir = *out_dir;
    }
    auto report = experiment::run_scenario(cfg);
    report_path = experiment::emit_report(report, experiment::parse_report_format(opt.format), cfg.output_dir);
    return report;
}

int cmd_run(const std::string& config_path, const Options& opt) {
    std::optional<fs::path> out;
    if (!opt.out.empty()) {
        out = fs::path(opt.out);
    }
    fs::path report_path;
    const auto report = run_one(config_path, opt, out, report_path);
    std::cout << experiment::report_text(report);
    std::cout << "report: " << report_path.generic_string() << "\n";
    return ok;
}

int cmd_batch(const std::string& dir, const Options& opt) {
    std::vector<fs::path> configs;
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(dir, ec)) {
        if (entry.is_regular_file() && entry.path().extension() == ".ini") {
            configs.push_back(entry.path());
        }
    }
    if (ec) {
        throw IoError("cannot list " + dir + ": " + ec.message());
    }
    std::sort(configs.begin(), configs.end());
    if (configs.empty()) {
        throw IoError("no .ini files in " + dir);
    }
    // Every config is validated before any scenario starts.
    std::vector<std::string> issues;
    for (const auto& c : configs) {
        try {
            experiment::load_config(c, opt.seed);
        } catch (const ConfigError& e) {
            issues.insert(issues.end(), e.issues().begin(), e.issues().end());
        }
    }
    if (!issues.empty()) {
        throw ConfigError(issues);
    }
    std::vector<std::future<std::string>> jobs;
    for (const auto& c : configs) {
        jobs.push_back(std::async(std::launch::async, [&opt, c] {
            std::optional<fs::path> out;
            if (!opt.out.empty()) {
                out = fs::path(opt.out) / c.stem();
            }
            fs::path report_path;
            run_one(c, opt, out, report_path);
            return c.filename().string() + ": " + report_path.generic_string();
        }));
    }
    for (auto& j : jobs) {
        std::cout << j.get() << "\n";
    }
    return ok;
}

int cmd_metrics(const std::string& csv_path, const Options& opt) {
    const auto x = metrics::read_offset_csv(csv_path);
    const auto taus = metrics::octave_taus(x.tau0, x.size());
    const metrics::DeviationOptions dopt{true};
    const std::vector<metrics::DeviationCurve> curves{metrics::overlapping_adev(x, taus, dopt),
                                                      metrics::mdev(x, taus, dopt), metrics::tdev(x, taus, dopt)};
    if (opt.out.empty()) {
        for (const auto& c : curves) {
            std::cout << "# " << c.statistic << "\n";
            metrics::write_deviation_csv(c, std::cout);
        }
        return ok;
    }
    const fs::path dir(opt.out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create " + dir.string() + ": " + ec.message());
    }
    for (const auto& c : curves) {
        const auto path = dir / (c.statistic + ".csv");
        std::ofstream out(path);
        if (!out) {
            throw IoError("cannot write " + path.string());
        }
        metrics::write_deviation_csv(c, out);
        std::cout << c.statistic << ": " << path.generic_string() << "\n";
    }
    return ok;
}

int cmd_noise(const std::string& kind, double level, std::size_t n, double tau0, const Options& opt) {
    const auto x = metrics::gen_power_law_noise(metrics::parse_noise_kind(kind), level, n, tau0, opt.seed.value_or(0));
    if (opt.out.empty()) {
        metrics::write_offset_csv(x, std::cout);
        return ok;
    }
    std::ofstream out(opt.out);
    if (!out) {
        throw IoError("cannot write " + opt.out);
    }
    metrics::write_offset_csv(x, out);
    return ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fiber time and RF transfer simulator"};
    app.require_subcommand(1);
    Options opt;
    std::uint64_t seed = 0;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--seed", seed, "override the scenario seed");
        sub->add_option("--out", opt.out, "output directory (file for noise)");
        sub->add_option("--format", opt.format, "report format")->check(CLI::IsMember({"json", "text"}));
    };

    std::string config_path;
    auto* run = app.add_subcommand("run", "run one scenario config");
    run->add_option("config", config_path, "scenario .ini file")->required();
    add_common(run);

    std::string batch_dir;
    auto* batch = app.add_subcommand("batch", "run every .ini in a directory");
    batch->add_option("dir", batch_dir, "directory of scenario configs")->required();
    add_common(batch);

    std::string csv_path;
    auto* met = app.add_subcommand("metrics", "ADEV/MDEV/TDEV of a time_s,offset_s CSV");
    met->add_option("csv", csv_path, "offset series")->required();
    add_common(met);

    std::string kind;
    double level = 0.0;
    std::size_t n = 0;
    double tau0 = 1.0;
    auto* noise = app.add_subcommand("noise", "synthesize power-law noise as a time_s,offset_s CSV");
    noise->add_option("kind", kind, "WPM, FPM, WFM, FFM or RWFM")->required();
    noise->add_option("level", level, "h_alpha coefficient")->required();
    noise->add_option("n", n, "number of samples")->required();
    noise->add_option("--tau0", tau0, "sampling interval in s");
    add_common(noise);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? ok : usage;
    }

    for (auto* sub : {run, batch, met, noise}) {
        if (sub->parsed() && sub->count("--seed") > 0) {
            opt.seed = seed;
        }
    }

    try {
        if (run->parsed()) return cmd_run(config_path, opt);
        if (batch->parsed()) return cmd_batch(batch_dir, opt);
        if (met->parsed()) return cmd_metrics(csv_path, opt);
        if (noise->parsed()) return cmd_noise(kind, level, n, tau0, opt);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return config;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return io;
    } catch (const SimulationError& e) {
        std::cerr << "simulation error: " << e.what() << "\n";
        return simulation;
    } catch (const InvalidArgument& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return config;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return io;
    }
    return usage;
}
