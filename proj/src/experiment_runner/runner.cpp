#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "fibersync/csv.hpp"
#include "fibersync/error.hpp"
#include "fibersync/experiment_runner.hpp"

namespace fibersync::experiment {

namespace {

constexpr double kPi = std::numbers::pi;

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    double sum = 0.0;
    std::size_t count = 0;

    void add(double v) {
        if (std::isnan(v)) {
            return;
        }
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        sum += v;
        ++count;
    }
    double pp() const { return count ? hi - lo : 0.0; }
    double mean() const { return count ? sum / static_cast<double>(count) : 0.0; }
};

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    return out;
}

void finish_output(std::ofstream& out, const std::filesystem::path& path) {
    out.flush();
    if (!out) {
        throw IoError("write failed for " + path.string());
    }
}

void prepare_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir)) {
        throw IoError("cannot create output directory " + dir.string() + (ec ? ": " + ec.message() : ""));
    }
}

std::string record(RunReport& report, const std::filesystem::path& dir, const std::string& role,
                   const std::string& file) {
    // Stored relative to the report so the report does not depend on where
    // it was written.
    report.outputs[role] = file;
    return (dir / file).generic_string();
}

// Remote pulse arrival relative to the local one for one epoch; nullopt when
// the remote pulse is lost or its delay does not fit the window.
struct EpochPulses {
    double ref = 0.0;
    std::optional<double> rx;  ///< with the static delay removed
};

EpochPulses pulses_at(const waveform::PpsChainSetup& setup, double epoch, double static_delay, double offset,
                      std::uint64_t seed, std::uint64_t index) {
    const auto ref = waveform::pps_arrival(setup, epoch, 0.0, 0.0, {seed, 2 * index});
    if (!ref) {
        throw SimulationError("local reference pulse was not regenerated at epoch " + std::to_string(epoch) + " s");
    }
    EpochPulses out;
    out.ref = ref->timestamp;
    try {
        const auto rx = waveform::pps_arrival(setup, epoch, static_delay, offset, {seed, 2 * index + 1});
        if (rx) {
            out.rx = rx->timestamp - static_delay;
        }
    } catch (const InvalidArgument&) {
        // Delay outside the spot window: the epoch becomes a gap.
    }
    return out;
}

metrics::DeviationCurve curve_or_empty(const metrics::PhaseSeries& x, bool time_deviation, double bandwidth) {
    metrics::DeviationCurve curve;
    curve.statistic = time_deviation ? "tdev" : "oadev";
    if (x.size() - x.gaps.size() < 3 || x.size() < 3) {
        curve.omitted.push_back({x.tau0, "series shorter than 3 samples"});
        return curve;
    }
    const auto taus = metrics::octave_taus(x.tau0, x.size());
    const metrics::DeviationOptions opt{true};
    curve = time_deviation ? metrics::tdev(x, taus, opt) : metrics::overlapping_adev(x, taus, opt);
    curve.measurement_bandwidth = bandwidth;
    return curve;
}

void write_curve(RunReport& report, const std::filesystem::path& dir, const metrics::DeviationCurve& curve,
                 const std::string& role) {
    const auto path = record(report, dir, role, role + ".csv");
    auto out = open_output(path);
    metrics::write_deviation_csv(curve, out);
    finish_output(out, path);
}

void write_tic(RunReport& report, const std::filesystem::path& dir, const metrics::PhaseSeries& x) {
    const auto path = record(report, dir, "tic_offsets", "tic_offsets.csv");
    auto out = open_output(path);
    metrics::write_offset_csv(x, out);
    finish_output(out, path);
}

void summarize_pps(PpsSummary& pps, const metrics::PhaseSeries& x) {
    Range r;
    for (double v : x.values) {
        r.add(v);
    }
    pps.epochs = x.size();
    pps.gaps = x.gaps.size();
    pps.offset_mean = r.mean();
    pps.offset_pp = r.pp();
}

void run_loop(const ScenarioConfig& cfg, RunReport& report) {
    const auto& dir = cfg.output_dir;
    const optics::LinkNoiseProcess link(cfg.link_params());
    const double f_rf = cfg.rf.frequency();
    const auto mode = cfg.kind == ScenarioKind::closed_loop ? control::LoopMode::closed : control::LoopMode::open;
    control::LoopOptions options;
    options.rf_frequency = f_rf;
    options.dead_zone = cfg.loop.dead_zone;
    options.record_interval = cfg.loop.record_interval;
    options.saturation_hold = cfg.loop.saturation_hold;
    const auto trace =
        control::simulate_closed_loop(link, cfg.loop.pid(f_rf), cfg.actuator, cfg.simulated_duration(), mode, options);
    {
        const auto path = record(report, dir, "trace", "trace.csv");
        auto out = open_output(path);
        control::write_trace_csv(trace, out);
        finish_output(out, path);
    }

    auto& s = report.summary;
    s.saturation_events = trace.saturation_events.size();
    s.truncated = trace.truncated;
    s.truncation_reason = trace.truncation_reason;
    const double omega = 2.0 * kPi * f_rf;
    Range excess_all, offset_all, excess_late, offset_late, phase_late;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const double excess = trace.t_link[i] - trace.static_delay;
        excess_all.add(excess);
        offset_all.add(trace.remote_time_offset[i]);
        s.identity_max_deviation =
            std::max(s.identity_max_deviation, std::abs(trace.remote_time_offset[i] * omega - trace.remote_rf_phase[i]));
        if (trace.time[i] >= cfg.loop.settle_time) {
            excess_late.add(excess);
            offset_late.add(trace.remote_time_offset[i]);
            phase_late.add(trace.remote_rf_phase[i]);
        }
    }
    s.link_excess_pp = excess_all.pp();
    s.remote_offset_pp = offset_all.pp();
    s.residual_time_pp = offset_late.pp();
    s.residual_phase_pp = phase_late.pp();
    s.residual_phase_equiv_pp = phase_late.pp() / omega;
    s.suppression_db = s.residual_time_pp > 0.0 ? 20.0 * std::log10(excess_late.pp() / s.residual_time_pp)
                                                : std::numeric_limits<double>::infinity();

    // Discriminator cross-check: full waveform round trip at a few recorded
    // ticks, against the slow engine's round-trip phase 2 * omega * offset.
    if (cfg.crosscheck_windows > 0 && trace.size() > 0) {
        const auto setup = cfg.round_trip_setup();
        const double half_period = 0.5 / f_rf;
        double worst = 0.0;
        const std::size_t n = cfg.crosscheck_windows;
        for (std::size_t k = 0; k < n; ++k) {
            const std::size_t i = (k * (trace.size() - 1)) / std::max<std::size_t>(n - 1, 1);
            const double excess = trace.t_link[i] - trace.static_delay;
            // Whole half periods leave the round-trip phase unchanged.
            const double margin = std::ceil((5e-9 + std::max(0.0, -excess)) / half_period) * half_period;
            const auto rt = waveform::round_trip(setup, trace.time[i], margin + excess, trace.t_odl[i],
                                                 {cfg.seed, 0x5243ULL + k});
            const double slow = signal::wrap_phase(2.0 * trace.remote_rf_phase[i]);
            worst = std::max(worst, std::abs(signal::wrap_phase(rt.reading.phase - slow)));
        }
        s.cross_engine_max_deviation = worst;
    }

    // 1PPS through the spot-window chain once per second, TIC against the
    // local regenerated pulse.
    const auto setup = cfg.pps_setup(true);
    std::vector<double> ref_events, rx_events;
    const double last_time = trace.size() ? trace.time.back() : 0.0;
    for (std::size_t k = 0; k < cfg.max_pps_epochs && static_cast<double>(k) <= last_time; ++k) {
        const double epoch = static_cast<double>(k);
        const auto idx = std::min<std::size_t>(
            trace.size() - 1, static_cast<std::size_t>(std::llround(epoch / cfg.loop.record_interval)));
        const auto p = pulses_at(setup, epoch, trace.static_delay, trace.remote_time_offset[idx], cfg.seed, k);
        ref_events.push_back(p.ref);
        if (p.rx) {
            rx_events.push_back(*p.rx);
        }
    }
    if (ref_events.size() >= 2) {
        const auto tic = metrics::tic_offsets(ref_events, rx_events);
        write_tic(report, dir, tic);
        summarize_pps(s.pps, tic);
        report.tdev = curve_or_empty(tic, true, 0.0);
    }

    metrics::PhaseSeries remote;
    remote.tau0 = cfg.loop.record_interval;
    remote.values = trace.remote_time_offset;
    if (remote.size() >= 3) {
        report.adev = curve_or_empty(metrics::prefilter(remote, cfg.measurement_bandwidth), false,
                                     cfg.measurement_bandwidth);
    }
    write_curve(report, dir, report.adev, "adev");
    write_curve(report, dir, report.tdev, "tdev");
}

void run_back_to_back(const ScenarioConfig& cfg, RunReport& report) {
    const auto& dir = cfg.output_dir;
    const optics::LinkNoiseProcess link(cfg.link_params());
    const bool with_tone = cfg.kind == ScenarioKind::back_to_back_tf;
    const auto setup = cfg.pps_setup(with_tone);
    const auto setup_plain = cfg.pps_setup(false);

    std::vector<double> ref_events, rx_events;
    Range excess;
    double cross = 0.0;
    bool cross_seen = false;
    const double duration = cfg.simulated_duration();
    for (std::size_t k = 0; k < cfg.max_pps_epochs && static_cast<double>(k) <= duration; ++k) {
        const double epoch = static_cast<double>(k);
        const double offset = link.excess_delay(epoch);
        excess.add(offset);
        const auto p = pulses_at(setup, epoch, link.static_delay(), offset, cfg.seed, k);
        ref_events.push_back(p.ref);
        if (p.rx) {
            rx_events.push_back(*p.rx);
        }
        if (with_tone && p.rx) {
            // Same noise realization without the RF tone.
            const auto q = pulses_at(setup_plain, epoch, link.static_delay(), offset, cfg.seed, k);
            if (q.rx) {
                cross = std::max(cross, std::abs((*p.rx - p.ref) - (*q.rx - q.ref)));
                cross_seen = true;
            }
        }
    }
    auto& s = report.summary;
    s.link_excess_pp = excess.pp();
    if (ref_events.size() < 2) {
        throw SimulationError("back-to-back run needs at least two pulse epochs");
    }
    const auto tic = metrics::tic_offsets(ref_events, rx_events);
    write_tic(report, dir, tic);
    summarize_pps(s.pps, tic);
    if (cross_seen) {
        s.pps.cross_modulation_deviation = cross;
    }
    s.remote_offset_pp = s.pps.offset_pp;
    s.residual_time_pp = s.pps.offset_pp;
    report.adev = curve_or_empty(tic, false, 0.0);
    report.tdev = curve_or_empty(tic, true, 0.0);
    write_curve(report, dir, report.adev, "adev");
    write_curve(report, dir, report.tdev, "tdev");
}

nlohmann::ordered_json curve_json(const metrics::DeviationCurve& c) {
    nlohmann::ordered_json j;
    j["statistic"] = c.statistic;
    j["measurement_bandwidth_hz"] = c.measurement_bandwidth;
    auto points = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < c.size(); ++i) {
        points.push_back({{"tau_s", c.taus[i]}, {"value", c.values[i]}, {"n_terms", c.n_terms[i]}});
    }
    j["points"] = points;
    auto omitted = nlohmann::ordered_json::array();
    for (const auto& o : c.omitted) {
        omitted.push_back({{"tau_s", o.tau}, {"reason", o.reason}});
    }
    j["omitted"] = omitted;
    return j;
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

constexpr const char* kCompressionNote =
    "drift periods and durations are divided by time_compression; loop suppression depends only on the drift "
    "frequency relative to the loop bandwidth and grows as that ratio falls, so a compressed run understates the "
    "suppression of the uncompressed experiment";

}  // namespace

RunReport run_scenario(const ScenarioConfig& cfg) {
    cfg.validate();
    prepare_dir(cfg.output_dir);

    RunReport report;
    report.scenario = cfg.name;
    report.kind = cfg.kind;
    report.config_hash = cfg.hash();
    report.seed = cfg.seed;
    report.time_compression = cfg.time_compression;
    report.simulated_duration = cfg.simulated_duration();
    report.drift_frequency = cfg.time_compression / cfg.link.thermal_period;
    report.unity_gain_hz = cfg.loop.unity_gain_hz;
    report.reference = cfg.reference;

    if (cfg.kind == ScenarioKind::open_loop || cfg.kind == ScenarioKind::closed_loop) {
        run_loop(cfg, report);
    } else {
        run_back_to_back(cfg, report);
    }
    return report;
}

std::string report_json(const RunReport& r) {
    nlohmann::ordered_json j;
    j["scenario"] = r.scenario;
    j["kind"] = to_string(r.kind);
    j["config_hash"] = r.config_hash;
    j["seed"] = r.seed;
    j["time_compression"] = r.time_compression;
    j["compression_note"] = kCompressionNote;
    j["simulated_duration_s"] = r.simulated_duration;
    j["drift_frequency_hz"] = r.drift_frequency;
    j["unity_gain_hz"] = r.unity_gain_hz;

    const auto& s = r.summary;
    nlohmann::ordered_json sj;
    sj["link_excess_pp_s"] = s.link_excess_pp;
    sj["remote_offset_pp_s"] = s.remote_offset_pp;
    sj["residual_time_pp_s"] = s.residual_time_pp;
    sj["residual_phase_pp_rad"] = s.residual_phase_pp;
    sj["residual_phase_equiv_pp_s"] = s.residual_phase_equiv_pp;
    if (std::isfinite(s.suppression_db)) {
        sj["suppression_db"] = s.suppression_db;
    } else {
        sj["suppression_db"] = "unbounded";
    }
    sj["identity_max_deviation_rad"] = s.identity_max_deviation;
    sj["cross_engine_max_deviation_rad"] =
        s.cross_engine_max_deviation ? nlohmann::ordered_json(*s.cross_engine_max_deviation) : nlohmann::ordered_json();
    sj["saturation_events"] = s.saturation_events;
    sj["truncated"] = s.truncated;
    sj["truncation_reason"] = s.truncation_reason;
    nlohmann::ordered_json pj;
    pj["epochs"] = s.pps.epochs;
    pj["gaps"] = s.pps.gaps;
    pj["offset_mean_s"] = s.pps.offset_mean;
    pj["offset_pp_s"] = s.pps.offset_pp;
    pj["cross_modulation_deviation_s"] = s.pps.cross_modulation_deviation
                                             ? nlohmann::ordered_json(*s.pps.cross_modulation_deviation)
                                             : nlohmann::ordered_json();
    sj["pps"] = pj;
    j["summary"] = sj;
    j["adev"] = curve_json(r.adev);
    j["tdev"] = curve_json(r.tdev);

    nlohmann::ordered_json ref;
    ref["note"] = "hardware-measured values for comparison only; not reproducible by the noiseless simulation";
    ref["adev_1s"] = r.reference.adev_1s;
    ref["adev_1e4s"] = r.reference.adev_1e4s;
    ref["tdev_1s_s"] = r.reference.tdev_1s;
    ref["tdev_1e4s_s"] = r.reference.tdev_1e4s;
    ref["open_loop_pp_s"] = r.reference.open_loop_pp;
    ref["closed_loop_phase_pp_s"] = r.reference.closed_loop_phase_pp;
    ref["cross_modulation_s"] = r.reference.cross_modulation;
    j["reference_targets"] = ref;

    nlohmann::ordered_json out;
    for (const auto& [role, path] : r.outputs) {
        out[role] = path;
    }
    j["outputs"] = out;
    return j.dump(2) + "\n";
}

std::string report_text(const RunReport& r) {
    const auto& s = r.summary;
    std::ostringstream os;
    os << "scenario: " << r.scenario << " (" << to_string(r.kind) << ")\n";
    os << "config hash: " << r.config_hash << "\n";
    os << "seed: " << r.seed << "\n";
    os << "time compression: " << fmt(r.time_compression) << " (" << kCompressionNote << ")\n";
    os << "simulated duration: " << fmt(r.simulated_duration) << " s\n";
    os << "drift frequency: " << fmt(r.drift_frequency) << " Hz, loop unity gain " << fmt(r.unity_gain_hz) << " Hz\n";
    os << "p-p drift (link excess delay): " << fmt(s.link_excess_pp * 1e12) << " ps\n";
    os << "p-p remote time offset: " << fmt(s.remote_offset_pp * 1e12) << " ps\n";
    os << "residual p-p after settling: " << fmt(s.residual_time_pp * 1e12) << " ps\n";
    os << "residual RF phase p-p: " << fmt(s.residual_phase_pp) << " rad (" << fmt(s.residual_phase_equiv_pp * 1e12)
       << " ps equivalent)\n";
    os << "suppression ratio: " << (std::isfinite(s.suppression_db) ? fmt(s.suppression_db) : std::string("unbounded"))
       << " dB\n";
    os << "time/phase identity max deviation: " << fmt(s.identity_max_deviation) << " rad\n";
    if (s.cross_engine_max_deviation) {
        os << "cross-engine max deviation: " << fmt(*s.cross_engine_max_deviation) << " rad\n";
    }
    os << "saturation events: " << s.saturation_events << (s.truncated ? " (truncated: " + s.truncation_reason + ")" : "")
       << "\n";
    os << "1PPS epochs: " << s.pps.epochs << ", gaps " << s.pps.gaps << ", offset mean "
       << fmt(s.pps.offset_mean * 1e12) << " ps, p-p " << fmt(s.pps.offset_pp * 1e12) << " ps\n";
    if (s.pps.cross_modulation_deviation) {
        os << "cross-modulation timestamp deviation: " << fmt(*s.pps.cross_modulation_deviation * 1e12) << " ps\n";
    }
    for (const auto* c : {&r.adev, &r.tdev}) {
        os << c->statistic;
        if (c->measurement_bandwidth > 0.0) {
            os << " (measurement bandwidth " << fmt(c->measurement_bandwidth) << " Hz)";
        }
        os << ":\n";
        for (std::size_t i = 0; i < c->size(); ++i) {
            os << "  tau " << fmt(c->taus[i]) << " s: " << fmt(c->values[i]) << " (" << c->n_terms[i] << " terms)\n";
        }
    }
    os << "reference targets (hardware, not reproduced): ADEV " << fmt(r.reference.adev_1s) << " @1 s, "
       << fmt(r.reference.adev_1e4s) << " @1e4 s; TDEV " << fmt(r.reference.tdev_1s) << " s @1 s, "
       << fmt(r.reference.tdev_1e4s) << " s @1e4 s\n";
    for (const auto& [role, path] : r.outputs) {
        os << role << ": " << path << "\n";
    }
    return os.str();
}

std::filesystem::path emit_report(const RunReport& report, ReportFormat format, const std::filesystem::path& dir) {
    prepare_dir(dir);
    const auto path = dir / (format == ReportFormat::json ? "report.json" : "report.txt");
    auto out = open_output(path);
    out << (format == ReportFormat::json ? report_json(report) : report_text(report));
    finish_output(out, path);
    return path;
}

}  // namespace fibersync::experiment
