#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <numbers>
#include <set>
#include <sstream>

#include "fibersync/csv.hpp"
#include "fibersync/error.hpp"
#include "fibersync/experiment_runner.hpp"

namespace fibersync::experiment {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& text) {
    const auto s = trim(text);
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size() || !std::isfinite(v)) {
        throw InvalidArgument("'" + text + "' is not a finite number");
    }
    return v;
}

std::uint64_t to_u64(const std::string& text) {
    const auto s = trim(text);
    std::uint64_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw InvalidArgument("'" + text + "' is not a non-negative integer");
    }
    return v;
}

std::vector<double> to_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        out.push_back(to_double(item));
    }
    if (out.empty()) {
        throw InvalidArgument("empty list");
    }
    return out;
}

std::string num(double v) { return csv::number(v); }

std::string list_text(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out += (i ? "," : "") + num(v[i]);
    }
    return out;
}

std::string optional_text(const std::optional<double>& v) { return v ? num(*v) : "auto"; }

std::optional<double> to_optional(const std::string& text) {
    if (trim(text) == "auto" || trim(text).empty()) {
        return std::nullopt;
    }
    return to_double(text);
}

struct Field {
    const char* section;
    const char* key;
    std::function<void(ScenarioConfig&, const std::string&)> set;
    std::function<std::string(const ScenarioConfig&)> get;
};

#define FS_DOUBLE(sec, name, member)                                                  \
    Field {                                                                           \
        sec, name, [](ScenarioConfig& c, const std::string& v) { c.member = to_double(v); }, \
            [](const ScenarioConfig& c) { return num(c.member); }                     \
    }
#define FS_SIZE(sec, name, member)                                                                          \
    Field {                                                                                                 \
        sec, name, [](ScenarioConfig& c, const std::string& v) { c.member = static_cast<std::size_t>(to_u64(v)); }, \
            [](const ScenarioConfig& c) { return std::to_string(c.member); }                               \
    }
#define FS_INT(sec, name, member)                                                                  \
    Field {                                                                                        \
        sec, name, [](ScenarioConfig& c, const std::string& v) { c.member = static_cast<int>(to_u64(v)); }, \
            [](const ScenarioConfig& c) { return std::to_string(c.member); }                      \
    }
#define FS_OPTIONAL(sec, name, member)                                                    \
    Field {                                                                               \
        sec, name, [](ScenarioConfig& c, const std::string& v) { c.member = to_optional(v); }, \
            [](const ScenarioConfig& c) { return optional_text(c.member); }               \
    }

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        {"scenario", "name", [](ScenarioConfig& c, const std::string& v) { c.name = trim(v); },
         [](const ScenarioConfig& c) { return c.name; }},
        {"scenario", "kind", [](ScenarioConfig& c, const std::string& v) { c.kind = parse_scenario_kind(trim(v)); },
         [](const ScenarioConfig& c) { return to_string(c.kind); }},
        {"scenario", "seed", [](ScenarioConfig& c, const std::string& v) { c.seed = to_u64(v); },
         [](const ScenarioConfig& c) { return std::to_string(c.seed); }},
        FS_DOUBLE("scenario", "duration_s", duration),
        FS_DOUBLE("scenario", "time_compression", time_compression),

        {"link", "segments_km", [](ScenarioConfig& c, const std::string& v) { c.link.segments_km = to_list(v); },
         [](const ScenarioConfig& c) { return list_text(c.link.segments_km); }},
        FS_DOUBLE("link", "group_index", link.group_index),
        FS_DOUBLE("link", "thermal_amplitude_s", link.thermal_amplitude),
        FS_DOUBLE("link", "thermal_period_s", link.thermal_period),
        FS_DOUBLE("link", "thermal_phase_rad", link.thermal_phase),
        FS_DOUBLE("link", "random_walk_coeff", link.random_walk_coeff),
        FS_DOUBLE("link", "random_walk_knot_s", link.random_walk_knot),
        FS_DOUBLE("link", "jitter_psd", link.jitter_psd),
        FS_DOUBLE("link", "jitter_interval_s", link.jitter_interval),

        {"rf", "frequency_hz", [](ScenarioConfig& c, const std::string& v) { c.rf.omega = 2.0 * std::numbers::pi * to_double(v); },
         [](const ScenarioConfig& c) { return num(c.rf.frequency()); }},
        FS_DOUBLE("rf", "phase_rad", rf.phase),
        FS_DOUBLE("rf", "depth", rf.depth),

        FS_DOUBLE("pps", "pulse_width_s", pulse_width),
        FS_DOUBLE("pps", "drive_bandwidth_hz", pps_drive_bandwidth),
        FS_SIZE("pps", "max_epochs", max_pps_epochs),

        FS_DOUBLE("optics", "power_w", power),
        FS_DOUBLE("optics", "forward_wavelength_nm", wavelength_forward_nm),
        FS_DOUBLE("optics", "return_wavelength_nm", wavelength_return_nm),
        FS_DOUBLE("optics", "sample_rate_hz", sample_rate),
        FS_SIZE("optics", "window_samples", window),
        FS_INT("optics", "interp_half_width", interp.half_width),
        FS_DOUBLE("optics", "interp_kaiser_beta", interp.kaiser_beta),

        FS_DOUBLE("loop", "update_rate_hz", loop.update_rate),
        FS_DOUBLE("loop", "unity_gain_hz", loop.unity_gain_hz),
        FS_OPTIONAL("loop", "kp", loop.kp),
        FS_OPTIONAL("loop", "ki", loop.ki),
        FS_OPTIONAL("loop", "kd", loop.kd),
        FS_DOUBLE("loop", "integrator_limit_s", loop.integrator_limit),
        FS_DOUBLE("loop", "dead_zone_rad", loop.dead_zone),
        FS_DOUBLE("loop", "record_interval_s", loop.record_interval),
        FS_DOUBLE("loop", "saturation_hold_s", loop.saturation_hold),
        FS_DOUBLE("loop", "settle_time_s", loop.settle_time),

        FS_DOUBLE("actuator", "thermal_bandwidth_hz", actuator.thermal.bandwidth),
        FS_DOUBLE("actuator", "thermal_range_s", actuator.thermal.range),
        FS_DOUBLE("actuator", "pzt_bandwidth_hz", actuator.pzt.bandwidth),
        FS_DOUBLE("actuator", "pzt_range_s", actuator.pzt.range),
        FS_DOUBLE("actuator", "crossover_hz", actuator.crossover),

        FS_DOUBLE("detector_rf", "responsivity", rf_detector.responsivity),
        FS_DOUBLE("detector_rf", "band_low_hz", rf_detector.band_low),
        FS_DOUBLE("detector_rf", "band_high_hz", rf_detector.band_high),
        FS_DOUBLE("detector_rf", "noise_density", rf_detector.noise_density),
        FS_INT("detector_rf", "filter_order", rf_detector.filter_order),

        FS_DOUBLE("detector_pps", "responsivity", pps_detector.responsivity),
        FS_DOUBLE("detector_pps", "band_low_hz", pps_detector.band_low),
        FS_DOUBLE("detector_pps", "band_high_hz", pps_detector.band_high),
        FS_DOUBLE("detector_pps", "noise_density", pps_detector.noise_density),
        FS_INT("detector_pps", "filter_order", pps_detector.filter_order),

        FS_DOUBLE("mzi", "path_difference_s", mzi.path_difference),
        FS_DOUBLE("mzi", "bias_rad", mzi.bias),
        {"mzi", "bias_lock",
         [](ScenarioConfig& c, const std::string& v) {
             const auto s = trim(v);
             if (s == "ideal_destructive") {
                 c.mzi.lock = demod::BiasLock::ideal_destructive;
             } else if (s == "fixed_value") {
                 c.mzi.lock = demod::BiasLock::fixed_value;
             } else {
                 throw InvalidArgument("'" + s + "' is not one of ideal_destructive, fixed_value");
             }
         },
         [](const ScenarioConfig& c) {
             return std::string(c.mzi.lock == demod::BiasLock::ideal_destructive ? "ideal_destructive" : "fixed_value");
         }},

        FS_DOUBLE("metrics", "measurement_bandwidth_hz", measurement_bandwidth),
        FS_SIZE("metrics", "crosscheck_windows", crosscheck_windows),

        FS_DOUBLE("reference", "adev_1s", reference.adev_1s),
        FS_DOUBLE("reference", "adev_1e4s", reference.adev_1e4s),
        FS_DOUBLE("reference", "tdev_1s", reference.tdev_1s),
        FS_DOUBLE("reference", "tdev_1e4s", reference.tdev_1e4s),
        FS_DOUBLE("reference", "open_loop_pp_s", reference.open_loop_pp),
        FS_DOUBLE("reference", "closed_loop_phase_pp_s", reference.closed_loop_phase_pp),
        FS_DOUBLE("reference", "cross_modulation_s", reference.cross_modulation),

        {"output", "dir", [](ScenarioConfig& c, const std::string& v) { c.output_dir = trim(v); },
         [](const ScenarioConfig& c) { return c.output_dir.generic_string(); }},
    };
    return table;
}

#undef FS_DOUBLE
#undef FS_SIZE
#undef FS_INT
#undef FS_OPTIONAL

void check(std::vector<std::string>& issues, bool ok, const std::string& message) {
    if (!ok) {
        issues.push_back(message);
    }
}

template <typename F>
void check_throws(std::vector<std::string>& issues, const std::string& prefix, F&& f) {
    try {
        f();
    } catch (const Error& e) {
        issues.push_back(prefix + ": " + e.what());
    }
}

}  // namespace

ScenarioKind parse_scenario_kind(const std::string& name) {
    if (name == "open_loop") return ScenarioKind::open_loop;
    if (name == "closed_loop") return ScenarioKind::closed_loop;
    if (name == "back_to_back_tf") return ScenarioKind::back_to_back_tf;
    if (name == "back_to_back_t") return ScenarioKind::back_to_back_t;
    throw InvalidArgument("'" + name + "' is not one of open_loop, closed_loop, back_to_back_tf, back_to_back_t");
}

std::string to_string(ScenarioKind kind) {
    switch (kind) {
        case ScenarioKind::open_loop: return "open_loop";
        case ScenarioKind::closed_loop: return "closed_loop";
        case ScenarioKind::back_to_back_tf: return "back_to_back_tf";
        case ScenarioKind::back_to_back_t: return "back_to_back_t";
    }
    return "?";
}

ReportFormat parse_report_format(const std::string& name) {
    if (name == "json") return ReportFormat::json;
    if (name == "text") return ReportFormat::text;
    throw InvalidArgument("unknown report format '" + name + "' (expected json or text)");
}

double LinkConfig::static_delay() const {
    double km = 0.0;
    for (double s : segments_km) {
        km += s;
    }
    return km * 1e3 * group_index / optics::kSpeedOfLight;
}

control::PidConfig LoopSettings::pid(double rf_hz) const {
    auto cfg = control::PidConfig::for_unity_gain(unity_gain_hz, rf_hz, update_rate, integrator_limit);
    if (kp) cfg.kp = *kp;
    if (ki) cfg.ki = *ki;
    if (kd) cfg.kd = *kd;
    return cfg;
}

optics::LinkNoiseParams ScenarioConfig::link_params() const {
    optics::LinkNoiseParams p;
    p.static_delay = link.static_delay();
    p.drift_amplitude = link.thermal_amplitude;
    p.drift_period = link.thermal_period / time_compression;
    p.drift_phase = link.thermal_phase;
    p.random_walk_coeff = link.random_walk_coeff;
    p.random_walk_knot = link.random_walk_knot;
    p.jitter_psd = link.jitter_psd;
    p.jitter_interval = link.jitter_interval;
    p.seed = seed;
    return p;
}

waveform::PpsChainSetup ScenarioConfig::pps_setup(bool with_tone) const {
    waveform::PpsChainSetup s;
    s.sample_rate = sample_rate;
    s.window = window;
    s.power = power;
    s.wavelength_nm = wavelength_forward_nm;
    s.pulse_width = pulse_width;
    s.drive_bandwidth = pps_drive_bandwidth;
    if (with_tone) {
        s.tone = rf;
    }
    s.mzi = mzi;
    s.detector = pps_detector;
    s.interp = interp;
    return s;
}

waveform::RoundTripSetup ScenarioConfig::round_trip_setup() const {
    waveform::RoundTripSetup s;
    s.sample_rate = sample_rate;
    s.window = window;
    s.power = power;
    s.wavelength_forward_nm = wavelength_forward_nm;
    s.wavelength_return_nm = wavelength_return_nm;
    s.tone = rf;
    s.rf_detector = rf_detector;
    s.interp = interp;
    return s;
}

std::vector<std::string> ScenarioConfig::validation_issues() const {
    std::vector<std::string> issues;
    check(issues, !name.empty(), "scenario.name must not be empty");
    check(issues, duration > 0.0, "scenario.duration_s must be positive");
    check(issues, time_compression >= 1.0, "scenario.time_compression must be >= 1");
    check(issues, !link.segments_km.empty() && std::all_of(link.segments_km.begin(), link.segments_km.end(),
                                                            [](double s) { return s > 0.0; }),
          "link.segments_km must list positive lengths");
    check(issues, link.group_index >= 1.0, "link.group_index must be >= 1");
    check_throws(issues, "link", [&] { optics::LinkNoiseProcess{link_params()}; });
    check(issues, rf.omega > 0.0, "rf.frequency_hz must be positive");
    check(issues, rf.depth > 0.0 && rf.depth <= 1.0, "rf.depth must lie in (0, 1]");
    check(issues, sample_rate > 4.0 * rf.frequency(), "optics.sample_rate_hz must exceed four times rf.frequency_hz");
    check(issues, pulse_width > 0.0, "pps.pulse_width_s must be positive");
    check(issues, pps_drive_bandwidth >= 0.0 && pps_drive_bandwidth < sample_rate / 2.0,
          "pps.drive_bandwidth_hz must lie in [0, sample_rate/2)");
    check(issues, power > 0.0, "optics.power_w must be positive");
    optics::ChannelPlan plan;
    check(issues, plan.contains(wavelength_forward_nm), "optics.forward_wavelength_nm is not in the channel plan");
    check(issues, plan.contains(wavelength_return_nm), "optics.return_wavelength_nm is not in the channel plan");
    check(issues, window >= 1024, "optics.window_samples must be >= 1024");
    check(issues, interp.half_width >= 1 && interp.kaiser_beta >= 0.0, "optics interpolator settings are invalid");
    check(issues, sample_rate / static_cast<double>(std::max<std::size_t>(window, 1)) < 1.0 / (3.0 * mzi.path_difference),
          "optics.window_samples is too short for the MZI path difference");
    check(issues, loop.unity_gain_hz > 0.0 && loop.unity_gain_hz < loop.update_rate / 10.0,
          "loop.unity_gain_hz must be positive and below update_rate/10");
    check_throws(issues, "loop", [&] { loop.pid(rf.frequency()).validate(); });
    check(issues, loop.dead_zone >= 0.0, "loop.dead_zone_rad must be non-negative");
    check(issues, loop.record_interval >= 1.0 / loop.update_rate, "loop.record_interval_s must be at least one tick");
    check(issues, loop.saturation_hold > 0.0, "loop.saturation_hold_s must be positive");
    check(issues, loop.settle_time >= 0.0 && loop.settle_time < simulated_duration(),
          "loop.settle_time_s must be shorter than the simulated duration");
    check(issues, simulated_duration() > 10.0 / loop.update_rate, "simulated duration must exceed ten control ticks");
    check_throws(issues, "actuator", [&] { actuator.validate(); });
    check_throws(issues, "detector_rf", [&] { rf_detector.validate(); });
    check(issues, rf_detector.band_high <= sample_rate / 2.0, "detector_rf.band_high_hz exceeds the Nyquist frequency");
    check(issues, rf_detector.band_high >= rf.frequency(), "detector_rf.band_high_hz must pass the RF tone");
    check_throws(issues, "detector_pps", [&] { pps_detector.validate(); });
    check(issues, pps_detector.band_high <= sample_rate / 2.0, "detector_pps.band_high_hz exceeds the Nyquist frequency");
    check_throws(issues, "mzi", [&] { mzi.validate(); });
    check(issues, measurement_bandwidth > 0.0, "metrics.measurement_bandwidth_hz must be positive");
    check(issues, !output_dir.empty(), "output.dir must not be empty");
    return issues;
}

void ScenarioConfig::validate() const {
    auto issues = validation_issues();
    if (!issues.empty()) {
        throw ConfigError(std::move(issues));
    }
}

std::string ScenarioConfig::canonical() const {
    std::vector<std::string> lines;
    for (const auto& f : fields()) {
        // Where results go does not change them.
        if (std::string_view(f.section) == "output") {
            continue;
        }
        lines.push_back(std::string(f.section) + "." + f.key + " = " + f.get(*this));
    }
    std::sort(lines.begin(), lines.end());
    std::string out;
    for (const auto& l : lines) {
        out += l;
        out += '\n';
    }
    return out;
}

std::string ScenarioConfig::hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : canonical()) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

ScenarioConfig parse_config(std::istream& in, const std::string& source, std::optional<std::uint64_t> seed_override) {
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::ini_parser::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError({source + ": " + e.message() + " (line " + std::to_string(e.line()) + ")"});
    }
    ScenarioConfig cfg;
    std::vector<std::string> issues;
    bool seed_seen = false;
    for (const auto& [section, body] : tree) {
        if (body.empty() && !body.data().empty()) {
            issues.push_back(source + ": key '" + section + "' must be inside a section");
            continue;
        }
        for (const auto& [key, value] : body) {
            const auto it = std::find_if(fields().begin(), fields().end(), [&](const Field& f) {
                return section == f.section && key == f.key;
            });
            if (it == fields().end()) {
                issues.push_back(source + ": unknown key " + section + "." + key);
                continue;
            }
            try {
                it->set(cfg, value.data());
                seed_seen = seed_seen || (section == "scenario" && key == "seed");
            } catch (const Error& e) {
                issues.push_back(source + ": " + section + "." + key + ": " + e.what());
            }
        }
    }
    if (seed_override) {
        cfg.seed = *seed_override;
        seed_seen = true;
    }
    if (!seed_seen) {
        issues.push_back(source + ": scenario.seed is required");
    }
    for (auto& s : cfg.validation_issues()) {
        issues.push_back(source + ": " + s);
    }
    if (!issues.empty()) {
        throw ConfigError(std::move(issues));
    }
    return cfg;
}

ScenarioConfig load_config(const std::filesystem::path& path, std::optional<std::uint64_t> seed_override) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open config " + path.string());
    }
    return parse_config(in, path.string(), seed_override);
}

}  // namespace fibersync::experiment
