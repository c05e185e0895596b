#pragma once

// Scenario configuration, orchestration and reporting. A scenario wires
// the slow-time loop engine, waveform-engine spot windows (pulse
// regeneration and discriminator cross-checks) and the stability metrics,
// and writes CSV tables plus a summary report.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fibersync/control_loop.hpp"
#include "fibersync/demodulation.hpp"
#include "fibersync/optics_chain.hpp"
#include "fibersync/stability_metrics.hpp"
#include "fibersync/waveform_engine.hpp"

namespace fibersync::experiment {

enum class ScenarioKind { open_loop, closed_loop, back_to_back_tf, back_to_back_t };

ScenarioKind parse_scenario_kind(const std::string& name);
std::string to_string(ScenarioKind kind);

enum class ReportFormat { json, text };

ReportFormat parse_report_format(const std::string& name);

struct LinkConfig {
    std::vector<double> segments_km{50.0, 60.0};
    double group_index = 1.468;
    double thermal_amplitude = 900e-12;  ///< s
    double thermal_period = 86'400.0;    ///< s, before time compression
    double thermal_phase = 0.0;          ///< rad
    double random_walk_coeff = 0.0;      ///< s/sqrt(s)
    double random_walk_knot = 1.0;       ///< s
    double jitter_psd = 0.0;             ///< s^2/Hz
    double jitter_interval = 1e-3;       ///< s

    double static_delay() const;
};

struct LoopSettings {
    double update_rate = 1000.0;
    double unity_gain_hz = 10.0;
    std::optional<double> kp, ki, kd;  ///< explicit gains override the unity-gain design
    double integrator_limit = 1e-9;
    double dead_zone = 0.0;
    double record_interval = 0.01;
    double saturation_hold = 1.0;
    double settle_time = 10.0;  ///< s excluded from residual statistics

    control::PidConfig pid(double rf_hz) const;
};

struct ReferenceTargets {
    double adev_1s = 1.7e-14;
    double adev_1e4s = 5.9e-17;
    double tdev_1s = 1.6e-11;
    double tdev_1e4s = 9.1e-13;
    double open_loop_pp = 1800e-12;
    double closed_loop_phase_pp = 0.2e-12;
    double cross_modulation = 10e-12;
};

struct ScenarioConfig {
    std::string name = "scenario";
    ScenarioKind kind = ScenarioKind::closed_loop;
    std::uint64_t seed = 0;
    double duration = 86'400.0;    ///< s, before time compression
    double time_compression = 1.0;

    LinkConfig link;
    optics::RfToneSpec rf;
    double pulse_width = 10e-9;
    double pps_drive_bandwidth = 300e6;
    std::size_t max_pps_epochs = 600;

    double power = 1e-3;
    double wavelength_forward_nm = 1550.1;
    double wavelength_return_nm = 1549.3;
    double sample_rate = 16e9;
    std::size_t window = 8192;
    signal::InterpolatorSpec interp{};

    LoopSettings loop;
    control::ActuatorConfig actuator;
    demod::DetectorSpec rf_detector{1.0, 30e3, 1e9, 0.0, 4};
    demod::DetectorSpec pps_detector{1.0, 0.0, 125e6, 0.0, 4};
    demod::MziSpec mzi;

    double measurement_bandwidth = 5.0;  ///< Hz, single-pole pre-filter before ADEV
    std::size_t crosscheck_windows = 5;
    ReferenceTargets reference;

    std::filesystem::path output_dir = "out";

    /// Simulated duration after compression.
    double simulated_duration() const { return duration / time_compression; }
    /// Link model with the drift period compressed.
    optics::LinkNoiseParams link_params() const;
    waveform::PpsChainSetup pps_setup(bool with_tone) const;
    waveform::RoundTripSetup round_trip_setup() const;

    /// Every problem found, in a stable order; empty when the config is
    /// usable.
    std::vector<std::string> validation_issues() const;
    /// Throws ConfigError listing all issues.
    void validate() const;

    /// Canonical "section.key = value" lines, sorted. The output directory
    /// is not part of it.
    std::string canonical() const;
    /// FNV-1a 64 of canonical(), as 16 hex digits.
    std::string hash() const;
};

/// Parses an INI file over the defaults. Unknown sections or keys, malformed
/// numbers and a missing seed are all reported together in one ConfigError.
/// A seed override replaces the file's seed (and satisfies the requirement).
ScenarioConfig load_config(const std::filesystem::path& path, std::optional<std::uint64_t> seed_override = {});
ScenarioConfig parse_config(std::istream& in, const std::string& source = "<stream>",
                            std::optional<std::uint64_t> seed_override = {});

struct PpsSummary {
    std::size_t epochs = 0;
    std::size_t gaps = 0;
    double offset_mean = 0.0;  ///< s
    double offset_pp = 0.0;    ///< s
    std::optional<double> cross_modulation_deviation;  ///< s, max |t_tf - t_t|
};

struct RunSummary {
    double link_excess_pp = 0.0;       ///< s over the whole run
    double remote_offset_pp = 0.0;     ///< s over the whole run
    double residual_time_pp = 0.0;     ///< s after the settle time
    double residual_phase_pp = 0.0;    ///< rad after the settle time
    double residual_phase_equiv_pp = 0.0;  ///< s, residual phase / omega_rf
    double suppression_db = 0.0;
    double identity_max_deviation = 0.0;   ///< rad, |offset * omega - phase|
    std::optional<double> cross_engine_max_deviation;  ///< rad
    std::size_t saturation_events = 0;
    bool truncated = false;
    std::string truncation_reason;
    PpsSummary pps;
};

struct RunReport {
    std::string scenario;
    ScenarioKind kind = ScenarioKind::closed_loop;
    std::string config_hash;
    std::uint64_t seed = 0;
    double time_compression = 1.0;
    double simulated_duration = 0.0;
    double drift_frequency = 0.0;  ///< Hz after compression
    double unity_gain_hz = 0.0;
    RunSummary summary;
    metrics::DeviationCurve adev;
    metrics::DeviationCurve tdev;
    ReferenceTargets reference;
    std::map<std::string, std::string> outputs;  ///< role -> file name, relative to the report
};

/// Runs the scenario and writes its CSV tables into cfg.output_dir
/// (created when missing). Validation happens before any simulation.
RunReport run_scenario(const ScenarioConfig& cfg);

/// Writes report.json or report.txt next to the CSVs and returns its path.
std::filesystem::path emit_report(const RunReport& report, ReportFormat format, const std::filesystem::path& dir);

std::string report_json(const RunReport& report);
std::string report_text(const RunReport& report);

}  // namespace fibersync::experiment
