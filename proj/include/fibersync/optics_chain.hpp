#pragma once

// Local-site transmit chain and fiber medium: CW laser, phase EOM carrying
// the 1PPS, intensity EOM carrying the RF tone, optical delay line and the
// time-varying link delay.

#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "fibersync/signal_core.hpp"

namespace fibersync::optics {

using signal::ComplexSignal;
using signal::InterpolatorSpec;
using signal::RealSignal;
using signal::TimeGrid;

inline constexpr double kSpeedOfLight = 299'792'458.0;  // m/s

/// Wavelength channels a laser may be tuned to.
struct ChannelPlan {
    std::vector<double> wavelengths_nm{1550.1, 1549.3};
    bool contains(double wavelength_nm) const;
};

/// Optical carrier frequency in Hz for a vacuum wavelength in nm.
double carrier_frequency(double wavelength_nm);

/// Sampled complex envelope plus carrier bookkeeping. The optical carrier
/// itself is never sampled; the phase it accumulates through delays is kept
/// as an exact scalar in [0, 2*pi).
class OpticalField {
public:
    OpticalField(ComplexSignal envelope, double wavelength_nm, double carrier_phase_offset = 0.0);

    const ComplexSignal& envelope() const noexcept { return envelope_; }
    const TimeGrid& grid() const noexcept { return envelope_.grid(); }
    double wavelength_nm() const noexcept { return wavelength_nm_; }
    double carrier_phase_offset() const noexcept { return carrier_phase_offset_; }

    OpticalField with_envelope(ComplexSignal envelope) const;
    OpticalField with_carrier_phase_offset(double offset) const;

    /// |envelope|^2 per sample, in W.
    RealSignal intensity() const;

private:
    ComplexSignal envelope_;
    double wavelength_nm_;
    double carrier_phase_offset_;
};

/// Rectangular phase pulses of width `pulse_width` starting at each epoch.
struct PpsWaveform {
    std::vector<double> epoch_times;  // s
    double pulse_width = 10e-9;       // s
    double phase_high = std::numbers::pi;

    void validate() const;
};

/// Sinusoidal intensity-modulation drive.
struct RfToneSpec {
    double omega = 2.0 * std::numbers::pi * 1e9;  // rad/s
    double phase = 0.0;                           // rad
    double depth = 0.5;                           // 0..1

    double frequency() const noexcept { return omega / (2.0 * std::numbers::pi); }
    double period() const noexcept { return 1.0 / frequency(); }
};

struct LinkNoiseParams {
    double static_delay = 0.0;          ///< s, L*n/c
    double drift_amplitude = 0.0;       ///< s, half of the peak-to-peak thermal excursion
    double drift_period = 86'400.0;     ///< s
    double drift_phase = 0.0;           ///< rad
    double random_walk_coeff = 0.0;     ///< s/sqrt(s)
    double random_walk_knot = 1.0;      ///< s, lattice spacing of the random walk
    double jitter_psd = 0.0;            ///< s^2/Hz, one-sided, white
    double jitter_interval = 1e-3;      ///< s, hold time of each jitter draw
    double step_size = 0.0;             ///< s, delay step (e.g. a patch-cord change)
    double step_time = 0.0;             ///< s, instant the step applies from
    std::uint64_t seed = 0;
};

/// One-way link delay t_link(t) = static + thermal sinusoid + random walk
/// + white jitter + optional step. Evaluation is a pure function of (params, t): the random
/// walk comes from a midpoint-displacement (Levy) construction driven by a
/// counter-based generator, so any instant can be sampled in any order and
/// from any thread.
class LinkNoiseProcess {
public:
    explicit LinkNoiseProcess(LinkNoiseParams params);

    const LinkNoiseParams& params() const noexcept { return params_; }
    double static_delay() const noexcept { return params_.static_delay; }

    /// t_link(t) - static_delay.
    double excess_delay(double t) const;
    double thermal_drift(double t) const;
    double random_walk(double t) const;
    double jitter(double t) const;

private:
    LinkNoiseParams params_;
};

/// t_link(t); reproducible for a given seed.
double sample_link_delay(const LinkNoiseProcess& process, double t);

/// Two-stage optical delay line: slow thermally tuned spool and fast PZT
/// fiber stretcher.
struct OdlState {
    double thermal_delay = 0.0;  ///< s
    double pzt_delay = 0.0;      ///< s
    double thermal_range = 50e-9;
    double pzt_range = 20e-12;

    double total() const noexcept { return thermal_delay + pzt_delay; }
};

struct SaturationEvent {
    std::string stage;       ///< "thermal" or "pzt"
    double requested = 0.0;  ///< s
    double overflow = 0.0;   ///< s beyond the range, signed
    double time = 0.0;       ///< s, simulation time when known
};

struct OdlApplyResult {
    OpticalField field;
    OdlState applied;  ///< state after clamping each stage to its range
    std::vector<SaturationEvent> saturation;
};

/// CW laser: |envelope|^2 == power, arg(envelope) == phi0.
OpticalField laser_field(const TimeGrid& grid, double power_w, double phi0, double wavelength_nm,
                         const ChannelPlan& channels = {});

/// phase_high on samples with t in [epoch, epoch + width), zero elsewhere.
RealSignal pps_phase_waveform(const PpsWaveform& pps, const TimeGrid& grid);

/// Multiplies the envelope by exp(i*phase(t)).
OpticalField phase_modulate(const OpticalField& field, const RealSignal& phase);

/// Detected intensity becomes I * (1 + m*sin(omega*t + phase)).
OpticalField intensity_modulate(const OpticalField& field, const RfToneSpec& tone);

/// Intensity modulation by a sampled drive normalized to [-1, 1].
OpticalField intensity_modulate(const OpticalField& field, const RealSignal& drive, double depth);

/// Passes `power_fraction` of the optical power (one arm of a coupler).
OpticalField couple(const OpticalField& field, double power_fraction);

/// Delays the envelope by t_link and advances the carrier phase by
/// omega_c * t_link. The link is reciprocal: both directions use the same
/// t_link.
OpticalField propagate_link(const OpticalField& field, double t_link, const InterpolatorSpec& interp = {});

/// Same contract as propagate_link with t = t_ODL. Stage values outside
/// their range are clamped and reported as saturation events.
OdlApplyResult odl_apply(const OpticalField& field, const OdlState& odl, const InterpolatorSpec& interp = {});

}  // namespace fibersync::optics
