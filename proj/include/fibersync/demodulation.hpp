#pragma once

// Receive chain: band-limited photodetectors, the unbalanced delay
// interferometer that turns BPSK phase steps into intensity pulses, pulse
// regeneration, and the quadrature RF phase discriminator.

#include <cstdint>
#include <numbers>
#include <vector>

#include "fibersync/optics_chain.hpp"
#include "fibersync/signal_core.hpp"

namespace fibersync::demod {

using optics::OpticalField;
using signal::RealSignal;

struct DetectorSpec {
    double responsivity = 1.0;    ///< A/W, normalized
    double band_low = 0.0;        ///< Hz; > 0 means AC coupled
    double band_high = 125e6;     ///< Hz
    double noise_density = 0.0;   ///< output units per sqrt(Hz), white Gaussian
    int filter_order = 4;

    void validate() const;
};

/// Identifies an independent noise realization: draws depend only on
/// (seed, stream), never on evaluation order.
struct NoiseTag {
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
};

enum class BiasLock { ideal_destructive, fixed_value };

struct MziSpec {
    double path_difference = 10e-9;  ///< s, arm delay tau
    double bias = std::numbers::pi;  ///< rad, omega_c * tau modulo 2*pi when lock == fixed_value
    BiasLock lock = BiasLock::ideal_destructive;

    double effective_bias() const noexcept { return lock == BiasLock::ideal_destructive ? std::numbers::pi : bias; }
    void validate() const;
};

struct PulseEvent {
    double timestamp = 0.0;       ///< s, first threshold crossing
    double peak_amplitude = 0.0;  ///< detector output units
    double width = 0.0;           ///< s, time above threshold within the group
    bool degraded = false;        ///< invalid samples inside the group window
};

struct PpsDetectorSettings {
    double threshold = 0.5;   ///< fraction of the window peak
    double min_peak = 1e-9;   ///< peaks below this are treated as no pulse
    double holdoff = 0.5;     ///< s; crossings closer than this belong to one group
};

struct ToneEstimate {
    double amplitude = 0.0;
    double phase = 0.0;          ///< rad, signal ~ amplitude * sin(omega * local_t + phase)
    double offset = 0.0;
    double residual_rms = 0.0;
    std::size_t samples = 0;
};

struct PhaseReading {
    double phase = 0.0;          ///< rad in (-pi, pi]: phase(a) - phase(b)
    bool in_dead_zone = false;
    bool low_confidence = false;
    double amplitude_a = 0.0;
    double amplitude_b = 0.0;
};

/// Photocurrent from an optical intensity: responsivity, additive noise,
/// AC coupling (mean removal) when band_low > 0, zero-phase low-pass at
/// band_high.
RealSignal detector_response(const RealSignal& intensity, const DetectorSpec& det, NoiseTag noise = {});

/// Direct detection of |envelope|^2. Insensitive to optical phase.
RealSignal direct_detect(const OpticalField& field, const DetectorSpec& det, NoiseTag noise = {});

/// Output port intensity of the delay interferometer,
/// |E(t) + exp(i*bias) * E(t + tau)|^2 / 4.
RealSignal mzi_interfere(const OpticalField& field, const MziSpec& mzi, const signal::InterpolatorSpec& interp = {});

/// Detects pulses in an interferometer intensity after passing it through
/// the detector `det`. One event per group of threshold crossings.
std::vector<PulseEvent> regenerate_pps(const RealSignal& intensity, const DetectorSpec& det,
                                       const PpsDetectorSettings& settings = {}, NoiseTag noise = {});

/// Least-squares fit of offset + tone over the longest valid run, trimmed to
/// a whole number of tone periods when the sampling allows it.
ToneEstimate estimate_tone(const RealSignal& signal, double tone_hz);

/// Phase of a's fundamental minus b's, wrapped. Readings inside
/// +-dead_zone are reported as 0 with the dead-zone flag set. A tone whose
/// amplitude is not well above the fit residual is flagged low-confidence.
PhaseReading phase_discriminate(const RealSignal& a, const RealSignal& b, double tone_hz, double dead_zone = 0.0);

}  // namespace fibersync::demod
