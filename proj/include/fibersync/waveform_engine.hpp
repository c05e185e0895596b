#pragma once

// Short-window, sample-rate simulation of the full transfer chain. Windows
// are a few hundred ns long; the bulk static delay of the link is not
// sampled but carried as a scalar, so only the excess delay (plus a small
// positive margin) passes through the interpolating delay line.

#include <optional>

#include "fibersync/demodulation.hpp"
#include "fibersync/optics_chain.hpp"
#include "fibersync/signal_core.hpp"

namespace fibersync::waveform {

struct RoundTripSetup {
    double sample_rate = 16e9;  ///< Hz
    std::size_t window = 8192;  ///< samples
    double power = 1e-3;        ///< W at each laser
    double wavelength_forward_nm = 1550.1;
    double wavelength_return_nm = 1549.3;
    optics::RfToneSpec tone{};
    double coupler_fraction = 0.5;  ///< share sent to the RF detector at the remote site
    demod::DetectorSpec rf_detector{1.0, 30e3, 1e9, 0.0, 4};
    signal::InterpolatorSpec interp{};
};

struct RoundTripResult {
    demod::PhaseReading reading;  ///< PD1: phase(V1) - phase(V3)
    demod::ToneEstimate remote;   ///< recovered tone at the remote site (V2)
    demod::ToneEstimate local_reference;
};

/// One PD1 reading. The window starts at `window_start` (absolute s). The
/// forward signal passes the ODL then the link; the remote site detects it,
/// normalizes it and re-modulates it on the return wavelength, which passes
/// the link then the ODL. `link_delay` must be >= 0.
RoundTripResult round_trip(const RoundTripSetup& setup, double window_start, double link_delay, double odl_delay,
                           demod::NoiseTag noise = {});

struct PpsChainSetup {
    double sample_rate = 16e9;
    std::size_t window = 8192;
    double power = 1e-3;
    double wavelength_nm = 1550.1;
    double pulse_width = 10e-9;
    double phase_high = std::numbers::pi;
    /// Hz, low-pass bandwidth of the phase modulator drive (finite pulse
    /// edges); 0 keeps the ideal rectangle.
    double drive_bandwidth = 300e6;
    std::optional<optics::RfToneSpec> tone;  ///< intensity modulation active when set
    demod::MziSpec mzi{};
    demod::DetectorSpec detector{1.0, 0.0, 125e6, 0.0, 4};
    demod::PpsDetectorSettings settings{};
    signal::InterpolatorSpec interp{};
    /// Fixed positive delay added to every path so that negative excess
    /// delays stay representable.
    double margin = 5e-9;
};

/// Regenerated pulse for the epoch `epoch` after a delay of
/// `bulk_delay + delay`. Only `delay` (which must satisfy
/// delay + margin >= 0) is applied by interpolation; the bulk part moves the
/// window. The returned timestamp is absolute. std::nullopt when no pulse is
/// found in the window.
std::optional<demod::PulseEvent> pps_arrival(const PpsChainSetup& setup, double epoch, double bulk_delay, double delay,
                                             demod::NoiseTag noise = {});

}  // namespace fibersync::waveform
