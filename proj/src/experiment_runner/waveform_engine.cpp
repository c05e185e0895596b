#include "fibersync/waveform_engine.hpp"

#include <algorithm>
#include <cmath>

#include "fibersync/random.hpp"

namespace fibersync::waveform {

namespace {

constexpr double kPi = std::numbers::pi;

demod::NoiseTag derive(demod::NoiseTag tag, std::uint64_t branch) {
    return {tag.seed, hash_combine(tag.stream, branch)};
}

// Peak-normalized copy of a detector output, used as the re-modulation drive.
signal::RealSignal normalize(const signal::RealSignal& s) {
    double peak = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s.valid(i)) {
            peak = std::max(peak, std::abs(s[i]));
        }
    }
    if (!(peak > 0.0)) {
        throw SimulationError("round_trip: remote RF detector output is empty");
    }
    std::vector<double> out(s.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = std::clamp(s[i] / peak, -1.0, 1.0);
    }
    return signal::RealSignal(s.grid(), std::move(out), std::vector<std::uint8_t>(s.validity().begin(), s.validity().end()));
}

}  // namespace

RoundTripResult round_trip(const RoundTripSetup& setup, double window_start, double link_delay, double odl_delay,
                           demod::NoiseTag noise) {
    if (!(link_delay >= 0.0)) {
        throw InvalidArgument("round_trip: link delay must be non-negative");
    }
    const signal::TimeGrid grid(setup.sample_rate, window_start, setup.window);
    optics::OdlState odl;
    odl.thermal_delay = odl_delay;
    if (std::abs(odl_delay) > odl.thermal_range) {
        throw InvalidArgument("round_trip: ODL delay exceeds the delay-line range");
    }

    const auto source = optics::intensity_modulate(
        optics::laser_field(grid, setup.power, 0.0, setup.wavelength_forward_nm), setup.tone);
    const auto v1 = demod::direct_detect(source, setup.rf_detector, derive(noise, 1));

    auto forward = optics::odl_apply(source, odl, setup.interp).field;
    forward = optics::propagate_link(forward, link_delay, setup.interp);
    forward = optics::couple(forward, setup.coupler_fraction);
    const auto v2 = demod::direct_detect(forward, setup.rf_detector, derive(noise, 2));

    auto back = optics::intensity_modulate(optics::laser_field(grid, setup.power, 0.0, setup.wavelength_return_nm),
                                           normalize(v2), setup.tone.depth);
    back = optics::propagate_link(back, link_delay, setup.interp);
    back = optics::odl_apply(back, odl, setup.interp).field;
    const auto v3 = demod::direct_detect(back, setup.rf_detector, derive(noise, 3));

    RoundTripResult result;
    result.reading = demod::phase_discriminate(v1, v3, setup.tone.frequency());
    result.remote = demod::estimate_tone(v2, setup.tone.frequency());
    result.local_reference = demod::estimate_tone(v1, setup.tone.frequency());
    return result;
}

std::optional<demod::PulseEvent> pps_arrival(const PpsChainSetup& setup, double epoch, double bulk_delay, double delay,
                                             demod::NoiseTag noise) {
    const double applied = setup.margin + delay;
    if (!(applied >= 0.0)) {
        throw InvalidArgument("pps_arrival: delay is more negative than the margin");
    }
    // The pulse starts 40% into the window before the interpolated delay.
    const auto lead = static_cast<double>(setup.window * 2 / 5);
    const double shifted_epoch = epoch + bulk_delay;
    const signal::TimeGrid grid(setup.sample_rate, shifted_epoch - lead / setup.sample_rate, setup.window);
    if (!(applied + setup.pulse_width + setup.mzi.path_difference < 0.4 * grid.span())) {
        throw InvalidArgument("pps_arrival: delay does not fit in the window");
    }

    auto field = optics::laser_field(grid, setup.power, 0.0, setup.wavelength_nm);
    if (setup.tone) {
        // The tone seen after the bulk delay, as a phase shift.
        auto tone = *setup.tone;
        const long double cycles = static_cast<long double>(tone.frequency()) * bulk_delay;
        tone.phase -= static_cast<double>(cycles - std::floor(cycles)) * 2.0 * kPi;
        field = optics::intensity_modulate(field, tone);
    }
    optics::PpsWaveform pps;
    // Drawn on a grid starting at 0 so the edge lands on sample `lead`
    // exactly; absolute times near the epoch lose too many bits.
    pps.epoch_times = {lead / setup.sample_rate};
    pps.pulse_width = setup.pulse_width;
    pps.phase_high = setup.phase_high;
    const auto local = optics::pps_phase_waveform(pps, grid.with_start(0.0));
    auto drive = signal::RealSignal(grid, std::vector<double>(local.samples().begin(), local.samples().end()),
                                    std::vector<std::uint8_t>(local.validity().begin(), local.validity().end()));
    if (setup.drive_bandwidth > 0.0) {
        drive = signal::filter_lowpass(drive, setup.drive_bandwidth, 4);
    }
    field = optics::phase_modulate(field, drive);
    field = optics::propagate_link(field, applied, setup.interp);

    const auto intensity = demod::mzi_interfere(field, setup.mzi, setup.interp);
    const auto events = demod::regenerate_pps(intensity, setup.detector, setup.settings, noise);
    if (events.empty()) {
        return std::nullopt;
    }
    return events.front();
}

}  // namespace fibersync::waveform
