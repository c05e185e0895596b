#include "fibersync/optics_chain.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "fibersync/random.hpp"

namespace fibersync::optics {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kWavelengthTolerance = 1e-6;  // nm

// Random-walk lattice depth: 2^32 knots, i.e. ~136 years at 1 s spacing.
constexpr int kLevyLevels = 32;

constexpr std::uint64_t kStreamRandomWalk = 0x5257;  // "RW"
constexpr std::uint64_t kStreamJitter = 0x4a54;      // "JT"

void require_same_grid(const TimeGrid& a, const TimeGrid& b, const char* what) {
    if (!(a == b)) {
        throw InvalidArgument(std::string(what) + ": signal grid does not match field grid");
    }
}

// Standard Brownian motion at integer lattice index k, W(0) = 0.
double levy_walk(std::uint64_t seed, std::uint64_t k) {
    std::uint64_t lo = 0;
    std::uint64_t hi = std::uint64_t{1} << kLevyLevels;
    double w_lo = 0.0;
    double w_hi = std::sqrt(static_cast<double>(hi)) * counter_normal(seed, kStreamRandomWalk, 0);
    if (k == hi) {
        return w_hi;
    }
    while (hi - lo > 1) {
        const std::uint64_t mid = lo + (hi - lo) / 2;
        const double sd = std::sqrt(static_cast<double>(hi - lo) / 4.0);
        // Each midpoint index is visited at exactly one level.
        const double w_mid = 0.5 * (w_lo + w_hi) + sd * counter_normal(seed, kStreamRandomWalk, mid);
        if (k == mid) {
            return w_mid;
        }
        if (k < mid) {
            hi = mid;
            w_hi = w_mid;
        } else {
            lo = mid;
            w_lo = w_mid;
        }
    }
    return k == lo ? w_lo : w_hi;
}

OpticalField apply_delay(const OpticalField& field, double delay, const InterpolatorSpec& interp) {
    if (delay == 0.0) {
        return field;
    }
    auto env = signal::fractional_delay(field.envelope(), delay, interp);
    // Carrier phase accumulated over the delay, reduced modulo one cycle in
    // extended precision.
    const long double cycles = static_cast<long double>(carrier_frequency(field.wavelength_nm())) *
                               static_cast<long double>(delay);
    const long double frac = cycles - std::floor(cycles);
    double offset = field.carrier_phase_offset() + static_cast<double>(frac) * 2.0 * kPi;
    offset = std::fmod(offset, 2.0 * kPi);
    if (offset < 0.0) {
        offset += 2.0 * kPi;
    }
    return OpticalField(std::move(env), field.wavelength_nm(), offset);
}

}  // namespace

bool ChannelPlan::contains(double wavelength_nm) const {
    return std::any_of(wavelengths_nm.begin(), wavelengths_nm.end(),
                       [&](double w) { return std::abs(w - wavelength_nm) < kWavelengthTolerance; });
}

double carrier_frequency(double wavelength_nm) { return kSpeedOfLight / (wavelength_nm * 1e-9); }

OpticalField::OpticalField(ComplexSignal envelope, double wavelength_nm, double carrier_phase_offset)
    : envelope_(std::move(envelope)), wavelength_nm_(wavelength_nm), carrier_phase_offset_(carrier_phase_offset) {
    if (!(wavelength_nm > 0.0) || !std::isfinite(wavelength_nm)) {
        throw InvalidArgument("OpticalField: wavelength must be positive");
    }
    if (!std::isfinite(carrier_phase_offset)) {
        throw InvalidArgument("OpticalField: carrier phase offset must be finite");
    }
}

OpticalField OpticalField::with_envelope(ComplexSignal envelope) const {
    return OpticalField(std::move(envelope), wavelength_nm_, carrier_phase_offset_);
}

OpticalField OpticalField::with_carrier_phase_offset(double offset) const {
    return OpticalField(envelope_, wavelength_nm_, offset);
}

RealSignal OpticalField::intensity() const {
    std::vector<double> out(envelope_.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = std::norm(envelope_[i]);
    }
    return RealSignal(envelope_.grid(), std::move(out),
                      std::vector<std::uint8_t>(envelope_.validity().begin(), envelope_.validity().end()));
}

void PpsWaveform::validate() const {
    if (!(pulse_width > 0.0)) {
        throw InvalidArgument("PpsWaveform: pulse width must be positive");
    }
    for (std::size_t i = 1; i < epoch_times.size(); ++i) {
        if (!(epoch_times[i] > epoch_times[i - 1])) {
            throw InvalidArgument("PpsWaveform: epochs must be strictly increasing");
        }
        if (!(epoch_times[i] - epoch_times[i - 1] > 2.0 * pulse_width)) {
            throw InvalidArgument("PpsWaveform: epochs must be separated by more than twice the pulse width");
        }
    }
}

LinkNoiseProcess::LinkNoiseProcess(LinkNoiseParams params) : params_(params) {
    const auto& p = params_;
    if (!(p.static_delay > 0.0)) {
        throw InvalidArgument("LinkNoiseProcess: static delay must be positive");
    }
    if (!(p.drift_amplitude >= 0.0) || !(p.random_walk_coeff >= 0.0) || !(p.jitter_psd >= 0.0)) {
        throw InvalidArgument("LinkNoiseProcess: noise coefficients must be non-negative");
    }
    if (!std::isfinite(p.step_size) || !(p.step_time >= 0.0)) {
        throw InvalidArgument("LinkNoiseProcess: step must be finite and start at t >= 0");
    }
    if (!(p.drift_period > 0.0) || !(p.random_walk_knot > 0.0) || !(p.jitter_interval > 0.0)) {
        throw InvalidArgument("LinkNoiseProcess: periods and intervals must be positive");
    }
}

double LinkNoiseProcess::thermal_drift(double t) const {
    if (params_.drift_amplitude == 0.0) {
        return 0.0;
    }
    return params_.drift_amplitude * std::sin(2.0 * kPi * t / params_.drift_period + params_.drift_phase);
}

double LinkNoiseProcess::random_walk(double t) const {
    if (params_.random_walk_coeff == 0.0) {
        return 0.0;
    }
    const double u = t / params_.random_walk_knot;
    const double k_f = std::floor(u);
    const auto k = static_cast<std::uint64_t>(k_f);
    const double frac = u - k_f;
    const double w0 = levy_walk(params_.seed, k);
    const double w = frac == 0.0 ? w0 : w0 + frac * (levy_walk(params_.seed, k + 1) - w0);
    return params_.random_walk_coeff * std::sqrt(params_.random_walk_knot) * w;
}

double LinkNoiseProcess::jitter(double t) const {
    if (params_.jitter_psd == 0.0) {
        return 0.0;
    }
    // One-sided white PSD S over the bandwidth 1/(2*interval).
    const double sigma = std::sqrt(params_.jitter_psd / (2.0 * params_.jitter_interval));
    const auto index = static_cast<std::uint64_t>(std::floor(t / params_.jitter_interval));
    return sigma * counter_normal(params_.seed, kStreamJitter, index);
}

double LinkNoiseProcess::excess_delay(double t) const {
    if (!(t >= 0.0)) {
        throw InvalidArgument("LinkNoiseProcess: time must be non-negative");
    }
    const double step = t >= params_.step_time ? params_.step_size : 0.0;
    return thermal_drift(t) + random_walk(t) + jitter(t) + step;
}

double sample_link_delay(const LinkNoiseProcess& process, double t) {
    return process.static_delay() + process.excess_delay(t);
}

OpticalField laser_field(const TimeGrid& grid, double power_w, double phi0, double wavelength_nm,
                         const ChannelPlan& channels) {
    if (!(power_w > 0.0)) {
        throw InvalidArgument("laser_field: power must be positive");
    }
    if (!channels.contains(wavelength_nm)) {
        throw InvalidArgument("laser_field: wavelength " + std::to_string(wavelength_nm) +
                              " nm is not in the channel plan");
    }
    const auto value = std::polar(std::sqrt(power_w), phi0);
    return OpticalField(ComplexSignal(grid, std::vector<std::complex<double>>(grid.size(), value)), wavelength_nm);
}

RealSignal pps_phase_waveform(const PpsWaveform& pps, const TimeGrid& grid) {
    pps.validate();
    std::vector<double> out(grid.size(), 0.0);
    const double fs = grid.sample_rate();
    const auto n = static_cast<long long>(grid.size());
    // Index of the first sample at or after time t.
    auto first_at_or_after = [&](double t) {
        const double pos = (t - grid.start()) * fs;
        const double r = std::round(pos);
        const double idx = std::abs(pos - r) < 1e-9 ? r : std::ceil(pos);
        return static_cast<long long>(std::clamp(idx, -1.0, static_cast<double>(n)));
    };
    for (const double epoch : pps.epoch_times) {
        const long long begin = std::max(0LL, first_at_or_after(epoch));
        const long long end = std::min(n, first_at_or_after(epoch + pps.pulse_width));
        for (long long i = begin; i < end; ++i) {
            out[static_cast<std::size_t>(i)] = pps.phase_high;
        }
    }
    return RealSignal(grid, std::move(out));
}

OpticalField phase_modulate(const OpticalField& field, const RealSignal& phase) {
    require_same_grid(field.grid(), phase.grid(), "phase_modulate");
    const auto& env = field.envelope();
    std::vector<std::complex<double>> out(env.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double p = phase[i];
        if (p == 0.0) {
            out[i] = env[i];
        } else if (p == kPi) {
            out[i] = -env[i];
        } else {
            out[i] = env[i] * std::complex<double>(std::cos(p), std::sin(p));
        }
    }
    return field.with_envelope(ComplexSignal(env.grid(), std::move(out), signal::mask_and(env.validity(), phase.validity())));
}

OpticalField intensity_modulate(const OpticalField& field, const RfToneSpec& tone) {
    if (!(tone.depth >= 0.0 && tone.depth <= 1.0)) {
        throw InvalidArgument("intensity_modulate: depth must lie in [0, 1]");
    }
    const TimeGrid& grid = field.grid();
    if (!(grid.sample_rate() / 2.0 > tone.omega / kPi)) {
        throw InvalidArgument("intensity_modulate: grid Nyquist frequency must exceed twice the RF frequency");
    }
    if (tone.depth == 0.0) {
        return field;
    }
    const auto& env = field.envelope();
    std::vector<std::complex<double>> out(env.size());
    // The tone phase at the grid start is computed in cycles, reduced first.
    const double f = tone.frequency();
    const long double start_cycles = static_cast<long double>(f) * grid.start();
    const double start_phase =
        static_cast<double>(start_cycles - std::floor(start_cycles)) * 2.0 * kPi + tone.phase;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double arg = tone.omega * grid.local_time(i) + start_phase;
        const double gain = 1.0 + tone.depth * std::sin(arg);
        out[i] = env[i] * std::sqrt(std::max(0.0, gain));
    }
    return field.with_envelope(ComplexSignal(grid, std::move(out),
                                             std::vector<std::uint8_t>(env.validity().begin(), env.validity().end())));
}

OpticalField intensity_modulate(const OpticalField& field, const RealSignal& drive, double depth) {
    if (!(depth >= 0.0 && depth <= 1.0)) {
        throw InvalidArgument("intensity_modulate: depth must lie in [0, 1]");
    }
    require_same_grid(field.grid(), drive.grid(), "intensity_modulate");
    const auto& env = field.envelope();
    std::vector<std::complex<double>> out(env.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double gain = 1.0 + depth * drive[i];
        out[i] = env[i] * std::sqrt(std::max(0.0, gain));
    }
    return field.with_envelope(ComplexSignal(env.grid(), std::move(out), signal::mask_and(env.validity(), drive.validity())));
}

OpticalField couple(const OpticalField& field, double power_fraction) {
    if (!(power_fraction > 0.0 && power_fraction <= 1.0)) {
        throw InvalidArgument("couple: power fraction must lie in (0, 1]");
    }
    const double a = std::sqrt(power_fraction);
    const auto& env = field.envelope();
    std::vector<std::complex<double>> out(env.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = env[i] * a;
    }
    return field.with_envelope(
        ComplexSignal(env.grid(), std::move(out), std::vector<std::uint8_t>(env.validity().begin(), env.validity().end())));
}

OpticalField propagate_link(const OpticalField& field, double t_link, const InterpolatorSpec& interp) {
    if (!(t_link >= 0.0)) {
        throw InvalidArgument("propagate_link: link delay must be non-negative");
    }
    return apply_delay(field, t_link, interp);
}

OdlApplyResult odl_apply(const OpticalField& field, const OdlState& odl, const InterpolatorSpec& interp) {
    OdlState applied = odl;
    std::vector<SaturationEvent> events;
    auto clamp_stage = [&](double& value, double range, const char* stage) {
        if (std::abs(value) > range) {
            const double limited = std::copysign(range, value);
            events.push_back({stage, value, value - limited, 0.0});
            value = limited;
        }
    };
    clamp_stage(applied.thermal_delay, odl.thermal_range, "thermal");
    clamp_stage(applied.pzt_delay, odl.pzt_range, "pzt");
    return {apply_delay(field, applied.total(), interp), applied, std::move(events)};
}

}  // namespace fibersync::optics
