#include "fibersync/demodulation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>

#include "fibersync/random.hpp"

namespace fibersync::demod {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kConfidenceRatio = 3.0;

// Largest n <= available covering an integer number of tone periods, or
// `available` when no such length exists within a few cycles.
std::size_t whole_period_length(std::size_t available, double samples_per_period) {
    const auto max_cycles = static_cast<long long>(std::floor(static_cast<double>(available) / samples_per_period));
    for (long long k = max_cycles; k >= 1 && k > max_cycles - 64; --k) {
        const double n = static_cast<double>(k) * samples_per_period;
        const double rounded = std::round(n);
        if (std::abs(n - rounded) < 1e-6 && rounded <= static_cast<double>(available)) {
            return static_cast<std::size_t>(rounded);
        }
    }
    return available;
}

std::array<double, 3> solve3(std::array<std::array<double, 3>, 3> m, std::array<double, 3> v) {
    // Gaussian elimination with partial pivoting.
    for (int c = 0; c < 3; ++c) {
        int pivot = c;
        for (int r = c + 1; r < 3; ++r) {
            if (std::abs(m[r][c]) > std::abs(m[pivot][c])) {
                pivot = r;
            }
        }
        std::swap(m[c], m[pivot]);
        std::swap(v[c], v[pivot]);
        if (m[c][c] == 0.0) {
            throw InvalidArgument("estimate_tone: singular fit (too few samples)");
        }
        for (int r = c + 1; r < 3; ++r) {
            const double f = m[r][c] / m[c][c];
            for (int k = c; k < 3; ++k) {
                m[r][k] -= f * m[c][k];
            }
            v[r] -= f * v[c];
        }
    }
    std::array<double, 3> x{};
    for (int r = 2; r >= 0; --r) {
        double acc = v[r];
        for (int k = r + 1; k < 3; ++k) {
            acc -= m[r][k] * x[k];
        }
        x[r] = acc / m[r][r];
    }
    return x;
}

ToneEstimate fit_tone(const RealSignal& s, signal::IndexRange range, double tone_hz) {
    const double omega = 2.0 * kPi * tone_hz;
    std::array<std::array<double, 3>, 3> ata{};
    std::array<double, 3> atb{};
    for (std::size_t i = range.begin; i < range.end; ++i) {
        const double arg = omega * s.grid().local_time(i);
        const std::array<double, 3> row{std::cos(arg), std::sin(arg), 1.0};
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) {
                ata[r][c] += row[r] * row[c];
            }
            atb[r] += row[r] * s[i];
        }
    }
    const auto x = solve3(ata, atb);
    double resid = 0.0;
    for (std::size_t i = range.begin; i < range.end; ++i) {
        const double arg = omega * s.grid().local_time(i);
        const double e = s[i] - (x[0] * std::cos(arg) + x[1] * std::sin(arg) + x[2]);
        resid += e * e;
    }
    ToneEstimate est;
    est.amplitude = std::hypot(x[0], x[1]);
    est.phase = std::atan2(x[0], x[1]);
    est.offset = x[2];
    est.samples = range.size();
    est.residual_rms = std::sqrt(resid / static_cast<double>(range.size()));
    return est;
}

signal::IndexRange tone_range(const RealSignal& s, signal::IndexRange run, double tone_hz) {
    const double spp = s.grid().sample_rate() / tone_hz;
    const std::size_t n = whole_period_length(run.size(), spp);
    return {run.begin, run.begin + n};
}

}  // namespace

void DetectorSpec::validate() const {
    if (!(band_low >= 0.0 && band_low < band_high)) {
        throw InvalidArgument("DetectorSpec: band must satisfy 0 <= low < high");
    }
    if (!(responsivity > 0.0)) {
        throw InvalidArgument("DetectorSpec: responsivity must be positive");
    }
    if (!(noise_density >= 0.0)) {
        throw InvalidArgument("DetectorSpec: noise density must be non-negative");
    }
    if (filter_order < 1) {
        throw InvalidArgument("DetectorSpec: filter order must be >= 1");
    }
}

void MziSpec::validate() const {
    if (!(path_difference > 0.0)) {
        throw InvalidArgument("MziSpec: path difference must be positive");
    }
    if (!std::isfinite(bias)) {
        throw InvalidArgument("MziSpec: bias must be finite");
    }
}

RealSignal detector_response(const RealSignal& intensity, const DetectorSpec& det, NoiseTag noise) {
    det.validate();
    const auto& grid = intensity.grid();
    const double nyquist = grid.sample_rate() / 2.0;
    if (det.band_high > nyquist) {
        throw InvalidArgument("detector: band edge " + std::to_string(det.band_high) +
                              " Hz exceeds the grid Nyquist frequency " + std::to_string(nyquist) + " Hz");
    }
    std::vector<double> y(intensity.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        y[i] = det.responsivity * intensity[i];
    }
    if (det.noise_density > 0.0) {
        NormalStream gauss(noise.seed, noise.stream);
        const double sigma = det.noise_density * std::sqrt(nyquist);
        for (auto& v : y) {
            v += sigma * gauss();
        }
    }
    if (det.band_low > 0.0) {
        // The coupling time constant is long against any simulated window,
        // so AC coupling reduces to removing the window mean.
        double sum = 0.0;
        std::size_t count = 0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            if (intensity.valid(i)) {
                sum += y[i];
                ++count;
            }
        }
        const double mean = count ? sum / static_cast<double>(count) : 0.0;
        for (auto& v : y) {
            v -= mean;
        }
    }
    RealSignal out(grid, std::move(y),
                   std::vector<std::uint8_t>(intensity.validity().begin(), intensity.validity().end()));
    if (det.band_high < nyquist) {
        return signal::filter_lowpass(out, det.band_high, det.filter_order);
    }
    return out;
}

RealSignal direct_detect(const OpticalField& field, const DetectorSpec& det, NoiseTag noise) {
    return detector_response(field.intensity(), det, noise);
}

RealSignal mzi_interfere(const OpticalField& field, const MziSpec& mzi, const signal::InterpolatorSpec& interp) {
    mzi.validate();
    const auto& env = field.envelope();
    if (!(env.grid().span() > 3.0 * mzi.path_difference)) {
        throw InvalidArgument("mzi_interfere: grid span must exceed three times the path difference");
    }
    // E(t + tau): a negative delay.
    const auto advanced = signal::fractional_delay(env, -mzi.path_difference, interp);
    const auto rot = std::polar(1.0, mzi.effective_bias());
    std::vector<double> out(env.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = std::norm(env[i] + rot * advanced[i]) / 4.0;
    }
    return RealSignal(env.grid(), std::move(out), signal::mask_and(env.validity(), advanced.validity()));
}

std::vector<PulseEvent> regenerate_pps(const RealSignal& intensity, const DetectorSpec& det,
                                       const PpsDetectorSettings& settings, NoiseTag noise) {
    if (!(settings.threshold > 0.0 && settings.threshold < 1.0)) {
        throw InvalidArgument("regenerate_pps: threshold must lie in (0, 1)");
    }
    const auto y = detector_response(intensity, det, noise);
    const auto& grid = y.grid();
    const std::size_t n = y.size();

    double peak = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (y.valid(i)) {
            peak = std::max(peak, y[i]);
        }
    }
    std::vector<PulseEvent> events;
    if (!(peak > settings.min_peak)) {
        return events;
    }
    const double level = settings.threshold * peak;
    const double fs = grid.sample_rate();
    auto crossing_time = [&](std::size_t i) {
        // Linear interpolation between samples i-1 and i.
        const double frac = (level - y[i - 1]) / (y[i] - y[i - 1]);
        return grid.start() + (static_cast<double>(i - 1) + frac) / fs;
    };

    std::size_t i = 1;
    while (i < n) {
        if (!(y[i - 1] < level && y[i] >= level)) {
            ++i;
            continue;
        }
        PulseEvent ev;
        ev.timestamp = crossing_time(i);
        ev.peak_amplitude = y[i];
        double last_down = ev.timestamp;
        bool degraded = !y.valid(i - 1) || !y.valid(i);
        std::size_t j = i;
        for (; j < n; ++j) {
            const double t = grid.start() + static_cast<double>(j) / fs;
            if (t - ev.timestamp > settings.holdoff) {
                break;
            }
            degraded = degraded || !y.valid(j);
            ev.peak_amplitude = std::max(ev.peak_amplitude, y[j]);
            if (y[j - 1] >= level && y[j] < level) {
                const double frac = (y[j - 1] - level) / (y[j - 1] - y[j]);
                last_down = grid.start() + (static_cast<double>(j - 1) + frac) / fs;
            }
        }
        ev.width = last_down - ev.timestamp;
        ev.degraded = degraded;
        events.push_back(ev);
        // Resume after the group once the signal is back below the level.
        i = std::max(j, i + 1);
        while (i < n && y[i - 1] >= level) {
            ++i;
        }
    }
    return events;
}

ToneEstimate estimate_tone(const RealSignal& s, double tone_hz) {
    if (!(tone_hz > 0.0) || !(tone_hz < s.grid().sample_rate() / 2.0)) {
        throw InvalidArgument("estimate_tone: tone frequency must lie in (0, fs/2)");
    }
    const std::array<std::span<const std::uint8_t>, 1> masks{s.validity()};
    const auto run = signal::longest_valid_run(masks);
    const auto range = tone_range(s, run, tone_hz);
    if (range.size() < 3) {
        throw InvalidArgument("estimate_tone: not enough valid samples");
    }
    return fit_tone(s, range, tone_hz);
}

PhaseReading phase_discriminate(const RealSignal& a, const RealSignal& b, double tone_hz, double dead_zone) {
    if (!(a.grid() == b.grid())) {
        throw InvalidArgument("phase_discriminate: signals must share one time grid");
    }
    if (!(dead_zone >= 0.0)) {
        throw InvalidArgument("phase_discriminate: dead zone must be non-negative");
    }
    if (!(tone_hz > 0.0) || !(tone_hz < a.grid().sample_rate() / 2.0)) {
        throw InvalidArgument("phase_discriminate: tone frequency must lie in (0, fs/2)");
    }
    const std::array<std::span<const std::uint8_t>, 2> masks{a.validity(), b.validity()};
    const auto run = signal::longest_valid_run(masks);
    const auto range = tone_range(a, run, tone_hz);
    if (range.size() < 3) {
        throw InvalidArgument("phase_discriminate: signals share too few valid samples");
    }
    const auto ta = fit_tone(a, range, tone_hz);
    const auto tb = fit_tone(b, range, tone_hz);

    PhaseReading r;
    r.amplitude_a = ta.amplitude;
    r.amplitude_b = tb.amplitude;
    r.phase = signal::wrap_phase(ta.phase - tb.phase);
    r.low_confidence = ta.amplitude <= kConfidenceRatio * ta.residual_rms ||
                       tb.amplitude <= kConfidenceRatio * tb.residual_rms;
    if (std::abs(r.phase) < dead_zone) {
        r.phase = 0.0;
        r.in_dead_zone = true;
    }
    return r;
}

}  // namespace fibersync::demod
