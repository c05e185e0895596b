#include "fibersync/signal_core.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

namespace fibersync::signal {

namespace {

constexpr double kPi = std::numbers::pi;

// Fractional parts closer than this to an integer are treated as integer shifts.
constexpr double kIntegerSnap = 1e-9;

bool is_finite(double v) { return std::isfinite(v); }
bool is_finite(const std::complex<double>& v) { return std::isfinite(v.real()) && std::isfinite(v.imag()); }

// prefix[i] = number of "bad" samples in [0, i).
std::vector<std::size_t> invalid_prefix(std::span<const std::uint8_t> valid) {
    std::vector<std::size_t> prefix(valid.size() + 1, 0);
    for (std::size_t i = 0; i < valid.size(); ++i) {
        prefix[i + 1] = prefix[i] + (valid[i] ? 0 : 1);
    }
    return prefix;
}

// True when every index of [lo, hi] lies inside [0, n) and is valid.
bool range_valid(const std::vector<std::size_t>& prefix, long long lo, long long hi) {
    const long long n = static_cast<long long>(prefix.size()) - 1;
    if (lo < 0 || hi >= n) {
        return false;
    }
    return prefix[static_cast<std::size_t>(hi + 1)] == prefix[static_cast<std::size_t>(lo)];
}

double kaiser(double r, double beta) {
    const double arg = 1.0 - r * r;
    if (arg <= 0.0) {
        return 0.0;
    }
    return std::cyl_bessel_i(0.0, beta * std::sqrt(arg)) / std::cyl_bessel_i(0.0, beta);
}

double sinc(double x) {
    if (x == 0.0) {
        return 1.0;
    }
    const double px = kPi * x;
    return std::sin(px) / px;
}

template <typename T>
Signal<T> delay_impl(const Signal<T>& in, double delay, const InterpolatorSpec& spec) {
    const TimeGrid& grid = in.grid();
    if (!std::isfinite(delay) || std::abs(delay) >= grid.span()) {
        throw InvalidArgument("fractional_delay: |delay| = " + std::to_string(std::abs(delay)) +
                              " s must be below the grid span " + std::to_string(grid.span()) + " s");
    }
    if (spec.half_width < 1) {
        throw InvalidArgument("fractional_delay: interpolator half-width must be >= 1");
    }
    const std::size_t n = in.size();
    if (delay == 0.0) {
        return in;
    }

    // output[i] = input at continuous index i - D, i.e. x[i + shift + frac].
    const double d_samples = delay * grid.sample_rate();
    double shift_f = std::floor(-d_samples);
    double frac = -d_samples - shift_f;
    if (frac < kIntegerSnap) {
        frac = 0.0;
    } else if (frac > 1.0 - kIntegerSnap) {
        frac = 0.0;
        shift_f += 1.0;
    }
    const long long shift = static_cast<long long>(shift_f);

    const auto prefix = invalid_prefix(in.validity());
    std::vector<T> out(n, T{});
    std::vector<std::uint8_t> valid(n, 0);
    const auto src = in.samples();

    if (frac == 0.0) {
        for (std::size_t i = 0; i < n; ++i) {
            const long long j = static_cast<long long>(i) + shift;
            if (j >= 0 && j < static_cast<long long>(n)) {
                out[i] = src[static_cast<std::size_t>(j)];
                valid[i] = in.valid(static_cast<std::size_t>(j)) ? 1 : 0;
            }
        }
        return Signal<T>(grid, std::move(out), std::move(valid));
    }

    const int k_half = spec.half_width;
    std::vector<double> taps;
    taps.reserve(static_cast<std::size_t>(2 * k_half));
    double tap_sum = 0.0;
    for (int k = -k_half + 1; k <= k_half; ++k) {
        const double u = frac - k;
        const double h = sinc(u) * kaiser(u / k_half, spec.kaiser_beta);
        taps.push_back(h);
        tap_sum += h;
    }
    for (auto& h : taps) {
        h /= tap_sum;
    }

    for (std::size_t i = 0; i < n; ++i) {
        const long long base = static_cast<long long>(i) + shift;
        T acc{};
        for (int t = 0; t < 2 * k_half; ++t) {
            const long long j = base - k_half + 1 + t;
            if (j >= 0 && j < static_cast<long long>(n)) {
                acc += src[static_cast<std::size_t>(j)] * taps[static_cast<std::size_t>(t)];
            }
        }
        out[i] = acc;
        valid[i] = range_valid(prefix, base - k_half + 1, base + k_half) ? 1 : 0;
    }
    return Signal<T>(grid, std::move(out), std::move(valid));
}

// Direct form II transposed biquad; a0 normalized to 1.
struct Biquad {
    double b0, b1, b2, a1, a2;

    double dc_gain() const { return (b0 + b1 + b2) / (1.0 + a1 + a2); }
    double pole_radius() const {
        if (b2 == 0.0 && a2 == 0.0) {
            return std::abs(a1);
        }
        const double disc = a1 * a1 - 4.0 * a2;
        if (disc < 0.0) {
            return std::sqrt(a2);
        }
        const double s = std::sqrt(disc);
        return std::max(std::abs((-a1 + s) / 2.0), std::abs((-a1 - s) / 2.0));
    }
};

std::vector<Biquad> butterworth_lowpass(double sample_rate, double cutoff, int order) {
    const double k = std::tan(kPi * cutoff / sample_rate);
    std::vector<Biquad> sections;
    for (int i = 0; i < order / 2; ++i) {
        const double q = 1.0 / (2.0 * std::sin((2.0 * i + 1.0) * kPi / (2.0 * order)));
        const double norm = 1.0 / (1.0 + k / q + k * k);
        Biquad s{};
        s.b0 = k * k * norm;
        s.b1 = 2.0 * s.b0;
        s.b2 = s.b0;
        s.a1 = 2.0 * (k * k - 1.0) * norm;
        s.a2 = (1.0 - k / q + k * k) * norm;
        sections.push_back(s);
    }
    if (order % 2 == 1) {
        Biquad s{};
        s.b0 = k / (1.0 + k);
        s.b1 = s.b0;
        s.b2 = 0.0;
        s.a1 = (k - 1.0) / (k + 1.0);
        s.a2 = 0.0;
        sections.push_back(s);
    }
    // Unity DC gain exactly, per section.
    for (auto& s : sections) {
        const double g = s.dc_gain();
        s.b0 /= g;
        s.b1 /= g;
        s.b2 /= g;
    }
    return sections;
}

// Runs the cascade in place, starting from the steady state for input x[0].
void run_cascade(const std::vector<Biquad>& sections, std::vector<double>& x) {
    if (x.empty()) {
        return;
    }
    for (const auto& s : sections) {
        const double x0 = x.front();
        // Steady state of DF2T for constant input x0 and unity DC gain.
        double z1 = (1.0 - s.b0) * x0;
        double z2 = (s.b2 - s.a2) * x0;
        for (auto& v : x) {
            const double in = v;
            const double y = s.b0 * in + z1;
            z1 = s.b1 * in - s.a1 * y + z2;
            z2 = s.b2 * in - s.a2 * y;
            v = y;
        }
    }
}

}  // namespace

TimeGrid::TimeGrid(double sample_rate, double start, std::size_t n_samples)
    : sample_rate_(sample_rate), start_(start), n_samples_(n_samples) {
    if (!(sample_rate > 0.0) || !std::isfinite(sample_rate)) {
        throw InvalidArgument("TimeGrid: sample_rate must be positive and finite");
    }
    if (!std::isfinite(start)) {
        throw InvalidArgument("TimeGrid: start must be finite");
    }
    if (n_samples < 1) {
        throw InvalidArgument("TimeGrid: n_samples must be >= 1");
    }
}

template <typename T>
Signal<T>::Signal(TimeGrid grid, std::vector<T> samples)
    : Signal(grid, std::move(samples), std::vector<std::uint8_t>(grid.size(), 1)) {}

template <typename T>
Signal<T>::Signal(TimeGrid grid, std::vector<T> samples, std::vector<std::uint8_t> valid)
    : grid_(grid), samples_(std::move(samples)), valid_(std::move(valid)) {
    if (samples_.size() != grid_.size()) {
        throw InvalidArgument("Signal: sample count " + std::to_string(samples_.size()) +
                              " does not match grid size " + std::to_string(grid_.size()));
    }
    if (valid_.size() != samples_.size()) {
        throw InvalidArgument("Signal: validity mask length does not match sample count");
    }
    for (const auto& v : samples_) {
        if (!is_finite(v)) {
            throw InvalidArgument("Signal: samples must be finite");
        }
    }
}

template <typename T>
std::size_t Signal<T>::valid_count() const noexcept {
    return static_cast<std::size_t>(std::count_if(valid_.begin(), valid_.end(), [](auto v) { return v != 0; }));
}

template class Signal<double>;
template class Signal<std::complex<double>>;

IndexRange longest_valid_run(std::span<const std::span<const std::uint8_t>> masks) {
    if (masks.empty()) {
        return {};
    }
    const std::size_t n = masks.front().size();
    for (const auto& m : masks) {
        if (m.size() != n) {
            throw InvalidArgument("longest_valid_run: masks differ in length");
        }
    }
    IndexRange best{};
    std::size_t run_start = 0;
    bool in_run = false;
    for (std::size_t i = 0; i <= n; ++i) {
        bool ok = i < n;
        for (std::size_t m = 0; ok && m < masks.size(); ++m) {
            ok = masks[m][i] != 0;
        }
        if (ok && !in_run) {
            run_start = i;
            in_run = true;
        } else if (!ok && in_run) {
            if (i - run_start > best.size()) {
                best = {run_start, i};
            }
            in_run = false;
        }
    }
    return best;
}

std::vector<std::uint8_t> mask_and(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
    if (a.size() != b.size()) {
        throw InvalidArgument("mask_and: masks differ in length");
    }
    std::vector<std::uint8_t> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        out[i] = (a[i] && b[i]) ? 1 : 0;
    }
    return out;
}

RealSignal fractional_delay(const RealSignal& signal, double delay, const InterpolatorSpec& spec) {
    return delay_impl(signal, delay, spec);
}

ComplexSignal fractional_delay(const ComplexSignal& signal, double delay, const InterpolatorSpec& spec) {
    return delay_impl(signal, delay, spec);
}

std::size_t lowpass_settling_samples(double sample_rate, double cutoff, int order, double tolerance) {
    const auto sections = butterworth_lowpass(sample_rate, cutoff, order);
    double r = 0.0;
    for (const auto& s : sections) {
        r = std::max(r, s.pole_radius());
    }
    if (r <= 0.0) {
        return static_cast<std::size_t>(order);
    }
    // Margin for the polynomial factor of repeated/cascaded poles and the
    // second (backward) pass.
    const double base = std::log(tolerance) / std::log(r);
    return static_cast<std::size_t>(std::ceil(1.5 * base)) + static_cast<std::size_t>(2 * order);
}

RealSignal filter_lowpass(const RealSignal& signal, double cutoff, int order) {
    const TimeGrid& grid = signal.grid();
    if (!(cutoff > 0.0) || !(cutoff < grid.sample_rate() / 2.0)) {
        throw InvalidArgument("filter_lowpass: cutoff " + std::to_string(cutoff) +
                              " Hz must lie in (0, fs/2 = " + std::to_string(grid.sample_rate() / 2.0) + ")");
    }
    if (order < 1) {
        throw InvalidArgument("filter_lowpass: order must be >= 1");
    }
    const auto sections = butterworth_lowpass(grid.sample_rate(), cutoff, order);
    const std::size_t n = signal.size();
    const std::size_t guard = lowpass_settling_samples(grid.sample_rate(), cutoff, order);
    const std::size_t pad = std::min(guard, n - 1);

    // Odd reflection about the end samples keeps the padded signal continuous
    // in value and slope.
    std::vector<double> x(n + 2 * pad);
    const auto src = signal.samples();
    for (std::size_t j = 0; j < pad; ++j) {
        x[pad - 1 - j] = 2.0 * src[0] - src[j + 1];
        x[pad + n + j] = 2.0 * src[n - 1] - src[n - 2 - j];
    }
    std::copy(src.begin(), src.end(), x.begin() + static_cast<std::ptrdiff_t>(pad));

    run_cascade(sections, x);
    std::reverse(x.begin(), x.end());
    run_cascade(sections, x);
    std::reverse(x.begin(), x.end());

    std::vector<double> out(x.begin() + static_cast<std::ptrdiff_t>(pad),
                            x.begin() + static_cast<std::ptrdiff_t>(pad + n));
    const auto prefix = invalid_prefix(signal.validity());
    std::vector<std::uint8_t> valid(n, 0);
    const auto g = static_cast<long long>(guard);
    for (std::size_t i = 0; i < n; ++i) {
        const auto ii = static_cast<long long>(i);
        valid[i] = range_valid(prefix, ii - g, ii + g) ? 1 : 0;
    }
    return RealSignal(grid, std::move(out), std::move(valid));
}

double wrap_phase(double phase) noexcept {
    double r = std::remainder(phase, 2.0 * kPi);
    if (r <= -kPi) {
        r += 2.0 * kPi;
    }
    return r;
}

UnwrapResult unwrap_phase(std::span<const double> series) {
    UnwrapResult result;
    result.values.reserve(series.size());
    if (series.empty()) {
        return result;
    }
    result.values.push_back(series[0]);
    for (std::size_t i = 1; i < series.size(); ++i) {
        const double step = wrap_phase(series[i] - series[i - 1]);
        if (std::abs(step) >= kPi) {
            result.ambiguous.push_back(i);
        }
        // Re-anchor on the input sample so rounding does not accumulate.
        const double predicted = result.values.back() + step;
        const double turns = std::round((predicted - series[i]) / (2.0 * kPi));
        result.values.push_back(series[i] + turns * 2.0 * kPi);
    }
    return result;
}

double rms(const RealSignal& signal) {
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < signal.size(); ++i) {
        if (signal.valid(i)) {
            acc += signal[i] * signal[i];
            ++count;
        }
    }
    return count == 0 ? 0.0 : std::sqrt(acc / static_cast<double>(count));
}

}  // namespace fibersync::signal
