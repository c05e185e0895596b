#include "fibersync/stability_metrics.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numbers>
#include <ostream>

#include "fibersync/csv.hpp"
#include "fibersync/error.hpp"
#include "fibersync/random.hpp"

namespace fibersync::metrics {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// FFTW planning is not thread-safe; execution is.
std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

struct Factor {
    std::size_t m;
    double tau;
};

// Converts requested taus to averaging factors. Non-multiples and duplicates
// are reported as omitted.
std::vector<Factor> to_factors(const PhaseSeries& x, const std::vector<double>& taus, DeviationCurve& curve) {
    std::vector<Factor> out;
    for (double tau : taus) {
        const double ratio = tau / x.tau0;
        const double m = std::round(ratio);
        if (!std::isfinite(ratio) || m < 1.0 || std::abs(m * x.tau0 - tau) > 1e-9 * std::abs(tau)) {
            curve.omitted.push_back({tau, "not a positive integer multiple of tau0"});
            continue;
        }
        out.push_back({static_cast<std::size_t>(m), m * x.tau0});
    }
    std::sort(out.begin(), out.end(), [](const Factor& a, const Factor& b) { return a.m < b.m; });
    std::vector<Factor> unique;
    for (const auto& f : out) {
        if (!unique.empty() && unique.back().m == f.m) {
            curve.omitted.push_back({f.tau, "duplicate tau"});
            continue;
        }
        unique.push_back(f);
    }
    return unique;
}

void check_series(const PhaseSeries& x, DeviationOptions opt) {
    x.validate();
    if (!x.gaps.empty() && !opt.gap_tolerant) {
        throw InvalidArgument("series has " + std::to_string(x.gaps.size()) +
                              " gap(s); enable gap-tolerant mode to evaluate it");
    }
}

double second_difference(const std::vector<double>& v, std::size_t i, std::size_t m) {
    return v[i + 2 * m] - 2.0 * v[i + m] + v[i];
}

void push_point(DeviationCurve& curve, const Factor& f, double sum, std::size_t terms, double denominator_scale) {
    if (terms == 0) {
        curve.omitted.push_back({f.tau, "no complete terms (all touch gaps)"});
        return;
    }
    curve.taus.push_back(f.tau);
    curve.values.push_back(std::sqrt(sum / (denominator_scale * static_cast<double>(terms))));
    curve.n_terms.push_back(terms);
}

DeviationCurve allan(const PhaseSeries& x, const std::vector<double>& taus, DeviationOptions opt, bool overlapping) {
    check_series(x, opt);
    DeviationCurve curve;
    curve.statistic = overlapping ? "oadev" : "adev";
    const std::size_t n = x.size();
    for (const auto& f : to_factors(x, taus, curve)) {
        if (2 * f.m >= n) {
            curve.omitted.push_back({f.tau, "insufficient points: need 2m < N"});
            continue;
        }
        const std::size_t step = overlapping ? 1 : f.m;
        double sum = 0.0;
        std::size_t terms = 0;
        for (std::size_t i = 0; i + 2 * f.m < n; i += step) {
            const double d = second_difference(x.values, i, f.m);
            if (std::isnan(d)) {
                continue;
            }
            sum += d * d;
            ++terms;
        }
        push_point(curve, f, sum, terms, 2.0 * f.tau * f.tau);
    }
    return curve;
}

}  // namespace

void PhaseSeries::validate() const {
    if (!(tau0 > 0.0) || !std::isfinite(tau0)) {
        throw InvalidArgument("PhaseSeries: tau0 must be positive");
    }
    if (values.size() < 3) {
        throw InvalidArgument("PhaseSeries: need at least 3 samples");
    }
    std::size_t nan_count = 0;
    for (double v : values) {
        if (std::isnan(v)) {
            ++nan_count;
        } else if (!std::isfinite(v)) {
            throw InvalidArgument("PhaseSeries: values must be finite");
        }
    }
    if (nan_count != gaps.size()) {
        throw InvalidArgument("PhaseSeries: gap list does not match the NaN samples");
    }
}

PhaseSeries tic_offsets(const std::vector<double>& ref_events, const std::vector<double>& rx_events) {
    if (ref_events.size() < 2) {
        throw InvalidArgument("tic_offsets: need at least two reference events");
    }
    if (!std::is_sorted(ref_events.begin(), ref_events.end()) || !std::is_sorted(rx_events.begin(), rx_events.end())) {
        throw InvalidArgument("tic_offsets: event lists must be in time order");
    }
    std::vector<double> spacing(ref_events.size() - 1);
    for (std::size_t i = 0; i + 1 < ref_events.size(); ++i) {
        spacing[i] = ref_events[i + 1] - ref_events[i];
    }
    std::nth_element(spacing.begin(), spacing.begin() + spacing.size() / 2, spacing.end());
    const double period = spacing[spacing.size() / 2];
    if (!(period > 0.0)) {
        throw InvalidArgument("tic_offsets: reference events must be distinct");
    }

    PhaseSeries out;
    out.tau0 = period;
    out.values.reserve(ref_events.size());
    std::size_t j = 0;
    for (std::size_t i = 0; i < ref_events.size(); ++i) {
        const double ref = ref_events[i];
        while (j < rx_events.size() && rx_events[j] <= ref - period / 2.0) {
            ++j;
        }
        if (j < rx_events.size() && rx_events[j] < ref + period / 2.0) {
            out.values.push_back(rx_events[j] - ref);
            ++j;
        } else {
            out.gaps.push_back(i);
            out.values.push_back(kNaN);
        }
    }
    return out;
}

std::vector<double> octave_taus(double tau0, std::size_t length) {
    if (!(tau0 > 0.0)) {
        throw InvalidArgument("octave_taus: tau0 must be positive");
    }
    std::vector<double> taus;
    for (std::size_t m = 1; 2 * m < length; m *= 2) {
        taus.push_back(static_cast<double>(m) * tau0);
    }
    return taus;
}

DeviationCurve overlapping_adev(const PhaseSeries& x, const std::vector<double>& taus, DeviationOptions opt) {
    return allan(x, taus, opt, true);
}

DeviationCurve adev(const PhaseSeries& x, const std::vector<double>& taus, DeviationOptions opt) {
    return allan(x, taus, opt, false);
}

DeviationCurve mdev(const PhaseSeries& x, const std::vector<double>& taus, DeviationOptions opt) {
    check_series(x, opt);
    DeviationCurve curve;
    curve.statistic = "mdev";
    const std::size_t n = x.size();
    std::vector<long double> prefix;
    std::vector<std::size_t> bad_prefix;
    for (const auto& f : to_factors(x, taus, curve)) {
        if (3 * f.m >= n) {
            curve.omitted.push_back({f.tau, "insufficient points: need 3m < N"});
            continue;
        }
        // Inner sums over m consecutive second differences via prefix sums.
        const std::size_t nd = n - 2 * f.m;
        prefix.assign(nd + 1, 0.0L);
        bad_prefix.assign(nd + 1, 0);
        for (std::size_t i = 0; i < nd; ++i) {
            const double d = second_difference(x.values, i, f.m);
            const bool bad = std::isnan(d);
            prefix[i + 1] = prefix[i] + (bad ? 0.0L : static_cast<long double>(d));
            bad_prefix[i + 1] = bad_prefix[i] + (bad ? 1 : 0);
        }
        double sum = 0.0;
        std::size_t terms = 0;
        for (std::size_t j = 0; j + f.m <= nd; ++j) {
            if (bad_prefix[j + f.m] != bad_prefix[j]) {
                continue;
            }
            const auto inner = static_cast<double>(prefix[j + f.m] - prefix[j]);
            sum += inner * inner;
            ++terms;
        }
        const double md = static_cast<double>(f.m);
        push_point(curve, f, sum, terms, 2.0 * md * md * f.tau * f.tau);
    }
    return curve;
}

DeviationCurve tdev(const PhaseSeries& x, const std::vector<double>& taus, DeviationOptions opt) {
    auto curve = mdev(x, taus, opt);
    curve.statistic = "tdev";
    for (std::size_t i = 0; i < curve.size(); ++i) {
        curve.values[i] = curve.taus[i] * curve.values[i] / std::sqrt(3.0);
    }
    return curve;
}

NoiseKind parse_noise_kind(std::string_view name) {
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower == "wpm") return NoiseKind::wpm;
    if (lower == "fpm") return NoiseKind::fpm;
    if (lower == "wfm") return NoiseKind::wfm;
    if (lower == "ffm") return NoiseKind::ffm;
    if (lower == "rwfm") return NoiseKind::rwfm;
    throw InvalidArgument("unknown noise kind '" + std::string(name) + "' (expected WPM, FPM, WFM, FFM or RWFM)");
}

std::string_view to_string(NoiseKind kind) noexcept {
    switch (kind) {
        case NoiseKind::wpm: return "WPM";
        case NoiseKind::fpm: return "FPM";
        case NoiseKind::wfm: return "WFM";
        case NoiseKind::ffm: return "FFM";
        case NoiseKind::rwfm: return "RWFM";
    }
    return "?";
}

int alpha_of(NoiseKind kind) noexcept {
    switch (kind) {
        case NoiseKind::wpm: return 2;
        case NoiseKind::fpm: return 1;
        case NoiseKind::wfm: return 0;
        case NoiseKind::ffm: return -1;
        case NoiseKind::rwfm: return -2;
    }
    return 0;
}

PhaseSeries gen_power_law_noise(NoiseKind kind, double level, std::size_t n, double tau0, std::uint64_t seed) {
    if (n < 16) {
        throw InvalidArgument("gen_power_law_noise: need n >= 16");
    }
    if (!(tau0 > 0.0)) {
        throw InvalidArgument("gen_power_law_noise: tau0 must be positive");
    }
    if (!(level >= 0.0) || !std::isfinite(level)) {
        throw InvalidArgument("gen_power_law_noise: level must be finite and non-negative");
    }
    PhaseSeries out;
    out.tau0 = tau0;
    out.values.assign(n, 0.0);
    if (level == 0.0) {
        return out;
    }
    const double beta = 2.0 - alpha_of(kind);
    const double q = level * std::pow(2.0 * kPi, beta - 2.0) * std::pow(tau0, beta - 1.0) / 2.0;
    const double sigma = std::sqrt(q);

    NormalStream gauss(seed, static_cast<std::uint64_t>(kind) + 1);
    const std::size_t len = 2 * n;
    const std::size_t bins = len / 2 + 1;
    double* white = fftw_alloc_real(len);
    double* kernel = fftw_alloc_real(len);
    fftw_complex* wf = fftw_alloc_complex(bins);
    fftw_complex* kf = fftw_alloc_complex(bins);
    fftw_plan fw_white = nullptr;
    fftw_plan fw_kernel = nullptr;
    fftw_plan inverse = nullptr;
    {
        std::lock_guard lock(fftw_planner_mutex());
        fw_white = fftw_plan_dft_r2c_1d(static_cast<int>(len), white, wf, FFTW_ESTIMATE);
        fw_kernel = fftw_plan_dft_r2c_1d(static_cast<int>(len), kernel, kf, FFTW_ESTIMATE);
        inverse = fftw_plan_dft_c2r_1d(static_cast<int>(len), wf, white, FFTW_ESTIMATE);
    }
    for (std::size_t i = 0; i < len; ++i) {
        white[i] = i < n ? sigma * gauss() : 0.0;
        kernel[i] = 0.0;
    }
    kernel[0] = 1.0;
    for (std::size_t k = 1; k < n; ++k) {
        const double kd = static_cast<double>(k);
        kernel[k] = kernel[k - 1] * (beta / 2.0 + kd - 1.0) / kd;
    }
    fftw_execute(fw_white);
    fftw_execute(fw_kernel);
    for (std::size_t i = 0; i < bins; ++i) {
        const double re = wf[i][0] * kf[i][0] - wf[i][1] * kf[i][1];
        const double im = wf[i][0] * kf[i][1] + wf[i][1] * kf[i][0];
        wf[i][0] = re;
        wf[i][1] = im;
    }
    fftw_execute(inverse);
    for (std::size_t i = 0; i < n; ++i) {
        out.values[i] = white[i] / static_cast<double>(len);
    }
    {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(fw_white);
        fftw_destroy_plan(fw_kernel);
        fftw_destroy_plan(inverse);
    }
    fftw_free(white);
    fftw_free(kernel);
    fftw_free(wf);
    fftw_free(kf);
    return out;
}

PhaseSeries prefilter(const PhaseSeries& x, double bandwidth) {
    x.validate();
    if (!(bandwidth > 0.0)) {
        throw InvalidArgument("prefilter: bandwidth must be positive");
    }
    const double a = -std::expm1(-2.0 * kPi * bandwidth * x.tau0);
    PhaseSeries out = x;
    bool primed = false;
    double state = 0.0;
    for (auto& v : out.values) {
        if (std::isnan(v)) {
            continue;
        }
        state = primed ? state + a * (v - state) : v;
        primed = true;
        v = state;
    }
    return out;
}

PhaseSeries read_offset_csv(const std::string& path) {
    const auto table = csv::read_table(path);
    const auto tcol = table.column("time_s");
    const auto xcol = table.column("offset_s");
    if (table.rows.size() < 3) {
        throw IoError("metrics: " + path + " needs at least 3 rows");
    }
    PhaseSeries out;
    out.tau0 = table.rows[1][tcol] - table.rows[0][tcol];
    if (!(out.tau0 > 0.0)) {
        throw IoError("metrics: " + path + ": time_s must increase");
    }
    const double t0 = table.rows[0][tcol];
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const double expected = t0 + static_cast<double>(i) * out.tau0;
        if (std::abs(table.rows[i][tcol] - expected) > 1e-6 * out.tau0) {
            throw IoError("metrics: " + path + ": samples are not uniformly spaced at row " + std::to_string(i + 2));
        }
        const double v = table.rows[i][xcol];
        if (std::isnan(v)) {
            out.gaps.push_back(i);
        }
        out.values.push_back(v);
    }
    return out;
}

void write_offset_csv(const PhaseSeries& x, std::ostream& out, double t0) {
    out << "time_s,offset_s\n";
    for (std::size_t i = 0; i < x.size(); ++i) {
        out << csv::number(t0 + static_cast<double>(i) * x.tau0) << ',';
        if (!std::isnan(x.values[i])) {
            out << csv::number(x.values[i]);
        }
        out << '\n';
    }
}

void write_deviation_csv(const DeviationCurve& curve, std::ostream& out) {
    out << "tau_s,value,n_terms\n";
    for (std::size_t i = 0; i < curve.size(); ++i) {
        out << csv::number(curve.taus[i]) << ',' << csv::number(curve.values[i]) << ',' << curve.n_terms[i] << '\n';
    }
}

}  // namespace fibersync::metrics
