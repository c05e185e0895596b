#pragma once

// Independent reference formulas. They are written straight from the
// textbook definitions with plain loops and share no code with the library.

#include <cmath>
#include <cstddef>
#include <vector>

namespace fstest {

/// Delay-interferometer output for an IM tone of unit depth on both arms:
/// 1 + cos(w0*tau/2) * cos((2*w0*t + 2*eps + w0*tau)/2)
///   + |cos((2*w0*t + 2*eps + w0*tau)/2) + cos(w0*tau/2)| * cos(wc*tau + phi(t+tau) - phi(t))
/// eps is the RF phase of the cosine-form tone, wc_tau the optical bias.
inline double interferometer_literal(double t, double w0, double tau, double eps, double wc_tau, double phi_t,
                                     double phi_t_tau) {
    const double half = std::cos(w0 * tau / 2.0);
    const double slow = std::cos((2.0 * w0 * t + 2.0 * eps + w0 * tau) / 2.0);
    return 1.0 + half * slow + std::abs(slow + half) * std::cos(wc_tau + phi_t_tau - phi_t);
}

/// Overlapping Allan variance from time offsets, double loop.
inline double brute_oadev(const std::vector<double>& x, std::size_t m, double tau0) {
    const std::size_t n = x.size();
    const double tau = static_cast<double>(m) * tau0;
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i + 2 * m < n; ++i) {
        const double d = x[i + 2 * m] - 2.0 * x[i + m] + x[i];
        acc += d * d;
        ++count;
    }
    return std::sqrt(acc / (2.0 * tau * tau * static_cast<double>(count)));
}

/// Non-overlapping Allan deviation: second differences at stride m.
inline double brute_adev(const std::vector<double>& x, std::size_t m, double tau0) {
    const std::size_t n = x.size();
    const double tau = static_cast<double>(m) * tau0;
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i + 2 * m < n; i += m) {
        const double d = x[i + 2 * m] - 2.0 * x[i + m] + x[i];
        acc += d * d;
        ++count;
    }
    return std::sqrt(acc / (2.0 * tau * tau * static_cast<double>(count)));
}

/// Modified Allan deviation, triple loop over the definition.
inline double brute_mdev(const std::vector<double>& x, std::size_t m, double tau0) {
    const std::size_t n = x.size();
    const double tau = static_cast<double>(m) * tau0;
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t j = 0; j + 3 * m <= n; ++j) {
        double inner = 0.0;
        for (std::size_t i = j; i < j + m; ++i) {
            inner += x[i + 2 * m] - 2.0 * x[i + m] + x[i];
        }
        acc += inner * inner;
        ++count;
    }
    const double md = static_cast<double>(m);
    return std::sqrt(acc / (2.0 * md * md * tau * tau * static_cast<double>(count)));
}

}  // namespace fstest
