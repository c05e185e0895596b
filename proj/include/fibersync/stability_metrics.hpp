#pragma once

// Time-offset series and the usual stability statistics on them:
// overlapping and plain Allan deviation, modified Allan deviation, time
// deviation, plus a power-law noise synthesizer used to check them.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace fibersync::metrics {

/// Uniformly sampled time offsets x (s). Missing samples are NaN and listed
/// in `gaps`.
struct PhaseSeries {
    double tau0 = 1.0;
    std::vector<double> values;
    std::vector<std::size_t> gaps;

    std::size_t size() const noexcept { return values.size(); }
    /// Throws InvalidArgument unless tau0 > 0, length >= 3 and every
    /// non-gap value is finite.
    void validate() const;
};

struct OmittedTau {
    double tau = 0.0;
    std::string reason;
};

struct DeviationCurve {
    std::string statistic;              ///< "oadev", "adev", "mdev", "tdev"
    std::vector<double> taus;           ///< s, strictly increasing
    std::vector<double> values;         ///< ADEV/MDEV dimensionless, TDEV in s
    std::vector<std::size_t> n_terms;   ///< squared terms averaged per point
    std::vector<OmittedTau> omitted;
    double measurement_bandwidth = 0.0; ///< Hz of pre-filtering applied to the data, 0 if none

    std::size_t size() const noexcept { return taus.size(); }
};

struct DeviationOptions {
    /// Skip terms that touch a gap instead of rejecting the series.
    bool gap_tolerant = false;
};

/// Pairs each reference pulse with the receive pulse inside half a period of
/// it: x[i] = rx - ref. tau0 is the median reference spacing. References
/// without a partner become gaps; receive pulses without one are dropped.
PhaseSeries tic_offsets(const std::vector<double>& ref_events, const std::vector<double>& rx_events);

/// tau0 * {1, 2, 4, ...} while an ADEV point remains computable (2m < N).
std::vector<double> octave_taus(double tau0, std::size_t length);

DeviationCurve overlapping_adev(const PhaseSeries& x, const std::vector<double>& taus, DeviationOptions opt = {});
DeviationCurve adev(const PhaseSeries& x, const std::vector<double>& taus, DeviationOptions opt = {});
DeviationCurve mdev(const PhaseSeries& x, const std::vector<double>& taus, DeviationOptions opt = {});
/// tau * MDEV(tau) / sqrt(3).
DeviationCurve tdev(const PhaseSeries& x, const std::vector<double>& taus, DeviationOptions opt = {});

enum class NoiseKind { wpm, fpm, wfm, ffm, rwfm };

NoiseKind parse_noise_kind(std::string_view name);
std::string_view to_string(NoiseKind kind) noexcept;

/// Frequency-noise exponent alpha of S_y(f) = h_alpha * f^alpha (2 for WPM
/// down to -2 for RWFM).
int alpha_of(NoiseKind kind) noexcept;

/// Time-offset realization whose fractional-frequency one-sided PSD is
/// level * f^alpha, i.e. `level` is h_alpha. Phase PSD
/// S_x(f) = h_alpha f^(alpha-2) / (4 pi^2). Produced by filtering seeded white
/// noise with the fractional-integration kernel of order (2 - alpha) / 2;
/// the white variance is h_alpha (2 pi)^(beta - 2) tau0^(beta - 1) / 2 with
/// beta = 2 - alpha. For WFM this reduces to a random walk of step variance
/// h0 * tau0 / 2.
PhaseSeries gen_power_law_noise(NoiseKind kind, double level, std::size_t n, double tau0, std::uint64_t seed);

/// Single-pole low-pass at `bandwidth` Hz applied in place of the
/// instrument's measurement bandwidth; gaps pass through untouched.
PhaseSeries prefilter(const PhaseSeries& x, double bandwidth);

/// CSV input with columns time_s, offset_s; empty offsets mark gaps.
PhaseSeries read_offset_csv(const std::string& path);
void write_offset_csv(const PhaseSeries& x, std::ostream& out, double t0 = 0.0);

/// CSV output: tau_s,value,n_terms
void write_deviation_csv(const DeviationCurve& curve, std::ostream& out);

}  // namespace fibersync::metrics
