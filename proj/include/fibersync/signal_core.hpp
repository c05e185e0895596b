#pragma once

// Sampled-signal primitives: uniform time grids, real/complex signals with
// validity masks, windowed-sinc fractional delay, zero-phase Butterworth
// low-pass filtering and phase wrapping.

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fibersync/error.hpp"

namespace fibersync::signal {

class TimeGrid {
public:
    TimeGrid(double sample_rate, double start, std::size_t n_samples);

    double sample_rate() const noexcept { return sample_rate_; }
    double start() const noexcept { return start_; }
    std::size_t size() const noexcept { return n_samples_; }
    double dt() const noexcept { return 1.0 / sample_rate_; }

    /// Time of sample i.
    double time(std::size_t i) const noexcept { return start_ + static_cast<double>(i) / sample_rate_; }
    /// Time relative to the grid start; better conditioned than time(i) - start().
    double local_time(std::size_t i) const noexcept { return static_cast<double>(i) / sample_rate_; }
    /// Duration covered by the samples, n / fs.
    double span() const noexcept { return static_cast<double>(n_samples_) / sample_rate_; }

    TimeGrid with_start(double start) const { return TimeGrid(sample_rate_, start, n_samples_); }

    bool operator==(const TimeGrid&) const = default;

private:
    double sample_rate_;
    double start_;
    std::size_t n_samples_;
};

/// Immutable sampled signal. Every sample carries a validity flag; samples
/// that depend on data outside the grid (filter and interpolator edges) are
/// kept but marked invalid.
template <typename T>
class Signal {
public:
    using value_type = T;

    Signal(TimeGrid grid, std::vector<T> samples);
    Signal(TimeGrid grid, std::vector<T> samples, std::vector<std::uint8_t> valid);

    const TimeGrid& grid() const noexcept { return grid_; }
    std::size_t size() const noexcept { return samples_.size(); }
    std::span<const T> samples() const noexcept { return samples_; }
    const T& operator[](std::size_t i) const noexcept { return samples_[i]; }

    std::span<const std::uint8_t> validity() const noexcept { return valid_; }
    bool valid(std::size_t i) const noexcept { return valid_[i] != 0; }
    std::size_t valid_count() const noexcept;
    bool all_valid() const noexcept { return valid_count() == size(); }

private:
    TimeGrid grid_;
    std::vector<T> samples_;
    std::vector<std::uint8_t> valid_;
};

using RealSignal = Signal<double>;
using ComplexSignal = Signal<std::complex<double>>;

/// Half-open index range [begin, end).
struct IndexRange {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t size() const noexcept { return end > begin ? end - begin : 0; }
    bool empty() const noexcept { return size() == 0; }
};

/// Longest run of samples valid in every mask. Masks must have equal length.
IndexRange longest_valid_run(std::span<const std::span<const std::uint8_t>> masks);

/// Mask that is the element-wise AND of two masks.
std::vector<std::uint8_t> mask_and(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);

struct InterpolatorSpec {
    int half_width = 64;       ///< taps on each side of the interpolation point
    double kaiser_beta = 20.0;
};

/// output(t) = input(t - delay) by windowed-sinc interpolation. Delays that
/// are an integer number of samples are exact copies. Output samples whose
/// interpolation support leaves the grid or touches invalid input are marked
/// invalid. Throws InvalidArgument when |delay| >= grid span.
RealSignal fractional_delay(const RealSignal& signal, double delay, const InterpolatorSpec& spec = {});
ComplexSignal fractional_delay(const ComplexSignal& signal, double delay, const InterpolatorSpec& spec = {});

/// Butterworth low-pass of the given order applied forward and backward
/// (zero phase). Samples within the filter's settling length of either edge
/// or of an invalid input sample are marked invalid.
RealSignal filter_lowpass(const RealSignal& signal, double cutoff, int order);

/// Number of samples for the filter's impulse response to decay below
/// `tolerance` of its peak; used as the invalid guard at both edges.
std::size_t lowpass_settling_samples(double sample_rate, double cutoff, int order, double tolerance = 1e-12);

/// Wraps into (-pi, pi].
double wrap_phase(double phase) noexcept;

struct UnwrapResult {
    std::vector<double> values;
    /// Indices i where the step from i-1 to i could not be resolved.
    std::vector<std::size_t> ambiguous;
};

/// Removes 2*pi jumps. A step whose wrapped size reaches pi is ambiguous and
/// is reported.
UnwrapResult unwrap_phase(std::span<const double> series);

/// Root-mean-square of the valid samples.
double rms(const RealSignal& signal);

}  // namespace fibersync::signal
