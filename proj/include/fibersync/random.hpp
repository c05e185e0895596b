#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace fibersync {

// Counter-based and sequential Gaussian sources. Box-Muller is written out
// so realizations do not depend on the standard library's distribution code.

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) noexcept {
    return splitmix64(a ^ splitmix64(b + 0x632be59bd9b4e019ULL));
}

/// Maps 64 random bits to (0, 1).
constexpr double to_unit_open(std::uint64_t bits) noexcept {
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

/// Standard normal value that is a pure function of (seed, stream, index).
inline double counter_normal(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) noexcept {
    const std::uint64_t h = hash_combine(hash_combine(seed, stream), index);
    const double u1 = to_unit_open(splitmix64(h));
    const double u2 = to_unit_open(splitmix64(h ^ 0xd1b54a32d192ed03ULL));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Sequential standard normal generator seeded from (seed, stream).
class NormalStream {
public:
    NormalStream(std::uint64_t seed, std::uint64_t stream) : engine_(hash_combine(seed, stream)) {}

    double operator()() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = to_unit_open(engine_());
        const double u2 = to_unit_open(engine_());
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace fibersync
