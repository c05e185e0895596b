#pragma once

// Seeded generators for the property tests. Every case is reproducible from
// (seed, case index), which is printed on failure.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace fstest {

class Gen {
public:
    explicit Gen(std::uint64_t seed) : engine_(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(engine_); }
    double normal() { return std::normal_distribution<double>()(engine_); }

    /// Exactly representable values k / 2^shift with |k| <= 2^bits.
    double dyadic(int bits, int shift) {
        const auto k = std::uniform_int_distribution<std::int64_t>(-(std::int64_t{1} << bits),
                                                                    std::int64_t{1} << bits)(engine_);
        return std::ldexp(static_cast<double>(k), -shift);
    }

    std::vector<double> normals(std::size_t n, double scale = 1.0) {
        std::vector<double> v(n);
        for (auto& x : v) {
            x = scale * normal();
        }
        return v;
    }

private:
    std::mt19937_64 engine_;
};

inline std::string case_label(std::uint64_t seed, int i) {
    return "seed " + std::to_string(seed) + " case " + std::to_string(i);
}

}  // namespace fstest
