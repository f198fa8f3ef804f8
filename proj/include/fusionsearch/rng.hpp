#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

namespace fusionsearch {

// All stochastic code in this project draws through the helpers below instead
// of std::*_distribution, so that a given seed produces the same stream on
// every standard library.
using Rng = std::mt19937_64;

// Uniform double in [0, 1), 53 random bits.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_real(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

// Unbiased integer in [0, n), n >= 1.
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t n) {
    const std::uint64_t limit =
        std::numeric_limits<std::uint64_t>::max() -
        std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x = rng();
    while (x >= limit) {
        x = rng();
    }
    return x % n;
}

// Inclusive range [lo, hi].
inline int uniform_int(Rng& rng, int lo, int hi) {
    return lo + static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(hi - lo) + 1));
}

// Standard normal via Box-Muller. Consumes exactly two engine draws, keeps no
// state between calls.
inline double normal(Rng& rng) {
    const double u1 = (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

}  // namespace fusionsearch
