#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace unlearn {

struct RngSeed {
    std::uint64_t value = 0;
    friend bool operator==(RngSeed, RngSeed) = default;
};

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Stage sub-seed: master XOR fnv1a64(stage name).
inline RngSeed derive_seed(RngSeed master, std::string_view stage) {
    return RngSeed{master.value ^ fnv1a64(stage)};
}

using Rng = std::mt19937_64;

inline Rng make_rng(RngSeed seed) { return Rng{seed.value}; }

// Uniform in [0,1) from the top 53 bits; fixed across standard libraries,
// unlike std::uniform_real_distribution.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

/// Uniform integer in [0, n).
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
    // Rejection sampling keeps the result unbiased.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t r;
    do r = rng(); while (r >= limit);
    return r % n;
}

/// Standard normal via Box-Muller on uniform01, so streams match across standard libraries.
inline double normal01(Rng& rng) {
    const double u1 = 1.0 - uniform01(rng); // (0,1]
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

template <typename T>
void shuffle(std::vector<T>& xs, Rng& rng) {
    for (std::size_t i = xs.size(); i > 1; --i) std::swap(xs[i - 1], xs[uniform_index(rng, i)]);
}

} // namespace unlearn
