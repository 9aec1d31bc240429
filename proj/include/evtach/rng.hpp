#ifndef EVTACH_RNG_HPP
#define EVTACH_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>

namespace evtach {

// mt19937_64 is bit-exact by the standard; the distribution helpers below are
// hand-rolled because std::*_distribution is implementation-defined and the
// simulator must be reproducible byte-for-byte.

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Stream `index` of master `seed`.
inline std::mt19937_64 seeded_engine(std::uint64_t seed, std::uint64_t index) {
    return std::mt19937_64(splitmix64(seed ^ splitmix64(index)));
}

/// Uniform in [0, 1).
inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform in [lo, hi).
inline double uniform_in(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

/// Uniform integer in [0, n).
inline std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n) {
    return n == 0 ? 0 : rng() % n;
}

/// Standard normal via Box-Muller (one value per call, second discarded).
inline double gaussian(std::mt19937_64& rng) {
    const double u1 = (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53; // (0, 1]
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
}

/// Poisson draw; Knuth's product method for small means, rounded normal
/// approximation beyond 64 where the product would underflow.
inline std::uint64_t poisson(std::mt19937_64& rng, double mean) {
    if (mean <= 0.0) return 0;
    if (mean > 64.0) {
        const double v = mean + std::sqrt(mean) * gaussian(rng);
        return v <= 0.0 ? 0 : static_cast<std::uint64_t>(std::llround(v));
    }
    const double limit = std::exp(-mean);
    std::uint64_t k = 0;
    double prod = uniform01(rng);
    while (prod > limit) {
        ++k;
        prod *= uniform01(rng);
    }
    return k;
}

} // namespace evtach

#endif // EVTACH_RNG_HPP
