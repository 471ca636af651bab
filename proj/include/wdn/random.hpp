#ifndef WDN_RANDOM_HPP
#define WDN_RANDOM_HPP

#include <cstdint>
#include <cmath>
#include <cstddef>
#include <random>
#include <utility>

namespace wdn {

/// Engine used everywhere a seed is accepted.
using Rng = std::mt19937_64;

/**
 * Derive an independent child seed from a master seed and a counter.
 * This is the splitmix64 finalizer applied to `master + (counter + 1) * golden`,
 * so child streams are reproducible regardless of execution order.
 */
inline std::uint64_t child_seed(std::uint64_t master, std::uint64_t counter) {
    std::uint64_t z = master + (counter + 1) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Uniform double in [0, 1) using the top 53 bits of one draw.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Standard normal draw (Box-Muller, consumes two uniforms).
inline double standard_normal(Rng& rng) {
    double u1 = uniform01(rng);
    double u2 = uniform01(rng);
    if (u1 < 1e-300) {
        u1 = 1e-300;
    }
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

/// Uniform integer in [0, n) by rejection, n > 0.
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
    const std::uint64_t bound = n;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t draw;
    do {
        draw = rng();
    } while (draw >= limit);
    return static_cast<std::size_t>(draw % bound);
}

/// Fisher-Yates shuffle driven by `uniform_index`.
template<typename Container_>
void shuffle(Container_& values, Rng& rng) {
    for (std::size_t i = values.size(); i > 1; --i) {
        std::size_t j = uniform_index(rng, i);
        std::swap(values[i - 1], values[j]);
    }
}

}

#endif
