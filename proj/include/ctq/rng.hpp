#ifndef CTQ_RNG_HPP
#define CTQ_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>

namespace ctq {

// Seed mixing and raw-bit-to-double conversion are pinned here so that
// results are bit-identical across platforms and across worker counts.
// std::mt19937_64 output is fully specified by the standard; the
// distributions in <random> are not, so we roll our own below.

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Derive the seed of sub-stream `index` from a base seed. Streams with
/// distinct indices are statistically independent; the mapping is pure,
/// so batched work can run in any order on any number of workers.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
    return splitmix64(splitmix64(base) ^ splitmix64(index + 0x632BE59BD9B4E019ull));
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

inline Rng derive_stream(std::uint64_t base, std::uint64_t index) {
    return Rng(derive_seed(base, index));
}

/// Uniform draw on [0, 1).
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform draw on (0, 1].
inline double uniform01_open_low(Rng& rng) {
    return static_cast<double>((rng() >> 11) + 1) * 0x1.0p-53;
}

/// Standard normal via Box-Muller. Uses two uniforms per draw and keeps no
/// state, which keeps consumption per call fixed.
inline double normal01(Rng& rng) {
    const double u1 = uniform01_open_low(rng);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

inline double uniform_in(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

}  // namespace ctq

#endif  // CTQ_RNG_HPP
