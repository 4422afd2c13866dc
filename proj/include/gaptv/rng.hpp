#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace gaptv::rng {

// mt19937_64 is bit-exact across standard libraries; the std:: distributions
// are not, so every draw we ship goes through the helpers below.
using Engine = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Derive an independent stream seed from a base seed and up to three tags.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
    std::uint64_t s = base;
    std::uint64_t out = splitmix64(s);
    s ^= a * 0xff51afd7ed558ccdULL;
    out ^= splitmix64(s);
    s ^= b * 0xc4ceb9fe1a85ec53ULL;
    out ^= splitmix64(s);
    s ^= c * 0x2545f4914f6cdd1dULL;
    out ^= splitmix64(s);
    return out;
}

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform_real(Engine& eng) {
    return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, n) by rejection; n must be positive.
inline std::uint64_t uniform_below(Engine& eng, std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - ~std::uint64_t{0} % n;
    std::uint64_t v;
    do {
        v = eng();
    } while (v >= limit);
    return v % n;
}

inline int uniform_int(Engine& eng, int lo, int hi) {
    return lo + static_cast<int>(uniform_below(
                    eng, static_cast<std::uint64_t>(hi - lo) + 1));
}

/// Standard normal via Box-Muller (cosine branch only, no cached spare).
inline double normal(Engine& eng) {
    double u1 = uniform_real(eng);
    while (u1 <= 0.0) u1 = uniform_real(eng);
    const double u2 = uniform_real(eng);
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.141592653589793238462643383279502884 * u2);
}

template <class T>
void shuffle(std::vector<T>& v, Engine& eng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = uniform_below(eng, i);
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace gaptv::rng
