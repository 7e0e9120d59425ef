#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace fevo {

// All randomness in the repository flows from a single config seed. Sub-streams
// are derived by hashing the seed together with string/integer tags, so results
// do not depend on call order or worker count. Draw helpers avoid
// std::*_distribution to keep sequences identical across standard libraries.

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t hash_mix(std::uint64_t h, std::uint64_t v) {
    return splitmix64(h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)));
}

inline std::uint64_t hash_mix(std::uint64_t h, std::string_view s) {
    std::uint64_t f = 0xcbf29ce484222325ULL;  // FNV-1a
    for (unsigned char c : s) {
        f ^= c;
        f *= 0x100000001b3ULL;
    }
    return hash_mix(h, f);
}

inline std::uint64_t derive_seed(std::uint64_t base) { return splitmix64(base); }

template <typename T, typename... Rest>
std::uint64_t derive_seed(std::uint64_t base, const T& tag, const Rest&... rest) {
    return derive_seed(hash_mix(base, tag), rest...);
}

template <typename... Tags>
Rng make_rng(std::uint64_t seed, const Tags&... tags) {
    return Rng(derive_seed(seed, tags...));
}

/// Uniform integer in [0, n) by rejection sampling; n must be positive.
inline std::uint64_t bounded(Rng& rng, std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % n;
}

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// In-place Fisher-Yates shuffle.
template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(bounded(rng, i));
        std::swap(v[i - 1], v[j]);
    }
}

/// Index drawn from unnormalized non-negative weights via inverse CDF.
inline std::size_t categorical(Rng& rng, const std::vector<double>& weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    double u = uniform01(rng) * total;
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
        acc += weights[i];
        if (u < acc) return i;
    }
    return weights.empty() ? 0 : weights.size() - 1;
}

}  // namespace fevo
