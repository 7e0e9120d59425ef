#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "fevo/rng.hpp"
#include "fevo/text.hpp"

namespace fevo::minhash {

/**
 * MinHash over character-level shingles for near-duplicate detection.
 * Shingles are contiguous codepoint n-grams (so CJK text shingled correctly);
 * permutations are odd-multiplier affine maps on 64-bit hashes, which are
 * bijections of the hash space. Texts shorter than n codepoints contribute a
 * single whole-text shingle.
 */

struct Params {
    std::size_t ngram = 13;
    std::size_t permutations = 256;
    std::size_t bands = 32;
    std::uint64_t seed = 0;

    std::size_t rows() const { return permutations / bands; }

    void validate() const {
        if (ngram == 0 || permutations == 0 || bands == 0)
            throw std::invalid_argument("minhash: parameters must be positive");
        if (permutations % bands != 0)
            throw std::invalid_argument("minhash: permutations must be divisible by bands");
    }
};

struct ShingleSignature {
    std::vector<std::uint64_t> minhash;    // one minimum per permutation
    std::vector<std::uint64_t> band_keys;  // one LSH key per band
};

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Hashes of the distinct codepoint n-grams of `s`.
inline std::vector<std::uint64_t> shingle_hashes(std::string_view s, std::size_t ngram) {
    std::vector<text::Codepoint> cps;
    text::for_each_codepoint(s, [&](const text::Codepoint& cp) { cps.push_back(cp); });
    std::unordered_set<std::uint64_t> seen;
    if (cps.size() < ngram) {
        seen.insert(fnv1a64(s));
    } else {
        for (std::size_t i = 0; i + ngram <= cps.size(); ++i) {
            const std::size_t begin = cps[i].offset;
            const text::Codepoint& last = cps[i + ngram - 1];
            seen.insert(fnv1a64(s.substr(begin, last.offset + last.size - begin)));
        }
    }
    return {seen.begin(), seen.end()};
}

namespace detail {

struct Permutations {
    std::vector<std::uint64_t> mul;  // odd multipliers
    std::vector<std::uint64_t> add;
};

inline Permutations make_permutations(std::size_t count, std::uint64_t seed) {
    Permutations p;
    p.mul.reserve(count);
    p.add.reserve(count);
    Rng rng = make_rng(seed, std::string_view("minhash-permutations"));
    for (std::size_t i = 0; i < count; ++i) {
        p.mul.push_back(rng() | 1ULL);
        p.add.push_back(rng());
    }
    return p;
}

}  // namespace detail

/// Reusable signature computer; builds the permutation table once.
class SignatureBuilder {
public:
    explicit SignatureBuilder(const Params& params)
        : params_(params), perms_(detail::make_permutations(params.permutations, params.seed)) {
        params_.validate();
    }

    const Params& params() const { return params_; }

    ShingleSignature operator()(std::string_view s) const {
        const auto shingles = shingle_hashes(s, params_.ngram);
        ShingleSignature out;
        out.minhash.assign(params_.permutations, UINT64_MAX);
        for (std::uint64_t x : shingles) {
            for (std::size_t i = 0; i < params_.permutations; ++i) {
                const std::uint64_t h = perms_.mul[i] * x + perms_.add[i];
                if (h < out.minhash[i]) out.minhash[i] = h;
            }
        }
        const std::size_t rows = params_.rows();
        out.band_keys.resize(params_.bands);
        for (std::size_t b = 0; b < params_.bands; ++b) {
            std::uint64_t key = hash_mix(0x8f1bbcdcULL, b);
            for (std::size_t r = 0; r < rows; ++r) key = hash_mix(key, out.minhash[b * rows + r]);
            out.band_keys[b] = key;
        }
        return out;
    }

private:
    Params params_;
    detail::Permutations perms_;
};

inline ShingleSignature signature(std::string_view s, const Params& params) {
    params.validate();
    return SignatureBuilder(params)(s);
}

/// Jaccard estimate: fraction of agreeing permutation minima.
inline double estimated_jaccard(const ShingleSignature& a, const ShingleSignature& b) {
    if (a.minhash.size() != b.minhash.size() || a.minhash.empty())
        throw std::invalid_argument("estimated_jaccard: signature size mismatch");
    std::size_t agree = 0;
    for (std::size_t i = 0; i < a.minhash.size(); ++i)
        if (a.minhash[i] == b.minhash[i]) ++agree;
    return static_cast<double>(agree) / static_cast<double>(a.minhash.size());
}

}  // namespace fevo::minhash
