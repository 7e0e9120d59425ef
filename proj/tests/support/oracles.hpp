#pragma once

// Test-only reference implementations, kept independent of the library code
// paths they check.

#include <cstdint>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fevo/text.hpp"

namespace oracles {

/// GAE by the direct double sum A_t = sum_k (gamma*lam)^k * delta_{t+k}.
inline std::vector<double> gae_double_sum(std::span<const double> rewards,
                                          std::span<const double> values, double gamma,
                                          double lam) {
    const std::size_t l = rewards.size();
    std::vector<double> delta(l);
    for (std::size_t t = 0; t < l; ++t) delta[t] = rewards[t] + gamma * values[t + 1] - values[t];
    std::vector<double> adv(l, 0.0);
    for (std::size_t t = 0; t < l; ++t) {
        double coeff = 1.0;
        for (std::size_t k = 0; t + k < l; ++k) {
            adv[t] += coeff * delta[t + k];
            coeff *= gamma * lam;
        }
    }
    return adv;
}

/// Codepoint n-gram shingle set of a string (whole text when shorter than n).
inline std::set<std::string> shingle_set(std::string_view s, std::size_t n) {
    std::vector<fevo::text::Codepoint> cps;
    fevo::text::for_each_codepoint(s, [&](const fevo::text::Codepoint& cp) { cps.push_back(cp); });
    std::set<std::string> out;
    if (cps.size() < n) {
        out.insert(std::string(s));
        return out;
    }
    for (std::size_t i = 0; i + n <= cps.size(); ++i) {
        const std::size_t begin = cps[i].offset;
        const auto& last = cps[i + n - 1];
        out.insert(std::string(s.substr(begin, last.offset + last.size - begin)));
    }
    return out;
}

/// Exact Jaccard similarity of the two shingle sets.
inline double exact_jaccard(std::string_view a, std::string_view b, std::size_t n) {
    const auto sa = shingle_set(a, n);
    const auto sb = shingle_set(b, n);
    std::size_t inter = 0;
    for (const auto& s : sa) inter += sb.count(s);
    const std::size_t uni = sa.size() + sb.size() - inter;
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

/// Evaluates a "a + b - c" style integer expression.
inline long long eval_expression(std::string_view expr) {
    long long acc = 0;
    int sign = 1;
    bool have_first = false;
    std::size_t i = 0;
    auto skip_ws = [&] {
        while (i < expr.size() && expr[i] == ' ') ++i;
    };
    skip_ws();
    while (i < expr.size()) {
        if (!have_first) {
            have_first = true;
        } else {
            if (expr[i] == '+') sign = 1;
            else if (expr[i] == '-') sign = -1;
            else throw std::invalid_argument("bad operator in expression");
            ++i;
            skip_ws();
        }
        bool neg = false;
        if (i < expr.size() && expr[i] == '-') {
            neg = true;
            ++i;
        }
        long long v = 0;
        bool digits = false;
        while (i < expr.size() && expr[i] >= '0' && expr[i] <= '9') {
            v = v * 10 + (expr[i] - '0');
            ++i;
            digits = true;
        }
        if (!digits) throw std::invalid_argument("bad operand in expression");
        acc += sign * (neg ? -v : v);
        skip_ws();
    }
    return acc;
}

}  // namespace oracles
