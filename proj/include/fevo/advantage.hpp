#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace fevo::advantage {

struct AdvantageResult {
    std::vector<double> advantages;  // A_t, length l
    std::vector<double> returns;     // critic regression targets A_t + V_t, length l
};

/**
 * Length-adaptive GAE coefficient for the actor: 1 - 1/(alpha*l), clamped to
 * [0,1]. Short outputs (l <= 1/alpha) clamp to 0, which collapses GAE to
 * one-step TD.
 */
inline double lambda_actor(std::size_t l, double alpha) {
    if (l < 1) throw std::invalid_argument("lambda_actor: length must be >= 1");
    if (!(alpha > 0.0)) throw std::invalid_argument("lambda_actor: alpha must be > 0");
    const double raw = 1.0 - 1.0 / (alpha * static_cast<double>(l));
    return std::clamp(raw, 0.0, 1.0);
}

/**
 * Generalized advantage estimation via the backward recursion
 *   delta_t = r_t + gamma*V_{t+1} - V_t
 *   A_t     = delta_t + gamma*lam*A_{t+1}
 * values must hold l+1 entries with values[l] == 0 (terminal state).
 * returns[t] = A_t + V_t.
 */
inline AdvantageResult gae(std::span<const double> rewards, std::span<const double> values,
                           double gamma, double lam) {
    const std::size_t l = rewards.size();
    if (values.size() != l + 1)
        throw std::invalid_argument("gae: values must have length rewards.size()+1");
    if (l == 0) throw std::invalid_argument("gae: empty trajectory");
    if (values[l] != 0.0) throw std::invalid_argument("gae: terminal value must be 0");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("gae: gamma must be in (0,1]");
    if (!(lam >= 0.0 && lam <= 1.0)) throw std::invalid_argument("gae: lambda must be in [0,1]");
    for (double r : rewards)
        if (!std::isfinite(r)) throw std::invalid_argument("gae: non-finite reward");
    for (double v : values)
        if (!std::isfinite(v)) throw std::invalid_argument("gae: non-finite value");

    AdvantageResult out;
    out.advantages.resize(l);
    out.returns.resize(l);
    double next = 0.0;
    for (std::size_t i = l; i-- > 0;) {
        const double delta = rewards[i] + gamma * values[i + 1] - values[i];
        next = delta + gamma * lam * next;
        out.advantages[i] = next;
        out.returns[i] = next + values[i];
    }
    return out;
}

/// Monte-Carlo style critic targets (lambda = 1): discounted reward-to-go.
inline std::vector<double> critic_targets(std::span<const double> rewards,
                                          std::span<const double> values, double gamma) {
    return gae(rewards, values, gamma, 1.0).returns;
}

}  // namespace fevo::advantage
