#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fevo/config.hpp"

namespace fevo::objective {

/**
 * The combined training objective: a token-mean clipped PPO surrogate plus a
 * mu-weighted NLL term over correct trajectories. All pooling is token-level
 * across the whole batch, never a per-trajectory mean of means.
 */

/// View over one trajectory's update inputs.
struct TokenBatchItem {
    std::span<const double> logp_new;
    std::span<const double> logp_old;
    std::span<const double> advantages;
    bool is_correct = false;
};

struct LossReport {
    double l_ppo = 0.0;
    double l_nll = 0.0;
    double l_vapo = 0.0;
    std::size_t n_tokens = 0;
    std::size_t n_correct_tokens = 0;
    double clip_fraction = 0.0;  // tokens where the clipped branch was strictly active
};

namespace detail {

inline void check_item(const TokenBatchItem& it, std::size_t idx) {
    if (it.logp_new.size() != it.logp_old.size() || it.logp_new.size() != it.advantages.size())
        throw std::invalid_argument("objective: length mismatch in trajectory " + std::to_string(idx));
}

inline double ratio_at(const TokenBatchItem& it, std::size_t idx, std::size_t t) {
    const double r = std::exp(it.logp_new[t] - it.logp_old[t]);
    if (!std::isfinite(r))
        throw std::domain_error("non-finite policy ratio at trajectory " + std::to_string(idx) +
                                ", token " + std::to_string(t));
    return r;
}

// Per-token surrogate evaluation. The min over the raw and clipped branch is
// resolved by value; ties count as unclipped (that branch carries gradient).
struct SurrogateTerm {
    double value;
    bool clipped;
    double ratio;
};

inline SurrogateTerm surrogate(double ratio, double adv, double eps_low, double eps_high) {
    const double clipped_ratio = std::clamp(ratio, 1.0 - eps_low, 1.0 + eps_high);
    const double raw = ratio * adv;
    const double clip = clipped_ratio * adv;
    if (clip < raw) return {clip, true, ratio};
    return {raw, false, ratio};
}

inline std::size_t total_tokens(std::span<const TokenBatchItem> batch) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        check_item(batch[i], i);
        n += batch[i].logp_new.size();
    }
    return n;
}

inline std::size_t correct_tokens(std::span<const TokenBatchItem> batch) {
    std::size_t n = 0;
    for (const auto& it : batch)
        if (it.is_correct) n += it.logp_new.size();
    return n;
}

// Batch-wise advantage normalization (off by default); returns materialized
// per-item advantage vectors.
inline std::vector<std::vector<double>> normalized_advantages(std::span<const TokenBatchItem> batch) {
    std::size_t n = 0;
    double mean = 0.0;
    for (const auto& it : batch)
        for (double a : it.advantages) {
            mean += a;
            ++n;
        }
    mean = n > 0 ? mean / static_cast<double>(n) : 0.0;
    double var = 0.0;
    for (const auto& it : batch)
        for (double a : it.advantages) var += (a - mean) * (a - mean);
    const double stddev = n > 0 ? std::sqrt(var / static_cast<double>(n)) : 0.0;
    std::vector<std::vector<double>> out;
    out.reserve(batch.size());
    for (const auto& it : batch) {
        std::vector<double> row(it.advantages.begin(), it.advantages.end());
        for (double& a : row) a = (a - mean) / (stddev + 1e-8);
        out.push_back(std::move(row));
    }
    return out;
}

}  // namespace detail

/**
 * Clipped PPO surrogate, token-mean over the batch:
 *   -(1/sum|o_i|) * sum_i sum_t min(r*A, clip(r, 1-eps_low, 1+eps_high)*A).
 * Throws std::domain_error naming trajectory and token on non-finite ratios.
 */
inline double ppo_loss(std::span<const TokenBatchItem> batch, double eps_low, double eps_high) {
    if (!(eps_low > 0.0 && eps_high > 0.0))
        throw std::invalid_argument("ppo_loss: clip ranges must be positive");
    const std::size_t n = detail::total_tokens(batch);
    if (n == 0) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto& it = batch[i];
        for (std::size_t t = 0; t < it.logp_new.size(); ++t) {
            const double r = detail::ratio_at(it, i, t);
            acc += detail::surrogate(r, it.advantages[t], eps_low, eps_high).value;
        }
    }
    return -acc / static_cast<double>(n);
}

/**
 * Positive-example LM loss: mean negative log-probability over the tokens of
 * correct trajectories only; 0 when no trajectory is correct.
 */
inline double nll_loss(std::span<const TokenBatchItem> batch) {
    const std::size_t m = detail::correct_tokens(batch);
    if (m == 0) return 0.0;
    double acc = 0.0;
    for (const auto& it : batch) {
        if (!it.is_correct) continue;
        for (double lp : it.logp_new) acc += lp;
    }
    return -acc / static_cast<double>(m);
}

/// Combined loss l_ppo + mu * l_nll with clip accounting.
inline LossReport vapo_loss(std::span<const TokenBatchItem> batch, const TrainConfig& cfg) {
    LossReport rep;
    rep.n_tokens = detail::total_tokens(batch);
    rep.n_correct_tokens = detail::correct_tokens(batch);

    std::vector<std::vector<double>> normed;
    std::vector<TokenBatchItem> view;
    std::span<const TokenBatchItem> effective = batch;
    if (cfg.normalize_advantages && !batch.empty()) {
        normed = detail::normalized_advantages(batch);
        view.reserve(batch.size());
        for (std::size_t i = 0; i < batch.size(); ++i)
            view.push_back({batch[i].logp_new, batch[i].logp_old, normed[i], batch[i].is_correct});
        effective = view;
    }

    std::size_t clipped = 0;
    double acc = 0.0;
    for (std::size_t i = 0; i < effective.size(); ++i) {
        const auto& it = effective[i];
        for (std::size_t t = 0; t < it.logp_new.size(); ++t) {
            const double r = detail::ratio_at(it, i, t);
            const auto term = detail::surrogate(r, it.advantages[t], cfg.eps_low, cfg.eps_high);
            acc += term.value;
            clipped += term.clipped ? 1 : 0;
        }
    }
    rep.l_ppo = rep.n_tokens > 0 ? -acc / static_cast<double>(rep.n_tokens) : 0.0;
    rep.l_nll = nll_loss(effective);
    rep.l_vapo = rep.l_ppo + cfg.mu * rep.l_nll;
    rep.clip_fraction =
        rep.n_tokens > 0 ? static_cast<double>(clipped) / static_cast<double>(rep.n_tokens) : 0.0;
    return rep;
}

/**
 * dL_vapo/dlogp_new per token, treating logp_old and advantages as constants.
 * At the min/clip kinks the unclipped branch is taken. This is the bridge
 * between the loss and any policy that can chain d logp/d params.
 */
inline std::vector<std::vector<double>> logp_grad_weights(std::span<const TokenBatchItem> batch,
                                                          const TrainConfig& cfg) {
    const std::size_t n = detail::total_tokens(batch);
    const std::size_t m = detail::correct_tokens(batch);

    std::vector<std::vector<double>> normed;
    if (cfg.normalize_advantages && !batch.empty()) normed = detail::normalized_advantages(batch);

    std::vector<std::vector<double>> weights;
    weights.reserve(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto& it = batch[i];
        std::vector<double> w(it.logp_new.size(), 0.0);
        for (std::size_t t = 0; t < it.logp_new.size(); ++t) {
            const double adv = cfg.normalize_advantages ? normed[i][t] : it.advantages[t];
            const double r = detail::ratio_at(it, i, t);
            const auto term = detail::surrogate(r, adv, cfg.eps_low, cfg.eps_high);
            double g = 0.0;
            if (!term.clipped && n > 0) g += -(r * adv) / static_cast<double>(n);
            if (it.is_correct && m > 0) g += cfg.mu * (-1.0 / static_cast<double>(m));
            w[t] = g;
        }
        weights.push_back(std::move(w));
    }
    return weights;
}

/**
 * Exact gradient of the combined loss with respect to policy parameters.
 * `Item` must expose logp_new/logp_old/advantages/is_correct; `Policy` must
 * provide param_count() and accumulate_logp_grad(item, t, weight, grad).
 */
template <typename Item, typename Policy>
std::vector<double> policy_gradient(const std::vector<Item>& batch, const Policy& policy,
                                    const TrainConfig& cfg) {
    std::vector<TokenBatchItem> views;
    views.reserve(batch.size());
    for (const auto& item : batch)
        views.push_back({item.logp_new, item.logp_old, item.advantages, item.is_correct});
    const auto weights = logp_grad_weights(views, cfg);

    std::vector<double> grad(policy.param_count(), 0.0);
    for (std::size_t i = 0; i < batch.size(); ++i)
        for (std::size_t t = 0; t < weights[i].size(); ++t)
            if (weights[i][t] != 0.0) policy.accumulate_logp_grad(batch[i], t, weights[i][t], grad);
    return grad;
}

/// Mean squared error between predicted values and critic targets.
inline double value_loss(std::span<const double> values_pred, std::span<const double> targets) {
    if (values_pred.size() != targets.size())
        throw std::invalid_argument("value_loss: length mismatch");
    if (values_pred.empty()) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < values_pred.size(); ++i) {
        const double d = values_pred[i] - targets[i];
        acc += d * d;
    }
    return acc / static_cast<double>(values_pred.size());
}

}  // namespace fevo::objective
