#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "fevo/advantage.hpp"
#include "fevo/config.hpp"
#include "fevo/jsonl.hpp"
#include "fevo/objective.hpp"
#include "fevo/reward.hpp"
#include "fevo/rng.hpp"
#include "fevo/sampler.hpp"
#include "fevo/types.hpp"

namespace fevo::toy {

/**
 * Desk-scale training harness: a synthetic arithmetic question bank, a
 * linear-softmax policy that emits the <think>...</think>\boxed{...} skeleton
 * over a per-question candidate vocabulary, a tabular value estimator, and the
 * full RL loop (critic warmup -> balanced rollout -> reward -> GAE -> combined
 * loss update -> ledger update).
 */

enum class Tier { easy, mid, hard };

inline std::string to_string(Tier t) {
    switch (t) {
        case Tier::easy: return "easy";
        case Tier::mid: return "mid";
        case Tier::hard: return "hard";
    }
    return "easy";
}

inline Tier tier_from_string(const std::string& s) {
    if (s == "easy") return Tier::easy;
    if (s == "mid") return Tier::mid;
    if (s == "hard") return Tier::hard;
    throw std::invalid_argument("unknown tier '" + s + "'");
}

/// Operand count per expression; harder questions are longer.
inline std::size_t operand_count(Tier t) {
    switch (t) {
        case Tier::easy: return 2;
        case Tier::mid: return 3;
        case Tier::hard: return 4;
    }
    return 2;
}

/// Answer-candidate vocabulary size; harder questions offer more distractors.
inline std::size_t candidate_count(Tier t) {
    switch (t) {
        case Tier::easy: return 4;
        case Tier::mid: return 8;
        case Tier::hard: return 12;
    }
    return 4;
}

/// Strength of the discriminative feature; harder questions learn slower.
inline double tier_clarity(Tier t) {
    switch (t) {
        case Tier::easy: return 1.0;
        case Tier::mid: return 0.7;
        case Tier::hard: return 0.33;
    }
    return 1.0;
}

struct ToyQuestion {
    Question question;
    Tier tier = Tier::easy;
    std::string expression;             // e.g. "12 + 7 - 3"
    long long answer = 0;
    std::vector<long long> candidates;  // contains the answer exactly once
    std::size_t correct_index = 0;
};

struct TierMix {
    double easy = 0.3;
    double mid = 0.4;
    double hard = 0.3;

    void validate() const {
        if (easy < 0 || mid < 0 || hard < 0 || std::abs(easy + mid + hard - 1.0) > 1e-9)
            throw std::invalid_argument("tier mix fractions must be non-negative and sum to 1");
    }
};

struct ToyQuestionBank {
    std::vector<ToyQuestion> questions;
    std::uint64_t seed = 0;

    const ToyQuestion& find(const std::string& id) const {
        auto it = index_.find(id);
        if (it == index_.end()) throw std::out_of_range("unknown question id '" + id + "'");
        return questions[it->second];
    }

    std::vector<std::string> ids() const {
        std::vector<std::string> out;
        out.reserve(questions.size());
        for (const auto& q : questions) out.push_back(q.question.id);
        return out;
    }

    void rebuild_index() {
        index_.clear();
        for (std::size_t i = 0; i < questions.size(); ++i) index_[questions[i].question.id] = i;
    }

private:
    std::unordered_map<std::string, std::size_t> index_;
};

namespace detail {

inline const std::vector<std::string>& prompt_templates() {
    static const std::vector<std::string> t = {
        "Compute the value of EXPR.",
        "Net cash flow arrives as EXPR. Report the total.",
        "A ledger posts EXPR in sequence. What is the closing balance?",
    };
    return t;
}

struct Expression {
    std::string text;
    long long value = 0;
};

inline Expression make_expression(Tier tier, Rng& rng) {
    Expression e;
    const std::size_t ops = operand_count(tier);
    long long acc = 5 + static_cast<long long>(bounded(rng, 26));
    e.text = std::to_string(acc);
    for (std::size_t i = 1; i < ops; ++i) {
        const long long operand = 2 + static_cast<long long>(bounded(rng, 18));
        const bool add = bounded(rng, 2) == 0;
        e.text += add ? " + " : " - ";
        e.text += std::to_string(operand);
        acc += add ? operand : -operand;
    }
    e.value = acc;
    return e;
}

inline std::vector<long long> make_candidates(long long answer, Tier tier, Rng& rng) {
    const std::size_t k = candidate_count(tier);
    std::vector<long long> out = {answer};
    auto push_unique = [&](long long v) {
        for (long long existing : out)
            if (existing == v) return;
        out.push_back(v);
    };
    while (out.size() < k) {
        switch (bounded(rng, 4)) {
            case 0: push_unique(answer + 1 + static_cast<long long>(bounded(rng, 9))); break;
            case 1: push_unique(answer - 1 - static_cast<long long>(bounded(rng, 9))); break;
            case 2: push_unique(answer == 0 ? 10 : -answer); break;
            default: push_unique(answer + 10 + static_cast<long long>(bounded(rng, 20))); break;
        }
    }
    shuffle(out, rng);
    return out;
}

}  // namespace detail

/// Deterministic synthetic bank with exact per-tier counts
/// (floor for easy and mid, remainder hard).
inline ToyQuestionBank generate_bank(std::size_t size, const TierMix& mix, std::uint64_t seed) {
    if (size == 0) throw std::invalid_argument("bank size must be positive");
    mix.validate();
    const auto n_easy = static_cast<std::size_t>(std::floor(mix.easy * static_cast<double>(size)));
    const auto n_mid = static_cast<std::size_t>(std::floor(mix.mid * static_cast<double>(size)));
    const std::size_t n_hard = size - n_easy - n_mid;

    ToyQuestionBank bank;
    bank.seed = seed;
    std::size_t serial = 0;
    auto emit_tier = [&](Tier tier, std::size_t count) {
        for (std::size_t i = 0; i < count; ++i, ++serial) {
            Rng rng = make_rng(seed, std::string_view("bank"), serial);
            ToyQuestion q;
            q.tier = tier;
            detail::Expression expr = detail::make_expression(tier, rng);
            q.expression = expr.text;
            q.answer = expr.value;
            q.candidates = detail::make_candidates(q.answer, tier, rng);
            for (std::size_t c = 0; c < q.candidates.size(); ++c)
                if (q.candidates[c] == q.answer) q.correct_index = c;
            char idbuf[32];
            std::snprintf(idbuf, sizeof(idbuf), "toy-%06zu", serial);
            q.question.id = idbuf;
            const auto& tmpl = detail::prompt_templates()[bounded(rng, detail::prompt_templates().size())];
            std::string prompt = tmpl;
            prompt.replace(prompt.find("EXPR"), 4, expr.text);
            q.question.prompt = prompt;
            q.question.reference_answer = std::to_string(expr.value);
            q.question.answer_kind = AnswerKind::numeric;
            q.question.source_tag = "toy";
            bank.questions.push_back(std::move(q));
        }
    };
    emit_tier(Tier::easy, n_easy);
    emit_tier(Tier::mid, n_mid);
    emit_tier(Tier::hard, n_hard);
    bank.rebuild_index();
    return bank;
}

inline void save_bank(const std::string& path, const ToyQuestionBank& bank) {
    std::vector<jsonl::json> rows;
    rows.reserve(bank.questions.size());
    for (const auto& q : bank.questions) {
        rows.push_back({{"id", q.question.id},
                        {"prompt", q.question.prompt},
                        {"reference_answer", q.question.reference_answer},
                        {"tier", to_string(q.tier)},
                        {"expression", q.expression},
                        {"answer", q.answer},
                        {"candidates", q.candidates},
                        {"correct_index", q.correct_index}});
    }
    jsonl::write_all(path, rows);
}

inline ToyQuestionBank load_bank(const std::string& path) {
    ToyQuestionBank bank;
    for (const auto& j : jsonl::read_all(path)) {
        ToyQuestion q;
        q.question.id = j.at("id").get<std::string>();
        q.question.prompt = j.at("prompt").get<std::string>();
        q.question.reference_answer = j.at("reference_answer").get<std::string>();
        q.question.answer_kind = AnswerKind::numeric;
        q.question.source_tag = "toy";
        q.tier = tier_from_string(j.at("tier").get<std::string>());
        q.expression = j.at("expression").get<std::string>();
        q.answer = j.at("answer").get<long long>();
        q.candidates = j.at("candidates").get<std::vector<long long>>();
        q.correct_index = j.at("correct_index").get<std::size_t>();
        bank.questions.push_back(std::move(q));
    }
    bank.rebuild_index();
    return bank;
}

// ---------------------------------------------------------------------------
// Token layout

// Token ids: structural tokens are fixed, filler tokens live at kFillerBase,
// answer candidates at kCandidateBase + candidate index.
inline constexpr int kTokThinkOpen = 0;
inline constexpr int kTokThinkClose = 1;
inline constexpr int kTokBoxedOpen = 2;
inline constexpr int kTokBraceClose = 3;
inline constexpr int kTokCorrupt = 4;
inline constexpr int kFillerBase = 10;
inline constexpr int kCandidateBase = 100;

inline const std::vector<std::string>& filler_texts() {
    static const std::vector<std::string> f = {" consider", " compute", " check", " verify"};
    return f;
}

/// Think-block filler length tracks the candidate count, so harder questions
/// produce longer responses.
inline std::size_t think_length(Tier t) { return candidate_count(t); }

inline std::string token_text(int id, const ToyQuestion& q) {
    if (id == kTokThinkOpen) return "<think>";
    if (id == kTokThinkClose) return "</think>";
    if (id == kTokBoxedOpen) return "\\boxed{";
    if (id == kTokBraceClose) return "}";
    if (id == kTokCorrupt) return " ~";
    if (id >= kFillerBase && id < kFillerBase + static_cast<int>(filler_texts().size()))
        return filler_texts()[static_cast<std::size_t>(id - kFillerBase)];
    if (id >= kCandidateBase) {
        const auto c = static_cast<std::size_t>(id - kCandidateBase);
        if (c < q.candidates.size()) return std::to_string(q.candidates[c]);
    }
    throw std::invalid_argument("unknown token id " + std::to_string(id));
}

inline std::string render_text(const std::vector<int>& tokens, const ToyQuestion& q) {
    std::string out;
    for (int id : tokens) out += token_text(id, q);
    return out;
}

// ---------------------------------------------------------------------------
// Policy

/// Per-candidate features; only f0 (scaled exact-evaluation indicator) is
/// informative, the rest are nuisance dimensions.
inline constexpr std::size_t kFeatureDim = 6;

inline std::array<double, kFeatureDim> candidate_features(const ToyQuestion& q, std::size_t c) {
    const long long v = q.candidates[c];
    return {
        c == q.correct_index ? tier_clarity(q.tier) : 0.0,
        static_cast<double>(v & 1),
        std::log1p(std::abs(static_cast<double>(v))) / 5.0,
        v < 0 ? 1.0 : 0.0,
        static_cast<double>(c) / static_cast<double>(q.candidates.size()),
        static_cast<double>(((v % 10) + 10) % 10) / 10.0,
    };
}

/**
 * Linear-softmax policy over per-question answer candidates. Structural and
 * filler tokens carry fixed probabilities (format corruption rate and a
 * uniform filler choice), so only the answer token depends on the weights.
 */
class ToyPolicy {
public:
    ToyPolicy() : weights_(kFeatureDim, 0.0) {}
    explicit ToyPolicy(std::vector<double> weights) : weights_(std::move(weights)) {
        if (weights_.size() != kFeatureDim)
            throw std::invalid_argument("policy weights must have dimension 6");
    }

    std::size_t param_count() const { return weights_.size(); }
    const std::vector<double>& weights() const { return weights_; }
    std::vector<double>& weights() { return weights_; }

    /// Log-probabilities over the candidates of q (temperature applied).
    std::vector<double> candidate_logps(const ToyQuestion& q, double temperature) const {
        const std::size_t k = q.candidates.size();
        std::vector<double> logits(k, 0.0);
        double max_logit = -1e300;
        for (std::size_t c = 0; c < k; ++c) {
            const auto phi = candidate_features(q, c);
            double z = 0.0;
            for (std::size_t f = 0; f < kFeatureDim; ++f) z += weights_[f] * phi[f];
            logits[c] = z / temperature;
            max_logit = std::max(max_logit, logits[c]);
        }
        double norm = 0.0;
        for (double z : logits) norm += std::exp(z - max_logit);
        const double log_norm = std::log(norm) + max_logit;
        for (double& z : logits) z -= log_norm;
        return logits;
    }

private:
    std::vector<double> weights_;
};

// ---------------------------------------------------------------------------
// Value estimator

/**
 * Tabular critic keyed by (tier, response position bucket). The terminal
 * bucket is pinned to zero by construction (trajectory values always end in
 * an explicit 0).
 */
class ValueEstimator {
public:
    static constexpr std::size_t kBuckets = 8;

    explicit ValueEstimator(double learning_rate = 0.3) : learning_rate_(learning_rate) {
        table_.fill(0.0);
    }

    static std::size_t bucket(std::size_t position) { return std::min<std::size_t>(position / 4, kBuckets - 1); }

    double value(Tier tier, std::size_t position) const {
        return table_[cell_index(tier, bucket(position))];
    }

    /// Value estimates for every position of a length-l response (l+1 entries,
    /// terminal 0).
    std::vector<double> values_for(Tier tier, std::size_t l) const {
        std::vector<double> v(l + 1, 0.0);
        for (std::size_t t = 0; t < l; ++t) v[t] = value(tier, t);
        return v;
    }

    static std::size_t cell_index(Tier tier, std::size_t bucket) {
        return static_cast<std::size_t>(tier) * kBuckets + bucket;
    }

    /// Accumulates per-cell target means over one update batch.
    struct BatchFit {
        std::array<double, 3 * kBuckets> sum{};
        std::array<std::uint64_t, 3 * kBuckets> count{};

        void add(Tier tier, std::span<const double> targets) {
            for (std::size_t t = 0; t < targets.size(); ++t) {
                const std::size_t i = cell_index(tier, bucket(t));
                sum[i] += targets[t];
                count[i] += 1;
            }
        }
    };

    /// One gradient step of each touched cell toward its batch-mean target.
    void apply(const BatchFit& fit) {
        for (std::size_t i = 0; i < table_.size(); ++i) {
            if (fit.count[i] == 0) continue;
            const double mean = fit.sum[i] / static_cast<double>(fit.count[i]);
            table_[i] += learning_rate_ * (mean - table_[i]);
        }
    }

    double learning_rate() const { return learning_rate_; }
    void set_learning_rate(double lr) { learning_rate_ = lr; }
    const std::array<double, 3 * kBuckets>& table() const { return table_; }
    std::array<double, 3 * kBuckets>& table() { return table_; }

private:
    double learning_rate_;
    std::array<double, 3 * kBuckets> table_{};
};

// ---------------------------------------------------------------------------
// Rollout

/**
 * Samples n trajectories for one question. Structural tokens corrupt with
 * probability cfg.format_dropout (injecting format failures), fillers are
 * uniform, and the answer token follows the policy softmax. The terminal
 * reward is the full rule-based score of the rendered text; intermediate
 * rewards are zero.
 */
inline RolloutGroup rollout(const ToyPolicy& policy, const ValueEstimator& value,
                            const ToyQuestion& q, std::size_t n, const TrainConfig& cfg, Rng& rng) {
    if (n < 1) throw std::invalid_argument("rollout: n must be >= 1");
    RolloutGroup group;
    group.question_id = q.question.id;
    const double d = cfg.format_dropout;
    const std::size_t fillers = think_length(q.tier);
    const auto logps = policy.candidate_logps(q, cfg.temperature);

    for (std::size_t i = 0; i < n; ++i) {
        Trajectory traj;
        traj.question_id = q.question.id;
        auto structural = [&](int id) {
            if (d > 0.0 && uniform01(rng) < d) {
                traj.tokens.push_back(kTokCorrupt);
                traj.logp_old.push_back(std::log(d));
            } else {
                traj.tokens.push_back(id);
                traj.logp_old.push_back(d > 0.0 ? std::log1p(-d) : 0.0);
            }
        };
        structural(kTokThinkOpen);
        for (std::size_t f = 0; f < fillers; ++f) {
            const auto pick = bounded(rng, filler_texts().size());
            traj.tokens.push_back(kFillerBase + static_cast<int>(pick));
            traj.logp_old.push_back(-std::log(static_cast<double>(filler_texts().size())));
        }
        structural(kTokThinkClose);
        structural(kTokBoxedOpen);
        {
            std::vector<double> probs(logps.size());
            for (std::size_t c = 0; c < logps.size(); ++c) probs[c] = std::exp(logps[c]);
            const std::size_t pick = categorical(rng, probs);
            traj.tokens.push_back(kCandidateBase + static_cast<int>(pick));
            traj.logp_old.push_back(logps[pick]);
        }
        structural(kTokBraceClose);

        traj.logp_new = traj.logp_old;
        const std::size_t l = traj.tokens.size();
        traj.values = value.values_for(q.tier, l);
        const std::string raw = render_text(traj.tokens, q);
        const reward::RewardBreakdown rb =
            reward::score(raw, q.question.reference_answer, AnswerKind::numeric, cfg.k_lang);
        traj.terminal_reward = rb.total;
        traj.is_correct = rb.answer_ok;
        traj.check();
        group.trajectories.push_back(std::move(traj));
    }
    return group;
}

// ---------------------------------------------------------------------------
// Update plumbing

/// One trajectory prepared for the objective: log-probs, advantages, and the
/// hooks the policy needs to recompute/differentiate the answer token.
struct UpdateSample {
    std::vector<double> logp_new;
    std::vector<double> logp_old;
    std::vector<double> advantages;
    bool is_correct = false;
    const ToyQuestion* question = nullptr;
    std::size_t answer_pos = 0;
    std::size_t candidate = 0;
    Tier tier = Tier::easy;
};

/// Adapter satisfying objective::policy_gradient's Policy requirements.
class DifferentiableToyPolicy {
public:
    DifferentiableToyPolicy(const ToyPolicy& policy, double temperature)
        : policy_(policy), temperature_(temperature) {}

    std::size_t param_count() const { return policy_.param_count(); }

    /// d logp(answer token)/d weights = (phi_chosen - E_p[phi]) / T; all other
    /// tokens have parameter-independent log-probs.
    void accumulate_logp_grad(const UpdateSample& s, std::size_t t, double weight,
                              std::vector<double>& grad) const {
        if (t != s.answer_pos) return;
        const ToyQuestion& q = *s.question;
        const auto logps = policy_.candidate_logps(q, temperature_);
        std::array<double, kFeatureDim> expectation{};
        for (std::size_t c = 0; c < q.candidates.size(); ++c) {
            const double p = std::exp(logps[c]);
            const auto phi = candidate_features(q, c);
            for (std::size_t f = 0; f < kFeatureDim; ++f) expectation[f] += p * phi[f];
        }
        const auto phi = candidate_features(q, s.candidate);
        for (std::size_t f = 0; f < kFeatureDim; ++f)
            grad[f] += weight * (phi[f] - expectation[f]) / temperature_;
    }

private:
    const ToyPolicy& policy_;
    double temperature_;
};

/// Refreshes logp_new for the answer token under the current weights.
inline void recompute_logp(const ToyPolicy& policy, double temperature, UpdateSample& s) {
    const auto logps = policy.candidate_logps(*s.question, temperature);
    s.logp_new = s.logp_old;
    s.logp_new[s.answer_pos] = logps[s.candidate];
}

inline UpdateSample make_update_sample(const Trajectory& traj, const ToyQuestion& q,
                                       const TrainConfig& cfg) {
    UpdateSample s;
    s.logp_old = traj.logp_old;
    s.logp_new = traj.logp_new;
    s.is_correct = traj.is_correct;
    s.question = &q;
    s.tier = q.tier;
    const std::size_t l = traj.tokens.size();
    s.answer_pos = l - 2;
    if (traj.tokens[s.answer_pos] < kCandidateBase)
        throw std::logic_error("answer token not at expected position");
    s.candidate = static_cast<std::size_t>(traj.tokens[s.answer_pos] - kCandidateBase);

    std::vector<double> rewards(l, 0.0);
    rewards[l - 1] = traj.terminal_reward;
    const double lam = advantage::lambda_actor(l, cfg.alpha);
    s.advantages = advantage::gae(rewards, traj.values, cfg.gamma, lam).advantages;
    return s;
}

// ---------------------------------------------------------------------------
// Training

struct StepMetrics {
    std::int64_t step = 0;
    double mean_reward = 0.0;    // over every trajectory generated this step
    double mean_accuracy = 0.0;  // over every trajectory generated this step
    double mean_length = 0.0;    // over the update batch (informative groups)
    double l_ppo = 0.0;
    double l_nll = 0.0;
    double l_vapo = 0.0;
    double clip_fraction = 0.0;
    double value_loss = 0.0;     // pre-fit probe on this step's targets
    double waste_fraction = 0.0;

    jsonl::json to_json() const {
        return {{"step", step},
                {"mean_reward", mean_reward},
                {"mean_accuracy", mean_accuracy},
                {"mean_length", mean_length},
                {"l_ppo", l_ppo},
                {"l_nll", l_nll},
                {"l_vapo", l_vapo},
                {"clip_fraction", clip_fraction},
                {"value_loss", value_loss},
                {"waste_fraction", waste_fraction}};
    }
};

struct TrainState {
    ToyPolicy policy;
    ValueEstimator value;
    sampler::AccuracyLedger ledger;
    std::int64_t step = 0;  // completed update steps
    bool warmed_up = false;
};

namespace detail {

/// Runs fn(i) for i in [0, count) on `workers` threads; results are written
/// by index so the outcome does not depend on scheduling.
template <typename Fn>
void parallel_indexed(std::size_t count, std::size_t workers, Fn&& fn) {
    if (workers <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::size_t n_threads = std::min(workers, count);
    for (std::size_t w = 0; w < n_threads; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < count; i += n_threads) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

struct GenerationStats {
    double reward_sum = 0.0;
    std::size_t correct = 0;
    std::size_t trajectories = 0;

    void add(const RolloutGroup& g) {
        for (const auto& t : g.trajectories) {
            reward_sum += t.terminal_reward;
            correct += t.is_correct ? 1 : 0;
            ++trajectories;
        }
    }
};

}  // namespace detail

/// Rollout driver for one plan: per-question rng streams derived from
/// (seed, phase, step, round, question id), so results are identical for any
/// worker count and reproducible after resume.
inline std::vector<RolloutGroup> rollout_plan(const sampler::BatchPlan& plan,
                                              const ToyQuestionBank& bank, const ToyPolicy& policy,
                                              const ValueEstimator& value, const TrainConfig& cfg,
                                              std::string_view phase, std::int64_t step,
                                              std::size_t round) {
    std::vector<RolloutGroup> groups(plan.question_ids.size());
    detail::parallel_indexed(plan.question_ids.size(), static_cast<std::size_t>(cfg.workers),
                             [&](std::size_t i) {
                                 const ToyQuestion& q = bank.find(plan.question_ids[i]);
                                 Rng rng = make_rng(cfg.seed, phase, step, round, q.question.id);
                                 groups[i] = rollout(policy, value, q,
                                                     static_cast<std::size_t>(cfg.responses_per_prompt),
                                                     cfg, rng);
                             });
    return groups;
}

/**
 * Critic-only warmup: rollouts feed the ledger and the value table, policy
 * weights stay untouched.
 */
inline void warmup_critic(TrainState& state, const ToyQuestionBank& bank, const TrainConfig& cfg) {
    const auto pool = bank.ids();
    for (std::int64_t w = 0; w < cfg.critic_warmup_steps; ++w) {
        Rng plan_rng = make_rng(cfg.seed, std::string_view("warmup-plan"), w);
        sampler::BatchPlan plan = sampler::build_rollout_batch(
            state.ledger, pool, static_cast<std::size_t>(cfg.prompts_per_batch), cfg, plan_rng);
        auto groups = rollout_plan(plan, bank, state.policy, state.value, cfg, "warmup", w, 0);
        sampler::update_ledger(state.ledger, groups);
        ValueEstimator::BatchFit fit;
        for (const auto& g : groups) {
            const Tier tier = bank.find(g.question_id).tier;
            for (const auto& t : g.trajectories) {
                std::vector<double> rewards(t.length(), 0.0);
                rewards[t.length() - 1] = t.terminal_reward;
                fit.add(tier, advantage::critic_targets(rewards, t.values, cfg.gamma));
            }
        }
        state.value.apply(fit);
    }
    state.warmed_up = true;
}

/**
 * Runs `steps` update steps: accumulate an informative batch, compute
 * length-adaptive GAE per trajectory, take inner_epochs gradient steps on the
 * combined loss, fit the critic on lambda=1 targets, and append one metrics
 * row. steps == 0 is a no-op that touches nothing.
 */
inline std::vector<StepMetrics> train(TrainState& state, const ToyQuestionBank& bank,
                                      const TrainConfig& cfg, std::int64_t steps) {
    std::vector<StepMetrics> metrics;
    if (steps <= 0 || bank.questions.empty()) {
        if (bank.questions.empty() && steps > 0)
            throw std::invalid_argument("train: empty question bank");
        return metrics;
    }
    if (!state.warmed_up) warmup_critic(state, bank, cfg);

    const auto pool = bank.ids();
    state.value.set_learning_rate(cfg.value_lr);
    for (std::int64_t s = 0; s < steps; ++s) {
        const std::int64_t step = state.step;
        detail::GenerationStats gen;
        std::size_t round = 0;
        sampler::RolloutFn rollout_fn = [&](const sampler::BatchPlan& plan) {
            auto groups = rollout_plan(plan, bank, state.policy, state.value, cfg, "train", step, round);
            ++round;
            for (const auto& g : groups) gen.add(g);
            return groups;
        };
        Rng plan_rng = make_rng(cfg.seed, std::string_view("train-plan"), step);
        auto [groups, waste] =
            sampler::accumulate_update_batch(state.ledger, pool, cfg, rollout_fn, plan_rng);

        std::vector<UpdateSample> samples;
        double length_sum = 0.0;
        std::size_t traj_count = 0;
        for (const auto& g : groups) {
            const ToyQuestion& q = bank.find(g.question_id);
            for (const auto& t : g.trajectories) {
                samples.push_back(make_update_sample(t, q, cfg));
                length_sum += static_cast<double>(t.length());
                ++traj_count;
            }
        }

        StepMetrics row;
        row.step = step;
        row.mean_length = traj_count > 0 ? length_sum / static_cast<double>(traj_count) : 0.0;
        row.waste_fraction = waste.discarded_fraction();
        row.mean_reward =
            gen.trajectories > 0 ? gen.reward_sum / static_cast<double>(gen.trajectories) : 0.0;
        row.mean_accuracy = gen.trajectories > 0
                                ? static_cast<double>(gen.correct) / static_cast<double>(gen.trajectories)
                                : 0.0;

        for (std::int64_t epoch = 0; epoch < cfg.inner_epochs; ++epoch) {
            for (auto& s2 : samples) recompute_logp(state.policy, cfg.temperature, s2);
            std::vector<objective::TokenBatchItem> views;
            views.reserve(samples.size());
            for (const auto& s2 : samples)
                views.push_back({s2.logp_new, s2.logp_old, s2.advantages, s2.is_correct});
            const objective::LossReport report = objective::vapo_loss(views, cfg);
            if (epoch == 0) {
                row.l_ppo = report.l_ppo;
                row.l_nll = report.l_nll;
                row.l_vapo = report.l_vapo;
                row.clip_fraction = report.clip_fraction;
            }
            DifferentiableToyPolicy diff(state.policy, cfg.temperature);
            const auto grad = objective::policy_gradient(samples, diff, cfg);
            for (std::size_t f = 0; f < grad.size(); ++f)
                state.policy.weights()[f] -= cfg.policy_lr * grad[f];
        }

        // Critic fit on lambda=1 targets from this batch's rollout values.
        double vloss_sum = 0.0;
        std::size_t vloss_positions = 0;
        ValueEstimator::BatchFit fit;
        for (const auto& g : groups) {
            const Tier tier = bank.find(g.question_id).tier;
            for (const auto& t : g.trajectories) {
                std::vector<double> rewards(t.length(), 0.0);
                rewards[t.length() - 1] = t.terminal_reward;
                const auto targets = advantage::critic_targets(rewards, t.values, cfg.gamma);
                std::vector<double> preds(t.values.begin(), t.values.end() - 1);
                vloss_sum += objective::value_loss(preds, targets) * static_cast<double>(targets.size());
                vloss_positions += targets.size();
                fit.add(tier, targets);
            }
        }
        state.value.apply(fit);
        row.value_loss =
            vloss_positions > 0 ? vloss_sum / static_cast<double>(vloss_positions) : 0.0;

        metrics.push_back(row);
        ++state.step;
    }
    return metrics;
}

/// Convenience entry point with an implicit fresh state.
inline std::vector<StepMetrics> train(const TrainConfig& cfg, const ToyQuestionBank& bank,
                                      std::int64_t steps) {
    TrainState state;
    state.value.set_learning_rate(cfg.value_lr);
    return train(state, bank, cfg, steps);
}

// ---------------------------------------------------------------------------
// Checkpointing

struct BankSpec {
    std::string mode = "generated";  // "generated" | "file"
    std::size_t size = 256;
    TierMix mix;
    std::uint64_t seed = 0;
    std::string path;  // for mode == "file"
};

inline ToyQuestionBank realize_bank(const BankSpec& spec) {
    if (spec.mode == "file") return load_bank(spec.path);
    return generate_bank(spec.size, spec.mix, spec.seed);
}

inline void save_checkpoint(const std::string& path, const TrainState& state, const BankSpec& bank) {
    jsonl::json j = {
        {"format", 1},
        {"step", state.step},
        {"warmed_up", state.warmed_up},
        {"policy_params", state.policy.weights()},
        {"value_table", std::vector<double>(state.value.table().begin(), state.value.table().end())},
        {"value_lr", state.value.learning_rate()},
        {"bank",
         {{"mode", bank.mode},
          {"size", bank.size},
          {"mix", {bank.mix.easy, bank.mix.mid, bank.mix.hard}},
          {"seed", bank.seed},
          {"path", bank.path}}},
    };
    std::vector<jsonl::json> ledger_rows;
    for (const auto& [id, e] : state.ledger.entries())
        ledger_rows.push_back({{"question_id", id}, {"attempts", e.attempts}, {"correct", e.correct}});
    j["ledger"] = ledger_rows;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw jsonl::IoError("cannot open checkpoint for writing: " + path);
    out << j.dump(2) << '\n';
}

struct Checkpoint {
    TrainState state;
    BankSpec bank;
};

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw jsonl::IoError("cannot open checkpoint: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    jsonl::json j = jsonl::json::parse(ss.str());  // throws with byte offset on truncation

    Checkpoint cp;
    cp.state.step = j.at("step").get<std::int64_t>();
    cp.state.warmed_up = j.value("warmed_up", true);
    cp.state.policy = ToyPolicy(j.at("policy_params").get<std::vector<double>>());
    const auto table = j.at("value_table").get<std::vector<double>>();
    if (table.size() != cp.state.value.table().size())
        throw jsonl::IoError("checkpoint value table has wrong size");
    std::copy(table.begin(), table.end(), cp.state.value.table().begin());
    cp.state.value.set_learning_rate(j.value("value_lr", 0.3));
    for (const auto& row : j.at("ledger"))
        cp.state.ledger.record(row.at("question_id").get<std::string>(),
                               row.at("attempts").get<std::uint64_t>(),
                               row.at("correct").get<std::uint64_t>());
    const auto& b = j.at("bank");
    cp.bank.mode = b.at("mode").get<std::string>();
    cp.bank.size = b.at("size").get<std::size_t>();
    const auto mix = b.at("mix").get<std::vector<double>>();
    if (mix.size() == 3) cp.bank.mix = {mix[0], mix[1], mix[2]};
    cp.bank.seed = b.at("seed").get<std::uint64_t>();
    cp.bank.path = b.value("path", "");
    return cp;
}

}  // namespace fevo::toy
