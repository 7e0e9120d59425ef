#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fevo/config.hpp"
#include "fevo/jsonl.hpp"
#include "fevo/rng.hpp"
#include "fevo/types.hpp"

namespace fevo::sampler {

/**
 * Balanced batching: rollout batches are composed from per-question accuracy
 * records so that hard and easy questions stay under configured caps, and
 * all-correct/all-wrong rollout groups are dropped before parameter updates.
 */

enum class Difficulty { hard, easy, mid, unseen };

inline std::string to_string(Difficulty d) {
    switch (d) {
        case Difficulty::hard: return "hard";
        case Difficulty::easy: return "easy";
        case Difficulty::mid: return "mid";
        case Difficulty::unseen: return "unseen";
    }
    return "unseen";
}

struct LedgerEntry {
    std::uint64_t attempts = 0;
    std::uint64_t correct = 0;

    double accuracy() const {
        if (attempts == 0) throw std::logic_error("accuracy undefined until attempts > 0");
        return static_cast<double>(correct) / static_cast<double>(attempts);
    }
};

/// Lifetime running accuracy per question; persists across epochs. std::map
/// keeps iteration (and snapshots) deterministic.
class AccuracyLedger {
public:
    const LedgerEntry* lookup(const std::string& question_id) const {
        auto it = entries_.find(question_id);
        return it == entries_.end() ? nullptr : &it->second;
    }

    void record(const std::string& question_id, std::uint64_t attempts, std::uint64_t correct) {
        if (correct > attempts) throw std::invalid_argument("ledger: correct > attempts");
        auto& e = entries_[question_id];
        e.attempts += attempts;
        e.correct += correct;
    }

    std::size_t size() const { return entries_.size(); }
    const std::map<std::string, LedgerEntry>& entries() const { return entries_; }

    std::uint64_t total_attempts() const {
        std::uint64_t n = 0;
        for (const auto& [id, e] : entries_) n += e.attempts;
        return n;
    }

    void save_jsonl(const std::string& path) const {
        std::vector<jsonl::json> rows;
        rows.reserve(entries_.size());
        for (const auto& [id, e] : entries_)
            rows.push_back({{"question_id", id}, {"attempts", e.attempts}, {"correct", e.correct}});
        jsonl::write_all(path, rows);
    }

    static AccuracyLedger load_jsonl(const std::string& path) {
        AccuracyLedger ledger;
        for (const auto& row : jsonl::read_all(path)) {
            ledger.record(row.at("question_id").get<std::string>(),
                          row.at("attempts").get<std::uint64_t>(),
                          row.at("correct").get<std::uint64_t>());
        }
        return ledger;
    }

private:
    std::map<std::string, LedgerEntry> entries_;
};

/// Unseen until attempted; hard at accuracy <= m_hard, easy at >= m_easy.
inline Difficulty classify(const LedgerEntry* entry, double m_hard, double m_easy) {
    if (!entry || entry->attempts == 0) return Difficulty::unseen;
    const double acc = entry->accuracy();
    if (acc <= m_hard) return Difficulty::hard;
    if (acc >= m_easy) return Difficulty::easy;
    return Difficulty::mid;
}

struct BatchPlan {
    std::vector<std::string> question_ids;
    std::size_t n_hard = 0;
    std::size_t n_easy = 0;
    std::size_t n_mid = 0;
    std::size_t n_unseen = 0;
};

class PoolExhausted : public std::runtime_error {
public:
    PoolExhausted(std::size_t hard, std::size_t easy, std::size_t mid, std::size_t unseen)
        : std::runtime_error("question pool exhausted after category exclusions (hard=" +
                             std::to_string(hard) + " easy=" + std::to_string(easy) +
                             " mid=" + std::to_string(mid) + " unseen=" + std::to_string(unseen) + ")"),
          n_hard(hard), n_easy(easy), n_mid(mid), n_unseen(unseen) {}
    std::size_t n_hard, n_easy, n_mid, n_unseen;
};

/**
 * Builds one rollout batch of `size` question ids from `pool`. In caps mode a
 * seeded shuffle is walked and hard/easy questions are admitted only while
 * below floor(l_hard_frac*size) / floor(l_easy_frac*size); band mode admits
 * only mid questions; mode none admits everything. Unseen questions are never
 * capped. Deterministic given the rng state.
 */
inline BatchPlan build_rollout_batch(const AccuracyLedger& ledger,
                                     std::span<const std::string> pool, std::size_t size,
                                     const TrainConfig& cfg, Rng& rng) {
    if (pool.size() < size)
        throw std::invalid_argument("build_rollout_batch: pool smaller than batch size");
    const std::size_t max_hard =
        static_cast<std::size_t>(std::floor(cfg.l_hard_frac * static_cast<double>(size)));
    const std::size_t max_easy =
        static_cast<std::size_t>(std::floor(cfg.l_easy_frac * static_cast<double>(size)));

    std::vector<std::string> shuffled(pool.begin(), pool.end());
    shuffle(shuffled, rng);

    BatchPlan plan;
    for (const auto& id : shuffled) {
        if (plan.question_ids.size() == size) break;
        const Difficulty d = classify(ledger.lookup(id), cfg.m_hard, cfg.m_easy);
        bool admit = true;
        if (cfg.batch_mode == BatchMode::caps) {
            if (d == Difficulty::hard) admit = plan.n_hard < max_hard;
            else if (d == Difficulty::easy) admit = plan.n_easy < max_easy;
        } else if (cfg.batch_mode == BatchMode::band) {
            admit = d == Difficulty::mid || d == Difficulty::unseen;
        }
        if (!admit) continue;
        plan.question_ids.push_back(id);
        switch (d) {
            case Difficulty::hard: ++plan.n_hard; break;
            case Difficulty::easy: ++plan.n_easy; break;
            case Difficulty::mid: ++plan.n_mid; break;
            case Difficulty::unseen: ++plan.n_unseen; break;
        }
    }
    if (plan.question_ids.size() < size)
        throw PoolExhausted(plan.n_hard, plan.n_easy, plan.n_mid, plan.n_unseen);
    return plan;
}

/// Keeps only informative groups: 0 < group_accuracy < 1, order preserved.
inline std::vector<RolloutGroup> filter_informative(std::vector<RolloutGroup> groups) {
    std::vector<RolloutGroup> out;
    out.reserve(groups.size());
    for (auto& g : groups) {
        const double acc = g.group_accuracy();
        if (acc > 0.0 && acc < 1.0) out.push_back(std::move(g));
    }
    return out;
}

/// Adds every group (including ones a later filter drops) to the ledger.
inline void update_ledger(AccuracyLedger& ledger, std::span<const RolloutGroup> groups) {
    for (const auto& g : groups) ledger.record(g.question_id, g.size(), g.correct_count());
}

struct WasteReport {
    std::size_t rounds = 0;
    std::size_t generated = 0;  // rollout groups produced
    std::size_t discarded = 0;  // groups dropped as all-correct/all-wrong

    double discarded_fraction() const {
        return generated == 0 ? 0.0 : static_cast<double>(discarded) / static_cast<double>(generated);
    }
};

class MaxRoundsExceeded : public std::runtime_error {
public:
    explicit MaxRoundsExceeded(const WasteReport& r)
        : std::runtime_error("max rollout rounds exceeded (rounds=" + std::to_string(r.rounds) +
                             " generated=" + std::to_string(r.generated) +
                             " discarded=" + std::to_string(r.discarded) + ")"),
          report(r) {}
    WasteReport report;
};

using RolloutFn = std::function<std::vector<RolloutGroup>(const BatchPlan&)>;

/**
 * Repeats build -> rollout -> ledger update -> informative filter until at
 * least cfg.mini_batch informative groups have accumulated. Throws
 * MaxRoundsExceeded carrying the WasteReport when cfg.max_rollout_rounds
 * rounds pass without reaching the target.
 */
inline std::pair<std::vector<RolloutGroup>, WasteReport> accumulate_update_batch(
    AccuracyLedger& ledger, std::span<const std::string> pool, const TrainConfig& cfg,
    const RolloutFn& rollout_fn, Rng& rng) {
    std::vector<RolloutGroup> kept;
    WasteReport report;
    const auto target = static_cast<std::size_t>(cfg.mini_batch);
    while (kept.size() < target) {
        if (report.rounds == static_cast<std::size_t>(cfg.max_rollout_rounds))
            throw MaxRoundsExceeded(report);
        ++report.rounds;
        BatchPlan plan = build_rollout_batch(ledger, pool,
                                             static_cast<std::size_t>(cfg.prompts_per_batch), cfg, rng);
        std::vector<RolloutGroup> groups = rollout_fn(plan);
        update_ledger(ledger, groups);
        const std::size_t produced = groups.size();
        report.generated += produced;
        std::vector<RolloutGroup> informative = filter_informative(std::move(groups));
        report.discarded += produced - informative.size();
        for (auto& g : informative) kept.push_back(std::move(g));
    }
    return {std::move(kept), report};
}

}  // namespace fevo::sampler
