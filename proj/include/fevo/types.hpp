#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace fevo {

enum class AnswerKind { numeric, short_text, long_text };

inline std::string to_string(AnswerKind k) {
    switch (k) {
        case AnswerKind::numeric: return "numeric";
        case AnswerKind::short_text: return "short_text";
        case AnswerKind::long_text: return "long_text";
    }
    return "numeric";
}

inline AnswerKind answer_kind_from_string(const std::string& s) {
    if (s == "numeric") return AnswerKind::numeric;
    if (s == "short_text") return AnswerKind::short_text;
    if (s == "long_text") return AnswerKind::long_text;
    throw std::invalid_argument("unknown answer kind '" + s + "'");
}

/// The unit of sampling: a prompt with a reference answer.
struct Question {
    std::string id;
    std::string prompt;
    std::string reference_answer;
    AnswerKind answer_kind = AnswerKind::numeric;
    std::string source_tag;
};

/**
 * One generated token sequence. For length l: tokens, logp_new and logp_old
 * have l entries; values has l+1 with values[l] == 0 for the terminal state.
 */
struct Trajectory {
    std::string question_id;
    std::vector<int> tokens;
    std::vector<double> logp_new;
    std::vector<double> logp_old;
    std::vector<double> values;
    double terminal_reward = 0.0;
    bool is_correct = false;

    std::size_t length() const { return tokens.size(); }

    void check() const {
        const std::size_t l = tokens.size();
        if (logp_new.size() != l || logp_old.size() != l)
            throw std::invalid_argument("trajectory log-prob lengths must equal token count");
        if (values.size() != l + 1)
            throw std::invalid_argument("trajectory values must have length l+1");
        if (values.back() != 0.0)
            throw std::invalid_argument("terminal state value must be 0");
        for (double v : values)
            if (!std::isfinite(v)) throw std::invalid_argument("non-finite value estimate");
    }
};

/// The n trajectories generated for one question in one rollout round.
struct RolloutGroup {
    std::string question_id;
    std::vector<Trajectory> trajectories;

    std::size_t size() const { return trajectories.size(); }

    double group_accuracy() const {
        if (trajectories.empty()) throw std::invalid_argument("empty rollout group");
        std::size_t correct = 0;
        for (const auto& t : trajectories) correct += t.is_correct ? 1 : 0;
        return static_cast<double>(correct) / static_cast<double>(trajectories.size());
    }

    std::size_t correct_count() const {
        std::size_t correct = 0;
        for (const auto& t : trajectories) correct += t.is_correct ? 1 : 0;
        return correct;
    }
};

}  // namespace fevo
