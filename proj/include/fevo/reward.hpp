#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fevo/text.hpp"
#include "fevo/types.hpp"

namespace fevo::reward {

/**
 * Rule-based reward: a merged format+accuracy reward and a language-consistency
 * reward. A response is well-formed when it carries a <think>...</think> block
 * followed by a final \boxed{...} answer; format failure short-circuits the
 * accuracy check.
 */

// Raised when the rule checker cannot decide a long answer and no judge is
// available to arbitrate. Distinct from "incorrect".
class NeedsJudge : public std::runtime_error {
public:
    NeedsJudge() : std::runtime_error("answer requires judge arbitration") {}
};

enum class Verdict { match, mismatch, needs_judge };

struct ParsedResponse {
    std::optional<std::string> think_block;
    std::optional<std::string> boxed_answer;
    std::string raw;

    bool format_ok() const { return think_block.has_value() && boxed_answer.has_value(); }
};

struct RewardBreakdown {
    bool format_ok = false;
    bool answer_ok = false;
    double r_format_accuracy = -2.0;
    double r_language = 0.0;
    double total = -2.0;
};

/// Extracts the first well-formed think block and the last balanced
/// \boxed{...} span occurring after it. Absence signals format failure;
/// arbitrary input never throws.
inline ParsedResponse parse_response(std::string_view raw) {
    ParsedResponse out;
    out.raw = std::string(raw);

    constexpr std::string_view kThinkOpen = "<think>";
    constexpr std::string_view kThinkClose = "</think>";
    std::size_t open = raw.find(kThinkOpen);
    if (open == std::string_view::npos) return out;
    std::size_t body = open + kThinkOpen.size();
    std::size_t close = raw.find(kThinkClose, body);
    if (close == std::string_view::npos) return out;
    out.think_block = std::string(raw.substr(body, close - body));

    std::string_view tail = raw.substr(close + kThinkClose.size());
    constexpr std::string_view kBoxed = "\\boxed{";
    std::size_t search = 0;
    while (true) {
        std::size_t at = tail.find(kBoxed, search);
        if (at == std::string_view::npos) break;
        std::size_t depth = 1;
        std::size_t i = at + kBoxed.size();
        for (; i < tail.size() && depth > 0; ++i) {
            if (tail[i] == '{') ++depth;
            else if (tail[i] == '}') --depth;
        }
        if (depth == 0) {
            out.boxed_answer = std::string(tail.substr(at + kBoxed.size(), i - 1 - (at + kBoxed.size())));
        }
        search = at + kBoxed.size();
    }
    return out;
}

namespace detail {

// Trailing punctuation and currency/unit symbols dropped during answer
// normalization. '%' stays: it is significant for numeric parsing.
inline const std::vector<std::string>& trailing_punctuation() {
    static const std::vector<std::string> v = {
        ".", ",", ";", ":", "!", "?", "\xE3\x80\x82" /* 。 */, "\xEF\xBC\x8C" /* ， */,
        "\xEF\xBC\x9B" /* ； */, "\xEF\xBC\x9A" /* ： */, "\xEF\xBC\x81" /* ！ */,
        "\xEF\xBC\x9F" /* ？ */, "\xE3\x80\x81" /* 、 */};
    return v;
}

inline const std::vector<std::string>& currency_symbols() {
    static const std::vector<std::string> v = {"$", "\xC2\xA5" /* ¥ */, "\xEF\xBF\xA5" /* ￥ */,
                                               "\xE2\x82\xAC" /* € */, "\xC2\xA3" /* £ */};
    return v;
}

inline const std::vector<std::string>& unit_suffixes() {
    static const std::vector<std::string> v = {
        "\xE7\xBE\x8E\xE5\x85\x83" /* 美元 */, "\xE5\x85\x83" /* 元 */,
        "\xE4\xBA\xBA\xE6\xB0\x91\xE5\xB8\x81" /* 人民币 */, "usd", "rmb", "cny"};
    return v;
}

inline bool strip_suffix(std::string& s, const std::vector<std::string>& suffixes) {
    for (const auto& suf : suffixes) {
        if (s.size() >= suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0) {
            s.erase(s.size() - suf.size());
            return true;
        }
    }
    return false;
}

inline bool strip_prefix(std::string& s, const std::vector<std::string>& prefixes) {
    for (const auto& pre : prefixes) {
        if (s.size() >= pre.size() && s.compare(0, pre.size(), pre) == 0) {
            s.erase(0, pre.size());
            return true;
        }
    }
    return false;
}

}  // namespace detail

/// Canonical answer form: whitespace collapsed, ASCII case-folded, trailing
/// punctuation and currency/unit decorations stripped.
inline std::string normalize_answer(std::string_view raw) {
    std::string s = text::to_lower_ascii(text::collapse_whitespace(raw));
    bool changed = true;
    while (changed && !s.empty()) {
        changed = false;
        changed |= detail::strip_suffix(s, detail::trailing_punctuation());
        changed |= detail::strip_suffix(s, detail::currency_symbols());
        changed |= detail::strip_suffix(s, detail::unit_suffixes());
        changed |= detail::strip_prefix(s, detail::currency_symbols());
        if (changed) s = text::trim(s);
    }
    return s;
}

/// Pluggable arbiter for long answers the rules cannot decide.
class AnswerJudge {
public:
    virtual ~AnswerJudge() = default;
    virtual Verdict equivalent(const std::string& candidate, const std::string& reference,
                               const std::string& question_id) const = 0;
};

/// Offline default: deterministic exact comparison of normalized forms.
class ExactNormalizedJudge final : public AnswerJudge {
public:
    Verdict equivalent(const std::string& candidate, const std::string& reference,
                       const std::string& /*question_id*/) const override {
        return normalize_answer(candidate) == normalize_answer(reference) ? Verdict::match
                                                                          : Verdict::mismatch;
    }
};

inline const AnswerJudge& exact_judge() {
    static const ExactNormalizedJudge judge;
    return judge;
}

// References longer than this are considered rule-unverifiable long answers
// and fall back to the judge when rules say mismatch.
inline constexpr std::size_t kLongAnswerChars = 15;

inline bool numeric_close(double a, double b) {
    if (a == b) return true;
    return std::abs(a - b) <= 1e-6 * std::max(std::abs(a), std::abs(b));
}

/**
 * Rule equivalence of candidate vs reference. Numeric answers additionally
 * parse as plain/percent/fraction numbers and compare with relative tolerance
 * 1e-6. Long-text references (> 15 characters) defer to `judge` when the rules
 * say mismatch; a null judge yields Verdict::needs_judge there.
 */
inline Verdict answers_equivalent(const std::string& candidate, const std::string& reference,
                                  AnswerKind kind, const AnswerJudge* judge = &exact_judge(),
                                  const std::string& question_id = {}) {
    const std::string cn = normalize_answer(candidate);
    const std::string rn = normalize_answer(reference);
    if (!cn.empty() && cn == rn) return Verdict::match;
    if (kind == AnswerKind::numeric) {
        auto cv = text::parse_number(cn);
        auto rv = text::parse_number(rn);
        if (cv && rv) return numeric_close(*cv, *rv) ? Verdict::match : Verdict::mismatch;
    }
    if (kind == AnswerKind::long_text && text::codepoint_count(reference) > kLongAnswerChars) {
        if (!judge) return Verdict::needs_judge;
        return judge->equivalent(candidate, reference, question_id);
    }
    return Verdict::mismatch;
}

/**
 * Merged format+accuracy reward: -2.0 when the response skeleton is missing
 * (accuracy is never evaluated then), 2.0 when the boxed answer matches the
 * reference, -1.5 otherwise. Throws NeedsJudge when arbitration is required
 * but unavailable.
 */
inline double score_format_accuracy(const ParsedResponse& parsed, const std::string& reference,
                                    AnswerKind kind, const AnswerJudge* judge = &exact_judge(),
                                    const std::string& question_id = {}) {
    if (!parsed.format_ok()) return -2.0;
    Verdict v = answers_equivalent(*parsed.boxed_answer, reference, kind, judge, question_id);
    if (v == Verdict::needs_judge) throw NeedsJudge();
    return v == Verdict::match ? 2.0 : -1.5;
}

/**
 * Language-consistency reward over character counts: CJK ideographs count
 * toward p_cn, Latin letters toward p_en, everything else is excluded from the
 * denominator. -0.5 when both shares fall below k; responses with no
 * classified characters score 0.
 */
inline double score_language(std::string_view raw, double k) {
    if (!(k > 0.0 && k <= 1.0)) throw std::invalid_argument("language threshold must be in (0,1]");
    std::size_t cn = 0, en = 0;
    text::for_each_codepoint(raw, [&](const text::Codepoint& cp) {
        if (text::is_cjk(cp.value)) ++cn;
        else if (text::is_latin_letter(cp.value)) ++en;
    });
    const std::size_t classified = cn + en;
    if (classified == 0) return 0.0;
    const double p_cn = static_cast<double>(cn) / static_cast<double>(classified);
    const double p_en = static_cast<double>(en) / static_cast<double>(classified);
    return (p_cn < k && p_en < k) ? -0.5 : 0.0;
}

/// Full breakdown for one response; total = r_format_accuracy + r_language.
inline RewardBreakdown score(std::string_view raw, const std::string& reference, AnswerKind kind,
                             double k_lang, const AnswerJudge* judge = &exact_judge(),
                             const std::string& question_id = {}) {
    ParsedResponse parsed = parse_response(raw);
    RewardBreakdown out;
    out.format_ok = parsed.format_ok();
    out.r_format_accuracy = score_format_accuracy(parsed, reference, kind, judge, question_id);
    out.answer_ok = out.r_format_accuracy == 2.0;
    out.r_language = score_language(raw, k_lang);
    out.total = out.r_format_accuracy + out.r_language;
    return out;
}

}  // namespace fevo::reward
