#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fevo/jsonl.hpp"
#include "fevo/minhash.hpp"
#include "fevo/reward.hpp"
#include "fevo/rng.hpp"
#include "fevo/text.hpp"

namespace fevo::curation {

/**
 * Composable curation pipeline. Records flow through named stages in order;
 * filters reject with a reason, transforms rewrite in place, the dedup stage
 * works corpus-wide, and the choice conversion stage may emit several records
 * per input. Every decision lands in the record's audit trail and rejected
 * records additionally land in the pipeline's reject report.
 */

struct ChoiceOption {
    std::string label;
    std::string text;
    bool correct = false;
};

struct AuditEntry {
    std::string stage;
    bool accepted = true;
    std::string reason;
};

struct PipelineRecord {
    std::string id;
    std::string prompt;
    std::string reference_answer;
    std::optional<std::string> generated_answer;
    std::optional<std::vector<ChoiceOption>> choices;
    std::optional<std::string> cot;
    std::map<std::string, std::string> meta;
    std::vector<AuditEntry> audit;
};

inline void to_json(jsonl::json& j, const ChoiceOption& o) {
    j = {{"label", o.label}, {"text", o.text}, {"correct", o.correct}};
}

inline void from_json(const jsonl::json& j, ChoiceOption& o) {
    o.label = j.at("label").get<std::string>();
    o.text = j.at("text").get<std::string>();
    o.correct = j.value("correct", false);
}

inline void to_json(jsonl::json& j, const AuditEntry& a) {
    j = {{"stage", a.stage}, {"decision", a.accepted ? "accept" : "reject"}, {"reason", a.reason}};
}

inline void from_json(const jsonl::json& j, AuditEntry& a) {
    a.stage = j.at("stage").get<std::string>();
    a.accepted = j.value("decision", "accept") == "accept";
    a.reason = j.value("reason", "");
}

inline void to_json(jsonl::json& j, const PipelineRecord& r) {
    j = {{"id", r.id}, {"prompt", r.prompt}, {"reference_answer", r.reference_answer}};
    if (r.generated_answer) j["generated_answer"] = *r.generated_answer;
    if (r.choices) j["choices"] = *r.choices;
    if (r.cot) j["cot"] = *r.cot;
    if (!r.meta.empty()) j["meta"] = r.meta;
    if (!r.audit.empty()) j["audit"] = r.audit;
}

inline void from_json(const jsonl::json& j, PipelineRecord& r) {
    r.id = j.at("id").get<std::string>();
    r.prompt = j.value("prompt", "");
    r.reference_answer = j.value("reference_answer", "");
    if (j.contains("generated_answer")) r.generated_answer = j["generated_answer"].get<std::string>();
    if (j.contains("choices")) r.choices = j["choices"].get<std::vector<ChoiceOption>>();
    if (j.contains("cot")) r.cot = j["cot"].get<std::string>();
    if (j.contains("meta")) r.meta = j["meta"].get<std::map<std::string, std::string>>();
    if (j.contains("audit")) r.audit = j["audit"].get<std::vector<AuditEntry>>();
}

struct StageDecision {
    bool accept = true;
    std::string reason;

    static StageDecision ok() { return {true, ""}; }
    static StageDecision reject(std::string reason) { return {false, std::move(reason)}; }
};

// ---------------------------------------------------------------------------
// URL and marker scanning

namespace detail {

inline bool is_url_start(std::string_view s, std::size_t pos) {
    return s.compare(pos, 7, "http://") == 0 || s.compare(pos, 8, "https://") == 0 ||
           s.compare(pos, 4, "www.") == 0;
}

/// Byte spans of whitespace-delimited URL tokens.
inline std::vector<std::pair<std::size_t, std::size_t>> url_spans(std::string_view s) {
    std::vector<std::pair<std::size_t, std::size_t>> spans;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!is_url_start(s, i)) continue;
        std::size_t end = i;
        while (end < s.size() && !std::isspace(static_cast<unsigned char>(s[end]))) ++end;
        spans.emplace_back(i, end);
        i = end;
    }
    return spans;
}

inline std::vector<std::string_view> split_lines(std::string_view s) {
    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        std::size_t eol = s.find('\n', pos);
        if (eol == std::string_view::npos) {
            lines.push_back(s.substr(pos));
            break;
        }
        lines.push_back(s.substr(pos, eol - pos));
        pos = eol + 1;
    }
    return lines;
}

/// Uppercase standalone word match (used for the NOT negation marker).
inline bool contains_upper_word(std::string_view s, std::string_view word) {
    std::size_t pos = 0;
    while ((pos = s.find(word, pos)) != std::string_view::npos) {
        const bool left_ok = pos == 0 || !std::isalpha(static_cast<unsigned char>(s[pos - 1]));
        const std::size_t after = pos + word.size();
        const bool right_ok = after >= s.size() || !std::isalpha(static_cast<unsigned char>(s[after]));
        if (left_ok && right_ok) return true;
        pos = after;
    }
    return false;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Per-record stages

/// Transform: removes URLs and collapses the surrounding whitespace.
inline std::string strip_hyperlinks(std::string_view s) {
    const auto spans = detail::url_spans(s);
    std::string out;
    out.reserve(s.size());
    std::size_t pos = 0;
    for (const auto& [begin, end] : spans) {
        out.append(s.substr(pos, begin - pos));
        pos = end;
    }
    out.append(s.substr(pos));
    return text::collapse_whitespace(out);
}

/// Rejects prompts shorter than min_chars codepoints after whitespace collapse
/// (boundary inclusive: exactly min_chars is accepted).
inline StageDecision check_short_entry(const PipelineRecord& r, std::size_t min_chars) {
    const std::size_t n = text::codepoint_count(text::collapse_whitespace(r.prompt));
    if (n < min_chars)
        return StageDecision::reject("prompt has " + std::to_string(n) + " chars, minimum " +
                                     std::to_string(min_chars));
    return StageDecision::ok();
}

/**
 * Rejects prompts carrying media the model cannot see: URLs, image markup or
 * figure references, and tables (pipe rows, grid borders, or table
 * references).
 */
inline StageDecision check_media(const PipelineRecord& r) {
    const std::string& p = r.prompt;
    if (!detail::url_spans(p).empty()) return StageDecision::reject("url");
    static const std::vector<std::string> image_markers = {
        "![", "<img", "\xE5\xA6\x82\xE5\x9B\xBE" /* 如图 */, "\xE4\xB8\x8A\xE5\x9B\xBE" /* 上图 */,
        "\xE4\xB8\x8B\xE5\x9B\xBE" /* 下图 */, "\xE8\xA7\x81\xE5\x9B\xBE" /* 见图 */};
    for (const auto& m : image_markers)
        if (text::contains(p, m)) return StageDecision::reject("image marker '" + m + "'");
    static const std::vector<std::string> table_markers = {
        "<table", "\xE5\xA6\x82\xE8\xA1\xA8" /* 如表 */, "\xE4\xB8\x8A\xE8\xA1\xA8" /* 上表 */,
        "\xE4\xB8\x8B\xE8\xA1\xA8" /* 下表 */, "\xE8\xA7\x81\xE8\xA1\xA8" /* 见表 */};
    for (const auto& m : table_markers)
        if (text::contains(p, m)) return StageDecision::reject("table marker '" + m + "'");
    for (std::string_view line : detail::split_lines(p)) {
        if (std::count(line.begin(), line.end(), '|') >= 2)
            return StageDecision::reject("pipe table row");
        if (line.find("+--") != std::string_view::npos)
            return StageDecision::reject("grid table row");
    }
    return StageDecision::ok();
}

namespace detail {

/// Counts sub-question enumerators: (1)/（1） anywhere, circled digits
/// anywhere, and "1." / "1、" / "1．" at line starts.
inline std::size_t enumerator_count(std::string_view prompt) {
    std::size_t count = 0;
    const auto cps = text::codepoints(prompt);
    for (std::size_t i = 0; i < cps.size(); ++i) {
        const char32_t c = cps[i];
        if (c >= 0x2460 && c <= 0x2473) {  // ①..⑳
            ++count;
            continue;
        }
        if (c == U'(' || c == 0xFF08) {  // ( or （
            std::size_t j = i + 1, digits = 0;
            while (j < cps.size() && cps[j] >= U'0' && cps[j] <= U'9' && digits <= 2) {
                ++digits;
                ++j;
            }
            if (digits >= 1 && digits <= 2 && j < cps.size() && (cps[j] == U')' || cps[j] == 0xFF09))
                ++count;
        }
    }
    for (std::string_view line : split_lines(prompt)) {
        const auto lcps = text::codepoints(line);
        std::size_t i = 0;
        while (i < lcps.size() && text::is_space_cp(lcps[i])) ++i;
        std::size_t digits = 0;
        while (i < lcps.size() && lcps[i] >= U'0' && lcps[i] <= U'9' && digits <= 2) {
            ++digits;
            ++i;
        }
        if (digits >= 1 && digits <= 2 && i < lcps.size() &&
            (lcps[i] == U'.' || lcps[i] == 0x3001 /* 、 */ || lcps[i] == 0xFF0E /* ． */))
            ++count;
    }
    return count;
}

/// Question-mark runs: consecutive ?/？ collapse into one sentence terminator.
inline std::size_t question_mark_runs(std::string_view prompt) {
    std::size_t runs = 0;
    bool in_run = false;
    text::for_each_codepoint(prompt, [&](const text::Codepoint& cp) {
        const bool qm = cp.value == U'?' || cp.value == 0xFF1F;
        if (qm && !in_run) ++runs;
        in_run = qm;
    });
    return runs;
}

}  // namespace detail

/// Rejects prompts that bundle several sub-questions: two or more enumerator
/// tokens, or two or more question-terminated sentences.
inline StageDecision check_subquestions(const PipelineRecord& r) {
    const std::size_t enums = detail::enumerator_count(r.prompt);
    if (enums >= 2)
        return StageDecision::reject("multiple sub-questions (" + std::to_string(enums) +
                                     " enumerators)");
    const std::size_t qmarks = detail::question_mark_runs(r.prompt);
    if (qmarks >= 2)
        return StageDecision::reject("multiple sub-questions (" + std::to_string(qmarks) +
                                     " question marks)");
    return StageDecision::ok();
}

namespace detail {

inline AnswerKind infer_kind(const std::string& reference) {
    if (text::parse_number(reward::normalize_answer(reference))) return AnswerKind::numeric;
    if (text::codepoint_count(reference) > reward::kLongAnswerChars) return AnswerKind::long_text;
    return AnswerKind::short_text;
}

}  // namespace detail

/// Rejects records whose generated answer does not match the reference.
inline StageDecision check_answer_reference_match(const PipelineRecord& r,
                                                  const reward::AnswerJudge* judge) {
    if (!r.generated_answer) return StageDecision::reject("missing field generated_answer");
    const AnswerKind kind = detail::infer_kind(r.reference_answer);
    switch (reward::answers_equivalent(*r.generated_answer, r.reference_answer, kind, judge, r.id)) {
        case reward::Verdict::match: return StageDecision::ok();
        case reward::Verdict::mismatch: return StageDecision::reject("answer mismatch");
        case reward::Verdict::needs_judge: return StageDecision::reject("needs_judge");
    }
    return StageDecision::reject("answer mismatch");
}

// ---------------------------------------------------------------------------
// Structured chain-of-thought validation

struct CotSection {
    std::string name;
    std::size_t begin = 0;  // byte offset of section content
    std::size_t end = 0;
};

struct CotValidation {
    bool ok = false;
    std::string reason;
    std::vector<CotSection> sections;
};

inline const std::vector<std::string>& cot_section_names() {
    static const std::vector<std::string> names = {"plan", "reasoning", "reflection", "backtracking",
                                                   "answer"};
    return names;
}

/**
 * A structured trace must carry the five sections Plan, Reasoning, Reflection,
 * Backtracking, Answer, each exactly once and in that order. A marker is a
 * line whose content starts with the section name (case-insensitive),
 * optionally wrapped in [] or prefixed by markdown #s, followed by an
 * optional colon.
 */
inline CotValidation validate_structured_cot(std::string_view cot) {
    struct Marker {
        std::size_t section;
        std::size_t line_begin;
        std::size_t content_begin;
    };
    std::vector<Marker> markers;
    std::size_t offset = 0;
    for (std::string_view line : detail::split_lines(cot)) {
        std::string lowered = text::to_lower_ascii(text::trim(line));
        std::string_view body = lowered;
        while (!body.empty() && (body.front() == '#' || body.front() == ' ')) body.remove_prefix(1);
        bool bracketed = !body.empty() && body.front() == '[';
        if (bracketed) body.remove_prefix(1);
        const auto& names = cot_section_names();
        for (std::size_t s = 0; s < names.size(); ++s) {
            const auto& name = names[s];
            if (body.size() < name.size() || body.compare(0, name.size(), name) != 0) continue;
            std::string_view rest = body.substr(name.size());
            if (bracketed) {
                if (rest.empty() || rest.front() != ']') continue;
                rest.remove_prefix(1);
            }
            if (!rest.empty() && rest.front() != ':' && rest.compare(0, 3, "\xEF\xBC\x9A") != 0 &&
                rest.front() != ' ')
                continue;
            markers.push_back({s, offset, offset + line.size()});
            break;
        }
        offset += line.size() + 1;
    }

    CotValidation out;
    const auto& names = cot_section_names();
    std::vector<std::size_t> counts(names.size(), 0);
    for (const auto& m : markers) ++counts[m.section];
    for (std::size_t s = 0; s < names.size(); ++s) {
        if (counts[s] == 0) {
            out.reason = "missing " + names[s];
            return out;
        }
        if (counts[s] > 1) {
            out.reason = "duplicate " + names[s];
            return out;
        }
    }
    for (std::size_t i = 1; i < markers.size(); ++i) {
        if (markers[i].section <= markers[i - 1].section) {
            out.reason = "order violation";
            return out;
        }
    }
    out.ok = true;
    for (std::size_t i = 0; i < markers.size(); ++i) {
        const std::size_t end = i + 1 < markers.size() ? markers[i + 1].line_begin : cot.size();
        out.sections.push_back({names[markers[i].section], markers[i].content_begin, end});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Choice -> open-ended conversion

struct RewriteRequest {
    std::string question_id;
    std::string stem;
    std::string option_text;
    bool option_correct = false;
};

struct RewriteResult {
    std::string prompt;
    std::string reference_answer;
};

/// Pluggable stem rewriter for cases the template cannot handle (negated
/// stems, incorrect options). Implementations may decline with nullopt.
class QuestionRewriter {
public:
    virtual ~QuestionRewriter() = default;
    virtual std::optional<RewriteResult> rewrite(const RewriteRequest& req) const = 0;
};

/// Offline default: passes the stem through unchanged for correct options and
/// declines everything else.
class IdentityRewriter final : public QuestionRewriter {
public:
    std::optional<RewriteResult> rewrite(const RewriteRequest& req) const override {
        if (!req.option_correct) return std::nullopt;
        return RewriteResult{req.stem, req.option_text};
    }
};

namespace detail {

/// Drops inline option lines ("A. ...", "(B) ...", "C、...") from a prompt.
inline std::string strip_option_lines(std::string_view prompt) {
    std::string out;
    for (std::string_view line : split_lines(prompt)) {
        std::string t = text::trim(line);
        bool is_option = false;
        if (t.size() >= 2) {
            char label = t[0];
            if (label >= 'a' && label <= 'z') label = static_cast<char>(label - 'a' + 'A');
            if (label >= 'A' && label <= 'H') {
                std::string_view rest = std::string_view(t).substr(1);
                is_option = rest.front() == '.' || rest.front() == ')' || rest.front() == ':' ||
                            rest.compare(0, 3, "\xE3\x80\x81") == 0 /* 、 */ ||
                            rest.compare(0, 3, "\xEF\xBC\x8E") == 0 /* ． */ ||
                            rest.compare(0, 3, "\xEF\xBC\x9A") == 0 /* ： */;
            } else if (t.front() == '(' || t.compare(0, 3, "\xEF\xBC\x88") == 0 /* （ */) {
                const std::size_t lab = t.front() == '(' ? 1 : 3;
                if (t.size() > lab) {
                    char l2 = t[lab];
                    if (l2 >= 'a' && l2 <= 'z') l2 = static_cast<char>(l2 - 'a' + 'A');
                    if (l2 >= 'A' && l2 <= 'H') {
                        std::string_view rest = std::string_view(t).substr(lab + 1);
                        is_option = !rest.empty() &&
                                    (rest.front() == ')' || rest.compare(0, 3, "\xEF\xBC\x89") == 0);
                    }
                }
            }
        }
        if (!is_option && !t.empty()) {
            if (!out.empty()) out.push_back('\n');
            out += t;
        }
    }
    return out;
}

/// Negation markers that break the fill-in template: 不正确 / 错误 / NOT.
inline bool has_negated_stem(std::string_view stem) {
    return text::contains(stem, "\xE4\xB8\x8D\xE6\xAD\xA3\xE7\xA1\xAE") /* 不正确 */ ||
           text::contains(stem, "\xE9\x94\x99\xE8\xAF\xAF") /* 错误 */ ||
           contains_upper_word(stem, "NOT");
}

inline std::string ascii_lower_label(std::string s) { return text::to_lower_ascii(s); }

}  // namespace detail

struct ConversionResult {
    std::vector<PipelineRecord> records;  // emitted open-ended records
    bool rejected = false;
    std::string reason;
};

/**
 * Converts a single-/multiple-choice record to open-ended records. The
 * template path keeps the option-stripped stem as the prompt and uses each
 * correct option's content as the reference answer (one record per correct
 * option). With `expand`, incorrect options are offered to the rewriter as
 * additional standalone samples; without a rewriter they are skipped. Negated
 * stems bypass the template and go to the rewriter; if none is configured the
 * record is rejected with reason "negation". Emitted answers are option
 * contents, never option letters.
 */
inline ConversionResult convert_choice_to_open(const PipelineRecord& record,
                                               const QuestionRewriter* rewriter, bool expand) {
    ConversionResult out;
    if (!record.choices || record.choices->empty()) {
        out.rejected = true;
        out.reason = "missing field choices";
        return out;
    }
    std::size_t n_correct = 0;
    for (const auto& o : *record.choices) n_correct += o.correct ? 1 : 0;
    if (n_correct == 0) {
        out.rejected = true;
        out.reason = "no correct choice marked";
        return out;
    }
    const std::string stem = detail::strip_option_lines(record.prompt);
    if (stem.empty()) {
        out.rejected = true;
        out.reason = "empty stem";
        return out;
    }

    auto emit = [&](const ChoiceOption& opt, const RewriteResult& rr) {
        PipelineRecord r;
        r.id = record.id + "-open-" + detail::ascii_lower_label(opt.label);
        r.prompt = rr.prompt;
        r.reference_answer = rr.reference_answer;
        r.meta = record.meta;
        r.meta["converted_from"] = record.id;
        r.audit = record.audit;
        r.audit.push_back({"choice_to_open", true, "from option " + opt.label});
        out.records.push_back(std::move(r));
    };

    const bool negated = detail::has_negated_stem(stem);
    if (negated && !rewriter) {
        out.rejected = true;
        out.reason = "negation";
        return out;
    }

    for (const auto& opt : *record.choices) {
        if (!opt.correct && !expand) continue;
        if (negated || !opt.correct) {
            if (!rewriter) continue;
            if (auto rr = rewriter->rewrite({record.id, stem, opt.text, opt.correct})) emit(opt, *rr);
            continue;
        }
        emit(opt, RewriteResult{stem, opt.text});
    }
    if (out.records.empty()) {
        out.rejected = true;
        out.reason = negated ? "negation" : "rewriter declined all options";
    }
    return out;
}

// ---------------------------------------------------------------------------
// RL quality gate

/// Dangling-reference phrases that signal missing context: 如图, "the table
/// above", "as shown".
inline const std::vector<std::string>& dangling_reference_markers() {
    static const std::vector<std::string> v = {"\xE5\xA6\x82\xE5\x9B\xBE" /* 如图 */,
                                               "the table above", "as shown"};
    return v;
}

/**
 * Rule proxies for the RL data criteria, checked in order. Verifiability:
 * reference shorter than max_answer_chars or numeric. Clarity: a single
 * question (sub-question check). Completeness: no dangling references.
 * Solvability: delegated to the hook; the rule default accepts.
 */
inline StageDecision check_rl_quality(const PipelineRecord& r, std::size_t max_answer_chars,
                                      const std::function<bool(const PipelineRecord&)>& solvable) {
    const bool short_enough = text::codepoint_count(r.reference_answer) < max_answer_chars;
    const bool numeric = text::parse_number(reward::normalize_answer(r.reference_answer)).has_value();
    if (!short_enough && !numeric) return StageDecision::reject("verifiability");
    if (!check_subquestions(r).accept) return StageDecision::reject("clarity");
    const std::string lowered = text::to_lower_ascii(r.prompt);
    for (const auto& m : dangling_reference_markers())
        if (text::contains(lowered, m)) return StageDecision::reject("completeness");
    if (solvable && !solvable(r)) return StageDecision::reject("solvability");
    return StageDecision::ok();
}

// ---------------------------------------------------------------------------
// Deduplication

struct DedupOutcome {
    std::vector<std::size_t> survivors;                       // indices, input order
    std::vector<std::pair<std::size_t, std::size_t>> dupes;   // (removed, survivor)
};

/**
 * Near-duplicate removal over prompts: LSH bands propose candidate pairs,
 * pairs at estimated Jaccard >= threshold merge via union-find, and the
 * earliest record of each cluster survives.
 */
inline DedupOutcome dedup_by_prompt(const std::vector<PipelineRecord>& records, double threshold,
                                    const minhash::Params& params) {
    if (!(threshold > 0.0 && threshold <= 1.0))
        throw std::invalid_argument("dedup: threshold must be in (0,1]");
    const minhash::SignatureBuilder build(params);
    std::vector<minhash::ShingleSignature> sigs;
    sigs.reserve(records.size());
    for (const auto& r : records) sigs.push_back(build(r.prompt));

    std::vector<std::size_t> parent(records.size());
    for (std::size_t i = 0; i < parent.size(); ++i) parent[i] = i;
    std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    };
    auto unite = [&](std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (b < a) std::swap(a, b);
        parent[b] = a;  // smaller index is the cluster root
    };

    std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets;
    for (std::size_t i = 0; i < sigs.size(); ++i)
        for (std::size_t b = 0; b < sigs[i].band_keys.size(); ++b)
            buckets[hash_mix(sigs[i].band_keys[b], b)].push_back(i);

    for (auto& [key, members] : buckets) {
        for (std::size_t i = 0; i < members.size(); ++i)
            for (std::size_t j = i + 1; j < members.size(); ++j) {
                const std::size_t a = members[i], b = members[j];
                if (find(a) == find(b)) continue;
                if (minhash::estimated_jaccard(sigs[a], sigs[b]) >= threshold) unite(a, b);
            }
    }

    DedupOutcome out;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const std::size_t root = find(i);
        if (root == i) out.survivors.push_back(i);
        else out.dupes.emplace_back(i, root);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Pipeline driver

class UnknownStage : public std::runtime_error {
public:
    explicit UnknownStage(const std::string& name)
        : std::runtime_error("unknown curation stage '" + name + "'"), stage(name) {}
    std::string stage;
};

struct CurationOptions {
    std::uint64_t seed = 0;
    std::size_t short_entry_min_chars = 64;
    double dedup_threshold = 0.8;
    std::size_t dedup_ngram = 13;
    std::size_t dedup_permutations = 256;
    std::size_t dedup_bands = 32;
    std::size_t rl_max_answer_chars = 15;
    bool expand_choices = true;
    const reward::AnswerJudge* judge = &reward::exact_judge();
    const QuestionRewriter* rewriter = nullptr;
    std::function<bool(const PipelineRecord&)> solvability;  // unset -> accept
};

struct RejectEntry {
    std::string id;
    std::string stage;
    std::string reason;
};

inline void to_json(jsonl::json& j, const RejectEntry& r) {
    j = {{"id", r.id}, {"stage", r.stage}, {"reason", r.reason}};
}

struct PipelineResult {
    std::vector<PipelineRecord> accepted;
    std::vector<RejectEntry> rejects;
    std::map<std::string, std::size_t> rejects_per_stage;
};

inline const std::vector<std::string>& stage_names() {
    static const std::vector<std::string> names = {
        "hyperlink_strip", "short_entry",   "media",        "subquestion",
        "answer_match",    "dedup",         "cot_structure", "choice_to_open",
        "rl_quality",      "reasoning_selection", "correctness_check"};
    return names;
}

/**
 * Applies the named stages in order. Filters move records to the reject
 * report; hyperlink_strip transforms; dedup runs corpus-wide; choice_to_open
 * replaces each choice record with its open-ended conversions (records
 * without choices pass through). Deterministic for a fixed seed: accepted
 * output order always follows input order.
 */
inline PipelineResult run_pipeline(std::vector<PipelineRecord> records,
                                   const std::vector<std::string>& stages,
                                   const CurationOptions& opts) {
    for (const auto& s : stages)
        if (std::find(stage_names().begin(), stage_names().end(), s) == stage_names().end())
            throw UnknownStage(s);

    PipelineResult result;
    auto reject = [&](PipelineRecord&& r, const std::string& stage, const std::string& reason) {
        r.audit.push_back({stage, false, reason});
        result.rejects_per_stage[stage] += 1;
        result.rejects.push_back({r.id, stage, reason});
    };

    for (const auto& stage : stages) {
        std::vector<PipelineRecord> next;
        next.reserve(records.size());

        if (stage == "dedup") {
            minhash::Params params{opts.dedup_ngram, opts.dedup_permutations, opts.dedup_bands,
                                   derive_seed(opts.seed, std::string_view("dedup"))};
            DedupOutcome outcome = dedup_by_prompt(records, opts.dedup_threshold, params);
            std::vector<bool> keep(records.size(), false);
            std::vector<std::string> survivor_of(records.size());
            for (std::size_t i : outcome.survivors) keep[i] = true;
            for (const auto& [dup, root] : outcome.dupes) survivor_of[dup] = records[root].id;
            for (std::size_t i = 0; i < records.size(); ++i) {
                if (keep[i]) {
                    records[i].audit.push_back({stage, true, ""});
                    next.push_back(std::move(records[i]));
                } else {
                    reject(std::move(records[i]), stage, "duplicate of " + survivor_of[i]);
                }
            }
            records = std::move(next);
            continue;
        }

        if (stage == "choice_to_open") {
            for (auto& r : records) {
                if (!r.choices) {
                    next.push_back(std::move(r));
                    continue;
                }
                ConversionResult conv =
                    convert_choice_to_open(r, opts.rewriter, opts.expand_choices);
                if (conv.rejected) {
                    reject(std::move(r), stage, conv.reason);
                } else {
                    for (auto& emitted : conv.records) next.push_back(std::move(emitted));
                }
            }
            records = std::move(next);
            continue;
        }

        for (auto& r : records) {
            if (stage == "hyperlink_strip") {
                r.prompt = strip_hyperlinks(r.prompt);
                r.audit.push_back({stage, true, ""});
                next.push_back(std::move(r));
                continue;
            }
            StageDecision d = StageDecision::ok();
            if (stage == "short_entry") d = check_short_entry(r, opts.short_entry_min_chars);
            else if (stage == "media") d = check_media(r);
            else if (stage == "subquestion") d = check_subquestions(r);
            else if (stage == "answer_match") d = check_answer_reference_match(r, opts.judge);
            else if (stage == "cot_structure") {
                if (!r.cot) d = StageDecision::reject("missing cot");
                else {
                    CotValidation v = validate_structured_cot(*r.cot);
                    if (!v.ok) d = StageDecision::reject(v.reason);
                }
            } else if (stage == "rl_quality")
                d = check_rl_quality(r, opts.rl_max_answer_chars, opts.solvability);
            else if (stage == "reasoning_selection" || stage == "correctness_check") {
                // Model-judge stages; the offline default accepts every record.
                d = StageDecision::ok();
            }
            if (d.accept) {
                r.audit.push_back({stage, true, d.reason});
                next.push_back(std::move(r));
            } else {
                reject(std::move(r), stage, d.reason);
            }
        }
        records = std::move(next);
    }
    result.accepted = std::move(records);
    return result;
}

inline std::vector<PipelineRecord> read_records(const std::string& path) {
    std::vector<PipelineRecord> out;
    for (const auto& j : jsonl::read_all(path)) out.push_back(j.get<PipelineRecord>());
    return out;
}

inline void write_records(const std::string& path, const std::vector<PipelineRecord>& records) {
    std::vector<jsonl::json> rows;
    rows.reserve(records.size());
    for (const auto& r : records) rows.push_back(jsonl::json(r));
    jsonl::write_all(path, rows);
}

}  // namespace fevo::curation
