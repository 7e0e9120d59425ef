#include <algorithm>
#include <set>

#include <catch2/catch_amalgamated.hpp>

#include "fevo/curation.hpp"
#include "support/oracles.hpp"

using namespace fevo;
using curation::CurationOptions;
using curation::PipelineRecord;

namespace {

PipelineRecord record(std::string id, std::string prompt, std::string reference = "42") {
    PipelineRecord r;
    r.id = std::move(id);
    r.prompt = std::move(prompt);
    r.reference_answer = std::move(reference);
    return r;
}

const std::string kLongPrompt =
    "A company issues corporate bonds with a five year maturity and wants the "
    "effective annual interest cost computed for its ledger.";

}  // namespace

TEST_CASE("empty stage list is the identity pipeline") {
    std::vector<PipelineRecord> in = {record("a", "prompt one"), record("b", "prompt two")};
    const auto result = curation::run_pipeline(in, {}, CurationOptions{});
    CHECK(result.accepted.size() == 2);
    CHECK(result.rejects.empty());
    CHECK(result.accepted[0].prompt == "prompt one");
}

TEST_CASE("unknown stages are rejected up front") {
    std::vector<PipelineRecord> in = {record("a", "x")};
    CHECK_THROWS_AS(curation::run_pipeline(in, {"foo"}, CurationOptions{}), curation::UnknownStage);
    CHECK_THROWS_WITH(curation::run_pipeline(in, {"dedup", "foo"}, CurationOptions{}),
                      Catch::Matchers::ContainsSubstring("foo"));
}

TEST_CASE("hyperlink stripping removes urls and collapses whitespace") {
    auto r = record("a", "see http://x.com for info");
    CHECK(curation::strip_hyperlinks(r.prompt) == "see for info");
    CHECK(curation::strip_hyperlinks("no links here") == "no links here");
    CHECK(curation::strip_hyperlinks("a http://x.com https://y.org b") == "a b");
    CHECK(curation::strip_hyperlinks("tail www.site.org") == "tail");
}

TEST_CASE("short entries are dropped after whitespace collapse") {
    CurationOptions opts;
    CHECK_FALSE(curation::check_short_entry(record("a", "tiny"), 64).accept);
    const std::string exact(64, 'x');
    CHECK(curation::check_short_entry(record("b", exact), 64).accept);
    const std::string padded = "   shorty    " + std::string(60, ' ');
    CHECK_FALSE(curation::check_short_entry(record("c", padded), 64).accept);
    // 64 codepoints of CJK span 192 bytes; the count is codepoints.
    std::string cjk;
    for (int i = 0; i < 64; ++i) cjk += "\xE8\xB4\xA2";
    CHECK(curation::check_short_entry(record("d", cjk), 64).accept);
}

TEST_CASE("media filter rejects urls tables and figure references") {
    CHECK_FALSE(curation::check_media(record("a", "visit http://example.com now")).accept);
    CHECK_FALSE(curation::check_media(record("b", "data:\n|col a|col b|\n|1|2|")).accept);
    CHECK_FALSE(curation::check_media(record("c", "\xE5\xA6\x82\xE5\x9B\xBE\xE6\x89\x80\xE7\xA4\xBA"
                                                  " compute")).accept);  // 如图所示
    CHECK_FALSE(curation::check_media(record("d", "caption ![img](x.png)")).accept);
    CHECK_FALSE(curation::check_media(record("e", "+----+----+\n|cell|")).accept);
    CHECK(curation::check_media(record("f", kLongPrompt)).accept);
}

TEST_CASE("sub-question filter counts enumerators and question marks") {
    // （1）计算X。（2）计算Y。
    const std::string two_enums =
        "\xEF\xBC\x88" "1\xEF\xBC\x89\xE8\xAE\xA1\xE7\xAE\x97X\xE3\x80\x82"
        "\xEF\xBC\x88" "2\xEF\xBC\x89\xE8\xAE\xA1\xE7\xAE\x97Y\xE3\x80\x82";
    CHECK_FALSE(curation::check_subquestions(record("a", two_enums)).accept);
    CHECK(curation::check_subquestions(record("b", "What is the total revenue?")).accept);
    CHECK(curation::check_subquestions(record("c", "(1) single part question")).accept);
    CHECK_FALSE(curation::check_subquestions(record("d", "1. first\n2. second")).accept);
    CHECK_FALSE(curation::check_subquestions(record("e", "why? and how?")).accept);
    CHECK(curation::check_subquestions(record("f", "is it true??")).accept);  // one run
    CHECK_FALSE(curation::check_subquestions(
                    record("g", "\xE2\x91\xA0 part \xE2\x91\xA1 part")).accept);  // ① ②
}

TEST_CASE("answer-reference matching uses rule equivalence") {
    auto ok = record("a", "p", "B");
    ok.generated_answer = "B";
    CHECK(curation::check_answer_reference_match(ok, &reward::exact_judge()).accept);

    auto bad = record("b", "p", "B");
    bad.generated_answer = "A";
    CHECK_FALSE(curation::check_answer_reference_match(bad, &reward::exact_judge()).accept);

    auto numeric = record("c", "p", "1/2");
    numeric.generated_answer = "0.50";
    CHECK(curation::check_answer_reference_match(numeric, &reward::exact_judge()).accept);

    auto missing = record("d", "p", "B");
    const auto decision = curation::check_answer_reference_match(missing, &reward::exact_judge());
    CHECK_FALSE(decision.accept);
    CHECK_THAT(decision.reason, Catch::Matchers::ContainsSubstring("missing field"));
}

TEST_CASE("structured cot validation") {
    const std::string good =
        "Plan: outline\nReasoning: steps\nReflection: check\nBacktracking: alt\nAnswer: 42\n";
    const auto v = curation::validate_structured_cot(good);
    CHECK(v.ok);
    REQUIRE(v.sections.size() == 5);
    CHECK(v.sections[0].name == "plan");
    CHECK(v.sections[4].name == "answer");

    const auto missing = curation::validate_structured_cot(
        "Plan: a\nReasoning: b\nBacktracking: d\nAnswer: e\n");
    CHECK_FALSE(missing.ok);
    CHECK_THAT(missing.reason, Catch::Matchers::ContainsSubstring("reflection"));

    const auto out_of_order = curation::validate_structured_cot(
        "Plan: a\nReflection: c\nReasoning: b\nBacktracking: d\nAnswer: e\n");
    CHECK_FALSE(out_of_order.ok);
    CHECK(out_of_order.reason == "order violation");

    const auto duplicated = curation::validate_structured_cot(
        "Plan: a\nPlan: again\nReasoning: b\nReflection: c\nBacktracking: d\nAnswer: e\n");
    CHECK_FALSE(duplicated.ok);
    CHECK_THAT(duplicated.reason, Catch::Matchers::ContainsSubstring("duplicate"));

    const std::string markdown =
        "## Plan\ntext\n## Reasoning\ntext\n## Reflection\ntext\n## Backtracking\ntext\n## Answer\n42\n";
    CHECK(curation::validate_structured_cot(markdown).ok);
}

TEST_CASE("choice conversion emits option contents never letters") {
    PipelineRecord r = record("q1", "Which asset accrues deferred tax?\nA. cash\nB. goodwill");
    r.choices = {{"A", "cash", false},
                 {"B", "\xE9\x80\x92\xE5\xBB\xB6\xE6\x89\x80\xE5\xBE\x97\xE7\xA8\x8E\xE8\xB5\x84"
                       "\xE4\xBA\xA7", true}};  // 递延所得税资产
    const auto conv = curation::convert_choice_to_open(r, nullptr, false);
    REQUIRE_FALSE(conv.rejected);
    REQUIRE(conv.records.size() == 1);
    CHECK(conv.records[0].id == "q1-open-b");
    CHECK(conv.records[0].reference_answer ==
          "\xE9\x80\x92\xE5\xBB\xB6\xE6\x89\x80\xE5\xBE\x97\xE7\xA8\x8E\xE8\xB5\x84\xE4\xBA\xA7");
    CHECK(conv.records[0].prompt == "Which asset accrues deferred tax?");
    CHECK(conv.records[0].meta.at("converted_from") == "q1");
}

TEST_CASE("expansion emits one record per correct option") {
    PipelineRecord r = record("q2", "Select every true statement.\nA. one\nB. two\nC. three\nD. four");
    r.choices = {{"A", "assets rise", true},
                 {"B", "liabilities fall", true},
                 {"C", "equity doubles", true},
                 {"D", "cash is negative", true}};
    const auto conv = curation::convert_choice_to_open(r, nullptr, true);
    REQUIRE(conv.records.size() == 4);
    std::set<std::string> ids;
    for (const auto& rec : conv.records) {
        ids.insert(rec.id);
        CHECK(rec.reference_answer.size() > 1);  // contents, not a letter
    }
    CHECK(ids == std::set<std::string>{"q2-open-a", "q2-open-b", "q2-open-c", "q2-open-d"});
}

TEST_CASE("negated stems are skipped without a rewriter") {
    PipelineRecord r = record("q3",
                              "\xE4\xB8\x8B\xE5\x88\x97\xE8\xAF\xB4\xE6\xB3\x95\xE4\xB8\x8D"
                              "\xE6\xAD\xA3\xE7\xA1\xAE\xE7\x9A\x84\xE6\x98\xAF\nA. x\nB. y");
    r.choices = {{"A", "statement one", true}, {"B", "statement two", false}};
    const auto conv = curation::convert_choice_to_open(r, nullptr, false);
    CHECK(conv.rejected);
    CHECK(conv.reason == "negation");

    const curation::IdentityRewriter identity;
    const auto with_rewriter = curation::convert_choice_to_open(r, &identity, false);
    CHECK_FALSE(with_rewriter.rejected);
    CHECK(with_rewriter.records.size() == 1);

    PipelineRecord en = record("q4", "Which is NOT an asset?\nA. cash\nB. revenue");
    en.choices = {{"B", "revenue", true}};
    CHECK(curation::convert_choice_to_open(en, nullptr, false).rejected);
}

TEST_CASE("conversion validates its inputs") {
    PipelineRecord none = record("q5", "stem only");
    none.choices = {{"A", "x", false}, {"B", "y", false}};
    const auto conv = curation::convert_choice_to_open(none, nullptr, true);
    CHECK(conv.rejected);
    CHECK(conv.reason == "no correct choice marked");

    PipelineRecord empty = record("q6", "A. only options\nB. no stem");
    empty.choices = {{"A", "only options", true}};
    const auto conv2 = curation::convert_choice_to_open(empty, nullptr, true);
    CHECK(conv2.rejected);
    CHECK(conv2.reason == "empty stem");
}

TEST_CASE("rl quality gate names the failed criterion") {
    const std::function<bool(const PipelineRecord&)> accept_all;
    auto long_prose = record("a", "What is the policy rationale?",
                             "a reference answer much longer than fifteen characters of prose");
    CHECK(curation::check_rl_quality(long_prose, 15, accept_all).reason == "verifiability");

    auto dangling = record("b", "\xE5\xA6\x82\xE5\x9B\xBE\xE6\x89\x80\xE7\xA4\xBA, compute x", "42");
    CHECK(curation::check_rl_quality(dangling, 15, accept_all).reason == "completeness");

    auto multi = record("c", "(1) part one? (2) part two?", "42");
    CHECK(curation::check_rl_quality(multi, 15, accept_all).reason == "clarity");

    auto good = record("d", "Compute the closing balance.", "42");
    CHECK(curation::check_rl_quality(good, 15, accept_all).accept);

    auto numeric_long = record("e", "Compute the precise ratio.", "123456789.123456789");
    CHECK(curation::check_rl_quality(numeric_long, 15, accept_all).accept);

    const auto unsolvable = curation::check_rl_quality(
        good, 15, [](const PipelineRecord&) { return false; });
    CHECK(unsolvable.reason == "solvability");
}

TEST_CASE("dedup keeps the earliest record of each duplicate cluster") {
    CurationOptions opts;
    std::vector<PipelineRecord> in = {record("first", kLongPrompt), record("second", kLongPrompt),
                                      record("third", "a completely different prompt about bond "
                                                      "yield curves and their daily variation")};
    const auto result = curation::run_pipeline(in, {"dedup"}, opts);
    REQUIRE(result.accepted.size() == 2);
    CHECK(result.accepted[0].id == "first");
    CHECK(result.accepted[1].id == "third");
    REQUIRE(result.rejects.size() == 1);
    CHECK(result.rejects[0].id == "second");
    CHECK_THAT(result.rejects[0].reason, Catch::Matchers::ContainsSubstring("first"));
}

TEST_CASE("dedup is idempotent") {
    Rng rng = make_rng(8, std::string_view("dedup-idem"));
    std::vector<PipelineRecord> corpus;
    for (int i = 0; i < 60; ++i) {
        std::string body;
        for (int j = 0; j < 200; ++j)
            text::append_utf8(body, static_cast<char32_t>(0x4E00 + bounded(rng, 300)));
        corpus.push_back(record("r" + std::to_string(i), body));
        if (i % 4 == 0) {
            auto dup = corpus.back();
            dup.id += "-dup";
            dup.prompt[dup.prompt.size() / 2] = 'x';  // single-codepoint mutation
            corpus.push_back(dup);
        }
    }
    CurationOptions opts;
    const auto once = curation::run_pipeline(corpus, {"dedup"}, opts);
    const auto twice = curation::run_pipeline(once.accepted, {"dedup"}, opts);
    REQUIRE(once.accepted.size() == twice.accepted.size());
    for (std::size_t i = 0; i < once.accepted.size(); ++i)
        CHECK(once.accepted[i].id == twice.accepted[i].id);
    CHECK(twice.rejects.empty());
}

TEST_CASE("stage order changes attribution but not the accepted set") {
    const std::string other =
        "Bond immunization matches asset duration to liability duration so the "
        "portfolio value is insensitive to small parallel rate shifts.";
    std::vector<PipelineRecord> in = {
        record("keep", kLongPrompt),
        record("short", "tiny"),
        record("dup-a", other),
        record("dup-b", other),
    };
    CurationOptions opts;
    const auto ab = curation::run_pipeline(in, {"dedup", "short_entry"}, opts);
    const auto ba = curation::run_pipeline(in, {"short_entry", "dedup"}, opts);
    auto ids = [](const std::vector<PipelineRecord>& rs) {
        std::set<std::string> out;
        for (const auto& r : rs) out.insert(r.id);
        return out;
    };
    CHECK(ids(ab.accepted) == ids(ba.accepted));
}

TEST_CASE("accounting: accepted plus rejected equals input for filter stages") {
    Rng rng = make_rng(12, std::string_view("account"));
    std::vector<PipelineRecord> in;
    for (int i = 0; i < 40; ++i) {
        std::string body = (i % 3 == 0) ? "short" : kLongPrompt + std::to_string(i);
        if (i % 5 == 0) body += " http://spam.example";
        if (i % 7 == 0) body += " first? second?";
        in.push_back(record("r" + std::to_string(i), body));
    }
    const std::vector<std::string> stages = {"media", "short_entry", "subquestion", "dedup"};
    const auto result = curation::run_pipeline(in, stages, CurationOptions{});
    CHECK(result.accepted.size() + result.rejects.size() == in.size());
    // Each rejected record is attributed to exactly one stage.
    std::set<std::string> rejected_ids;
    for (const auto& r : result.rejects) {
        CHECK(rejected_ids.insert(r.id).second);
        CHECK(std::find(stages.begin(), stages.end(), r.stage) != stages.end());
    }
    // Audit trail: accepted records carry one entry per stage they passed.
    for (const auto& r : result.accepted) {
        CHECK(r.audit.size() == stages.size());
        for (const auto& a : r.audit) CHECK(a.accepted);
    }
}

TEST_CASE("pipeline is deterministic and idempotent under re-run") {
    Rng rng = make_rng(19, std::string_view("det"));
    std::vector<PipelineRecord> in;
    for (int i = 0; i < 30; ++i) {
        std::string body;
        for (int j = 0; j < 90; ++j)
            text::append_utf8(body, static_cast<char32_t>(0x4E00 + bounded(rng, 500)));
        in.push_back(record("r" + std::to_string(i), body));
    }
    CurationOptions opts;
    opts.seed = 99;
    auto serialize = [](const curation::PipelineResult& res) {
        std::string out;
        for (const auto& r : res.accepted) out += jsonl::json(r).dump() + "\n";
        for (const auto& r : res.rejects) out += jsonl::json(r).dump() + "\n";
        return out;
    };
    const auto a = curation::run_pipeline(in, {"dedup", "short_entry"}, opts);
    const auto b = curation::run_pipeline(in, {"dedup", "short_entry"}, opts);
    CHECK(serialize(a) == serialize(b));
}

TEST_CASE("records without choices pass through the conversion stage") {
    std::vector<PipelineRecord> in = {record("open", kLongPrompt)};
    const auto result = curation::run_pipeline(in, {"choice_to_open"}, CurationOptions{});
    REQUIRE(result.accepted.size() == 1);
    CHECK(result.accepted[0].id == "open");
}

TEST_CASE("judge-backed stages accept offline by default") {
    std::vector<PipelineRecord> in = {record("a", kLongPrompt)};
    const auto result =
        curation::run_pipeline(in, {"reasoning_selection", "correctness_check"}, CurationOptions{});
    CHECK(result.accepted.size() == 1);
    CHECK(result.rejects.empty());
}

TEST_CASE("pipeline record json round trip") {
    PipelineRecord r = record("rt", "prompt", "ref");
    r.generated_answer = "gen";
    r.choices = {{"A", "first", true}, {"B", "second", false}};
    r.cot = "Plan: p";
    r.meta = {{"source", "unit"}, {"converted_from", "x"}};
    r.audit = {{"media", true, ""}, {"dedup", false, "duplicate of z"}};
    const jsonl::json j = r;
    const auto back = j.get<PipelineRecord>();
    CHECK(back.id == r.id);
    CHECK(back.prompt == r.prompt);
    CHECK(back.reference_answer == r.reference_answer);
    CHECK(back.generated_answer == r.generated_answer);
    REQUIRE(back.choices.has_value());
    CHECK((*back.choices)[0].text == "first");
    CHECK((*back.choices)[1].correct == false);
    CHECK(back.cot == r.cot);
    CHECK(back.meta == r.meta);
    REQUIRE(back.audit.size() == 2);
    CHECK(back.audit[1].accepted == false);
    CHECK(jsonl::json(back).dump() == j.dump());
}

TEST_CASE("audit records every rejection with the stage name") {
    std::vector<PipelineRecord> in = {record("x", "see http://bad.example for the figure")};
    const auto result = curation::run_pipeline(in, {"media"}, CurationOptions{});
    REQUIRE(result.rejects.size() == 1);
    CHECK(result.rejects[0].stage == "media");
    CHECK_FALSE(result.rejects[0].reason.empty());
}
