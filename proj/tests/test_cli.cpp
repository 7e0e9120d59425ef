#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <catch2/catch_amalgamated.hpp>

#include "fevo/cli.hpp"

using namespace fevo;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    const auto dir = fs::temp_directory_path() / "fevo_cli_tests";
    fs::create_directories(dir);
    return dir;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t line_count(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line))
        if (!line.empty()) ++n;
    return n;
}

}  // namespace

TEST_CASE("top-level help matches the golden file") {
    const std::string golden = read_file(fs::path(FEVO_TEST_DATA_DIR) / "help_golden.txt");
    REQUIRE_FALSE(golden.empty());
    CHECK(cli::help_text() == golden);
}

TEST_CASE("every documented flag appears in the subcommand help") {
    cli::ParsedArgs args;
    auto app = cli::build_app(args);
    const std::string curate = app->get_subcommand("curate")->help();
    for (const char* flag : {"--in", "--out", "--rejects", "--stages", "--config", "--seed",
                             "--min-chars", "--dedup-threshold", "--max-answer-chars", "--expand"})
        CHECK_THAT(curate, Catch::Matchers::ContainsSubstring(flag));
    const std::string train = app->get_subcommand("train")->help();
    for (const char* flag : {"--config", "--seed", "--steps", "--bank", "--bank-size", "--bank-mix",
                             "--metrics-out", "--checkpoint-out", "--resume", "--workers"})
        CHECK_THAT(train, Catch::Matchers::ContainsSubstring(flag));
    const std::string reward = app->get_subcommand("reward-check")->help();
    for (const char* flag : {"--in", "--config", "--seed"})
        CHECK_THAT(reward, Catch::Matchers::ContainsSubstring(flag));
    const std::string inspect = app->get_subcommand("inspect")->help();
    CHECK_THAT(inspect, Catch::Matchers::ContainsSubstring("target"));
    CHECK_THAT(inspect, Catch::Matchers::ContainsSubstring("--config"));
}

TEST_CASE("curate runs stages end to end") {
    const auto dir = temp_dir();
    const auto in = dir / "curate_in.jsonl";
    const auto out = dir / "curate_out.jsonl";
    const auto rejects = dir / "curate_rej.jsonl";
    write_file(in,
               R"({"id":"a","prompt":"A sufficiently long financial prompt about bond duration and convexity adjustments for the curation pipeline.","reference_answer":"42"})"
               "\n"
               R"({"id":"b","prompt":"see http://spam.example for details","reference_answer":"1"})"
               "\n");
    cli::CurateArgs args;
    args.in = in.string();
    args.out = out.string();
    args.rejects = rejects.string();
    args.stages = {"media", "short_entry"};
    std::ostringstream capture;
    const auto outcome = cli::cmd_curate(args, capture);
    CHECK(outcome.exit_code == 0);
    CHECK(fs::exists(out));
    CHECK(fs::exists(rejects));
    CHECK(line_count(out) == 1);
    CHECK(line_count(rejects) == 1);
    CHECK_THAT(capture.str(), Catch::Matchers::ContainsSubstring("accepted records: 1"));
}

TEST_CASE("unknown stages exit with the usage code and the stage name") {
    const auto dir = temp_dir();
    const auto in = dir / "unknown_stage.jsonl";
    write_file(in, R"({"id":"a","prompt":"x","reference_answer":"1"})" "\n");
    cli::CurateArgs args;
    args.in = in.string();
    args.out = (dir / "o.jsonl").string();
    args.rejects = (dir / "r.jsonl").string();
    args.stages = {"foo"};
    std::ostringstream capture;
    const auto outcome = cli::cmd_curate(args, capture);
    CHECK(outcome.exit_code == 2);
    CHECK_THAT(outcome.summary, Catch::Matchers::ContainsSubstring("foo"));
}

TEST_CASE("empty curation input is a vacuous success") {
    const auto dir = temp_dir();
    const auto in = dir / "empty.jsonl";
    write_file(in, "");
    cli::CurateArgs args;
    args.in = in.string();
    args.out = (dir / "eo.jsonl").string();
    args.rejects = (dir / "er.jsonl").string();
    args.stages = {"media"};
    std::ostringstream capture;
    const auto outcome = cli::cmd_curate(args, capture);
    CHECK(outcome.exit_code == 0);
    CHECK_THAT(capture.str(), Catch::Matchers::ContainsSubstring("input records:    0"));
}

TEST_CASE("train smoke run writes one metrics row per step") {
    const auto dir = temp_dir();
    const auto metrics = dir / "smoke_metrics.jsonl";
    const auto config = dir / "smoke.cfg";
    write_file(config,
               "prompts_per_batch = 8\nresponses_per_prompt = 4\nmini_batch = 8\n"
               "critic_warmup_steps = 2\nseed = 5\n");
    cli::TrainArgs args;
    args.config_path = config.string();
    args.steps = 5;
    args.bank_size = 32;
    args.metrics_out = metrics.string();
    std::ostringstream capture;
    const auto outcome = cli::cmd_train(args, capture);
    CHECK(outcome.exit_code == 0);
    CHECK(line_count(metrics) == 5);
}

TEST_CASE("invalid config exits with the usage code") {
    const auto dir = temp_dir();
    const auto config = dir / "bad.cfg";
    write_file(config, "m_easy = 0.5\nm_hard = 0.6\n");
    cli::TrainArgs args;
    args.config_path = config.string();
    std::ostringstream capture;
    const auto outcome = cli::cmd_train(args, capture);
    CHECK(outcome.exit_code == 2);
    CHECK_THAT(outcome.summary, Catch::Matchers::ContainsSubstring("m_hard"));
}

TEST_CASE("resumed training continues the uninterrupted run exactly") {
    const auto dir = temp_dir();
    const auto config = dir / "resume.cfg";
    write_file(config,
               "prompts_per_batch = 8\nresponses_per_prompt = 4\nmini_batch = 8\n"
               "critic_warmup_steps = 2\nseed = 11\n");

    cli::TrainArgs full;
    full.config_path = config.string();
    full.steps = 6;
    full.bank_size = 32;
    full.metrics_out = (dir / "full.jsonl").string();
    std::ostringstream sink;
    REQUIRE(cli::cmd_train(full, sink).exit_code == 0);

    cli::TrainArgs first;
    first.config_path = config.string();
    first.steps = 3;
    first.bank_size = 32;
    first.metrics_out = (dir / "split.jsonl").string();
    first.checkpoint_out = (dir / "split_ckpt.json").string();
    REQUIRE(cli::cmd_train(first, sink).exit_code == 0);

    cli::TrainArgs second = first;
    second.resume = first.checkpoint_out;
    second.checkpoint_out.clear();
    REQUIRE(cli::cmd_train(second, sink).exit_code == 0);

    CHECK(read_file(dir / "full.jsonl") == read_file(dir / "split.jsonl"));
}

TEST_CASE("equal seeds produce byte-identical metrics") {
    const auto dir = temp_dir();
    const auto config = dir / "det.cfg";
    write_file(config,
               "prompts_per_batch = 8\nresponses_per_prompt = 4\nmini_batch = 8\n"
               "critic_warmup_steps = 1\n");
    auto run = [&](const std::string& name, std::uint64_t seed) {
        cli::TrainArgs args;
        args.config_path = config.string();
        args.seed = seed;
        args.steps = 4;
        args.bank_size = 32;
        args.metrics_out = (dir / name).string();
        std::ostringstream sink;
        REQUIRE(cli::cmd_train(args, sink).exit_code == 0);
        return read_file(dir / name);
    };
    const std::string a = run("det_a.jsonl", 7);
    const std::string b = run("det_b.jsonl", 7);
    const std::string c = run("det_c.jsonl", 8);
    CHECK(a == b);
    CHECK(a != c);
}

TEST_CASE("reward-check scores the canonical cases") {
    const auto dir = temp_dir();
    const auto in = dir / "rc.jsonl";
    write_file(in,
               R"({"response":"<think>t</think>\\boxed{42}","reference":"42","kind":"numeric"})"
               "\n"
               R"({"response":"<think>t</think>\\boxed{41}","reference":"42","kind":"numeric"})"
               "\n"
               R"({"response":"no tags","reference":"42","kind":"numeric"})"
               "\n");
    cli::RewardCheckArgs args;
    args.in = in.string();
    std::ostringstream capture;
    const auto outcome = cli::cmd_reward_check(args, capture);
    CHECK(outcome.exit_code == 0);
    const std::string text = capture.str();
    CHECK_THAT(text, Catch::Matchers::ContainsSubstring("line 1: total=2"));
    CHECK_THAT(text, Catch::Matchers::ContainsSubstring("line 2: total=-1.5"));
    CHECK_THAT(text, Catch::Matchers::ContainsSubstring("line 3: total=-2"));
    CHECK_THAT(text, Catch::Matchers::ContainsSubstring("histogram:"));
}

TEST_CASE("reward-check reports malformed lines and keeps going") {
    const auto dir = temp_dir();
    const auto in = dir / "rc_bad.jsonl";
    std::string content;
    for (int i = 0; i < 9; ++i)
        content += R"({"response":"<think>t</think>\\boxed{1}","reference":"1","kind":"numeric"})"
                   "\n";
    content.insert(content.find('\n') + 1, "this is not json\n");
    write_file(in, content);
    cli::RewardCheckArgs args;
    args.in = in.string();
    std::ostringstream capture;
    const auto outcome = cli::cmd_reward_check(args, capture);
    CHECK(outcome.exit_code == 1);
    CHECK_THAT(outcome.summary, Catch::Matchers::ContainsSubstring("scored 9"));
    CHECK_THAT(capture.str(), Catch::Matchers::ContainsSubstring("line 2: malformed JSON"));
}

TEST_CASE("reward-check on an empty file succeeds with an empty histogram") {
    const auto dir = temp_dir();
    const auto in = dir / "rc_empty.jsonl";
    write_file(in, "");
    cli::RewardCheckArgs args;
    args.in = in.string();
    std::ostringstream capture;
    const auto outcome = cli::cmd_reward_check(args, capture);
    CHECK(outcome.exit_code == 0);
    CHECK_THAT(outcome.summary, Catch::Matchers::ContainsSubstring("scored 0"));
}

TEST_CASE("inspect summarizes a ledger with the classify histogram") {
    const auto dir = temp_dir();
    const auto ledger = dir / "inspect_ledger.jsonl";
    write_file(ledger,
               R"({"attempts":16,"correct":0,"question_id":"h"})" "\n"
               R"({"attempts":16,"correct":8,"question_id":"m"})" "\n"
               R"({"attempts":16,"correct":16,"question_id":"e"})" "\n");
    cli::InspectArgs args;
    args.target = ledger.string();
    std::ostringstream capture;
    const auto outcome = cli::cmd_inspect(args, capture);
    CHECK(outcome.exit_code == 0);
    const std::string text = capture.str();
    CHECK_THAT(text, Catch::Matchers::ContainsSubstring("hard: 1"));
    CHECK_THAT(text, Catch::Matchers::ContainsSubstring("mid: 1"));
    CHECK_THAT(text, Catch::Matchers::ContainsSubstring("easy: 1"));
}

TEST_CASE("inspect echoes the metrics tail") {
    const auto dir = temp_dir();
    const auto metrics = dir / "inspect_metrics.jsonl";
    write_file(metrics,
               R"({"step":0,"mean_reward":-1.0})" "\n"
               R"({"step":1,"mean_reward":0.5})" "\n");
    cli::InspectArgs args;
    args.target = metrics.string();
    std::ostringstream capture;
    const auto outcome = cli::cmd_inspect(args, capture);
    CHECK(outcome.exit_code == 0);
    CHECK_THAT(capture.str(), Catch::Matchers::ContainsSubstring(R"("step":1)"));
}

TEST_CASE("inspect rejects truncated checkpoints with an offset") {
    const auto dir = temp_dir();
    const auto ckpt = dir / "truncated.json";
    write_file(ckpt, R"({"format":1,"step":4,"policy_params":[0.1,)");
    cli::InspectArgs args;
    args.target = ckpt.string();
    std::ostringstream capture;
    const auto outcome = cli::cmd_inspect(args, capture);
    CHECK(outcome.exit_code == 2);
    CHECK_THAT(outcome.summary, Catch::Matchers::ContainsSubstring("truncated"));
}

TEST_CASE("inspect refuses unrecognized files") {
    const auto dir = temp_dir();
    const auto file = dir / "noise.bin";
    write_file(file, "just some text\n");
    cli::InspectArgs args;
    args.target = file.string();
    std::ostringstream capture;
    CHECK(cli::cmd_inspect(args, capture).exit_code == 2);
    cli::InspectArgs missing;
    missing.target = (dir / "does_not_exist").string();
    CHECK(cli::cmd_inspect(missing, capture).exit_code == 2);
}

TEST_CASE("the argv entry point maps parse failures to exit 2") {
    std::ostringstream out, err;
    CHECK(cli::run({"no-such-command"}, out, err) == 2);
    CHECK(cli::run({}, out, err) == 2);
    CHECK(cli::run({"--help"}, out, err) == 0);
    CHECK_THAT(out.str(), Catch::Matchers::ContainsSubstring("curate"));
}
