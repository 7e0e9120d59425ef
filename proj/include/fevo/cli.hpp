#pragma once

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fevo/config.hpp"
#include "fevo/curation.hpp"
#include "fevo/http_clients.hpp"
#include "fevo/jsonl.hpp"
#include "fevo/sampler.hpp"
#include "fevo/toytrain.hpp"

namespace fevo::cli {

// Exit-code convention: 0 success, 1 runtime/data error, 2 usage/config error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

struct CommandOutcome {
    int exit_code = kExitOk;
    std::string summary;
    std::vector<std::string> artifacts;
};

// ---------------------------------------------------------------------------
// curate

struct CurateArgs {
    std::string in;
    std::string out;
    std::string rejects = "rejects.jsonl";
    std::vector<std::string> stages;
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::size_t min_chars = 64;
    double dedup_threshold = 0.8;
    std::size_t max_answer_chars = 15;
    bool expand = true;
};

inline CommandOutcome cmd_curate(const CurateArgs& args, std::ostream& out = std::cout) {
    CommandOutcome outcome;
    TrainConfig cfg;
    try {
        if (!args.config_path.empty()) cfg = load_config(args.config_path);
    } catch (const ConfigError& e) {
        outcome.exit_code = kExitUsage;
        outcome.summary = std::string("config error: ") + e.what();
        return outcome;
    }
    if (args.seed) cfg.seed = *args.seed;

    curation::CurationOptions opts;
    opts.seed = cfg.seed;
    opts.short_entry_min_chars = args.min_chars;
    opts.dedup_threshold = args.dedup_threshold;
    opts.rl_max_answer_chars = args.max_answer_chars;
    opts.expand_choices = args.expand;

    std::unique_ptr<net::HttpJudge> judge;
    std::string judge_url = cfg.judge_url;
    if (const char* env = std::getenv("FEVO_JUDGE_URL")) judge_url = env;
    if (!judge_url.empty()) {
        judge = std::make_unique<net::HttpJudge>(net::EndpointConfig{judge_url});
        opts.judge = judge.get();
    }
    std::unique_ptr<net::HttpRewriter> rewriter;
    std::string rewriter_url = cfg.rewriter_url;
    if (const char* env = std::getenv("FEVO_REWRITER_URL")) rewriter_url = env;
    if (!rewriter_url.empty()) {
        rewriter = std::make_unique<net::HttpRewriter>(net::EndpointConfig{rewriter_url, "/rewrite"});
        opts.rewriter = rewriter.get();
    }

    try {
        std::vector<curation::PipelineRecord> records = curation::read_records(args.in);
        const std::size_t n_in = records.size();
        curation::PipelineResult result = curation::run_pipeline(std::move(records), args.stages, opts);

        curation::write_records(args.out, result.accepted);
        std::vector<jsonl::json> reject_rows;
        reject_rows.reserve(result.rejects.size());
        for (const auto& r : result.rejects) reject_rows.push_back(jsonl::json(r));
        jsonl::write_all(args.rejects, reject_rows);

        out << "input records:    " << n_in << "\n";
        for (const auto& stage : args.stages) {
            auto it = result.rejects_per_stage.find(stage);
            out << "  " << stage << " rejected: " << (it == result.rejects_per_stage.end() ? 0 : it->second)
                << "\n";
        }
        out << "accepted records: " << result.accepted.size() << "\n";
        outcome.summary = "accepted " + std::to_string(result.accepted.size()) + "/" +
                          std::to_string(n_in) + " records";
        outcome.artifacts = {args.out, args.rejects};
    } catch (const curation::UnknownStage& e) {
        outcome.exit_code = kExitUsage;
        outcome.summary = e.what();
    } catch (const std::exception& e) {
        outcome.exit_code = kExitRuntime;
        outcome.summary = e.what();
    }
    return outcome;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::int64_t steps = 200;
    std::string bank = "generate";  // "generate" or a bank JSONL path
    std::size_t bank_size = 256;
    std::string bank_mix = "0.3,0.4,0.3";
    std::string metrics_out = "metrics.jsonl";
    std::string checkpoint_out;
    std::string resume;
    std::optional<std::int64_t> workers;
};

namespace detail {

inline toy::TierMix parse_mix(const std::string& s) {
    std::vector<double> parts;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) parts.push_back(std::stod(text::trim(item)));
    if (parts.size() != 3) throw ConfigError("bank mix must be three comma-separated fractions");
    return toy::TierMix{parts[0], parts[1], parts[2]};
}

}  // namespace detail

inline CommandOutcome cmd_train(const TrainArgs& args, std::ostream& out = std::cout) {
    CommandOutcome outcome;
    TrainConfig cfg;
    toy::BankSpec bank_spec;
    try {
        if (!args.config_path.empty()) cfg = load_config(args.config_path);
        if (args.seed) cfg.seed = *args.seed;
        if (args.workers) cfg.workers = *args.workers;
        cfg.validate();
        if (args.bank == "generate") {
            bank_spec.mode = "generated";
            bank_spec.size = args.bank_size;
            bank_spec.mix = detail::parse_mix(args.bank_mix);
            bank_spec.seed = derive_seed(cfg.seed, std::string_view("bank"));
        } else {
            bank_spec.mode = "file";
            bank_spec.path = args.bank;
        }
    } catch (const std::exception& e) {
        outcome.exit_code = kExitUsage;
        outcome.summary = std::string("config error: ") + e.what();
        return outcome;
    }

    try {
        toy::TrainState state;
        bool resuming = false;
        if (!args.resume.empty()) {
            toy::Checkpoint cp = toy::load_checkpoint(args.resume);
            state = std::move(cp.state);
            bank_spec = cp.bank;
            resuming = true;
        }
        state.value.set_learning_rate(cfg.value_lr);
        toy::ToyQuestionBank bank = toy::realize_bank(bank_spec);

        const auto metrics = toy::train(state, bank, cfg, args.steps);

        std::ofstream mf(args.metrics_out,
                         std::ios::binary | (resuming ? std::ios::app : std::ios::trunc));
        if (!mf) throw jsonl::IoError("cannot open metrics file: " + args.metrics_out);
        for (const auto& row : metrics) mf << row.to_json().dump() << '\n';
        mf.close();
        outcome.artifacts.push_back(args.metrics_out);

        if (!args.checkpoint_out.empty()) {
            toy::save_checkpoint(args.checkpoint_out, state, bank_spec);
            outcome.artifacts.push_back(args.checkpoint_out);
        }

        std::ostringstream summary;
        summary << "trained " << metrics.size() << " steps (total " << state.step << ")";
        if (!metrics.empty()) summary << ", final mean_reward " << metrics.back().mean_reward;
        outcome.summary = summary.str();
        out << outcome.summary << "\n";
    } catch (const sampler::MaxRoundsExceeded& e) {
        outcome.exit_code = kExitRuntime;
        outcome.summary = e.what();
    } catch (const std::exception& e) {
        outcome.exit_code = kExitRuntime;
        outcome.summary = e.what();
    }
    return outcome;
}

// ---------------------------------------------------------------------------
// reward-check

struct RewardCheckArgs {
    std::string in;
    std::string config_path;
    std::optional<std::uint64_t> seed;
};

/// Reachable reward totals, used for the aggregate histogram.
inline const std::vector<double>& reward_total_levels() {
    static const std::vector<double> v = {-2.5, -2.0, -1.5, 1.5, 2.0};
    return v;
}

inline CommandOutcome cmd_reward_check(const RewardCheckArgs& args, std::ostream& out = std::cout) {
    CommandOutcome outcome;
    TrainConfig cfg;
    try {
        if (!args.config_path.empty()) cfg = load_config(args.config_path);
    } catch (const ConfigError& e) {
        outcome.exit_code = kExitUsage;
        outcome.summary = std::string("config error: ") + e.what();
        return outcome;
    }

    std::unique_ptr<net::HttpJudge> judge;
    const reward::AnswerJudge* judge_ptr = &reward::exact_judge();
    std::string judge_url = cfg.judge_url;
    if (const char* env = std::getenv("FEVO_JUDGE_URL")) judge_url = env;
    if (!judge_url.empty()) {
        judge = std::make_unique<net::HttpJudge>(net::EndpointConfig{judge_url});
        judge_ptr = judge.get();
    }

    std::map<double, std::size_t> histogram;
    for (double level : reward_total_levels()) histogram[level] = 0;
    std::size_t scored = 0, errors = 0;
    try {
        jsonl::for_each_line(
            args.in,
            [&](std::size_t line_no, const jsonl::json& j) {
                try {
                    const auto response = j.at("response").get<std::string>();
                    const auto reference = j.at("reference").get<std::string>();
                    const AnswerKind kind = answer_kind_from_string(j.value("kind", "short_text"));
                    const reward::RewardBreakdown rb =
                        reward::score(response, reference, kind, cfg.k_lang, judge_ptr);
                    out << "line " << line_no << ": total=" << rb.total
                        << " format_ok=" << (rb.format_ok ? "true" : "false")
                        << " answer_ok=" << (rb.answer_ok ? "true" : "false")
                        << " r_format_accuracy=" << rb.r_format_accuracy
                        << " r_language=" << rb.r_language << "\n";
                    histogram[rb.total] += 1;
                    ++scored;
                } catch (const reward::NeedsJudge&) {
                    out << "line " << line_no << ": needs_judge\n";
                    ++errors;
                } catch (const std::exception& e) {
                    out << "line " << line_no << ": error: " << e.what() << "\n";
                    ++errors;
                }
            },
            [&](std::size_t line_no, const std::string&) {
                out << "line " << line_no << ": malformed JSON\n";
                ++errors;
            });
    } catch (const std::exception& e) {
        outcome.exit_code = kExitRuntime;
        outcome.summary = e.what();
        return outcome;
    }

    out << "histogram:\n";
    for (const auto& [total, count] : histogram) out << "  " << total << ": " << count << "\n";
    outcome.exit_code = errors > 0 ? kExitRuntime : kExitOk;
    outcome.summary = "scored " + std::to_string(scored) + " responses, " + std::to_string(errors) +
                      " errors";
    return outcome;
}

// ---------------------------------------------------------------------------
// inspect

struct InspectArgs {
    std::string target;
    std::string config_path;
};

inline CommandOutcome cmd_inspect(const InspectArgs& args, std::ostream& out = std::cout) {
    CommandOutcome outcome;
    TrainConfig cfg;
    try {
        if (!args.config_path.empty()) cfg = load_config(args.config_path);
    } catch (const ConfigError& e) {
        outcome.exit_code = kExitUsage;
        outcome.summary = std::string("config error: ") + e.what();
        return outcome;
    }

    std::ifstream in(args.target, std::ios::binary);
    if (!in) {
        outcome.exit_code = kExitUsage;
        outcome.summary = "cannot open file: " + args.target;
        return outcome;
    }
    std::string first_line;
    std::getline(in, first_line);
    jsonl::json first = jsonl::json::parse(first_line, nullptr, false);

    if (first.is_object() && first.contains("question_id") && first.contains("attempts")) {
        // Accuracy ledger snapshot.
        try {
            sampler::AccuracyLedger ledger = sampler::AccuracyLedger::load_jsonl(args.target);
            std::map<std::string, std::size_t> histogram = {
                {"hard", 0}, {"easy", 0}, {"mid", 0}, {"unseen", 0}};
            for (const auto& [id, e] : ledger.entries())
                histogram[to_string(sampler::classify(&e, cfg.m_hard, cfg.m_easy))] += 1;
            out << "ledger: " << ledger.size() << " questions, " << ledger.total_attempts()
                << " attempts\n";
            for (const auto& [name, count] : histogram) out << "  " << name << ": " << count << "\n";
            outcome.summary = "ledger with " + std::to_string(ledger.size()) + " questions";
        } catch (const std::exception& e) {
            outcome.exit_code = kExitRuntime;
            outcome.summary = e.what();
        }
        return outcome;
    }

    if (first.is_object() && first.contains("step") && first.contains("mean_reward")) {
        // Metrics log: echo the tail.
        std::string line = first_line, last = first_line;
        std::size_t rows = 1;
        while (std::getline(in, line)) {
            if (!line.empty()) {
                last = line;
                ++rows;
            }
        }
        out << "metrics: " << rows << " rows\n";
        out << "last: " << last << "\n";
        outcome.summary = "metrics with " + std::to_string(rows) + " rows";
        return outcome;
    }

    // Checkpoint (whole-file JSON).
    in.clear();
    in.seekg(0);
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        jsonl::json j = jsonl::json::parse(ss.str());
        if (!j.is_object() || !j.contains("policy_params") || !j.contains("step"))
            throw std::runtime_error("unrecognized file format");
        out << "checkpoint: step " << j["step"].get<std::int64_t>() << ", "
            << j["policy_params"].size() << " policy params, " << j["value_table"].size()
            << " value cells, " << j["ledger"].size() << " ledger entries\n";
        outcome.summary = "checkpoint at step " + std::to_string(j["step"].get<std::int64_t>());
    } catch (const jsonl::json::parse_error& e) {
        outcome.exit_code = kExitUsage;
        outcome.summary = std::string("unrecognized or truncated file: ") + e.what();
    } catch (const std::exception& e) {
        outcome.exit_code = kExitUsage;
        outcome.summary = std::string("unrecognized file: ") + e.what();
    }
    return outcome;
}

// ---------------------------------------------------------------------------
// Argument parsing

struct ParsedArgs {
    CurateArgs curate;
    TrainArgs train;
    RewardCheckArgs reward_check;
    InspectArgs inspect;
};

inline std::unique_ptr<CLI::App> build_app(ParsedArgs& args) {
    auto app = std::make_unique<CLI::App>("rule-based RL post-training and data curation toolkit",
                                          "fevo");
    app->require_subcommand(1);

    auto* curate = app->add_subcommand("curate", "run curation stages over a JSONL corpus");
    curate->add_option("--in", args.curate.in, "input records (JSONL)")->required();
    curate->add_option("--out", args.curate.out, "accepted records output (JSONL)")->required();
    curate->add_option("--rejects", args.curate.rejects, "reject report output (JSONL)");
    curate->add_option("--stages", args.curate.stages, "comma-separated stage list")
        ->required()
        ->delimiter(',');
    curate->add_option("--config", args.curate.config_path, "config file path");
    curate->add_option("--seed", args.curate.seed, "seed override");
    curate->add_option("--min-chars", args.curate.min_chars, "short-entry minimum characters");
    curate->add_option("--dedup-threshold", args.curate.dedup_threshold,
                       "estimated Jaccard threshold for duplicates");
    curate->add_option("--max-answer-chars", args.curate.max_answer_chars,
                       "RL gate verifiable answer length");
    curate->add_flag("--expand,!--no-expand", args.curate.expand,
                     "expand answer choices into standalone samples");

    auto* train = app->add_subcommand("train", "run the toy RL training loop");
    train->add_option("--config", args.train.config_path, "config file path");
    train->add_option("--seed", args.train.seed, "seed override");
    train->add_option("--steps", args.train.steps, "update steps to run");
    train->add_option("--bank", args.train.bank, "'generate' or question bank JSONL path");
    train->add_option("--bank-size", args.train.bank_size, "generated bank size");
    train->add_option("--bank-mix", args.train.bank_mix, "easy,mid,hard fractions");
    train->add_option("--metrics-out", args.train.metrics_out, "metrics JSONL output");
    train->add_option("--checkpoint-out", args.train.checkpoint_out, "checkpoint JSON output");
    train->add_option("--resume", args.train.resume, "resume from checkpoint");
    train->add_option("--workers", args.train.workers, "rollout worker threads");

    auto* reward_check = app->add_subcommand("reward-check", "score responses against references");
    reward_check->add_option("--in", args.reward_check.in, "JSONL of {response, reference, kind}")
        ->required();
    reward_check->add_option("--config", args.reward_check.config_path, "config file path");
    reward_check->add_option("--seed", args.reward_check.seed, "seed override");

    auto* inspect = app->add_subcommand("inspect", "summarize a ledger, metrics, or checkpoint file");
    inspect->add_option("target", args.inspect.target, "file to inspect")->required();
    inspect->add_option("--config", args.inspect.config_path, "config file path");

    return app;
}

inline std::string help_text() {
    ParsedArgs args;
    auto app = build_app(args);
    return app->help();
}

inline int run(const std::vector<std::string>& argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
    ParsedArgs args;
    auto app = build_app(args);
    try {
        std::vector<std::string> reversed(argv.rbegin(), argv.rend());
        app->parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app->help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app->help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << e.what() << "\n";
        return kExitUsage;
    }

    CommandOutcome outcome;
    if (app->got_subcommand("curate")) outcome = cmd_curate(args.curate, out);
    else if (app->got_subcommand("train")) outcome = cmd_train(args.train, out);
    else if (app->got_subcommand("reward-check")) outcome = cmd_reward_check(args.reward_check, out);
    else if (app->got_subcommand("inspect")) outcome = cmd_inspect(args.inspect, out);
    if (outcome.exit_code != kExitOk) err << "error: " << outcome.summary << "\n";
    return outcome.exit_code;
}

inline int run(int argc, const char* const* argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args);
}

}  // namespace fevo::cli
