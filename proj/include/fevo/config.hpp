#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fevo/text.hpp"

namespace fevo {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class BatchMode {
    caps,  // hard/easy capped at l_hard_frac / l_easy_frac of the batch
    band,  // only questions with m_hard < accuracy < m_easy (plus unseen)
    none   // uniform sampling, no accuracy-based prefilter
};

inline std::string to_string(BatchMode m) {
    switch (m) {
        case BatchMode::caps: return "caps";
        case BatchMode::band: return "band";
        case BatchMode::none: return "none";
    }
    return "caps";
}

/**
 * Training hyperparameters. Defaults reproduce the reported RL setup, so an
 * empty config file is a valid starting point. Loaded from a line-oriented
 * `key = value` file with `#` comments.
 */
struct TrainConfig {
    double gamma = 1.0;             // discount, (0,1]
    double alpha = 0.16;            // length-adaptivity coefficient for lambda_actor
    double eps_low = 0.2;           // lower clip range
    double eps_high = 0.28;         // upper clip range
    double mu = 0.1;                // NLL loss weight (not fixed by the source setup)
    double k_lang = 0.8;            // language-consistency threshold
    double m_hard = 0.0;            // accuracy <= m_hard -> hard
    double m_easy = 0.95;           // accuracy >= m_easy -> easy
    double l_hard_frac = 0.1;       // cap on hard questions per rollout batch
    double l_easy_frac = 0.3;       // cap on easy questions per rollout batch
    std::int64_t prompts_per_batch = 128;
    std::int64_t responses_per_prompt = 16;
    std::int64_t mini_batch = 128;  // informative groups required per update
    std::int64_t critic_warmup_steps = 20;
    std::uint64_t seed = 0;

    // Harness knobs (not part of the reported setup).
    std::int64_t max_rollout_rounds = 16;
    std::int64_t inner_epochs = 1;
    double policy_lr = 0.5;
    double value_lr = 0.3;
    bool normalize_advantages = false;
    BatchMode batch_mode = BatchMode::caps;
    double format_dropout = 0.01;   // structural-token corruption probability
    double temperature = 1.0;
    std::int64_t workers = 1;
    std::string judge_url;          // empty -> offline exact-match judge
    std::string rewriter_url;       // empty -> no rewriter configured

    void validate() const {
        auto fail = [](const std::string& msg) { throw ConfigError(msg); };
        if (!(gamma > 0.0 && gamma <= 1.0)) fail("gamma must be in (0,1]");
        if (!(alpha > 0.0)) fail("alpha must be > 0");
        if (!(eps_low > 0.0)) fail("eps_low must be > 0");
        if (!(eps_high > 0.0)) fail("eps_high must be > 0");
        if (!(mu >= 0.0)) fail("mu must be >= 0");
        if (!(k_lang > 0.0 && k_lang <= 1.0)) fail("k_lang must be in (0,1]");
        if (!(m_hard >= 0.0 && m_easy <= 1.0 && m_hard < m_easy))
            fail("m_hard < m_easy violated (require 0 <= m_hard < m_easy <= 1)");
        if (!(l_hard_frac >= 0.0 && l_easy_frac >= 0.0 && l_hard_frac + l_easy_frac <= 1.0))
            fail("l_hard_frac + l_easy_frac must lie in [0,1]");
        if (prompts_per_batch < 1) fail("prompts_per_batch must be >= 1");
        if (responses_per_prompt < 1) fail("responses_per_prompt must be >= 1");
        if (mini_batch < 1) fail("mini_batch must be >= 1");
        if (critic_warmup_steps < 0) fail("critic_warmup_steps must be >= 0");
        if (max_rollout_rounds < 1) fail("max_rollout_rounds must be >= 1");
        if (inner_epochs < 1) fail("inner_epochs must be >= 1");
        if (!(policy_lr > 0.0)) fail("policy_lr must be > 0");
        if (!(value_lr > 0.0)) fail("value_lr must be > 0");
        if (!(format_dropout >= 0.0 && format_dropout < 1.0)) fail("format_dropout must be in [0,1)");
        if (!(temperature > 0.0)) fail("temperature must be > 0");
        if (workers < 1) fail("workers must be >= 1");
    }
};

namespace detail {

inline std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

struct ConfigKey {
    std::string name;
    std::function<void(TrainConfig&, const std::string&)> set;
    std::function<std::string(const TrainConfig&)> get;
};

inline double parse_double_value(const std::string& key, const std::string& v) {
    double out = 0.0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size())
        throw ConfigError("invalid numeric value for key '" + key + "': " + v);
    return out;
}

inline std::int64_t parse_int_value(const std::string& key, const std::string& v) {
    std::int64_t out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size())
        throw ConfigError("invalid integer value for key '" + key + "': " + v);
    return out;
}

inline bool parse_bool_value(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("invalid boolean value for key '" + key + "': " + v);
}

inline const std::vector<ConfigKey>& config_keys() {
    auto dbl = [](std::string name, double TrainConfig::* field) {
        return ConfigKey{
            name,
            [name, field](TrainConfig& c, const std::string& v) { c.*field = parse_double_value(name, v); },
            [field](const TrainConfig& c) { return format_double(c.*field); }};
    };
    auto i64 = [](std::string name, std::int64_t TrainConfig::* field) {
        return ConfigKey{
            name,
            [name, field](TrainConfig& c, const std::string& v) { c.*field = parse_int_value(name, v); },
            [field](const TrainConfig& c) { return std::to_string(c.*field); }};
    };
    static const std::vector<ConfigKey> keys = {
        dbl("gamma", &TrainConfig::gamma),
        dbl("alpha", &TrainConfig::alpha),
        dbl("eps_low", &TrainConfig::eps_low),
        dbl("eps_high", &TrainConfig::eps_high),
        dbl("mu", &TrainConfig::mu),
        dbl("k_lang", &TrainConfig::k_lang),
        dbl("m_hard", &TrainConfig::m_hard),
        dbl("m_easy", &TrainConfig::m_easy),
        dbl("l_hard_frac", &TrainConfig::l_hard_frac),
        dbl("l_easy_frac", &TrainConfig::l_easy_frac),
        i64("prompts_per_batch", &TrainConfig::prompts_per_batch),
        i64("responses_per_prompt", &TrainConfig::responses_per_prompt),
        i64("mini_batch", &TrainConfig::mini_batch),
        i64("critic_warmup_steps", &TrainConfig::critic_warmup_steps),
        ConfigKey{"seed",
                  [](TrainConfig& c, const std::string& v) {
                      std::uint64_t out = 0;
                      auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
                      if (ec != std::errc{} || ptr != v.data() + v.size())
                          throw ConfigError("invalid integer value for key 'seed': " + v);
                      c.seed = out;
                  },
                  [](const TrainConfig& c) { return std::to_string(c.seed); }},
        i64("max_rollout_rounds", &TrainConfig::max_rollout_rounds),
        i64("inner_epochs", &TrainConfig::inner_epochs),
        dbl("policy_lr", &TrainConfig::policy_lr),
        dbl("value_lr", &TrainConfig::value_lr),
        ConfigKey{"normalize_advantages",
                  [](TrainConfig& c, const std::string& v) {
                      c.normalize_advantages = parse_bool_value("normalize_advantages", v);
                  },
                  [](const TrainConfig& c) { return c.normalize_advantages ? std::string("true") : std::string("false"); }},
        ConfigKey{"batch_mode",
                  [](TrainConfig& c, const std::string& v) {
                      if (v == "caps") c.batch_mode = BatchMode::caps;
                      else if (v == "band") c.batch_mode = BatchMode::band;
                      else if (v == "none") c.batch_mode = BatchMode::none;
                      else throw ConfigError("invalid batch_mode '" + v + "' (expected caps|band|none)");
                  },
                  [](const TrainConfig& c) { return to_string(c.batch_mode); }},
        dbl("format_dropout", &TrainConfig::format_dropout),
        dbl("temperature", &TrainConfig::temperature),
        i64("workers", &TrainConfig::workers),
        ConfigKey{"judge_url",
                  [](TrainConfig& c, const std::string& v) { c.judge_url = v; },
                  [](const TrainConfig& c) { return c.judge_url; }},
        ConfigKey{"rewriter_url",
                  [](TrainConfig& c, const std::string& v) { c.rewriter_url = v; },
                  [](const TrainConfig& c) { return c.rewriter_url; }},
    };
    return keys;
}

inline const ConfigKey* find_key(std::string_view name) {
    for (const auto& k : config_keys())
        if (k.name == name) return &k;
    return nullptr;
}

}  // namespace detail

/// Parses config text. Unset keys keep their defaults; unknown keys and
/// malformed lines raise ConfigError with the offending key or line number.
inline TrainConfig parse_config(std::string_view content) {
    TrainConfig cfg;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= content.size()) {
        std::size_t eol = content.find('\n', pos);
        std::string_view line = content.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
        pos = eol == std::string_view::npos ? content.size() + 1 : eol + 1;
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        std::string trimmed = text::trim(line);
        if (trimmed.empty()) continue;
        auto eq = trimmed.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
        std::string key = text::trim(std::string_view(trimmed).substr(0, eq));
        std::string value = text::trim(std::string_view(trimmed).substr(eq + 1));
        const detail::ConfigKey* ck = detail::find_key(key);
        if (!ck) throw ConfigError("unknown config key '" + key + "'");
        ck->set(cfg, value);
    }
    cfg.validate();
    return cfg;
}

inline TrainConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

/// Canonical serialization: every key, fixed order, round-trip stable.
inline std::string serialize_config(const TrainConfig& cfg) {
    std::string out;
    for (const auto& k : detail::config_keys()) {
        out += k.name;
        out += " = ";
        out += k.get(cfg);
        out += '\n';
    }
    return out;
}

}  // namespace fevo
