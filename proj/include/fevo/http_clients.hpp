#pragma once

#include <optional>
#include <semaphore>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "fevo/curation.hpp"
#include "fevo/reward.hpp"

namespace fevo::net {

struct EndpointConfig {
    std::string base_url;         // e.g. "http://127.0.0.1:8080"
    std::string path = "/judge";
    int timeout_seconds = 5;
    int retries = 2;
    int max_in_flight = 8;
};

namespace detail {

inline std::optional<nlohmann::json> post_json(const EndpointConfig& cfg, const std::string& path,
                                               const nlohmann::json& body,
                                               std::counting_semaphore<>& slots) {
    slots.acquire();
    struct Release {
        std::counting_semaphore<>& s;
        ~Release() { s.release(); }
    } release{slots};

    for (int attempt = 0; attempt <= cfg.retries; ++attempt) {
        httplib::Client client(cfg.base_url);
        client.set_connection_timeout(cfg.timeout_seconds, 0);
        client.set_read_timeout(cfg.timeout_seconds, 0);
        auto res = client.Post(path, body.dump(), "application/json");
        if (!res || res->status != 200) continue;
        nlohmann::json parsed = nlohmann::json::parse(res->body, nullptr, false);
        if (parsed.is_discarded()) continue;
        return parsed;
    }
    return std::nullopt;
}

}  // namespace detail

/**
 * Judge backed by an external HTTP endpoint. Contract: POST {candidate,
 * reference, question_id} to the configured path, response {"equivalent":
 * bool}. Transport failures and malformed replies degrade to
 * Verdict::needs_judge after the configured retries. Callers may share one
 * instance across workers; in-flight requests are bounded.
 */
class HttpJudge final : public reward::AnswerJudge {
public:
    explicit HttpJudge(EndpointConfig cfg) : cfg_(std::move(cfg)), slots_(cfg_.max_in_flight) {}

    reward::Verdict equivalent(const std::string& candidate, const std::string& reference,
                               const std::string& question_id) const override {
        nlohmann::json body = {
            {"candidate", candidate}, {"reference", reference}, {"question_id", question_id}};
        auto res = detail::post_json(cfg_, cfg_.path, body, slots_);
        if (!res || !res->contains("equivalent") || !(*res)["equivalent"].is_boolean())
            return reward::Verdict::needs_judge;
        return (*res)["equivalent"].get<bool>() ? reward::Verdict::match : reward::Verdict::mismatch;
    }

private:
    EndpointConfig cfg_;
    mutable std::counting_semaphore<> slots_;
};

/**
 * Rewriter backed by an external HTTP endpoint. Contract: POST {question_id,
 * stem, option_text, option_correct} to /rewrite, response {"prompt": str,
 * "reference_answer": str} or {"decline": true}. Failures decline.
 */
class HttpRewriter final : public curation::QuestionRewriter {
public:
    explicit HttpRewriter(EndpointConfig cfg) : cfg_(std::move(cfg)), slots_(cfg_.max_in_flight) {
        if (cfg_.path == "/judge") cfg_.path = "/rewrite";
    }

    std::optional<curation::RewriteResult> rewrite(const curation::RewriteRequest& req) const override {
        nlohmann::json body = {{"question_id", req.question_id},
                               {"stem", req.stem},
                               {"option_text", req.option_text},
                               {"option_correct", req.option_correct}};
        auto res = detail::post_json(cfg_, cfg_.path, body, slots_);
        if (!res || res->value("decline", false)) return std::nullopt;
        if (!res->contains("prompt") || !res->contains("reference_answer")) return std::nullopt;
        return curation::RewriteResult{res->at("prompt").get<std::string>(),
                                       res->at("reference_answer").get<std::string>()};
    }

private:
    EndpointConfig cfg_;
    mutable std::counting_semaphore<> slots_;
};

}  // namespace fevo::net
