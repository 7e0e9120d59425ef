#include <algorithm>

#include <catch2/catch_amalgamated.hpp>

#include "fevo/config.hpp"
#include "fevo/rng.hpp"

using namespace fevo;

TEST_CASE("empty config file yields the reported defaults") {
    const TrainConfig cfg = parse_config("");
    CHECK(cfg.alpha == 0.16);
    CHECK(cfg.eps_low == 0.2);
    CHECK(cfg.eps_high == 0.28);
    CHECK(cfg.mu == 0.1);
    CHECK(cfg.k_lang == 0.8);
    CHECK(cfg.m_hard == 0.0);
    CHECK(cfg.m_easy == 0.95);
    CHECK(cfg.l_hard_frac == 0.1);
    CHECK(cfg.l_easy_frac == 0.3);
    CHECK(cfg.prompts_per_batch == 128);
    CHECK(cfg.responses_per_prompt == 16);
    CHECK(cfg.mini_batch == 128);
    CHECK(cfg.critic_warmup_steps == 20);
}

TEST_CASE("threshold inversion is rejected with the key names") {
    CHECK_THROWS_WITH(parse_config("m_easy = 0.5\nm_hard = 0.6\n"),
                      Catch::Matchers::ContainsSubstring("m_hard < m_easy"));
}

TEST_CASE("same file loads to identical configs") {
    const std::string content = "seed = 7\nalpha = 0.2\n# comment\n";
    CHECK(serialize_config(parse_config(content)) == serialize_config(parse_config(content)));
}

TEST_CASE("config serialization round-trips") {
    const std::vector<std::string> fixtures = {
        "",
        "seed = 42",
        "gamma = 0.99\nalpha = 0.125\nmu = 0.0001\n",
        "batch_mode = band\nnormalize_advantages = true\n # trailing comment\n",
        "eps_high = 0.33\nprompts_per_batch = 64\njudge_url = http://127.0.0.1:9\n",
    };
    for (const auto& fx : fixtures) {
        const std::string once = serialize_config(parse_config(fx));
        const std::string twice = serialize_config(parse_config(once));
        CHECK(once == twice);
    }
}

TEST_CASE("config errors carry context") {
    CHECK_THROWS_WITH(parse_config("no_such_key = 1\n"),
                      Catch::Matchers::ContainsSubstring("no_such_key"));
    CHECK_THROWS_WITH(parse_config("gamma\n"), Catch::Matchers::ContainsSubstring("line 1"));
    CHECK_THROWS_WITH(parse_config("alpha = abc\n"), Catch::Matchers::ContainsSubstring("alpha"));
    CHECK_THROWS_WITH(parse_config("gamma = 0\n"), Catch::Matchers::ContainsSubstring("gamma"));
    CHECK_THROWS_WITH(parse_config("eps_low = -0.1\n"), Catch::Matchers::ContainsSubstring("eps_low"));
    CHECK_THROWS_AS(load_config("/nonexistent/config"), ConfigError);
}

TEST_CASE("comments and spacing are tolerated") {
    const TrainConfig cfg = parse_config("  seed=9   # tail\n\n   \n# full line\nmu =0.5");
    CHECK(cfg.seed == 9);
    CHECK(cfg.mu == 0.5);
}

TEST_CASE("derived rng streams are stable and tag-sensitive") {
    Rng a = make_rng(7, std::string_view("plan"), 3);
    Rng b = make_rng(7, std::string_view("plan"), 3);
    Rng c = make_rng(7, std::string_view("plan"), 4);
    CHECK(a() == b());
    CHECK(a() == b());
    Rng a2 = make_rng(7, std::string_view("plan"), 3);
    CHECK_FALSE(a2() == c());
}

TEST_CASE("bounded draws stay in range and shuffles are permutations") {
    Rng rng = make_rng(11);
    for (int i = 0; i < 1000; ++i) CHECK(bounded(rng, 7) < 7);
    std::vector<int> v = {1, 2, 3, 4, 5, 6, 7, 8};
    auto sorted = v;
    shuffle(v, rng);
    auto resorted = v;
    std::sort(resorted.begin(), resorted.end());
    CHECK(resorted == sorted);
}
