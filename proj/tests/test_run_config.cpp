// SPDX-License-Identifier: Apache-2.0
#include "support.hpp"

#include <intentkit/run_config.hpp>

#include <doctest.h>

#include <map>
#include <set>

using namespace intentkit;
using namespace testsupport;

TEST_CASE("keys are unique and sectioned")
{
    auto const& keys = RunConfig::keys();
    std::set<std::string> const uniq(keys.begin(), keys.end());
    CHECK(uniq.size() == keys.size());
    std::set<std::string> const sections { "data", "embedder", "backend", "agent", "generation", "reward",
                                           "policy", "experiment", "run" };
    for (auto const& k: keys)
    {
        auto const dot = k.find('.');
        REQUIRE(dot != std::string::npos);
        CHECK(sections.count(k.substr(0, dot)) == 1);
    }
    CHECK(env_name("reward.r_s") == "INTENTKIT_REWARD_R_S");
}

TEST_CASE("every key round-trips through get and set")
{
    RunConfig a;
    for (auto const& k: RunConfig::keys())
    {
        RunConfig b;
        b.set(k, a.get(k));
        CHECK_MESSAGE(b.get(k) == a.get(k), k);
    }
}

TEST_CASE("typed setters")
{
    RunConfig c;
    c.set("reward.r_s", "0.75");
    CHECK(c.reward.r_s == 0.75);
    c.set("agent.mode", "forced_retrieval");
    CHECK(c.agent.mode == StrategyMode::ForcedRetrieval);
    c.set("experiment.modes", "self_decided, forced_no_retrieval");
    CHECK(c.grid.modes == std::vector<StrategyMode> { StrategyMode::SelfDecided, StrategyMode::ForcedNoRetrieval });
    c.set("experiment.k_values", "1,3,5");
    CHECK(c.grid.k_values == std::vector<std::size_t> { 1, 3, 5 });
    c.set("experiment.ablations", "full,no_tool");
    CHECK(c.grid.reward_ablations == std::vector<RewardAblation> { RewardAblation::Full, RewardAblation::NoTool });
    c.set("generation.reveal", "yes");
    CHECK(c.generation.reveal_on_exhaustion);
    c.set("experiment.gap_min", "0.1");
    CHECK(c.gap_min == 0.1);
    c.set("experiment.gap_min", "");
    CHECK_FALSE(c.gap_min.has_value());
    c.set("run.seed", "18446744073709551615");
    CHECK(c.seed == UINT64_MAX);

    CHECK_THROWS_AS(c.set("reward.bogus", "1"), ConfigError);
    CHECK_THROWS_AS(c.set("reward.r_s", "half"), ConfigError);
    CHECK_THROWS_AS(c.set("agent.k", "-1"), ConfigError);
    CHECK_THROWS_AS(c.set("agent.k", "3.5"), ConfigError);
    CHECK_THROWS_AS(c.set("run.macro_over_taxonomy", "maybe"), ConfigError);
    CHECK_THROWS_AS(c.set("agent.mode", "sometimes"), ConfigError);
    CHECK_THROWS_AS(c.set("backend.kind", "openai"), ConfigError);
}

TEST_CASE("ini files")
{
    RunConfig c;
    c.apply_ini("# comment\n[reward]\nr_s = 0.4\nr_d=0.2\n\n[agent]\nmode = forced_no_retrieval\n"
                "[generation]\nfeedback = Not quite, think again.\n");
    CHECK(c.reward.r_s == 0.4);
    CHECK(c.reward.r_d == 0.2);
    CHECK(c.agent.mode == StrategyMode::ForcedNoRetrieval);
    CHECK(c.generation.feedback_text == "Not quite, think again.");

    CHECK_THROWS_AS(c.apply_ini("[reward]\nunknown = 1\n"), ConfigError);
    CHECK_THROWS_AS(c.apply_ini("[nosuch]\nkey = 1\n"), ConfigError);
    CHECK_THROWS_AS(c.apply_ini("r_s = 1\n"), ConfigError);

    TempDir dir;
    auto const path = dir.file("run.ini");
    spit(path, "[run]\nseed = 11\n");
    c.apply_ini_file(path);
    CHECK(c.seed == 11);
    CHECK_THROWS_AS(c.apply_ini_file(dir.file("missing.ini")), ConfigError);
}

TEST_CASE("environment overrides file, later set overrides environment")
{
    RunConfig c;
    c.apply_ini("[policy]\nlr = 0.3\nsteps = 10\n");
    std::map<std::string, std::string> env { { "INTENTKIT_POLICY_LR", "0.05" }, { "INTENTKIT_RUN_SEED", "99" },
                                             { "UNRELATED", "x" } };
    c.apply_env([&](std::string const& name) -> std::optional<std::string> {
        auto it = env.find(name);
        if (it == env.end())
            return std::nullopt;
        return it->second;
    });
    CHECK(c.policy.lr == 0.05);
    CHECK(c.policy.steps == 10);
    CHECK(c.seed == 99);
    c.set("policy.lr", "0.2");
    CHECK(c.policy.lr == 0.2);
}

TEST_CASE("hash ignores output location and thread count only")
{
    RunConfig a;
    RunConfig b;
    b.output_dir = "elsewhere";
    b.jobs = 7;
    CHECK(a.hash() == b.hash());
    CHECK(a.hash().size() == 16);
    b.seed = 8;
    CHECK(a.hash() != b.hash());
    CHECK(a.canonical().find("run.output_dir") == std::string::npos);
    CHECK(a.canonical().find("run.seed=7\n") != std::string::npos);
}

TEST_CASE("validation")
{
    RunConfig c;
    CHECK_NOTHROW(c.validate());
    auto bad = [](auto mutate) {
        RunConfig r;
        mutate(r);
        return r;
    };
    CHECK_THROWS_AS(bad([](RunConfig& r) { r.samples = 0; }).validate(), ConfigError);
    CHECK_THROWS_AS(bad([](RunConfig& r) { r.backend.kind = BackendKind::Scripted; }).validate(), ConfigError);
    CHECK_THROWS_AS(bad([](RunConfig& r) { r.backend.kind = BackendKind::Remote; }).validate(), ConfigError);
    CHECK_THROWS_AS(bad([](RunConfig& r) { r.gap_min = 0.2; }).validate(), ConfigError);
    CHECK_THROWS_AS(bad([](RunConfig& r) {
                        r.gap_min = 0.2;
                        r.gap_max = 0.1;
                    }).validate(),
                    ConfigError);
    CHECK_THROWS_AS(bad([](RunConfig& r) { r.p_options_hit = 1.5; }).validate(), ConfigError);
    CHECK_THROWS_AS(bad([](RunConfig& r) { r.checkpoint_every = 0; }).validate(), ConfigError);
    CHECK(c.effective_jobs() >= 1);
    c.jobs = 3;
    CHECK(c.effective_jobs() == 3);
}

TEST_CASE("world and training config follow the settings")
{
    RunConfig c;
    c.seed = 5;
    c.p_direct_correct = { 0.7, 0.1 };
    c.ablation = RewardAblation::NoTool;
    auto const w = c.world();
    CHECK(w.seed == 5);
    CHECK(w.p_direct_correct[0] == 0.7);
    auto const t = c.train_config();
    CHECK(t.reward.r_d == 0.0);
    CHECK(t.reward.r_s == 0.0);
}

TEST_CASE("backend factories")
{
    auto const& tax = toy_taxonomy();
    BackendSettings none;
    CHECK_THROWS_AS((void)make_backend_factory(none, tax), ConfigError);

    TempDir dir;
    auto const script = dir.file("script.jsonl");
    spit(script, R"({"steps": [{"answer": "joke"}]})"
                 "\n\n"
                 R"({"steps": [{"tool_call": ["joke", "warn"]}, {"answer": "warn"}]})"
                 "\n");
    auto const sessions = load_script_sessions(script);
    REQUIRE(sessions.size() == 2);
    CHECK(sessions[1].size() == 2);

    BackendSettings s;
    s.kind = BackendKind::Scripted;
    s.script = script;
    auto f = make_backend_factory(s, tax);
    ChatRequest req;
    req.messages = { Message::system("sys"), Message::user("hi") };
    CHECK(f(0)->complete(req).front().find("<answer>joke</answer>") != std::string::npos);
    CHECK(f(1)->complete(req).front().find("retrieve_intent_context") != std::string::npos);
    CHECK_THROWS_AS((void)f(2), DataError);

    spit(script, "{\"steps\": [{\"answer\": \"joke\"}]}\n{not json\n");
    CHECK_THROWS_AS((void)load_script_sessions(script), DataError);
    CHECK_THROWS_AS((void)load_script_sessions(dir.file("absent.jsonl")), DataError);

    BackendSettings echo;
    echo.kind = BackendKind::HistoryEcho;
    echo.fallback_label = "warn";
    CHECK(make_backend_factory(echo, tax)(0) != nullptr);
    echo.fallback_label = "shrug";
    CHECK_THROWS((void)make_backend_factory(echo, tax));
    CHECK(backend_kind_from_string("history_echo") == BackendKind::HistoryEcho);
    CHECK_THROWS_AS((void)backend_kind_from_string("gpt"), ConfigError);
}
