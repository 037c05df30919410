// SPDX-License-Identifier: Apache-2.0
#include "support.hpp"

#include <intentkit/agent_runtime.hpp>

#include <doctest.h>

#include <algorithm>
#include <random>

using namespace intentkit;
using namespace testsupport;

namespace
{
HistoryLibrary sandra_library()
{
    HistoryLibrary lib(toy_taxonomy(), bow());
    lib.insert(UserId("sandra"), L("complain"), { "sandra complains when chores are left undone", ExplanationKind::Generic });
    lib.insert(UserId("sandra"), L("taunt"), { "sandra teases friends about games", ExplanationKind::Generic });
    lib.insert(UserId("other"), L("complain"), { "chores undone dishes", ExplanationKind::Generic });
    return lib;
}

AgentConfig mode(StrategyMode m)
{
    AgentConfig c;
    c.mode = m;
    return c;
}

std::size_t count_role(Trajectory const& t, Role r)
{
    return static_cast<std::size_t>(
        std::count_if(t.messages.begin(), t.messages.end(), [r](Message const& m) { return m.role == r; }));
}
} // namespace

TEST_CASE("parse_output examples")
{
    auto const a = parse_output("<answer>praise</answer><intent_explanation>x</intent_explanation>");
    REQUIRE(a.is_answer());
    CHECK(a.label_raw == "praise");
    CHECK(a.explanation == "x");

    auto const t = parse_output(R"(retrieve_intent_context(user="amy", intent_options=["complain","taunt"]))");
    REQUIRE(t.is_tool_call());
    CHECK(t.options == std::vector<std::string> { "complain", "taunt" });

    CHECK(parse_output("I think maybe...").kind == ParsedOutput::Kind::Malformed);
}

TEST_CASE("parse_output edge cases")
{
    CHECK(parse_output("<answer>joke</answer>").explanation == std::nullopt);
    CHECK(parse_output("<answer>  </answer>").kind == ParsedOutput::Kind::Malformed);
    CHECK(parse_output("<answer>joke").kind == ParsedOutput::Kind::Malformed);
    CHECK(parse_output("<answer>a</answer><answer>b</answer>").label_raw == "a");

    auto const json = parse_output(R"(retrieve_intent_context({"user": "amy", "intent_options": ["Joke", "joke ", "warn"]}))");
    REQUIRE(json.is_tool_call());
    CHECK(json.options == std::vector<std::string> { "Joke", "warn" });

    // earlier block wins
    CHECK(parse_output(R"(<answer>joke</answer> retrieve_intent_context(user="a", intent_options=["x"]))").is_answer());
    CHECK(parse_output(R"(retrieve_intent_context(user="a", intent_options=["x"]) <answer>joke</answer>)").is_tool_call());
    CHECK(parse_output("retrieve_intent_context(user=\"a\", intent_options=[])").kind == ParsedOutput::Kind::Malformed);
    CHECK(parse_output("retrieve_intent_context(user=\"a\")").kind == ParsedOutput::Kind::Malformed);
}

TEST_CASE("tool response rendering")
{
    auto const lib = sandra_library();
    auto const two = lib.retrieve(UserId("sandra"), { L("complain"), L("taunt") }, "chores undone", 2);
    auto const text = render_tool_response(two);
    auto const triples = parse_tool_response(text);
    REQUIRE(triples.size() == 2);
    CHECK(triples[0].label == two.entries[0].entry.label.name);
    CHECK(triples[1].label == two.entries[1].entry.label.name);
    CHECK(text.find("1. (") != std::string::npos);
    CHECK(text.find("2. (") != std::string::npos);

    CHECK(render_tool_response(RetrievalResult {}) == kNoHistorySentinel);
    CHECK(parse_tool_response(kNoHistorySentinel).empty());
}

TEST_CASE("rendered triple order equals a brute-force ranking")
{
    HistoryLibrary lib(toy_taxonomy(), bow());
    std::vector<std::string> texts { "rain all day", "rain and wind", "sunny day", "wind rain rain", "day off" };
    for (std::size_t i = 0; i < texts.size(); ++i)
        lib.insert(UserId("u"), toy_taxonomy().labels()[i % 3], { texts[i], ExplanationKind::Generic });
    LabelSet opts { L("complain"), L("praise"), L("taunt") };
    auto const triples = parse_tool_response(render_tool_response(lib.retrieve(UserId("u"), opts, "rain day", 3)));

    auto const q = embed("rain day", bow());
    std::vector<std::pair<double, std::size_t>> ref;
    for (std::size_t i = 0; i < texts.size(); ++i)
        ref.emplace_back(-cosine(q, embed(texts[i], bow())), i);
    std::sort(ref.begin(), ref.end());
    REQUIRE(triples.size() == 3);
    for (std::size_t r = 0; r < 3; ++r)
        CHECK(triples[r].explanation == texts[ref[r].second]);
}

TEST_CASE("direct answer under self-decided")
{
    auto const lib = sandra_library();
    auto b = scripted({ ScriptStep::answer("complain", "x") });
    auto const out = run_inference(ctx("sandra", "you left the chores again"), toy_taxonomy(), lib, b,
                                   mode(StrategyMode::SelfDecided));
    CHECK_FALSE(out.tool_called);
    CHECK(out.turns_used == 1);
    CHECK(out.predicted == L("complain"));
    CHECK(out.format_ok);
    CHECK(validate_trajectory(out.trajectory).empty());
}

TEST_CASE("tool call then answer")
{
    auto const lib = sandra_library();
    auto b = scripted({ ScriptStep::tool_call({ "complain", "taunt" }), ScriptStep::answer("complain", "x") });
    auto const out = run_inference(ctx("sandra", "you left the chores again"), toy_taxonomy(), lib, b,
                                   mode(StrategyMode::SelfDecided));
    CHECK(out.tool_called);
    CHECK(out.turns_used == 2);
    CHECK(out.predicted == L("complain"));
    CHECK(count_role(out.trajectory, Role::Tool) == 1);
    CHECK(out.options_emitted == LabelSet { L("complain"), L("taunt") });
    CHECK(out.trajectory.tool_called);
    CHECK(validate_trajectory(out.trajectory).empty());
}

TEST_CASE("forced retrieval rejects a first-turn answer")
{
    auto const lib = sandra_library();
    auto b = scripted({ ScriptStep::answer("praise"), ScriptStep::tool_call({ "complain", "taunt" }),
                        ScriptStep::answer("complain") });
    auto const out = run_inference(ctx("sandra", "chores"), toy_taxonomy(), lib, b, mode(StrategyMode::ForcedRetrieval));
    CHECK(out.tool_called);
    CHECK(out.predicted == L("complain"));
    CHECK(out.turns_used == 3);
    CHECK(out.trajectory.messages[3].content == reminders::kMustRetrieve);
}

TEST_CASE("forced no retrieval hides the tool and refuses calls")
{
    auto const lib = sandra_library();
    auto b = scripted({ ScriptStep::tool_call({ "complain" }), ScriptStep::answer("taunt") });
    auto const out = run_inference(ctx("sandra", "chores"), toy_taxonomy(), lib, b, mode(StrategyMode::ForcedNoRetrieval));
    CHECK_FALSE(out.tool_called);
    CHECK(count_role(out.trajectory, Role::Tool) == 0);
    CHECK_FALSE(prompt_offers_tool(out.trajectory.messages[0].content));
    CHECK(out.predicted == L("taunt"));
}

TEST_CASE("malformed output gets a reminder and turn exhaustion yields no match")
{
    auto const lib = sandra_library();
    AgentConfig cfg = mode(StrategyMode::SelfDecided);
    cfg.max_turns = 3;
    auto b = scripted({ ScriptStep::malformed("hmm"), ScriptStep::malformed("hmm"), ScriptStep::malformed("hmm"),
                        ScriptStep::answer("joke") });
    auto const out = run_inference(ctx("sandra", "chores"), toy_taxonomy(), lib, b, cfg);
    CHECK_FALSE(out.predicted.has_value());
    CHECK(out.turns_used == 3);
    CHECK(b.remaining() == 1);
    CHECK(out.trajectory.messages[3].content == reminders::kFormat);
    CHECK_FALSE(out.format_ok);
}

TEST_CASE("out-of-vocabulary answer is a no-match, not a crash")
{
    auto const lib = sandra_library();
    auto b = scripted({ ScriptStep::answer("grumble") });
    auto const out = run_inference(ctx("sandra", "chores"), toy_taxonomy(), lib, b, mode(StrategyMode::SelfDecided));
    CHECK_FALSE(out.predicted.has_value());
    CHECK_FALSE(out.format_ok);
    CHECK(out.turns_used == 1);
}

TEST_CASE("repeated option sets are answered from the memo")
{
    auto const lib = sandra_library();
    auto b = scripted({ ScriptStep::tool_call({ "complain", "taunt" }), ScriptStep::tool_call({ "taunt", "Complain" }),
                        ScriptStep::answer("complain") });
    auto const out = run_inference(ctx("sandra", "chores"), toy_taxonomy(), lib, b, mode(StrategyMode::SelfDecided));
    REQUIRE(count_role(out.trajectory, Role::Tool) == 2);
    CHECK(out.trajectory.messages[3].content == out.trajectory.messages[5].content);
}

TEST_CASE("retrieval always uses the context user")
{
    auto const lib = sandra_library();
    // the model names another user; the runtime still queries sandra's partition
    CallbackBackend b([](ChatRequest const& r) -> std::string {
        if (r.messages.back().role == Role::Tool)
            return "<answer>complain</answer>";
        return R"(retrieve_intent_context(user="other", intent_options=["complain"]))";
    });
    auto const out = run_inference(ctx("sandra", "chores undone dishes"), toy_taxonomy(), lib, b,
                                   mode(StrategyMode::SelfDecided));
    auto const triples = parse_tool_response(out.trajectory.messages[3].content);
    REQUIRE(triples.size() == 1);
    CHECK(triples[0].user == "sandra");
}

TEST_CASE("backend failures propagate with the partial trajectory")
{
    auto const lib = sandra_library();
    auto b = scripted({ ScriptStep::tool_call({ "complain" }) });
    try
    {
        (void)run_inference(ctx("sandra", "chores"), toy_taxonomy(), lib, b, mode(StrategyMode::SelfDecided));
        FAIL("expected InferenceFailed");
    }
    catch (InferenceFailed const& e)
    {
        CHECK(e.partial.messages.size() == 4);
        CHECK_THROWS_AS(std::rethrow_exception(e.cause), ScriptExhausted);
    }
}

TEST_CASE("agent config validation")
{
    AgentConfig c;
    c.max_turns = 1;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c.mode = StrategyMode::ForcedNoRetrieval;
    CHECK_NOTHROW(c.validate());
    c.k = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    for (auto m: { StrategyMode::ForcedNoRetrieval, StrategyMode::SelfDecided, StrategyMode::ForcedRetrieval })
        CHECK(strategy_mode_from_string(to_string(m)) == m);
}

TEST_CASE("random scripts respect the mode contracts and trajectory invariants")
{
    auto const lib = sandra_library();
    auto const& tax = toy_taxonomy();
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 300; ++trial)
    {
        std::vector<ScriptStep> steps;
        for (int s = 0; s < 8; ++s)
        {
            switch (rng() % 3)
            {
                case 0: steps.push_back(ScriptStep::answer(tax.labels()[rng() % tax.size()].name)); break;
                case 1:
                    steps.push_back(ScriptStep::tool_call({ tax.labels()[rng() % tax.size()].name,
                                                            tax.labels()[rng() % tax.size()].name }));
                    break;
                default: steps.push_back(ScriptStep::malformed("...")); break;
            }
        }
        auto const m = static_cast<StrategyMode>(rng() % 3);
        AgentConfig cfg = mode(m);
        cfg.max_turns = 2 + static_cast<int>(rng() % 5);
        auto b = scripted(steps);
        auto const out = run_inference(ctx("sandra", "chores again"), tax, lib, b, cfg);

        CHECK(out.turns_used <= cfg.max_turns);
        CHECK(validate_trajectory(out.trajectory).empty());
        if (m == StrategyMode::ForcedNoRetrieval)
            CHECK_FALSE(out.tool_called);
        if (m == StrategyMode::ForcedRetrieval && out.predicted)
            CHECK(out.tool_called);

        auto const& msgs = out.trajectory.messages;
        for (std::size_t i = 0; i < msgs.size(); ++i)
        {
            CHECK(msgs[i].loss_masked == (msgs[i].role != Role::Assistant));
            if (msgs[i].role == Role::Tool)
            {
                REQUIRE(i > 0);
                CHECK(msgs[i - 1].role == Role::Assistant);
                CHECK(parse_output(msgs[i - 1].content).is_tool_call());
                for (auto const& t: parse_tool_response(msgs[i].content))
                    CHECK(t.user == "sandra");
            }
        }
    }
}
