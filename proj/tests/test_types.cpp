// SPDX-License-Identifier: Apache-2.0
#include "support.hpp"

#include <doctest.h>

using namespace intentkit;
using namespace testsupport;

TEST_CASE("canonicalize normalizes case and whitespace")
{
    auto const& tax = taxonomies::mintrec();
    CHECK(tax.canonicalize("Complain ") == L("complain"));
    CHECK(tax.canonicalize("ask for help") == L("ask for help"));
    CHECK(tax.canonicalize("  ASK   for\thelp ") == L("ask for help"));
    CHECK_FALSE(tax.canonicalize("grumble").has_value());
}

TEST_CASE("canonical_form")
{
    CHECK(canonical_form("  A  b\t\nC ") == "a b c");
    CHECK(canonical_form("") == "");
    CHECK(canonical_form("   ") == "");
}

TEST_CASE("built-in taxonomies have the documented sizes")
{
    CHECK(taxonomies::mintrec().size() == 30);
    CHECK(taxonomies::weibo().size() == 7);
    CHECK(taxonomies::highlight().size() == 12);
    CHECK(taxonomies::load("weibo").size() == 7);
}

TEST_CASE("every shipped label canonicalizes to itself and canonicalize is idempotent")
{
    for (auto const* tax: { &taxonomies::mintrec(), &taxonomies::weibo(), &taxonomies::highlight() })
    {
        for (auto const& l: tax->labels())
        {
            auto const c = tax->canonicalize(l.name);
            REQUIRE(c.has_value());
            CHECK(*c == l);
            CHECK(tax->canonicalize(c->name) == c);
            CHECK(tax->canonicalize("  " + l.name + " ") == c);
        }
    }
}

TEST_CASE("taxonomy rejects empty, blank and duplicate labels")
{
    CHECK_THROWS_AS(Taxonomy("x", {}), InvalidArgument);
    CHECK_THROWS_AS(Taxonomy("x", { "a", "  " }), InvalidArgument);
    CHECK_THROWS_AS(Taxonomy("x", { "a", " A " }), InvalidArgument);
    Taxonomy t("x", { "b", "a" });
    CHECK(t.index_of(L("b")) == 0);
    CHECK(t.index_of(L("a")) == 1);
    CHECK_THROWS_AS((void)t.index_of(L("c")), InvalidArgument);
    CHECK_THROWS_AS((void)t.require("c"), DataError);
}

TEST_CASE("taxonomy loads from a label file")
{
    TempDir dir;
    spit(dir.file("labels.txt"), "Alpha\n\nbeta gamma\n");
    auto const t = taxonomies::load(dir.file("labels.txt"));
    CHECK(t.size() == 2);
    CHECK(t.contains(L("beta gamma")));
    CHECK_THROWS_AS(taxonomies::load(dir.file("missing.txt")), ConfigError);
}

TEST_CASE("UserId is exact and case-sensitive")
{
    CHECK(UserId("amy") == UserId("amy"));
    CHECK(UserId("amy") != UserId("Amy"));
    CHECK_THROWS_AS(UserId(""), InvalidArgument);
}

TEST_CASE("message loss masks follow the role")
{
    CHECK(Message::system("s").loss_masked);
    CHECK(Message::user("u").loss_masked);
    CHECK(Message::tool("t").loss_masked);
    CHECK_FALSE(Message::assistant("a").loss_masked);
    for (auto r: { Role::System, Role::User, Role::Assistant, Role::Tool })
        CHECK(role_from_string(to_string(r)) == r);
}

TEST_CASE("personalized segments are checked in order")
{
    CHECK(IntentExplanation { "[PersonalMotivation] a [Context] b [Strategy] c", ExplanationKind::Personalized }
              .has_personalized_segments());
    CHECK_FALSE(IntentExplanation { "[Context] b [PersonalMotivation] a [Strategy] c", ExplanationKind::Personalized }
                    .has_personalized_segments());
    CHECK_FALSE(IntentExplanation { "plain", ExplanationKind::Generic }.has_personalized_segments());
}

TEST_CASE("validate_trajectory flags illegal sequences")
{
    Trajectory ok;
    ok.messages = { Message::system("s"), Message::user("u"),
                    Message::assistant("retrieve_intent_context(user=\"u\", intent_options=[\"a\", \"b\"])"),
                    Message::tool("t"), Message::assistant("<answer>a</answer>") };
    ok.tool_called = true;
    CHECK(validate_trajectory(ok).empty());

    Trajectory noSystem = ok;
    noSystem.messages.erase(noSystem.messages.begin());
    CHECK_FALSE(validate_trajectory(noSystem).empty());

    Trajectory twoTools = ok;
    twoTools.messages.insert(twoTools.messages.begin() + 4, Message::tool("again"));
    CHECK_FALSE(validate_trajectory(twoTools).empty());

    Trajectory toolAfterUser;
    toolAfterUser.messages = { Message::system("s"), Message::user("u"), Message::tool("t") };
    CHECK_FALSE(validate_trajectory(toolAfterUser).empty());

    Trajectory badMask = ok;
    badMask.messages[1].loss_masked = false;
    CHECK_FALSE(validate_trajectory(badMask).empty());

    Trajectory flagMismatch = ok;
    flagMismatch.tool_called = false;
    CHECK_FALSE(validate_trajectory(flagMismatch).empty());
}

TEST_CASE("record JSONL round-trips and bad lines are reported with line numbers")
{
    auto const& tax = toy_taxonomy();
    auto r = record("amy", "the sink again", "complain", "explained", Split::Test);
    r.context.situational_text = "kitchen";
    r.context.meta["speaker"] = "Amy";
    auto const line = record_to_json_line(r);

    std::string text = line + "\n" + "{not json}\n" + "\n"
                       + R"({"user":"bob","action_text":"x","gt_label":"grumble"})" + "\n"
                       + R"({"user":"","action_text":"x","gt_label":"praise"})" + "\n"
                       + R"({"user":"cy","action_text":"hi","gt_label":"Praise","explanation":null,"split":"train"})" + "\n";
    auto const rep = parse_records(text, tax);
    REQUIRE(rep.records.size() == 2);
    CHECK(rep.lines == std::vector<std::size_t> { 1, 6 });
    REQUIRE(rep.rejected.size() == 3);
    CHECK(rep.rejected[0].first == 2);
    CHECK(rep.rejected[1].first == 4);
    CHECK(rep.rejected[2].first == 5);

    auto const& back = rep.records[0];
    CHECK(back.context.user == r.context.user);
    CHECK(back.context.situational_text == "kitchen");
    CHECK(back.context.meta.at("speaker") == "Amy");
    CHECK(back.gt_label == L("complain"));
    CHECK(back.split == Split::Test);
    REQUIRE(back.explanation.has_value());
    CHECK(back.explanation->text == "explained");
    CHECK(record_to_json_line(back) == line);

    CHECK(rep.records[1].gt_label == L("praise"));
    CHECK_FALSE(rep.records[1].explanation.has_value());
}
