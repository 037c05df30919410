# SPDX-License-Identifier: Apache-2.0
import math

import pytest

import intentkit as ik


@pytest.fixture
def tax():
    return ik.Taxonomy("toy", ["complain", "praise", "taunt", "joke", "warn"])


def test_taxonomy_and_canonical_form(tax):
    assert ik.canonical_form("  Ask   For  HELP ") == "ask for help"
    assert len(ik.Taxonomy.load("mintrec")) == 30
    assert tax.canonicalize(" JOKE ") == "joke"
    assert tax.canonicalize("shrug") is None
    with pytest.raises(ik.ConfigError):
        ik.Taxonomy.load("/no/such/taxonomy")


def test_embedding_is_deterministic_and_normalizable():
    a = ik.embed("tea and coffee", dim=64)
    assert a == ik.embed("coffee and tea", dim=64)
    assert len(a) == 64
    assert ik.cosine(a, a) == pytest.approx(1.0)


def test_library_retrieval_filters_and_ranks(tax, tmp_path):
    lib = ik.HistoryLibrary(tax, dim=128)
    lib.insert("amy", "complain", "the dishes are piling up again")
    lib.insert("amy", "joke", "a pun about dishes")
    lib.insert("bob", "complain", "the dishes are piling up again")
    hits = lib.retrieve("amy", ["complain", "joke"], "dishes piling up", k=5)
    assert [h["label"] for h in hits] == ["complain", "joke"]
    assert all(h["user"] == "amy" for h in hits)
    assert hits[0]["similarity"] >= hits[1]["similarity"]

    path = str(tmp_path / "lib.jsonl")
    lib.save(path)
    again = ik.HistoryLibrary.load(path, tax)
    assert len(again) == 3
    assert again.serialize() == lib.serialize()


def test_parse_output():
    p = ik.parse_output("<answer>Joke</answer><intent_explanation>teasing</intent_explanation>")
    assert p["kind"] == "answer" and p["label"] == "Joke" and p["explanation"] == "teasing"
    t = ik.parse_output('retrieve_intent_context(user="amy", intent_options=["joke", "taunt"])')
    assert t["kind"] == "tool_call" and t["options"] == ["joke", "taunt"]
    assert ik.parse_output("hmm")["kind"] == "malformed"


def test_rewards(tax):
    assert ik.tool_reward(tax, "joke", "joke", False, None, 0.75) == (pytest.approx(0.1), "easy_direct_correct")
    value, _ = ik.tool_reward(tax, "joke", "joke", True, ["joke", "taunt"], 0.25)
    assert value == pytest.approx(0.5)
    total = ik.total_reward(tax, "joke", "joke", False, None, 0.75)
    assert total["total"] == pytest.approx(1.2)
    with pytest.raises(ik.ConfigError):
        ik.tool_reward(tax, "joke", "joke", False, None, 0.5, {"nonsense": 1.0})


def test_advantages_and_surrogate():
    adv = ik.group_advantages([1.0, 0.0, 1.0, 0.0])
    assert adv == pytest.approx([1.0, -1.0, 1.0, -1.0])
    assert ik.group_advantages([0.3] * 4) == [0.0] * 4
    assert ik.grpo_surrogate([-1.0, -2.0], [-1.0, -2.0], 0.7) == -0.7
    ratio = math.log(1.5)
    assert ik.grpo_surrogate([ratio], [0.0], 2.0) == pytest.approx(-2.4)


def test_policy_training_is_reproducible():
    a = ik.train_policy(seed=7, steps=300)
    b = ik.train_policy(seed=7, steps=300)
    assert a == b
    assert len(a["curve"]) == 300
    full = ik.train_policy(seed=7, steps=2000)
    assert full["p_retrieve_hard"] > 0.8 and full["p_retrieve_easy"] < 0.2
    with pytest.raises(ik.ConfigError):
        ik.train_policy(ablation="no_such")


def test_metrics(tax):
    m = ik.metrics(tax, ["joke", "warn", "joke", "praise"], [["joke"], ["joke"], [None], ["praise"]])
    assert m["acc"] == pytest.approx(0.5)
    assert m["pass_at_n"] is None
    m4 = ik.metrics(tax, ["joke", "warn"], [["warn", "joke"], ["warn", "warn"]], n=2)
    assert m4["pass_at_n"] == pytest.approx(1.0)
    assert ik.gen_gap_vis(0.1, 0.0, 0.2) == pytest.approx(0.5)
    with pytest.raises(ik.InvalidArgument):
        ik.metrics(tax, ["joke"], [])
