from fractions import Fraction

import pytest

from mdplc.errors import ModelError, NotEnabled
from mdplc.model import Atom
from mdplc.rewards import annotate, score_edge, state_action_reward
from tests.conftest import compile_text

GATED = """
domain r;
init { pos(0), brk(0) }
statevar pos : [0..3] init 0 from pos(V);
statevar brk : [0..1] init 0 from brk(V);
action step(K) {
  pre-state pos(K), brk(0);
  verify K < 3, NK := K + 1;
  eff 4/5 { del pos(K); add pos(NK); }
  eff 1/5 { del brk(0); add brk(1); }
}
action fix() {
  pre-state brk(1);
  eff 1 { del brk(1); add brk(0); }
}
reward necessary safe require next.brk = 0;
reward sufficient move match action step(K) value 2 * K + 1;
reward sufficient fixit match action fix() value 5;
label doneP = pos = 3;
penalty 50;
"""


def edge_rewards(g, src_idx, head_functor):
    return {
        (e.branch_idx, e.dst): e.reward
        for e in g.edges
        if e.src == src_idx and e.action.functor == head_functor
    }


class TestAnnotate:
    def test_necessary_gate_and_sufficient_values(self):
        d, g = compile_text(GATED)
        ga = annotate(g, d, sign=1)
        init_edges = [ga.edges[ei] for ei in ga.out[0]]
        by_branch = {e.branch_idx: e for e in init_edges}
        # branch 0 moves: sufficient move rule, K=0 -> 2*0+1
        assert by_branch[0].reward == 1
        # branch 1 breaks: gate fires, sufficient ignored entirely
        assert by_branch[1].reward == 50

    def test_gate_overrides_sufficient_not_added(self):
        d, g = compile_text(GATED)
        ga = annotate(g, d, sign=1)
        gated = [e for e in ga.edges if e.reward == 50]
        assert gated  # exists
        assert all(e.reward == 50 for e in gated)  # never 50 + move value

    def test_sign_flips_penalty_only(self):
        d, g = compile_text(GATED)
        plus = annotate(g, d, sign=1)
        minus = annotate(g, d, sign=-1)
        for a, b in zip(plus.edges, minus.edges):
            if a.reward == 50:
                assert b.reward == -50
            else:
                assert b.reward == a.reward

    def test_bad_sign_rejected(self):
        d, g = compile_text(GATED)
        with pytest.raises(ValueError, match="sign"):
            annotate(g, d, sign=0)

    def test_returns_new_annotated_graph(self):
        d, g = compile_text(GATED)
        ga = annotate(g, d)
        assert ga is not g
        assert ga.annotated and not g.annotated
        assert all(e.reward == 0 for e in g.edges)

    def test_value_scales_with_binding(self):
        d, g = compile_text(GATED)
        ga = annotate(g, d)
        # find state with pos(1), brk(0): step(1) branch 0 reward = 3
        for si, s in enumerate(ga.states):
            if s.text() == "brk(0),pos(1)":
                r = edge_rewards(ga, si, "step")
                vals = {k: v for k, v in r.items()}
                assert Fraction(3) in vals.values()
                break
        else:
            pytest.fail("state not reached")

    def test_no_rules_means_zero(self):
        d, g = compile_text(
            "domain z;\ninit { a(0) }\n"
            "action f() { pre-state a(0); eff 1 { del a(0); add a(1); } }\n"
        )
        ga = annotate(g, d)
        assert all(e.reward == 0 for e in ga.edges)


class TestRuleSemantics:
    def test_necessary_any_failing_binding_gates(self):
        d, g = compile_text("""
domain r;
init { t(1), t(7), m(0) }
action go() {
  pre-state m(0);
  eff 1 { del m(0); add m(1); }
}
reward necessary small match next t(W) require W < 5;
penalty 9;
""")
        ga = annotate(g, d)
        # dst keeps t(1) and t(7); t(7) violates, so the edge is gated
        assert ga.edges[0].reward == 9

    def test_sufficient_first_binding_only(self):
        d, g = compile_text("""
domain r;
init { t(2), t(1), m(0) }
action go() {
  pre-state m(0);
  eff 1 { del m(0); add m(1); }
}
reward sufficient weigh match cur t(W) value W;
""")
        ga = annotate(g, d)
        # canonical atom order puts t(1) first; one contribution per rule
        assert ga.edges[0].reward == 1

    def test_two_rules_accumulate(self):
        d, g = compile_text("""
domain r;
init { m(0) }
action go() {
  pre-state m(0);
  eff 1 { del m(0); add m(1); }
}
reward sufficient a value 2;
reward sufficient b value 3;
""")
        ga = annotate(g, d)
        assert ga.edges[0].reward == 5

    def test_when_guard_filters_sufficient(self):
        d, g = compile_text("""
domain r;
init { pos(0) }
statevar pos : [0..2] init 0 from pos(V);
action step(K) {
  pre-state pos(K);
  verify K < 2, NK := K + 1;
  eff 1 { del pos(K); add pos(NK); }
}
reward sufficient late when cur.pos >= 1 value 4;
""")
        ga = annotate(g, d)
        rewards = {g2.src: g2.reward for g2 in ga.edges}
        assert rewards[0] == 0  # cur.pos = 0, guard false
        assert rewards[1] == 4

    def test_action_pattern_alternatives(self):
        d, g = compile_text("""
domain r;
init { m(0) }
action a() { pre-state m(0); eff 1 { del m(0); add m(1); } }
action b() { pre-state m(0); eff 1 { del m(0); add m(2); } }
action c() { pre-state m(0); eff 1 { del m(0); add m(3); } }
reward sufficient ab match action a() | b() value 6;
""")
        ga = annotate(g, d)
        by_head = {e.action.functor: e.reward for e in ga.edges if e.src == 0}
        assert by_head == {"a": 6, "b": 6, "c": 0}

    def test_negative_runtime_value_rejected(self):
        d, g = compile_text("""
domain r;
init { t(1), m(0) }
action go() {
  pre-state m(0);
  eff 1 { del m(0); add m(1); }
}
reward sufficient drain match cur t(W) value W - 5;
""")
        with pytest.raises(ModelError, match="negative value"):
            annotate(g, d)

    def test_action_args_usable_in_require(self):
        d, g = compile_text("""
domain r;
init { pos(0) }
statevar pos : [0..3] init 0 from pos(V);
action step(K) {
  pre-state pos(K);
  verify K < 3, NK := K + 1;
  eff 1 { del pos(K); add pos(NK); }
}
reward necessary slow match action step(K) require K < 2;
penalty 7;
""")
        ga = annotate(g, d)
        by_src = {e.src: e.reward for e in ga.edges}
        srcs = {s.text(): i for i, s in enumerate(ga.states)}
        assert by_src[srcs["pos(0)"]] == 0
        assert by_src[srcs["pos(2)"]] == 7  # step(2) violates K < 2


class TestHelpers:
    def test_score_edge_matches_annotate(self):
        d, g = compile_text(GATED)
        ga = annotate(g, d, sign=1)
        for e0, e1 in zip(g.edges, ga.edges):
            assert score_edge(e0, g, d, Fraction(50)) == e1.reward

    def test_state_action_reward_weighted_sum(self):
        d, g = compile_text(GATED)
        ga = annotate(g, d, sign=1)
        # init: step(0) has branches 4/5 (reward 1) and 1/5 (penalty 50)
        r = state_action_reward(ga, 0, Atom("step", (0,)))
        assert r == Fraction(4, 5) * 1 + Fraction(1, 5) * 50

    def test_state_action_reward_not_enabled(self):
        d, g = compile_text(GATED)
        ga = annotate(g, d)
        with pytest.raises(NotEnabled, match="not enabled"):
            state_action_reward(ga, 0, Atom("fix", ()))
