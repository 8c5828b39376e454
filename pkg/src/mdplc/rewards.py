"""Reward annotation: gate (necessary) and accumulating (sufficient) rules.

A necessary rule is a requirement on transitions: whenever its patterns
match an edge, its `require` expression must hold under every match; any
violation replaces the whole edge reward with the signed penalty, and
sufficient rules are ignored for that edge.  Sufficient rules accumulate:
each rule whose patterns match (first matching binding) and whose `when`
guard passes adds its non-negative value.

The penalty sign depends on the optimisation direction of the consumer:
+|penalty| when rewards are minimised (a violation is expensive),
-|penalty| when they are maximised.
"""

from __future__ import annotations

from fractions import Fraction
from dataclasses import replace
from typing import Optional

from .domain import DomainSpec, RewardRule
from .errors import ModelError, NotEnabled
from .exprs import EvalEnv, eval_bool, eval_expr
from .grounder import match_atom, match_atoms
from .model import Atom, MdpGraph, State, render_term


def _rule_matches(
    rule: RewardRule, action: Atom, src: State, dst: State
) -> list[dict]:
    """All bindings under which the rule applies to this edge, in order."""
    if rule.action_patterns:
        seeds = []
        for pat in rule.action_patterns:
            b = match_atom(pat, action, {})
            if b is not None:
                seeds.append(b)
    else:
        seeds = [{}]
    out: list[dict] = []
    for seed in seeds:
        for b1 in match_atoms(rule.cur_patterns, src.atoms, seed):
            out.extend(match_atoms(rule.next_patterns, dst.atoms, b1))
    return out


def _edge_reward(
    action: Atom,
    src: State,
    dst: State,
    d: DomainSpec,
    signed_penalty: Fraction,
    cur_frame: dict,
    next_frame: dict,
) -> Fraction:
    for rule in d.rewards:
        if rule.kind != "necessary":
            continue
        for binding in _rule_matches(rule, action, src, dst):
            env = EvalEnv(
                binding=binding, cur=cur_frame, next=next_frame, action=action
            )
            if not eval_bool(rule.guard, env):
                return Fraction(signed_penalty)
    total = Fraction(0)
    for rule in d.rewards:
        if rule.kind != "sufficient":
            continue
        for binding in _rule_matches(rule, action, src, dst):
            env = EvalEnv(
                binding=binding, cur=cur_frame, next=next_frame, action=action
            )
            if rule.guard is not None and not eval_bool(rule.guard, env):
                continue
            v = eval_expr(rule.value_expr, env)
            if v < 0:
                raise ModelError(
                    f"sufficient reward {rule.name} produced negative value "
                    f"{render_term(v)} on action {action.text()}"
                )
            total += v
            break  # one contribution per rule
    return total


def score_edge(edge, g: MdpGraph, d: DomainSpec, signed_penalty) -> Fraction:
    """Reward of a single edge (convenience wrapper; see `annotate`)."""
    from .prism import encode_state

    src = g.states[edge.src]
    dst = g.states[edge.dst]
    return _edge_reward(
        edge.action, src, dst, d, Fraction(signed_penalty),
        encode_state(src, d), encode_state(dst, d),
    )


def annotate(g: MdpGraph, d: DomainSpec, sign: int = 1) -> MdpGraph:
    """Return a new graph with every edge's reward filled in.

    `sign` is +1 when the consumer minimises accumulated reward (the
    penalty must hurt, so it is positive) and -1 when it maximises.
    """
    from .prism import encode_state

    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    signed_penalty = sign * abs(Fraction(d.penalty))
    frames = [encode_state(s, d) for s in g.states]
    edges = []
    for e in g.edges:
        r = _edge_reward(
            e.action, g.states[e.src], g.states[e.dst], d, signed_penalty,
            frames[e.src], frames[e.dst],
        )
        edges.append(replace(e, reward=r) if r != e.reward else e)
    out = MdpGraph(list(g.states), edges, refined=g.refined, annotated=True)
    return out


def state_action_reward(g: MdpGraph, state_idx: int, action: Atom) -> Fraction:
    """Probability-weighted expected one-step reward of (state, action)."""
    edges = g.edges_of(state_idx, action)
    if not edges:
        raise NotEnabled(
            f"action {action.text()} is not enabled in state "
            f"{g.states[state_idx].text()}"
        )
    return sum((e.prob * e.reward for e in edges), Fraction(0))
