"""Uniform probability refinement.

Grounding can give one effect branch several target states (one per
delete-grounding extension); the branch probability then counts the whole
group, so the outgoing mass of the action would exceed 1.  Refinement
splits each branch's probability uniformly over its distinct targets:
an edge in a group of k keeps prob/k.  Self-loops and uniquely grounded
branches form singleton groups and are unchanged.
"""

from __future__ import annotations

from dataclasses import replace
from fractions import Fraction

from .errors import ModelError
from .model import MdpGraph, atom_key, render_term


def refine(g: MdpGraph) -> MdpGraph:
    """Return a new graph with per-branch probabilities split uniformly.

    Idempotent: refining an already refined graph returns it unchanged.
    Conservation holds exactly: for every (state, action) the refined
    probabilities sum to the original branch masses.
    """
    if g.refined:
        return g
    group_size: dict[tuple, int] = {}
    for e in g.edges:
        key = (e.src, atom_key(e.action), e.branch_idx)
        group_size[key] = group_size.get(key, 0) + 1
    edges = []
    for e in g.edges:
        k = group_size[(e.src, atom_key(e.action), e.branch_idx)]
        if k == 1:
            edges.append(e)
        else:
            edges.append(replace(e, prob=e.prob / k))
    return MdpGraph(list(g.states), edges, refined=True, annotated=g.annotated)


def check_normalization(g: MdpGraph) -> None:
    """Verify that every (state, action) distribution sums to exactly 1.

    Exact rational arithmetic; raises ModelError naming the first
    offending state and action.
    """
    if not g.refined:
        raise ModelError("check_normalization requires a refined graph")
    for si in range(len(g.states)):
        sums: dict[tuple, Fraction] = {}
        heads: dict[tuple, str] = {}
        for ei in g.out[si]:
            e = g.edges[ei]
            hk = atom_key(e.action)
            sums[hk] = sums.get(hk, Fraction(0)) + e.prob
            heads[hk] = e.action.text()
        for hk, total in sums.items():
            if total != 1:
                raise ModelError(
                    f"state {g.states[si].text()}: action {heads[hk]} has "
                    f"outgoing probability {render_term(Fraction(total))}, "
                    "expected 1"
                )
