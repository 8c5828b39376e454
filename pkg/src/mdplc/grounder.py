"""Reachability grounding: from a DomainSpec to an explicit graph.

Grounding walks the reachable state space breadth-first from the initial
state.  For every state each schema is grounded by matching its static
preconditions against the facts and its state preconditions against the
state, running the verify clauses, and evaluating the branch probability
expressions (which must sum to exactly 1 per grounding).  Effect branches
whose delete atoms still contain variables are grounded exhaustively
against the state: every consistent extension yields one successor; if no
complete extension exists the branch degenerates to a self-loop, keeping
the outgoing probability mass intact.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .domain import ActionSchema, Bind, DomainSpec, EffectBranch
from .errors import CapExceeded, GroundingError, ModelError
from .exprs import eval_bool, eval_expr
from .model import (
    Atom,
    Edge,
    MdpGraph,
    State,
    Term,
    Var,
    atom_key,
    canonicalize,
    normalize_num,
    render_term,
    term_key,
)


class SelfLoop:
    """Sentinel: the branch could not be applied and keeps the state."""

    _instance: Optional["SelfLoop"] = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "SelfLoop"


SELF_LOOP = SelfLoop()


def match_atom(pattern: Atom, atom: Atom, binding: dict) -> Optional[dict]:
    """Extend `binding` so that pattern matches atom, or return None."""
    if pattern.functor != atom.functor or len(pattern.args) != len(atom.args):
        return None
    b = binding
    copied = False
    for pa, ga in zip(pattern.args, atom.args):
        if isinstance(pa, Var):
            if pa in b:
                if b[pa] != ga:
                    return None
            else:
                if not copied:
                    b = dict(b)
                    copied = True
                b[pa] = ga
        elif pa != ga:
            return None
    return b


def match_atoms(
    patterns: Sequence[Atom], pool: Iterable[Atom], binding: dict
) -> list[dict]:
    """All consistent bindings matching patterns (conjunction) into pool.

    Enumeration is deterministic: patterns left to right, pool in the
    order given (facts in declaration order, state atoms canonical).
    """
    pool = list(pool)
    by_functor: dict[str, list[Atom]] = {}
    for a in pool:
        by_functor.setdefault(a.functor, []).append(a)
    results: list[dict] = []

    def walk(i: int, b: dict):
        if i == len(patterns):
            results.append(b)
            return
        pat = patterns[i].substitute(b)
        for atom in by_functor.get(pat.functor, ()):
            b2 = match_atom(pat, atom, b)
            if b2 is not None:
                walk(i + 1, b2)

    walk(0, binding)
    return results


@dataclass(frozen=True)
class Grounding:
    schema: ActionSchema
    binding: dict
    head: Atom  # fully grounded action head
    branch_probs: tuple[Fraction, ...]  # aligned with schema.branches


def _grounding_key(g: Grounding):
    return (
        atom_key(g.head),
        tuple(sorted((v.name, term_key(t)) for v, t in g.binding.items())),
    )


def enabled_groundings(
    state: State, schema: ActionSchema, facts: Sequence[Atom]
) -> list[Grounding]:
    """Every consistent grounding of `schema` enabled in `state`.

    Branch probabilities are evaluated per grounding; each must lie in
    [0, 1] and they must sum to exactly 1 (zero-probability branches are
    legal and simply produce no edge later).
    """
    out: list[Grounding] = []
    seen_bindings: set = set()
    for b0 in match_atoms(schema.static_pre, facts, {}):
        for b1 in match_atoms(schema.state_pre, state.atoms, b0):
            binding = b1
            ok = True
            for clause in schema.verify:
                if isinstance(clause, Bind):
                    val = normalize_num(eval_expr(clause.expr, binding))
                    binding = dict(binding)
                    binding[clause.var] = val
                elif not eval_bool(clause.expr, binding):
                    ok = False
                    break
            if not ok:
                continue
            probs = []
            for br in schema.branches:
                p = eval_expr(br.prob_expr, binding)
                if not (0 <= p <= 1):
                    raise ModelError(
                        f"action {schema.name}: branch probability "
                        f"{render_term(p)} outside [0, 1] under "
                        f"{_binding_text(binding)}"
                    )
                probs.append(p)
            total = sum(probs)
            if total != 1:
                raise ModelError(
                    f"action {schema.name}: branch probabilities sum to "
                    f"{render_term(Fraction(total))} under "
                    f"{_binding_text(binding)}, expected 1"
                )
            head = Atom(
                schema.name, tuple(binding[p] for p in schema.params)
            )
            key = (
                atom_key(head),
                tuple(sorted((v.name, term_key(t)) for v, t in binding.items())),
            )
            if key in seen_bindings:
                continue
            seen_bindings.add(key)
            out.append(Grounding(schema, binding, head, tuple(probs)))
    out.sort(key=_grounding_key)
    return out


def _binding_text(binding: dict) -> str:
    items = sorted(binding.items(), key=lambda kv: kv[0].name)
    return "{" + ", ".join(f"{v.name}={render_term(t)}" for v, t in items) + "}"


def apply_branch(state: State, binding: dict, branch: EffectBranch):
    """Successor states of one effect branch under a grounding.

    Delete atoms may contain variables not bound by the grounding; they are
    matched against the state left to right, and every complete extension
    produces one successor (duplicates collapsed, first occurrence kept).
    If no complete extension exists the branch is a no-op: SELF_LOOP.
    A branch is never applied partially.
    """
    dels = branch.del_atoms()
    adds = branch.add_atoms()
    results: list[State] = []
    seen: set[State] = set()

    def finish(b: dict, removed: tuple[Atom, ...]):
        atoms = set(state.atoms)
        atoms.difference_update(removed)
        for a in adds:
            ga = a.substitute(b)
            if not ga.is_ground():
                raise GroundingError(
                    f"add atom {ga.text()} not ground after applying branch"
                )
            atoms.add(ga)
        st = canonicalize(atoms)
        if st not in seen:
            seen.add(st)
            results.append(st)

    def walk(i: int, b: dict, removed: tuple[Atom, ...]):
        if i == len(dels):
            finish(b, removed)
            return
        pat = dels[i].substitute(b)
        for atom in state.atoms:
            b2 = match_atom(pat, atom, b)
            if b2 is not None:
                walk(i + 1, b2, removed + (atom,))

    walk(0, binding, ())
    if not results:
        return SELF_LOOP
    return results


def build_graph(d: DomainSpec, cap: int = 1_000_000) -> MdpGraph:
    """Breadth-first reachability closure from the initial state.

    Deterministic: two runs over the same domain produce identical state
    indexing and edge lists.  Edges with probability zero are dropped.
    Parallel edges that agree on (src, dst, action, branch) are emitted
    once; a grounded head appearing with conflicting branch probabilities
    is rejected, since the merged action would not be normalisable.
    """
    index: dict[State, int] = {d.init: 0}
    states: list[State] = [d.init]
    edges: list[Edge] = []
    frontier: deque[int] = deque([0])

    while frontier:
        si = frontier.popleft()
        s = states[si]
        head_probs: dict[tuple, tuple] = {}
        emitted: set[tuple] = set()
        for schema in d.schemas:
            for g in enabled_groundings(s, schema, d.facts):
                hk = atom_key(g.head)
                prev = head_probs.get(hk)
                if prev is None:
                    head_probs[hk] = g.branch_probs
                elif prev != g.branch_probs:
                    raise ModelError(
                        f"action head {g.head.text()} has conflicting branch "
                        f"probabilities in state {s.text()}; add parameters "
                        "so the head determines them"
                    )
                for bidx, prob in enumerate(g.branch_probs):
                    if prob == 0:
                        continue
                    res = apply_branch(s, g.binding, schema.branches[bidx])
                    targets = [s] if res is SELF_LOOP else res
                    for t in targets:
                        ti = index.get(t)
                        if ti is None:
                            if len(states) >= cap:
                                raise CapExceeded(
                                    f"state cap {cap} exceeded while grounding "
                                    f"domain {d.name}"
                                )
                            ti = len(states)
                            index[t] = ti
                            states.append(t)
                            frontier.append(ti)
                        ekey = (hk, bidx, ti)
                        if ekey in emitted:
                            continue
                        emitted.add(ekey)
                        edges.append(Edge(si, ti, g.head, bidx, prob))
    return MdpGraph(states, edges, refined=False, annotated=False)
