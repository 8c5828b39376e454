"""Value iteration over grounded MDP graphs.

The solver works on a flattened array view of the graph (CSR-style
offsets) so the numeric sweeps can run in the compiled kernel.  Exact
``Fraction`` probabilities are converted to float64 once, at flatten
time; everything downstream of that point is plain IEEE arithmetic.

Qualitative preprocessing happens before any numeric sweep:

* states that cannot reach the goal at all are pinned (prob 0, or an
  infinite expected reward),
* states with an almost-sure strategy are pinned to prob 1,
* for expected rewards the iteration only runs over states that admit
  an almost-surely-reaching policy; the rest diverge and are reported
  as ``inf`` (or ``-inf`` for maximisation, where "no proper policy"
  means the supremum over an empty set).

``oracle_enumerate`` is an intentionally separate implementation
(finite-horizon backward induction, its own flattening) used to
cross-check the fixpoint solver on small models.  Keep it independent:
it must not share the kernel or the CSR builder.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

import numpy as np

from . import kernels
from .domain import DomainSpec, LabelDef
from .errors import ModelError, NotEnabled
from .exprs import EvalEnv, eval_bool
from .model import Atom, MdpGraph, Policy, atom_key

TOL = 1e-9
MAX_ITER = 100_000

# caps for the enumeration oracle; it is O(|S| * horizon) dense
ORACLE_MAX_STATES = 2000
ORACLE_MAX_HORIZON = 500


@dataclass
class FlatMdp:
    """CSR view: state -> action slots -> edges, plus reverse maps."""

    ns: int
    na: int
    ne: int
    sa_off: np.ndarray      # int32, len ns+1: slot range of each state
    ae_off: np.ndarray      # int32, len na+1: edge range of each slot
    e_dst: np.ndarray       # int32, len ne
    e_prob: np.ndarray      # float64, len ne
    e_rew: np.ndarray       # float64, len ne
    e_src: np.ndarray       # int32, len ne
    act_state: np.ndarray   # int32, len na: owning state of each slot
    slot_head: list[Atom] = field(default_factory=list)

    def slots_of(self, si: int) -> range:
        return range(int(self.sa_off[si]), int(self.sa_off[si + 1]))


_flat_cache: "weakref.WeakKeyDictionary[MdpGraph, FlatMdp]" = weakref.WeakKeyDictionary()


def build_flat(g: MdpGraph) -> FlatMdp:
    """Flatten a refined graph into contiguous arrays.

    Slot order: states in graph order, action heads per state in
    canonical atom order.  Edge order inside a slot follows the edge
    list, which the grounder already emits deterministically.
    """
    cached = _flat_cache.get(g)
    if cached is not None:
        return cached
    ns = len(g.states)
    sa_off = np.zeros(ns + 1, dtype=np.int32)
    slot_head: list[Atom] = []
    slot_edges: list[list] = []
    act_state: list[int] = []
    for si in range(ns):
        by_head: dict = {}
        order: list[tuple] = []
        for ei in g.out[si]:  # group per grounded action head
            e = g.edges[ei]
            k = atom_key(e.action)
            if k not in by_head:
                by_head[k] = []
                order.append((k, e.action))
            by_head[k].append(e)
        order.sort(key=lambda p: p[0])
        for k, head in order:
            slot_head.append(head)
            slot_edges.append(by_head[k])
            act_state.append(si)
        sa_off[si + 1] = len(slot_head)
    na = len(slot_head)
    ae_off = np.zeros(na + 1, dtype=np.int32)
    dst: list[int] = []
    prob: list[float] = []
    rew: list[float] = []
    src: list[int] = []
    for ai, edges in enumerate(slot_edges):
        for e in edges:
            dst.append(e.dst)
            prob.append(float(e.prob))
            rew.append(float(e.reward))
            src.append(e.src)
        ae_off[ai + 1] = len(dst)
    flat = FlatMdp(
        ns=ns,
        na=na,
        ne=len(dst),
        sa_off=sa_off,
        ae_off=ae_off,
        e_dst=np.asarray(dst, dtype=np.int32),
        e_prob=np.asarray(prob, dtype=np.float64),
        e_rew=np.asarray(rew, dtype=np.float64),
        e_src=np.asarray(src, dtype=np.int32),
        act_state=np.asarray(act_state, dtype=np.int32),
        slot_head=slot_head,
    )
    _flat_cache[g] = flat
    return flat


def label_states(g: MdpGraph, d: DomainSpec, label: str | LabelDef) -> frozenset[int]:
    """Indices of states satisfying a label's condition.

    Label conditions read declared state variables (and may use `has`
    membership tests), so each state is decoded into its integer frame
    before evaluation.
    """
    from .prism import encode_state

    ldef = d.label(label) if isinstance(label, str) else label
    hit = []
    for si, st in enumerate(g.states):
        frame = encode_state(st, d) if d.statevars else {}
        env = EvalEnv(binding={}, cur=frame, next=None, action=None, state=st)
        if eval_bool(ldef.condition, env):
            hit.append(si)
    return frozenset(hit)


def _reachable_to(flat: FlatMdp, goal: np.ndarray) -> np.ndarray:
    """Bool mask of states with a path (any resolution) into goal."""
    r = goal.copy()
    if flat.ne == 0:
        return r
    while True:
        hits = np.bincount(flat.e_src, weights=r[flat.e_dst].astype(np.float64), minlength=flat.ns) > 0
        r2 = r | hits
        if np.array_equal(r2, r):
            return r
        r = r2


def _prob1e(flat: FlatMdp, goal: np.ndarray) -> np.ndarray:
    """States from which some policy reaches goal with probability 1.

    Standard nested fixpoint: greatest U such that from every state in
    U some action stays inside U and can make progress toward goal.
    """
    ns, na = flat.ns, flat.na
    u = np.ones(ns, dtype=bool)
    if na == 0:
        return goal.copy()
    while True:
        # actions that never leave u
        leak = np.bincount(
            np.repeat(np.arange(na, dtype=np.int64), np.diff(flat.ae_off)),
            weights=(~u[flat.e_dst]).astype(np.float64),
            minlength=na,
        ) > 0
        v = goal.copy()
        while True:
            prog = np.bincount(
                np.repeat(np.arange(na, dtype=np.int64), np.diff(flat.ae_off)),
                weights=v[flat.e_dst].astype(np.float64),
                minlength=na,
            ) > 0
            ok_act = prog & ~leak
            ok_state = np.bincount(
                flat.act_state.astype(np.int64), weights=ok_act.astype(np.float64), minlength=ns
            ) > 0
            v2 = v | ok_state
            if np.array_equal(v2, v):
                break
            v = v2
        if np.array_equal(v, u):
            return u
        u = v


@dataclass
class SolveResult:
    objective: str
    values: np.ndarray
    iterations: int
    residual: float
    converged: bool

    def value_at(self, si: int = 0) -> float:
        return float(self.values[si])


def _check_ready(g: MdpGraph) -> None:
    if not g.refined:
        raise ModelError("solver requires a refined (probability-normalized) graph")


def pmax(g: MdpGraph, goal: Iterable[int], tol: float = TOL, max_iter: int = MAX_ITER) -> SolveResult:
    """Maximal probability of eventually reaching a goal state."""
    _check_ready(g)
    flat = build_flat(g)
    ns = flat.ns
    gmask = np.zeros(ns, dtype=bool)
    gmask[list(goal)] = True
    x = np.zeros(ns, dtype=np.float64)
    frozen = np.zeros(ns, dtype=np.uint8)
    sure = _prob1e(flat, gmask)
    never = ~_reachable_to(flat, gmask)
    x[sure] = 1.0
    x[never] = 0.0
    frozen[sure | never] = 1
    iters, residual = kernels.value_sweeps(
        x, frozen, False, np.zeros(flat.na, dtype=np.float64),
        flat.sa_off, flat.ae_off, flat.e_dst, flat.e_prob, tol, max_iter,
    )
    return SolveResult("pmax", x, iters, residual, residual <= tol)


def expected_reward(
    g: MdpGraph,
    goal: Iterable[int],
    direction: str = "min",
    tol: float = TOL,
    max_iter: int = MAX_ITER,
) -> SolveResult:
    """Optimal expected accumulated reward until the goal is reached.

    ``direction="min"``: infimum over policies; states without an
    almost-surely-reaching policy get +inf.  ``direction="max"``:
    supremum over policies that reach the goal with probability 1;
    -inf where no such policy exists.
    """
    _check_ready(g)
    if direction not in ("min", "max"):
        raise ValueError("direction must be 'min' or 'max'")
    flat = build_flat(g)
    ns, na = flat.ns, flat.na
    gmask = np.zeros(ns, dtype=bool)
    gmask[list(goal)] = True
    a_rew = np.zeros(na, dtype=np.float64)
    if flat.ne:
        np.add.at(
            a_rew,
            np.repeat(np.arange(na, dtype=np.int64), np.diff(flat.ae_off)),
            flat.e_prob * flat.e_rew,
        )
    proper = _prob1e(flat, gmask)
    x = np.zeros(ns, dtype=np.float64)
    frozen = np.zeros(ns, dtype=np.uint8)
    bad = float("inf") if direction == "min" else float("-inf")
    x[~proper] = bad
    x[gmask] = 0.0
    frozen[~proper | gmask] = 1
    iters, residual = kernels.value_sweeps(
        x, frozen, direction == "min", a_rew,
        flat.sa_off, flat.ae_off, flat.e_dst, flat.e_prob, tol, max_iter,
    )
    name = "rmin" if direction == "min" else "rmax"
    return SolveResult(name, x, iters, residual, residual <= tol)


def _slot_values(flat: FlatMdp, values: np.ndarray, objective: str) -> np.ndarray:
    """Per-slot Bellman backup q(s, a) against a fixed value vector."""
    if flat.na == 0:
        return np.zeros(0, dtype=np.float64)
    contrib = flat.e_prob * values[flat.e_dst]
    q = np.add.reduceat(contrib, flat.ae_off[:-1].astype(np.int64))
    if objective in ("rmin", "rmax"):
        a_rew = np.zeros(flat.na, dtype=np.float64)
        np.add.at(
            a_rew,
            np.repeat(np.arange(flat.na, dtype=np.int64), np.diff(flat.ae_off)),
            flat.e_prob * flat.e_rew,
        )
        q = q + a_rew
    return q


def extract_policy(g: MdpGraph, result: SolveResult, goal: Iterable[int]) -> Policy:
    """Deterministic optimal policy for a solved objective.

    Greedy backup alone is not enough: in value-preserving regions
    (every action of a prob-1 state may keep the value at 1) a naive
    tie-break can select a self-loop and the induced chain never
    reaches the goal.  So the choice is restricted to value-optimal
    slots and then layered backwards from the goal: a state picks,
    among its optimal slots, one whose successors touch an already
    layered state, preferring (lower layer, more probability mass
    moving down, canonically least head).  The result is stationary,
    optimal, and proper on every state with a proper optimal policy.

    States the layering never reaches (value 0, or improper) fall back
    to the plain greedy choice when one with finite backup exists.
    """
    flat = build_flat(g)
    ns = flat.ns
    gmask = np.zeros(ns, dtype=bool)
    gmask[list(goal)] = True
    v = result.values
    q = _slot_values(flat, v, result.objective)
    minimize = result.objective == "rmin"

    # value-optimal slots, with a small absolute+relative float slack
    slack = TOL * np.maximum(1.0, np.abs(v[flat.act_state]))
    with np.errstate(invalid="ignore"):
        opt = np.abs(q - v[flat.act_state]) <= slack
    opt &= np.isfinite(q)

    layer = np.full(ns, -1, dtype=np.int64)
    layer[gmask] = 0
    chosen = np.full(ns, -1, dtype=np.int64)
    while True:
        changed = False
        for si in range(ns):
            if layer[si] >= 0:
                continue
            best = None  # (succ_layer, -down_mass, head_key, ai)
            for ai in flat.slots_of(si):
                if not opt[ai]:
                    continue
                lo, hi = int(flat.ae_off[ai]), int(flat.ae_off[ai + 1])
                lmin = -1
                for ei in range(lo, hi):
                    ls = layer[flat.e_dst[ei]]
                    if ls >= 0 and (lmin < 0 or ls < lmin):
                        lmin = int(ls)
                if lmin < 0:
                    continue
                down = 0.0
                for ei in range(lo, hi):
                    ls = layer[flat.e_dst[ei]]
                    if 0 <= ls <= lmin:
                        down += float(flat.e_prob[ei])
                key = (lmin, -down, atom_key(flat.slot_head[ai]), ai)
                if best is None or key < best:
                    best = key
            if best is not None:
                layer[si] = best[0] + 1
                chosen[si] = best[3]
                changed = True
        if not changed:
            break

    choice: dict[int, Atom] = {}
    for si in range(ns):
        if gmask[si]:
            continue
        ai = int(chosen[si])
        if ai >= 0:
            choice[si] = flat.slot_head[ai]
            continue
        # unreached by the layering: plain greedy with exact-tie on head
        best_ai = -1
        best_q = 0.0
        for aj in flat.slots_of(si):
            qa = float(q[aj])
            if not np.isfinite(qa):
                continue
            if best_ai < 0 or (qa < best_q if minimize else qa > best_q) or (
                qa == best_q and atom_key(flat.slot_head[aj]) < atom_key(flat.slot_head[best_ai])
            ):
                best_ai, best_q = aj, qa
        if best_ai >= 0:
            choice[si] = flat.slot_head[best_ai]
    return Policy(objective=result.objective, choice=choice)


def policy_slots(g: MdpGraph, pol: Policy) -> np.ndarray:
    """Map each state to its chosen action slot, -1 where undefined.

    Raises NotEnabled if the policy picks an action that is not a slot
    of its state (stale policy against a regenerated model).
    """
    flat = build_flat(g)
    out = np.full(flat.ns, -1, dtype=np.int32)
    for si, head in pol.choice.items():
        if not (0 <= si < flat.ns):
            raise NotEnabled(f"policy references state index {si} outside the model")
        want = atom_key(head)
        for ai in flat.slots_of(si):
            if atom_key(flat.slot_head[ai]) == want:
                out[si] = ai
                break
        else:
            raise NotEnabled(
                f"policy action {head.text()} is not enabled in state {g.states[si].text()}"
            )
    return out


def _seg_reduce(op, arr: np.ndarray, off: np.ndarray, empty: float) -> np.ndarray:
    """Segment-wise reduce where segments may be empty."""
    n = len(off) - 1
    out = np.full(n, empty, dtype=np.float64)
    if len(arr) == 0:
        return out
    starts = off[:-1]
    nonempty = off[1:] > starts
    if not nonempty.any():
        return out
    red = op.reduceat(arr, starts[nonempty].astype(np.int64))
    out[nonempty] = red
    return out


def oracle_enumerate(
    g: MdpGraph,
    goal: Iterable[int],
    objective: str = "pmax",
    horizon: int = ORACLE_MAX_HORIZON,
) -> np.ndarray:
    """Finite-horizon backward induction, independent of the solver.

    Builds its own dense grouping from the raw edge list and performs
    ``horizon`` Bellman steps with numpy reductions.  Meant as a
    cross-check oracle for small graphs; hard caps guard misuse.
    """
    _check_ready(g)
    ns = len(g.states)
    if ns > ORACLE_MAX_STATES:
        raise ModelError(f"oracle cap: {ns} states > {ORACLE_MAX_STATES}")
    if horizon > ORACLE_MAX_HORIZON:
        raise ModelError(f"oracle cap: horizon {horizon} > {ORACLE_MAX_HORIZON}")
    if objective not in ("pmax", "rmin", "rmax"):
        raise ValueError(f"unknown objective {objective!r}")

    groups: dict[tuple, list] = {}
    for e in g.edges:
        groups.setdefault((e.src, atom_key(e.action)), []).append(e)
    keys = sorted(groups.keys())
    act_of_state: list[list[int]] = [[] for _ in range(ns)]
    e_dst: list[int] = []
    e_p: list[float] = []
    a_off = [0]
    a_rew: list[float] = []
    for ai, k in enumerate(keys):
        es = groups[k]
        act_of_state[k[0]].append(ai)
        r = 0.0
        for e in es:
            e_dst.append(e.dst)
            e_p.append(float(e.prob))
            r += float(e.prob) * float(e.reward)
        a_rew.append(r)
        a_off.append(len(e_dst))
    na = len(keys)
    dst = np.asarray(e_dst, dtype=np.int64)
    prb = np.asarray(e_p, dtype=np.float64)
    aoff = np.asarray(a_off, dtype=np.int64)
    arew = np.asarray(a_rew, dtype=np.float64)
    # state -> contiguous action range (keys are sorted by src first)
    s_off = np.zeros(ns + 1, dtype=np.int64)
    for si in range(ns):
        s_off[si + 1] = s_off[si] + len(act_of_state[si])

    gmask = np.zeros(ns, dtype=bool)
    gmask[list(goal)] = True

    if objective == "pmax":
        empty_val, red, pin = 0.0, np.maximum, 1.0
        use_rew = False
    elif objective == "rmin":
        empty_val, red, pin = float("inf"), np.minimum, 0.0
        use_rew = True
    else:
        empty_val, red, pin = float("-inf"), np.maximum, 0.0
        use_rew = True

    x = np.zeros(ns, dtype=np.float64)
    x[gmask] = pin if objective == "pmax" else 0.0
    for _ in range(horizon):
        if na:
            contrib = prb * x[dst]
            q = np.add.reduceat(contrib, aoff[:-1])
            if use_rew:
                q = q + arew
        else:
            q = np.zeros(0, dtype=np.float64)
        xs = _seg_reduce(red, q, s_off, empty_val)
        xs[gmask] = pin if objective == "pmax" else 0.0
        if np.array_equal(xs, x):
            break
        x = xs
    return x
