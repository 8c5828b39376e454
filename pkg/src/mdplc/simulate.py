"""Monte Carlo policy execution.

Trials run in the compiled kernel when it is available; the pure
backend produces bit-identical trajectories because both walk the same
splitmix64 stream and draw in the same order.  A draw is only consumed
when the executor could actually deviate, so ``Faulty(0)`` and
``EpsilonGreedy(0)`` replay exactly the ``Exact`` trajectories of the
same seed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import kernels, solver
from .domain import DomainSpec
from .errors import Diagnostic, ModelError, ParseError
from .grounder import match_atom
from .model import Atom, MdpGraph, Policy, State, canonicalize


@dataclass(frozen=True)
class Executor:
    """How the runtime resolves the policy's chosen action.

    mode "exact": always the policy action.  "faulty": with prob
    ``param`` replace it by a uniformly random other enabled action
    (when one exists).  "epsilon": with prob ``param`` pick uniformly
    among all enabled actions.
    """

    mode: str = "exact"
    param: float = 0.0

    def __post_init__(self):
        if self.mode not in ("exact", "faulty", "epsilon"):
            raise ValueError(f"unknown executor mode {self.mode!r}")
        if not (0.0 <= self.param <= 1.0):
            raise ValueError("executor parameter must lie in [0, 1]")
        if self.mode == "exact" and self.param != 0.0:
            raise ValueError("exact executor takes no parameter")

    def describe(self) -> str:
        if self.mode == "exact":
            return "exact"
        return f"{self.mode}({self.param:g})"


EXACT = Executor()


@dataclass
class SimReport:
    trials: int
    successes: int
    success_ratio: Fraction
    total_actions: int
    mean_actions: float | None          # over successful trials
    action_counts: dict[str, int]       # schema name -> executions
    classifier_counts: dict[str, int]
    executor: str
    seed: int
    max_steps: int

    def to_json_dict(self) -> dict:
        return {
            "trials": self.trials,
            "successes": self.successes,
            "success_ratio": f"{self.success_ratio.numerator}/{self.success_ratio.denominator}",
            "success_ratio_float": float(self.success_ratio),
            "total_actions": self.total_actions,
            "mean_actions_per_success": self.mean_actions,
            "action_counts": self.action_counts,
            "classifier_counts": self.classifier_counts,
            "executor": self.executor,
            "seed": self.seed,
            "max_steps": self.max_steps,
        }


_MODE_CODE = {"exact": 0, "faulty": 1, "epsilon": 2}


def simulate(
    g: MdpGraph,
    d: DomainSpec,
    pol: Policy,
    goal: frozenset[int] | set[int],
    trials: int,
    seed: int,
    executor: Executor = EXACT,
    max_steps: int | None = None,
) -> SimReport:
    """Run ``trials`` rollouts of a policy and aggregate outcomes.

    A trial succeeds when it enters a goal state within ``max_steps``
    actions.  Reaching a state where the policy is undefined (and that
    is not a goal) ends the trial as a failure.
    """
    if trials <= 0:
        raise ValueError("trials must be positive")
    if not g.refined:
        raise ModelError("simulation requires a refined graph")
    flat = solver.build_flat(g)
    pol_slot = solver.policy_slots(g, pol)
    if max_steps is None:
        max_steps = 10 * max(1, flat.ns)
    gmask = np.zeros(flat.ns, dtype=np.uint8)
    gmask[list(goal)] = 1

    slot_counts = np.zeros(flat.na, dtype=np.int64)
    out_success = np.zeros(trials, dtype=np.uint8)
    out_steps = np.zeros(trials, dtype=np.int32)
    successes, total_actions = kernels.run_trials(
        trials, max_steps, seed & 0xFFFFFFFFFFFFFFFF, _MODE_CODE[executor.mode],
        float(executor.param), pol_slot, gmask,
        flat.sa_off, flat.ae_off, flat.e_dst, flat.e_prob,
        slot_counts, out_success, out_steps,
    )

    action_counts: dict[str, int] = {}
    for ai in range(flat.na):
        c = int(slot_counts[ai])
        if c == 0:
            continue
        name = flat.slot_head[ai].functor
        action_counts[name] = action_counts.get(name, 0) + c
    action_counts = dict(sorted(action_counts.items()))

    classifier_counts: dict[str, int] = {}
    for cl in d.classifiers:
        tot = 0
        for ai in range(flat.na):
            c = int(slot_counts[ai])
            if c == 0:
                continue
            head = flat.slot_head[ai]
            if any(match_atom(p, head, {}) is not None for p in cl.patterns):
                tot += c
        classifier_counts[cl.name] = tot

    succ_steps = out_steps[out_success == 1]
    mean_actions = float(succ_steps.mean()) if len(succ_steps) else None
    return SimReport(
        trials=trials,
        successes=int(successes),
        success_ratio=Fraction(int(successes), trials),
        total_actions=int(total_actions),
        mean_actions=mean_actions,
        action_counts=action_counts,
        classifier_counts=classifier_counts,
        executor=executor.describe(),
        seed=seed,
        max_steps=max_steps,
    )


# ---------------------------------------------------------------- policy io

def export_table(g: MdpGraph, pol: Policy, path: str) -> None:
    """Write a policy as CSV (state text, action text), state-sorted.

    The table is keyed by state text, not index, so it survives being
    read back against a freshly grounded model.
    """
    rows = sorted(
        ((g.states[si].text(), act.text()) for si, act in pol.choice.items()),
        key=lambda r: r[0],
    )
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["state", "action", "objective"])
        first = True
        for st, act in rows:
            w.writerow([st, act, pol.objective if first else ""])
            first = False


def _split_top(s: str) -> list[str]:
    """Split on commas outside parentheses."""
    parts, depth, cur = [], 0, []
    for ch in s:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth < 0:
                raise ValueError(f"unbalanced parens in {s!r}")
        if ch == "," and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    if cur or parts:
        parts.append("".join(cur))
    if depth != 0:
        raise ValueError(f"unbalanced parens in {s!r}")
    return parts


def _parse_term_text(s: str):
    s = s.strip()
    if not s:
        raise ValueError("empty term")
    if "/" in s:
        num, den = s.split("/", 1)
        return Fraction(int(num), int(den))
    try:
        return int(s)
    except ValueError:
        pass
    if s[0].islower():
        return s
    raise ValueError(f"cannot parse ground term {s!r}")


def parse_atom_text(s: str) -> Atom:
    """Inverse of Atom.text() for ground atoms."""
    s = s.strip()
    if "(" not in s:
        return Atom(s, ())
    if not s.endswith(")"):
        raise ValueError(f"malformed atom {s!r}")
    functor, rest = s.split("(", 1)
    inner = rest[:-1]
    args = tuple(_parse_term_text(p) for p in _split_top(inner)) if inner else ()
    return Atom(functor, args)


def parse_state_text(s: str) -> State:
    s = s.strip()
    if not s:
        return canonicalize([])
    return canonicalize([parse_atom_text(p) for p in _split_top(s)])


def load_table(path: str) -> tuple[str, dict[State, Atom]]:
    """Read a policy CSV produced by export_table.

    Returns the stored objective name and the state -> action mapping;
    use resolve_table to bind it to a concrete graph.
    """
    mapping: dict[State, Atom] = {}
    objective = "loaded"
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd, None)
        if header is None or header[:2] != ["state", "action"]:
            raise ParseError(Diagnostic("error", 1, 1, f"not a policy table: {path}"))
        for i, row in enumerate(rd):
            if not row:
                continue
            if len(row) < 2:
                raise ParseError(Diagnostic("error", i + 2, 1, f"bad policy row in {path}"))
            st = parse_state_text(row[0])
            act = parse_atom_text(row[1])
            if len(row) > 2 and row[2]:
                objective = row[2]
            if st in mapping:
                raise ParseError(Diagnostic("error", i + 2, 1, f"duplicate state in policy table: {row[0]}"))
            mapping[st] = act
    return objective, mapping


def resolve_table(g: MdpGraph, objective: str, mapping: dict[State, Atom]) -> Policy:
    """Bind a loaded policy table to a graph's state indices.

    Raises ModelError when the table mentions states that do not exist
    in the model (a stale policy against a changed domain).
    """
    index = {st: i for i, st in enumerate(g.states)}
    missing = [st for st in mapping if st not in index]
    if missing:
        shown = ", ".join(st.text() for st in missing[:3])
        raise ModelError(
            f"stale policy: {len(missing)} table states are not in the "
            f"model (e.g. {shown})"
        )
    return Policy(objective, {index[st]: act for st, act in mapping.items()})
