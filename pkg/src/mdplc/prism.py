"""PRISM model emission and a best-effort parser for round-trip checks.

Two encodings are supported.  `indexed` flattens the state space into a
single variable `s : [0..N-1]` and rewrites labels as index disjunctions;
`factored` declares one PRISM variable per `statevar` and requires the
joint encoding to be injective on reachable states.  Both are emitted
with one command per (state, grounded action), probabilities merged over
effect branches, in a fixed deterministic order: output is byte-stable.

Probabilities and rewards are exact rationals; values with a terminating
decimal expansion are printed as decimals (`0.45`), everything else as
`num/den` literals, which PRISM evaluates exactly.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

from . import exprs as E
from .domain import DomainSpec
from .errors import (
    Diagnostic,
    EncodingError,
    ModelError,
    ParseError,
    UnsupportedConstruct,
)
from .grounder import match_atoms
from .model import Atom, Edge, MdpGraph, State, atom_key, render_term


def encode_state(s: State, d: DomainSpec) -> dict[str, int]:
    """Extract the declared integer state variables from a state.

    Each pattern must match exactly one atom and yield an integer within
    the declared range.
    """
    out: dict[str, int] = {}
    for sv in d.statevars:
        hits = match_atoms((sv.pattern,), s.atoms, {})
        if len(hits) != 1:
            raise EncodingError(
                f"statevar {sv.name}: pattern {sv.pattern.text()} matches "
                f"{len(hits)} atoms in state {s.text()}"
            )
        val = hits[0][sv.pattern.args[sv.value_pos]]
        if not isinstance(val, int):
            raise EncodingError(
                f"statevar {sv.name}: extracted non-integer "
                f"{render_term(val)} in state {s.text()}"
            )
        if not (sv.lo <= val <= sv.hi):
            raise EncodingError(
                f"statevar {sv.name}: value {val} outside [{sv.lo}..{sv.hi}] "
                f"in state {s.text()}"
            )
        out[sv.name] = val
    return out


def validate_statevars(g: MdpGraph, d: DomainSpec) -> None:
    """Check every reachable state extracts cleanly (raises EncodingError)."""
    for s in g.states:
        encode_state(s, d)


def render_prob(p: Union[int, Fraction]) -> str:
    """Exact decimal when the denominator is 2^a*5^b, else num/den."""
    p = Fraction(p)
    num, den = p.numerator, p.denominator
    if den == 1:
        return str(num)
    d2, d5 = den, 0
    twos = 0
    while d2 % 2 == 0:
        d2 //= 2
        twos += 1
    while d2 % 5 == 0:
        d2 //= 5
        d5 += 1
    if d2 == 1:
        k = max(twos, d5)
        scaled = abs(num) * 10**k // den
        digits = str(scaled).rjust(k + 1, "0")
        sign = "-" if num < 0 else ""
        return f"{sign}{digits[:-k]}.{digits[-k:]}"
    return f"{num}/{den}"


def _tag_piece(t) -> str:
    if isinstance(t, Fraction):
        return f"{t.numerator}_{t.denominator}".replace("-", "m")
    return str(t).replace("-", "m")


def action_tags(g: MdpGraph) -> dict[Atom, str]:
    """Deterministic, collision-free PRISM action labels for all heads."""
    heads = sorted({e.action for e in g.edges}, key=atom_key)
    tags: dict[Atom, str] = {}
    used: set[str] = set()
    for h in heads:
        base = h.functor
        if h.args:
            base += "_" + "_".join(_tag_piece(a) for a in h.args)
        tag = base
        n = 2
        while tag in used:
            tag = f"{base}__{n}"
            n += 1
        used.add(tag)
        tags[h] = tag
    return tags


def _merged_updates(g: MdpGraph, si: int, head: Atom) -> list[tuple[int, Fraction]]:
    """(dst, prob) pairs for one command, branch mass merged, dst ascending."""
    acc: dict[int, Fraction] = {}
    for e in g.edges_of(si, head):
        acc[e.dst] = acc.get(e.dst, Fraction(0)) + e.prob
    return sorted(acc.items())


def _label_sets(g: MdpGraph, d: DomainSpec) -> dict[str, frozenset[int]]:
    from .solver import label_states

    return {l.name: label_states(g, d, l.name) for l in d.labels}


def _render_label_expr(e: E.Expr) -> str:
    """Label condition in PRISM syntax; raises on membership tests."""
    if isinstance(e, E.StateRef):
        return e.name
    if isinstance(e, E.Num):
        return render_prob(e.value)
    if isinstance(e, E.Cmp):
        op = {"=": "=", "!=": "!=", "<": "<", "<=": "<=", ">": ">", ">=": ">="}[e.op]
        return f"{_render_label_expr(e.left)}{op}{_render_label_expr(e.right)}"
    if isinstance(e, E.And):
        return f"({_render_label_expr(e.left)})&({_render_label_expr(e.right)})"
    if isinstance(e, E.Or):
        return f"({_render_label_expr(e.left)})|({_render_label_expr(e.right)})"
    if isinstance(e, E.Not):
        return f"!({_render_label_expr(e.operand)})"
    if isinstance(e, E.BoolLit):
        return "true" if e.value else "false"
    if isinstance(e, E.Bin):
        return f"({_render_label_expr(e.left)}{e.op}{_render_label_expr(e.right)})"
    if isinstance(e, E.Neg):
        return f"(-{_render_label_expr(e.operand)})"
    raise UnsupportedConstruct(f"cannot render {type(e).__name__} in a label")


def emit(g: MdpGraph, d: DomainSpec, mode: str = "indexed") -> str:
    """Render the refined (and, if rewards exist, annotated) graph."""
    from .rewards import state_action_reward

    if mode not in ("indexed", "factored"):
        raise ValueError(f"unknown mode {mode!r}")
    if not g.refined:
        raise ModelError("emit requires a refined graph")
    if d.rewards and not g.annotated:
        raise ModelError("domain has reward rules: annotate the graph first")

    tags = action_tags(g)
    n = len(g.states)
    lines: list[str] = ["mdp", ""]

    if mode == "indexed":
        lines.append("module generated")
        lines.append(f"  s : [0..{n - 1}] init 0;")
        lines.append("")
        for si in range(n):
            for head in g.actions_of(si):
                ups = " + ".join(
                    f"{render_prob(p)}:(s'={dst})"
                    for dst, p in _merged_updates(g, si, head)
                )
                lines.append(f"  [{tags[head]}] s={si} -> {ups};")
        lines.append("endmodule")
    else:
        encs = [encode_state(s, d) for s in g.states]
        seen: dict[tuple, int] = {}
        for i, enc in enumerate(encs):
            key = tuple(enc[sv.name] for sv in d.statevars)
            if key in seen:
                raise EncodingError(
                    "factored encoding is not injective: states "
                    f"{g.states[seen[key]].text()} and {g.states[i].text()} "
                    f"share {key}"
                )
            seen[key] = i
        lines.append("module generated")
        for sv in d.statevars:
            lines.append(
                f"  {sv.name} : [{sv.lo}..{sv.hi}] init {sv.init};"
            )
        lines.append("")

        def guard(i: int) -> str:
            return "&".join(
                f"({sv.name}={encs[i][sv.name]})" for sv in d.statevars
            )

        def assign(i: int) -> str:
            return "&".join(
                f"({sv.name}'={encs[i][sv.name]})" for sv in d.statevars
            )

        for si in range(n):
            for head in g.actions_of(si):
                ups = " + ".join(
                    f"{render_prob(p)}:{assign(dst)}"
                    for dst, p in _merged_updates(g, si, head)
                )
                lines.append(f"  [{tags[head]}] {guard(si)} -> {ups};")
        lines.append("endmodule")

    if d.rewards:
        lines.append("")
        lines.append('rewards "r"')
        for si in range(n):
            for head in g.actions_of(si):
                r = state_action_reward(g, si, head)
                if r == 0:
                    continue
                if mode == "indexed":
                    lines.append(f"  [{tags[head]}] s={si} : {render_prob(r)};")
                else:
                    lines.append(
                        f"  [{tags[head]}] {guard(si)} : {render_prob(r)};"
                    )
        lines.append("endrewards")

    if d.labels:
        lines.append("")
        if mode == "indexed":
            sets = _label_sets(g, d)
            for l in d.labels:
                members = sorted(sets[l.name])
                if not members:
                    cond = "false"
                else:
                    cond = "|".join(f"(s={i})" for i in members)
                lines.append(f'label "{l.name}" = {cond};')
        else:
            for l in d.labels:
                try:
                    cond = _render_label_expr(l.condition)
                except UnsupportedConstruct:
                    sets = _label_sets(g, d)
                    members = sorted(sets[l.name])
                    if not members:
                        cond = "false"
                    else:
                        cond = "|".join(f"({guard(i)})" for i in members)
                lines.append(f'label "{l.name}" = {cond};')
    return "\n".join(lines) + "\n"


def emit_props(d: DomainSpec) -> str:
    """Conventional reachability queries for the declared goal labels."""
    lines = []
    names = {l.name for l in d.labels}
    if "doneP" in names:
        lines.append('Pmax=? [ F "doneP" ]')
    if "doneR" in names:
        lines.append('Rmin=? [ F "doneR" ]')
    return "\n".join(lines) + ("\n" if lines else "")


# -- parsing (round-trip support) --------------------------------------------


@dataclass
class ParsedPrism:
    graph: MdpGraph
    labels: dict[str, frozenset[int]]
    tag_rewards: dict[tuple[str, int], Fraction]  # (tag, state) -> value


_NUM_RE = r"-?\d+(?:\.\d+)?(?:/\d+)?"


def _parse_num(s: str) -> Fraction:
    if "/" in s:
        a, b = s.split("/")
        return Fraction(int(a), int(b))
    return Fraction(s)


def parse_prism_subset(text: str) -> ParsedPrism:
    """Parse the indexed subset emitted by `emit` back into a graph.

    Branch structure is not recoverable from PRISM commands, so each
    update becomes one edge whose branch index is its position in the
    command and whose reward is the command's reward value.
    """
    lines = [re.sub(r"//.*", "", ln).strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    pos = 0

    def fail(msg: str, lineno: int = 0):
        raise ParseError(Diagnostic("error", lineno, 1, msg))

    if pos >= len(lines):
        fail("empty model")
    header = lines[pos]
    if header != "mdp":
        if header in ("dtmc", "ctmc", "pomdp", "probabilistic", "nondeterministic"):
            raise UnsupportedConstruct(f"model type {header!r} not supported")
        fail(f"expected 'mdp' header, got {header!r}")
    pos += 1

    if pos >= len(lines) or not lines[pos].startswith("module"):
        fail("expected a module")
    pos += 1

    m = re.fullmatch(
        r"(\w+)\s*:\s*\[\s*0\s*\.\.\s*(\d+)\s*\]\s*init\s*(\d+)\s*;", lines[pos]
    )
    if not m:
        raise UnsupportedConstruct(
            f"expected a single indexed state variable, got {lines[pos]!r}"
        )
    var, hi, init = m.group(1), int(m.group(2)), int(m.group(3))
    if init != 0:
        raise UnsupportedConstruct("initial state index must be 0")
    pos += 1

    n = hi + 1
    states = [State((Atom("s", (i,)),)) for i in range(n)]
    edges: list[Edge] = []
    cmd_re = re.compile(rf"\[(\w+)\]\s*{var}=(\d+)\s*->\s*(.*);")
    upd_re = re.compile(rf"({_NUM_RE})\s*:\s*\(\s*{var}'\s*=\s*(\d+)\s*\)")

    while pos < len(lines) and lines[pos] != "endmodule":
        ln = lines[pos]
        m = cmd_re.fullmatch(ln)
        if not m:
            if re.match(r"\w+\s*:", ln):
                raise UnsupportedConstruct(
                    f"multiple variables not supported: {ln!r}"
                )
            fail(f"cannot parse command {ln!r}", pos + 1)
        tag, src, rest = m.group(1), int(m.group(2)), m.group(3)
        total = Fraction(0)
        for bidx, part in enumerate(p.strip() for p in rest.split("+")):
            um = upd_re.fullmatch(part)
            if not um:
                fail(f"cannot parse update {part!r}", pos + 1)
            prob = _parse_num(um.group(1))
            dst = int(um.group(2))
            if not (0 < prob <= 1):
                fail(f"probability {um.group(1)} outside (0, 1]", pos + 1)
            if dst >= n:
                fail(f"target index {dst} out of range", pos + 1)
            total += prob
            edges.append(Edge(src, dst, Atom(tag), bidx, prob))
        if total != 1:
            fail(
                f"probabilities of [{tag}] at {var}={src} sum to "
                f"{render_term(total)}, expected 1", pos + 1,
            )
        pos += 1
    if pos >= len(lines):
        fail("missing endmodule")
    pos += 1

    tag_rewards: dict[tuple[str, int], Fraction] = {}
    if pos < len(lines) and lines[pos].startswith("rewards"):
        pos += 1
        rew_re = re.compile(rf"\[(\w+)\]\s*{var}=(\d+)\s*:\s*({_NUM_RE})\s*;")
        while pos < len(lines) and lines[pos] != "endrewards":
            m = rew_re.fullmatch(lines[pos])
            if not m:
                fail(f"cannot parse reward line {lines[pos]!r}", pos + 1)
            tag_rewards[(m.group(1), int(m.group(2)))] = _parse_num(m.group(3))
            pos += 1
        if pos >= len(lines):
            fail("missing endrewards")
        pos += 1

    labels: dict[str, frozenset[int]] = {}
    lab_re = re.compile(r'label\s+"(\w+)"\s*=\s*(.*);')
    while pos < len(lines):
        m = lab_re.fullmatch(lines[pos])
        if not m:
            fail(f"cannot parse line {lines[pos]!r}", pos + 1)
        name, cond = m.group(1), m.group(2).strip()
        if cond == "false":
            members: frozenset[int] = frozenset()
        elif cond == "true":
            members = frozenset(range(n))
        else:
            idxs = []
            for part in cond.split("|"):
                mm = re.fullmatch(rf"\(\s*{var}\s*=\s*(\d+)\s*\)", part.strip())
                if not mm:
                    raise UnsupportedConstruct(
                        f"label condition {cond!r} not in the indexed subset"
                    )
                idxs.append(int(mm.group(1)))
            members = frozenset(idxs)
        labels[name] = members
        pos += 1

    if edges:
        rewarded = []
        for e in edges:
            r = tag_rewards.get((e.action.functor, e.src), Fraction(0))
            rewarded.append(
                Edge(e.src, e.dst, e.action, e.branch_idx, e.prob, r)
            )
        edges = rewarded
    graph = MdpGraph(states, edges, refined=True, annotated=bool(tag_rewards))
    return ParsedPrism(graph, labels, tag_rewards)


# -- structural comparison ----------------------------------------------------


def transition_view(
    g: MdpGraph, tags: Optional[dict[Atom, str]] = None
) -> dict[int, dict[str, dict[int, Fraction]]]:
    """state -> action tag -> dst -> merged probability."""
    if tags is None:
        tags = action_tags(g)
    out: dict[int, dict[str, dict[int, Fraction]]] = {}
    for e in g.edges:
        acc = out.setdefault(e.src, {}).setdefault(tags[e.action], {})
        acc[e.dst] = acc.get(e.dst, Fraction(0)) + e.prob
    return out


def reward_view(g: MdpGraph, tags: Optional[dict[Atom, str]] = None):
    """state -> action tag -> expected one-step reward (only nonzero)."""
    from .rewards import state_action_reward

    if tags is None:
        tags = action_tags(g)
    out: dict[tuple[str, int], Fraction] = {}
    for si in range(len(g.states)):
        for head in g.actions_of(si):
            r = state_action_reward(g, si, head)
            if r != 0:
                out[(tags[head], si)] = r
    return out


def same_structure(
    g: MdpGraph,
    d: DomainSpec,
    parsed: ParsedPrism,
) -> bool:
    """Index-preserving equivalence between a graph and a parsed model.

    Compares state count, merged transition distributions per (state,
    action tag), per-command expected rewards, and label sets.  Emission
    preserves indices, so this is the round-trip check.
    """
    if len(g.states) != len(parsed.graph.states):
        return False
    tags = action_tags(g)
    if transition_view(g, tags) != transition_view(
        parsed.graph, {a: a.functor for a in {e.action for e in parsed.graph.edges}}
    ):
        return False
    if d.rewards and reward_view(g, tags) != parsed.tag_rewards:
        return False
    expected_labels = {
        name: frozenset(members) for name, members in _label_sets(g, d).items()
    }
    return expected_labels == parsed.labels
