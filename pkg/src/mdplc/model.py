"""Core value types: terms, atoms, canonical states, graphs and policies.

Terms are plain Python values: `int` and `Fraction` for numbers, `str` for
symbolic constants, and `Var` for variables (only meaningful before
grounding).  Rationals are kept exact everywhere outside the numeric
solver; a Fraction that collapses to an integer is normalised to `int` so
that canonical text output is stable (`section(5)`, never `section(5/1)`).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Union


@dataclass(frozen=True, slots=True)
class Var:
    name: str

    def __repr__(self) -> str:
        return self.name


Term = Union[int, Fraction, str, Var]


def normalize_num(x: int | Fraction) -> int | Fraction:
    """Collapse integral rationals to int so rendering is canonical."""
    if isinstance(x, Fraction) and x.denominator == 1:
        return int(x)
    return x


def is_ground_term(t: Term) -> bool:
    return not isinstance(t, Var)


def render_term(t: Term) -> str:
    if isinstance(t, Fraction):
        return f"{t.numerator}/{t.denominator}"
    if isinstance(t, Var):
        return t.name
    return str(t)


def term_key(t: Term):
    """Total-order key: numbers first (by value), then symbols, then vars."""
    if isinstance(t, (int, Fraction)):
        return (0, t, "")
    if isinstance(t, str):
        return (1, 0, t)
    return (2, 0, t.name)


def term_compare(a: Term, b: Term) -> int:
    ka, kb = term_key(a), term_key(b)
    if ka < kb:
        return -1
    if ka > kb:
        return 1
    return 0


@dataclass(frozen=True, slots=True)
class Atom:
    functor: str
    args: tuple[Term, ...] = ()

    def is_ground(self) -> bool:
        return all(is_ground_term(a) for a in self.args)

    def substitute(self, binding: dict[Var, Term]) -> "Atom":
        if not self.args:
            return self
        return Atom(
            self.functor,
            tuple(binding.get(a, a) if isinstance(a, Var) else a for a in self.args),
        )

    def text(self) -> str:
        if not self.args:
            return self.functor
        return f"{self.functor}({','.join(render_term(a) for a in self.args)})"

    def __repr__(self) -> str:
        return self.text()


def atom_key(a: Atom):
    return (a.functor, len(a.args), tuple(term_key(t) for t in a.args))


class State:
    """Immutable canonical set of ground atoms.

    Construct only through `canonicalize`; equality and hashing rely on the
    sorted, deduplicated atom tuple.
    """

    __slots__ = ("atoms", "_hash")

    def __init__(self, atoms: tuple[Atom, ...]):
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "_hash", hash(atoms))

    def __setattr__(self, *_):
        raise AttributeError("State is immutable")

    def __eq__(self, other) -> bool:
        return isinstance(other, State) and self.atoms == other.atoms

    def __hash__(self) -> int:
        return self._hash

    def __contains__(self, a: Atom) -> bool:
        return a in self.atoms

    def __iter__(self):
        return iter(self.atoms)

    def __len__(self) -> int:
        return len(self.atoms)

    def text(self) -> str:
        return ",".join(a.text() for a in self.atoms)

    def __repr__(self) -> str:
        return f"<{self.text()}>"


def canonicalize(atoms: Iterable[Atom]) -> State:
    """Sort, deduplicate and freeze a collection of ground atoms."""
    seen = set(atoms)
    for a in seen:
        if not a.is_ground():
            raise ValueError(f"state atom is not ground: {a.text()}")
    return State(tuple(sorted(seen, key=atom_key)))


@dataclass(frozen=True, slots=True)
class Edge:
    src: int
    dst: int
    action: Atom  # fully grounded action head
    branch_idx: int
    prob: Fraction  # in (0, 1]; zero-probability branches are never emitted
    reward: Fraction = Fraction(0)


class MdpGraph:
    """Explicit MDP over canonical states.

    `out[i]` lists edge indices leaving state i in construction order.
    Treated as immutable after construction; `refine` and `annotate`
    return new graphs.
    """

    __slots__ = ("states", "edges", "out", "refined", "annotated", "__weakref__")

    def __init__(
        self,
        states: list[State],
        edges: list[Edge],
        refined: bool = False,
        annotated: bool = False,
    ):
        self.states = states
        self.edges = edges
        self.refined = refined
        self.annotated = annotated
        out: list[list[int]] = [[] for _ in states]
        for i, e in enumerate(edges):
            out[e.src].append(i)
        self.out = out

    def actions_of(self, state_idx: int) -> list[Atom]:
        """Distinct grounded action heads leaving a state, canonical order."""
        heads = {self.edges[i].action for i in self.out[state_idx]}
        return sorted(heads, key=atom_key)

    def edges_of(self, state_idx: int, action: Atom) -> list[Edge]:
        return [
            self.edges[i]
            for i in self.out[state_idx]
            if self.edges[i].action == action
        ]

    def stats(self) -> dict:
        heads = {e.action for e in self.edges}
        schema_names = {e.action.functor for e in self.edges}
        return {
            "states": len(self.states),
            "edges": len(self.edges),
            "grounded_actions": len(heads),
            "action_schemas_used": len(schema_names),
        }


@dataclass
class Policy:
    """Maps state index to the chosen grounded action head.

    States with no finite-value choice (or no enabled action) are absent.
    """

    objective: str
    choice: dict[int, Atom] = field(default_factory=dict)
