"""Domain-level declarations produced by the parser.

A `DomainSpec` is the fully checked, immutable description of one planning
domain: static facts, the initial state, probabilistic action schemas,
reward rules, goal labels, state-variable extraction declarations and
action classifiers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Union

from .exprs import Expr
from .model import Atom, State, Var


@dataclass(frozen=True, slots=True)
class EffectOp:
    kind: str  # "del" | "add"
    atom: Atom


@dataclass(frozen=True, slots=True)
class EffectBranch:
    prob_expr: Expr
    ops: tuple[EffectOp, ...]

    def del_atoms(self) -> tuple[Atom, ...]:
        return tuple(op.atom for op in self.ops if op.kind == "del")

    def add_atoms(self) -> tuple[Atom, ...]:
        return tuple(op.atom for op in self.ops if op.kind == "add")


@dataclass(frozen=True, slots=True)
class Bind:
    var: Var
    expr: Expr


@dataclass(frozen=True, slots=True)
class Constrain:
    expr: Expr  # boolean


VerifyClause = Union[Bind, Constrain]


@dataclass(frozen=True, slots=True)
class ActionSchema:
    name: str
    params: tuple[Var, ...]
    static_pre: tuple[Atom, ...]
    state_pre: tuple[Atom, ...]
    verify: tuple[VerifyClause, ...]
    branches: tuple[EffectBranch, ...]

    def head(self) -> Atom:
        return Atom(self.name, tuple(self.params))


@dataclass(frozen=True, slots=True)
class RewardRule:
    """Gate (`necessary`) or accumulating (`sufficient`) reward rule.

    `action_patterns` are alternatives (an edge matches if its head unifies
    with any of them; empty means any action).  `cur_patterns` and
    `next_patterns` are conjunctive constraints against the source and
    target state.  For necessary rules `guard` is the requirement that must
    hold on every match; for sufficient rules it is an optional `when`
    filter and `value_expr` the non-negative contribution.
    """

    kind: str  # "necessary" | "sufficient"
    name: str
    action_patterns: tuple[Atom, ...] = ()
    cur_patterns: tuple[Atom, ...] = ()
    next_patterns: tuple[Atom, ...] = ()
    guard: Optional[Expr] = None
    value_expr: Optional[Expr] = None


@dataclass(frozen=True, slots=True)
class LabelDef:
    name: str
    condition: Expr


@dataclass(frozen=True, slots=True)
class StateVarDecl:
    """Integer view of one state atom: `statevar p1 : [0..3] init 0 from pil(1,V);`

    The pattern must contain exactly one variable; in every reachable state
    exactly one atom must match it and the extracted value must be an
    integer within [lo, hi].
    """

    name: str
    lo: int
    hi: int
    init: int
    pattern: Atom
    value_pos: int  # index of the variable inside pattern.args


@dataclass(frozen=True, slots=True)
class ClassifierDef:
    name: str
    patterns: tuple[Atom, ...]  # alternatives, matched against action heads


@dataclass(frozen=True, slots=True)
class DomainSpec:
    name: str
    facts: tuple[Atom, ...]
    init: State
    statevars: tuple[StateVarDecl, ...]
    schemas: tuple[ActionSchema, ...]
    rewards: tuple[RewardRule, ...]
    labels: tuple[LabelDef, ...]
    classifiers: tuple[ClassifierDef, ...] = ()
    penalty: Union[int, Fraction] = 1000

    def schema(self, name: str) -> ActionSchema:
        for s in self.schemas:
            if s.name == name:
                return s
        raise KeyError(name)

    def label(self, name: str) -> LabelDef:
        for l in self.labels:
            if l.name == name:
                return l
        raise KeyError(name)

    def statevar(self, name: str) -> StateVarDecl:
        for v in self.statevars:
            if v.name == name:
                return v
        raise KeyError(name)
