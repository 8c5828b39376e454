"""Expression AST shared by verify clauses, rewards and labels.

Arithmetic is exact rational (`Fraction`); floats never appear here.
Evaluation happens against an `EvalEnv` carrying whatever context the
construct is allowed to see: variable bindings for verify clauses,
cur/next state-variable frames plus the action head for reward rules,
and the raw state for label membership tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Union

from .errors import EvalError
from .model import Atom, State, Term, Var, render_term


@dataclass(frozen=True, slots=True)
class Num:
    value: Union[int, Fraction]


@dataclass(frozen=True, slots=True)
class Sym:
    name: str


@dataclass(frozen=True, slots=True)
class VarRef:
    var: Var


@dataclass(frozen=True, slots=True)
class StateRef:
    frame: str  # "cur" | "next"
    name: str


@dataclass(frozen=True, slots=True)
class ActionNameRef:
    pass


@dataclass(frozen=True, slots=True)
class ActionArgRef:
    k: int  # 1-based


@dataclass(frozen=True, slots=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True, slots=True)
class Bin:
    op: str  # + - * /
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True, slots=True)
class Cmp:
    op: str  # = != < <= > >=
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True, slots=True)
class And:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True, slots=True)
class Or:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True, slots=True)
class Not:
    operand: "Expr"


@dataclass(frozen=True, slots=True)
class BoolLit:
    value: bool


@dataclass(frozen=True, slots=True)
class Has:
    atom: Atom


Expr = Union[
    Num, Sym, VarRef, StateRef, ActionNameRef, ActionArgRef,
    Neg, Bin, Cmp, And, Or, Not, BoolLit, Has,
]


@dataclass
class EvalEnv:
    binding: dict[Var, Term] = field(default_factory=dict)
    cur: Optional[dict[str, Union[int, Fraction]]] = None
    next: Optional[dict[str, Union[int, Fraction]]] = None
    action: Optional[Atom] = None
    state: Optional[State] = None  # for `has` membership tests


def _coerce_env(env) -> EvalEnv:
    if isinstance(env, EvalEnv):
        return env
    if env is None:
        return EvalEnv()
    return EvalEnv(binding=env)


def _eval_term(e: Expr, env: EvalEnv) -> Term:
    """Evaluate to a term: a rational for arithmetic, a symbol otherwise."""
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Sym):
        return e.name
    if isinstance(e, VarRef):
        if e.var not in env.binding:
            raise EvalError(f"unbound variable {e.var.name}")
        return env.binding[e.var]
    if isinstance(e, StateRef):
        frame = env.cur if e.frame == "cur" else env.next
        if frame is None:
            raise EvalError(f"{e.frame}.{e.name} not available in this context")
        if e.name not in frame:
            raise EvalError(f"unknown state variable {e.name}")
        return frame[e.name]
    if isinstance(e, ActionNameRef):
        if env.action is None:
            raise EvalError("action.name not available in this context")
        return env.action.functor
    if isinstance(e, ActionArgRef):
        if env.action is None:
            raise EvalError("action args not available in this context")
        if not (1 <= e.k <= len(env.action.args)):
            raise EvalError(
                f"action.arg{e.k} out of range for {env.action.text()}"
            )
        return env.action.args[e.k - 1]
    if isinstance(e, Neg):
        return -_as_number(_eval_term(e.operand, env), e)
    if isinstance(e, Bin):
        lv = _as_number(_eval_term(e.left, env), e)
        rv = _as_number(_eval_term(e.right, env), e)
        if e.op == "+":
            return Fraction(lv) + Fraction(rv)
        if e.op == "-":
            return Fraction(lv) - Fraction(rv)
        if e.op == "*":
            return Fraction(lv) * Fraction(rv)
        if e.op == "/":
            if rv == 0:
                raise EvalError("division by zero")
            return Fraction(lv) / Fraction(rv)
        raise EvalError(f"unknown operator {e.op}")
    raise EvalError(f"expected a term expression, got {type(e).__name__}")


def _as_number(t: Term, where: Expr) -> Union[int, Fraction]:
    if isinstance(t, (int, Fraction)):
        return t
    raise EvalError(f"arithmetic on non-numeric term {render_term(t)}")


def eval_expr(e: Expr, env=None) -> Fraction:
    """Evaluate an arithmetic expression to an exact rational."""
    v = _eval_term(e, _coerce_env(env))
    if not isinstance(v, (int, Fraction)):
        raise EvalError(f"expected a number, got symbol {v}")
    return Fraction(v)


def eval_bool(e: Expr, env=None) -> bool:
    env = _coerce_env(env)
    if isinstance(e, BoolLit):
        return e.value
    if isinstance(e, And):
        return eval_bool(e.left, env) and eval_bool(e.right, env)
    if isinstance(e, Or):
        return eval_bool(e.left, env) or eval_bool(e.right, env)
    if isinstance(e, Not):
        return not eval_bool(e.operand, env)
    if isinstance(e, Has):
        if env.state is None:
            raise EvalError("`has` not available in this context")
        probe = e.atom.substitute(env.binding)
        if not probe.is_ground():
            raise EvalError(f"`has` atom not ground: {probe.text()}")
        return probe in env.state
    if isinstance(e, Cmp):
        lv = _eval_term(e.left, env)
        rv = _eval_term(e.right, env)
        if e.op in ("=", "!="):
            eq = lv == rv
            return eq if e.op == "=" else not eq
        ln = _as_number(lv, e)
        rn = _as_number(rv, e)
        if e.op == "<":
            return ln < rn
        if e.op == "<=":
            return ln <= rn
        if e.op == ">":
            return ln > rn
        if e.op == ">=":
            return ln >= rn
        raise EvalError(f"unknown comparison {e.op}")
    raise EvalError(f"expected a boolean expression, got {type(e).__name__}")


# -- rendering (used by the pretty-printer) --------------------------------

_PREC = {
    Or: 1, And: 2, Not: 3, Cmp: 4, Bin: 5, Neg: 7,
}


def _prec(e: Expr) -> int:
    if isinstance(e, Bin):
        return 5 if e.op in "+-" else 6
    return _PREC.get(type(e), 8)


def render_expr(e: Expr, parent_prec: int = 0) -> str:
    p = _prec(e)
    if isinstance(e, Num):
        s = render_term(e.value)
    elif isinstance(e, Sym):
        s = e.name
    elif isinstance(e, VarRef):
        s = e.var.name
    elif isinstance(e, StateRef):
        s = f"{e.frame}.{e.name}"
    elif isinstance(e, ActionNameRef):
        s = "action.name"
    elif isinstance(e, ActionArgRef):
        s = f"action.arg{e.k}"
    elif isinstance(e, Neg):
        s = f"-{render_expr(e.operand, p)}"
    elif isinstance(e, Bin):
        s = f"{render_expr(e.left, p)} {e.op} {render_expr(e.right, p + 1)}"
    elif isinstance(e, Cmp):
        s = f"{render_expr(e.left, p)} {e.op} {render_expr(e.right, p)}"
    elif isinstance(e, And):
        s = f"{render_expr(e.left, p)} & {render_expr(e.right, p)}"
    elif isinstance(e, Or):
        s = f"{render_expr(e.left, p)} | {render_expr(e.right, p)}"
    elif isinstance(e, Not):
        s = f"!{render_expr(e.operand, p)}"
    elif isinstance(e, BoolLit):
        s = "true" if e.value else "false"
    elif isinstance(e, Has):
        s = f"has {e.atom.text()}"
    else:
        raise TypeError(f"cannot render {e!r}")
    if p < parent_prec:
        return f"({s})"
    return s
