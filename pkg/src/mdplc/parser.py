"""MDPL frontend: lexer, recursive-descent parser, pretty-printer, checks.

The language is a small declarative format for probabilistic planning
domains.  A file declares, in any order after the `domain` header:

  facts { adj(0,1), adj(1,0) }              static facts (never change)
  init { section(0), estop(0), delay(0) }   initial state atoms
  statevar section : [0..5] init 0 from section(V);
  action proceed(S) {
    pre-static ...;                         match against facts
    pre-state section(S), estop(0);         match against the state
    verify Pno := 1 - S/10, Pyes := S/10, NS := S + 1, S < 5;
    eff Pyes { del estop(0); add estop(1); }
    eff Pno  { del section(S); add section(NS); }
  }
  reward necessary no_estop require next.estop = 0;
  reward sufficient time match action proceed(S) value 10;
  classifier fast = proceed(S) | speedup(S,D);
  label doneP = section = 5 & estop = 0;
  penalty 1000;

Numbers are exact rationals: `0.9`, `9/10` and `1 - S/10` all evaluate to
the same Fraction.  Variables start with an uppercase letter or `_`,
symbols with a lowercase letter.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from . import exprs as E
from .domain import (
    ActionSchema,
    Bind,
    ClassifierDef,
    Constrain,
    DomainSpec,
    EffectBranch,
    EffectOp,
    LabelDef,
    RewardRule,
    StateVarDecl,
)
from .errors import Diagnostic, EvalError, ParseError
from .exprs import eval_expr
from .model import Atom, State, Term, Var, canonicalize, render_term

_PUNCT2 = (":=", "..", "!=", "<=", ">=")
_PUNCT1 = "{}()[];,|&!=<>+-*/:."
_SECTION_KEYWORDS = {
    "facts", "init", "statevar", "action", "reward",
    "label", "classifier", "penalty",
}


@dataclass(frozen=True)
class Token:
    kind: str  # ident | var | int | decimal | punct | eof
    value: str
    line: int
    col: int


def _lex(text: str) -> list[Token]:
    toks: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if c == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        start_line, start_col = line, col
        # section keywords containing a hyphen
        for kw in ("pre-static", "pre-state"):
            if text.startswith(kw, i):
                after = i + len(kw)
                if after >= n or not (text[after].isalnum() or text[after] == "_"):
                    toks.append(Token("ident", kw, start_line, start_col))
                    i = after
                    col += len(kw)
                    break
        else:
            if c.isalpha() or c == "_":
                j = i
                while j < n and (text[j].isalnum() or text[j] == "_"):
                    j += 1
                word = text[i:j]
                kind = "var" if (c == "_" or c.isupper()) else "ident"
                toks.append(Token(kind, word, start_line, start_col))
                col += j - i
                i = j
                continue
            if c.isdigit():
                j = i
                while j < n and text[j].isdigit():
                    j += 1
                if j < n and text[j] == "." and j + 1 < n and text[j + 1].isdigit():
                    j += 1
                    while j < n and text[j].isdigit():
                        j += 1
                    toks.append(Token("decimal", text[i:j], start_line, start_col))
                else:
                    toks.append(Token("int", text[i:j], start_line, start_col))
                col += j - i
                i = j
                continue
            two = text[i : i + 2]
            if two in _PUNCT2:
                toks.append(Token("punct", two, start_line, start_col))
                i += 2
                col += 2
                continue
            if c in _PUNCT1:
                toks.append(Token("punct", c, start_line, start_col))
                i += 1
                col += 1
                continue
            raise ParseError(
                Diagnostic("error", line, col, f"unexpected character {c!r}")
            )
    toks.append(Token("eof", "", line, col))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _lex(text)
        self.pos = 0
        # collected sections, in declaration order
        self.name: Optional[str] = None
        self.facts: list[Atom] = []
        self.init_atoms: Optional[list[Atom]] = None
        self.statevars: list[StateVarDecl] = []
        self.schemas: list[ActionSchema] = []
        self.rewards: list[RewardRule] = []
        self.labels: list[LabelDef] = []
        self.classifiers: list[ClassifierDef] = []
        self.penalty: Optional[Fraction] = None
        self._positions: dict[object, Token] = {}

    # -- token plumbing ----------------------------------------------------

    def peek(self, ahead: int = 0) -> Token:
        return self.toks[min(self.pos + ahead, len(self.toks) - 1)]

    def next(self) -> Token:
        t = self.toks[self.pos]
        if t.kind != "eof":
            self.pos += 1
        return t

    def error(self, msg: str, tok: Optional[Token] = None):
        tok = tok or self.peek()
        raise ParseError(Diagnostic("error", tok.line, tok.col, msg))

    def expect(self, kind: str, value: Optional[str] = None) -> Token:
        t = self.peek()
        if t.kind != kind or (value is not None and t.value != value):
            want = value if value is not None else kind
            got = t.value if t.value else t.kind
            self.error(f"expected {want!r}, got {got!r}")
        return self.next()

    def accept(self, kind: str, value: Optional[str] = None) -> Optional[Token]:
        t = self.peek()
        if t.kind == kind and (value is None or t.value == value):
            return self.next()
        return None

    # -- terms and atoms ---------------------------------------------------

    def parse_number(self) -> Fraction:
        neg = bool(self.accept("punct", "-"))
        t = self.peek()
        if t.kind == "decimal":
            self.next()
            v = Fraction(t.value)
        elif t.kind == "int":
            self.next()
            v = Fraction(int(t.value))
            if self.peek().kind == "punct" and self.peek().value == "/":
                # rational literal inside an atom argument
                self.next()
                den = self.expect("int")
                v = v / int(den.value)
        else:
            self.error("expected a number")
        return -v if neg else v

    def parse_term(self) -> Term:
        t = self.peek()
        if t.kind == "var":
            self.next()
            return Var(t.value)
        if t.kind == "ident":
            self.next()
            return t.value
        from .model import normalize_num

        return normalize_num(self.parse_number())

    def parse_atom(self) -> Atom:
        name = self.expect("ident")
        args: list[Term] = []
        if self.accept("punct", "("):
            if not self.accept("punct", ")"):
                args.append(self.parse_term())
                while self.accept("punct", ","):
                    args.append(self.parse_term())
                self.expect("punct", ")")
        atom = Atom(name.value, tuple(args))
        self._positions[atom] = name
        return atom

    def parse_atom_list(self) -> list[Atom]:
        atoms = [self.parse_atom()]
        while self.accept("punct", ","):
            atoms.append(self.parse_atom())
        return atoms

    # -- expressions ---------------------------------------------------------

    def parse_arith(self) -> E.Expr:
        e = self.parse_arith_term()
        while True:
            t = self.peek()
            if t.kind == "punct" and t.value in ("+", "-"):
                self.next()
                e = E.Bin(t.value, e, self.parse_arith_term())
            else:
                return e

    def parse_arith_term(self) -> E.Expr:
        e = self.parse_arith_factor()
        while True:
            t = self.peek()
            if t.kind == "punct" and t.value in ("*", "/"):
                self.next()
                e = E.Bin(t.value, e, self.parse_arith_factor())
            else:
                return e

    def parse_arith_factor(self) -> E.Expr:
        if self.accept("punct", "-"):
            return E.Neg(self.parse_arith_factor())
        t = self.peek()
        if t.kind in ("int", "decimal"):
            from .model import normalize_num

            self.next()
            if t.kind == "decimal":
                return E.Num(normalize_num(Fraction(t.value)))
            return E.Num(int(t.value))
        if t.kind == "var":
            self.next()
            return E.VarRef(Var(t.value))
        if t.kind == "ident":
            self.next()
            if t.value in ("cur", "next") and self.accept("punct", "."):
                field = self.expect("ident")
                return E.StateRef(t.value, field.value)
            if t.value == "action" and self.accept("punct", "."):
                field = self.expect("ident")
                if field.value == "name":
                    return E.ActionNameRef()
                if field.value.startswith("arg") and field.value[3:].isdigit():
                    return E.ActionArgRef(int(field.value[3:]))
                self.error(
                    f"unknown action accessor {field.value!r} "
                    "(expected name or argK)", field,
                )
            return E.Sym(t.value)
        if self.accept("punct", "("):
            e = self.parse_arith()
            self.expect("punct", ")")
            return e
        self.error("expected an expression")

    _CMP_OPS = ("=", "!=", "<=", ">=", "<", ">")

    def parse_bool(self) -> E.Expr:
        e = self.parse_bool_and()
        while self.accept("punct", "|"):
            e = E.Or(e, self.parse_bool_and())
        return e

    def parse_bool_and(self) -> E.Expr:
        e = self.parse_bool_not()
        while self.accept("punct", "&"):
            e = E.And(e, self.parse_bool_not())
        return e

    def parse_bool_not(self) -> E.Expr:
        if self.accept("punct", "!"):
            return E.Not(self.parse_bool_not())
        return self.parse_bool_primary()

    def parse_bool_primary(self) -> E.Expr:
        t = self.peek()
        if t.kind == "ident" and t.value == "true":
            self.next()
            return E.BoolLit(True)
        if t.kind == "ident" and t.value == "false":
            self.next()
            return E.BoolLit(False)
        if t.kind == "ident" and t.value == "has":
            self.next()
            return E.Has(self.parse_atom())
        # try a comparison first; fall back to a parenthesised boolean
        save = self.pos
        try:
            left = self.parse_arith()
            op_tok = self.peek()
            if op_tok.kind == "punct" and op_tok.value in self._CMP_OPS:
                self.next()
                right = self.parse_arith()
                return E.Cmp(op_tok.value, left, right)
            self.error("expected a comparison operator")
        except ParseError:
            self.pos = save
        if self.accept("punct", "("):
            e = self.parse_bool()
            self.expect("punct", ")")
            return e
        self.error("expected a boolean expression")

    # -- sections ------------------------------------------------------------

    def parse_file(self) -> DomainSpec:
        self.expect("ident", "domain")
        self.name = self.expect("ident").value
        self.expect("punct", ";")
        while self.peek().kind != "eof":
            t = self.peek()
            if t.kind != "ident" or t.value not in _SECTION_KEYWORDS:
                self.error(f"expected a section keyword, got {t.value!r}")
            getattr(self, f"_parse_{t.value.replace('-', '_')}")()
        return self._finalize()

    def _parse_facts(self):
        self.next()
        self.expect("punct", "{")
        atoms: list[Atom] = []
        if not self.accept("punct", "}"):
            atoms = self.parse_atom_list()
            self.expect("punct", "}")
        self.facts.extend(atoms)

    def _parse_init(self):
        tok = self.next()
        self.expect("punct", "{")
        atoms = self.parse_atom_list()
        self.expect("punct", "}")
        if self.init_atoms is not None:
            self.error("duplicate init section", tok)
        self.init_atoms = atoms

    def _parse_statevar(self):
        self.next()
        name = self.expect("ident")
        self.expect("punct", ":")
        self.expect("punct", "[")
        lo = int(self.expect("int").value)
        self.expect("punct", "..")
        hi = int(self.expect("int").value)
        self.expect("punct", "]")
        self.expect("ident", "init")
        neg = bool(self.accept("punct", "-"))
        init = int(self.expect("int").value) * (-1 if neg else 1)
        self.expect("ident", "from")
        pattern = self.parse_atom()
        self.expect("punct", ";")
        var_positions = [
            i for i, a in enumerate(pattern.args) if isinstance(a, Var)
        ]
        if len(var_positions) != 1:
            self.error(
                f"statevar pattern {pattern.text()} must contain exactly one "
                "variable", name,
            )
        if lo > hi:
            self.error(f"empty range [{lo}..{hi}]", name)
        if not (lo <= init <= hi):
            self.error(f"init {init} outside [{lo}..{hi}]", name)
        if any(v.name == name.value for v in self.statevars):
            self.error(f"duplicate statevar {name.value}", name)
        self.statevars.append(
            StateVarDecl(name.value, lo, hi, init, pattern, var_positions[0])
        )

    def _parse_action(self):
        self.next()
        name = self.expect("ident")
        self.expect("punct", "(")
        params: list[Var] = []
        if not self.accept("punct", ")"):
            params.append(Var(self.expect("var").value))
            while self.accept("punct", ","):
                params.append(Var(self.expect("var").value))
            self.expect("punct", ")")
        if len(set(params)) != len(params):
            self.error("duplicate action parameter", name)
        self.expect("punct", "{")
        static_pre: list[Atom] = []
        state_pre: list[Atom] = []
        verify: list = []
        branches: list[EffectBranch] = []
        if self.peek().kind == "ident" and self.peek().value == "pre-static":
            self.next()
            static_pre = self.parse_atom_list()
            self.expect("punct", ";")
        if self.peek().kind == "ident" and self.peek().value == "pre-state":
            self.next()
            state_pre = self.parse_atom_list()
            self.expect("punct", ";")
        if self.peek().kind == "ident" and self.peek().value == "verify":
            self.next()
            verify.append(self._parse_verify_clause())
            while self.accept("punct", ","):
                verify.append(self._parse_verify_clause())
            self.expect("punct", ";")
        while self.peek().kind == "ident" and self.peek().value == "eff":
            self.next()
            prob = self.parse_arith()
            self.expect("punct", "{")
            ops: list[EffectOp] = []
            while not self.accept("punct", "}"):
                kind_tok = self.expect("ident")
                if kind_tok.value not in ("del", "add"):
                    self.error("expected del or add", kind_tok)
                ops.append(EffectOp(kind_tok.value, self.parse_atom()))
                self.expect("punct", ";")
            branches.append(EffectBranch(prob, tuple(ops)))
        self.expect("punct", "}")
        if not branches:
            self.error(f"action {name.value} has no effect branches", name)
        if any(s.name == name.value for s in self.schemas):
            self.error(f"duplicate action {name.value}", name)
        schema = ActionSchema(
            name.value, tuple(params), tuple(static_pre), tuple(state_pre),
            tuple(verify), tuple(branches),
        )
        self._positions[schema] = name
        self.schemas.append(schema)

    def _parse_verify_clause(self):
        if (
            self.peek().kind == "var"
            and self.peek(1).kind == "punct"
            and self.peek(1).value == ":="
        ):
            var = Var(self.next().value)
            self.next()
            return Bind(var, self.parse_arith())
        return Constrain(self.parse_bool())

    def _parse_reward(self):
        self.next()
        kind_tok = self.expect("ident")
        if kind_tok.value not in ("necessary", "sufficient"):
            self.error("expected necessary or sufficient", kind_tok)
        kind = kind_tok.value
        name = self.expect("ident")
        action_patterns: list[Atom] = []
        cur_patterns: list[Atom] = []
        next_patterns: list[Atom] = []
        while self.peek().kind == "ident" and self.peek().value == "match":
            self.next()
            target = self.expect("ident")
            if target.value == "action":
                action_patterns.append(self.parse_atom())
                while self.accept("punct", "|"):
                    action_patterns.append(self.parse_atom())
            elif target.value == "cur":
                cur_patterns.append(self.parse_atom())
            elif target.value == "next":
                next_patterns.append(self.parse_atom())
            else:
                self.error("expected action, cur or next", target)
        guard = None
        value_expr = None
        if kind == "necessary":
            self.expect("ident", "require")
            guard = self.parse_bool()
        else:
            if self.accept("ident", "when"):
                guard = self.parse_bool()
            self.expect("ident", "value")
            value_expr = self.parse_arith()
        self.expect("punct", ";")
        if any(r.name == name.value for r in self.rewards):
            self.error(f"duplicate reward rule {name.value}", name)
        rule = RewardRule(
            kind, name.value, tuple(action_patterns), tuple(cur_patterns),
            tuple(next_patterns), guard, value_expr,
        )
        self._positions[rule] = name
        self.rewards.append(rule)

    def _parse_label(self):
        self.next()
        name = self.expect("ident")
        self.expect("punct", "=")
        cond = self.parse_bool()
        self.expect("punct", ";")
        if any(l.name == name.value for l in self.labels):
            self.error(f"duplicate label {name.value}", name)
        label = LabelDef(name.value, cond)
        self._positions[label] = name
        self.labels.append(label)

    def _parse_classifier(self):
        self.next()
        name = self.expect("ident")
        self.expect("punct", "=")
        patterns = [self.parse_atom()]
        while self.accept("punct", "|"):
            patterns.append(self.parse_atom())
        self.expect("punct", ";")
        if any(c.name == name.value for c in self.classifiers):
            self.error(f"duplicate classifier {name.value}", name)
        self.classifiers.append(ClassifierDef(name.value, tuple(patterns)))

    def _parse_penalty(self):
        tok = self.next()
        if self.penalty is not None:
            self.error("duplicate penalty declaration", tok)
        v = self.parse_number()
        self.expect("punct", ";")
        if v < 0:
            self.error("penalty magnitude must be non-negative", tok)
        self.penalty = v

    # -- finalisation and load-time checks -----------------------------------

    def _finalize(self) -> DomainSpec:
        if self.init_atoms is None or not self.init_atoms:
            raise ParseError(
                Diagnostic("error", 1, 1, "domain has no init section")
            )
        for a in self.facts + self.init_atoms:
            if not a.is_ground():
                tok = self._positions.get(a)
                self.error(f"atom {a.text()} must be ground", tok)
        self._check_arities()
        for schema in self.schemas:
            self._check_schema_bindings(schema)
        self._check_constant_probs()
        self._check_head_patterns()
        labels = tuple(
            LabelDef(l.name, self._resolve_label_expr(l.condition))
            for l in self.labels
        )
        from .model import normalize_num

        penalty = 1000 if self.penalty is None else normalize_num(self.penalty)
        return DomainSpec(
            name=self.name,
            facts=tuple(self.facts),
            init=canonicalize(self.init_atoms),
            statevars=tuple(self.statevars),
            schemas=tuple(self.schemas),
            rewards=tuple(self.rewards),
            labels=labels,
            classifiers=tuple(self.classifiers),
            penalty=penalty,
        )

    def _check_arities(self):
        """Functor arity must be consistent everywhere it appears."""
        arity: dict[str, int] = {}

        def visit(atom: Atom, where: str):
            prev = arity.get(atom.functor)
            if prev is None:
                arity[atom.functor] = len(atom.args)
            elif prev != len(atom.args):
                tok = self._positions.get(atom)
                self.error(
                    f"functor {atom.functor}/{len(atom.args)} conflicts with "
                    f"earlier use {atom.functor}/{prev} ({where})", tok,
                )

        for a in self.facts:
            visit(a, "facts")
        for a in self.init_atoms or []:
            visit(a, "init")
        for sv in self.statevars:
            visit(sv.pattern, f"statevar {sv.name}")
        for s in self.schemas:
            for a in s.static_pre + s.state_pre:
                visit(a, f"action {s.name}")
            for br in s.branches:
                for op in br.ops:
                    visit(op.atom, f"action {s.name}")
        for r in self.rewards:
            for a in r.cur_patterns + r.next_patterns:
                visit(a, f"reward {r.name}")

    def _check_schema_bindings(self, schema: ActionSchema):
        tok = self._positions.get(schema)
        bound: set[Var] = set()
        for a in schema.static_pre + schema.state_pre:
            bound.update(v for v in a.args if isinstance(v, Var))
        for p in schema.params:
            if p not in bound and not any(
                isinstance(c, Bind) and c.var == p for c in schema.verify
            ):
                self.error(
                    f"parameter {p.name} of action {schema.name} is never "
                    "bound by a precondition or verify clause", tok,
                )
        for clause in schema.verify:
            if isinstance(clause, Bind):
                if clause.var in bound:
                    self.error(
                        f"verify clause rebinds {clause.var.name} "
                        f"in action {schema.name}", tok,
                    )
                for v in _expr_vars(clause.expr):
                    if v not in bound:
                        self.error(
                            f"unbound variable {v.name} in verify clause "
                            f"of action {schema.name}", tok,
                        )
                bound.add(clause.var)
            else:
                for v in _expr_vars(clause.expr):
                    if v not in bound:
                        self.error(
                            f"unbound variable {v.name} in verify constraint "
                            f"of action {schema.name}", tok,
                        )
        for br in schema.branches:
            for v in _expr_vars(br.prob_expr):
                if v not in bound:
                    self.error(
                        f"unbound variable {v.name} in branch probability "
                        f"of action {schema.name}", tok,
                    )
            branch_bound = set(bound)
            for a in br.del_atoms():
                branch_bound.update(v for v in a.args if isinstance(v, Var))
            for a in br.add_atoms():
                for v in a.args:
                    if isinstance(v, Var) and v not in branch_bound:
                        self.error(
                            f"add atom {a.text()} of action {schema.name} "
                            f"uses unbound variable {v.name}", tok,
                        )

    def _check_constant_probs(self):
        """When every branch probability is constant, the sum must be 1."""
        for schema in self.schemas:
            vals = []
            for br in schema.branches:
                try:
                    v = eval_expr(br.prob_expr, {})
                except EvalError:
                    vals = None
                    break
                vals.append(v)
            if vals is None:
                continue
            tok = self._positions.get(schema)
            for v in vals:
                if not (0 <= v <= 1):
                    self.error(
                        f"branch probability {render_term(v)} of action "
                        f"{schema.name} outside [0, 1]", tok,
                    )
            total = sum(vals)
            if total != 1:
                self.error(
                    f"branch probabilities of action {schema.name} sum to "
                    f"{render_term(Fraction(total))}, expected 1", tok,
                )

    def _check_head_patterns(self):
        """Classifier and reward action patterns must name real schemas."""
        sig = {s.name: len(s.params) for s in self.schemas}

        def check(pat: Atom, where: str):
            tok = self._positions.get(pat)
            if pat.functor not in sig:
                self.error(f"{where} names unknown action {pat.functor}", tok)
            elif sig[pat.functor] != len(pat.args):
                self.error(
                    f"{where} pattern {pat.text()} does not match "
                    f"{pat.functor}/{sig[pat.functor]}", tok,
                )

        for r in self.rewards:
            for pat in r.action_patterns:
                check(pat, f"reward {r.name}")
        for c in self.classifiers:
            for pat in c.patterns:
                check(pat, f"classifier {c.name}")

    def _resolve_label_expr(self, e: E.Expr) -> E.Expr:
        """Bare identifiers in label conditions refer to state variables."""
        names = {sv.name for sv in self.statevars}

        def walk(x: E.Expr) -> E.Expr:
            if isinstance(x, E.Sym) and x.name in names:
                return E.StateRef("cur", x.name)
            if isinstance(x, (E.And, E.Or)):
                return type(x)(walk(x.left), walk(x.right))
            if isinstance(x, E.Not):
                return E.Not(walk(x.operand))
            if isinstance(x, E.Cmp):
                return E.Cmp(x.op, walk(x.left), walk(x.right))
            if isinstance(x, E.Bin):
                return E.Bin(x.op, walk(x.left), walk(x.right))
            if isinstance(x, E.Neg):
                return E.Neg(walk(x.operand))
            return x

        return walk(e)


def _expr_vars(e: E.Expr) -> set[Var]:
    out: set[Var] = set()

    def walk(x):
        if isinstance(x, E.VarRef):
            out.add(x.var)
        elif isinstance(x, (E.And, E.Or, E.Bin, E.Cmp)):
            walk(x.left)
            walk(x.right)
        elif isinstance(x, (E.Not, E.Neg)):
            walk(x.operand)
        elif isinstance(x, E.Has):
            out.update(v for v in x.atom.args if isinstance(v, Var))

    walk(e)
    return out


def parse_domain(text: str) -> DomainSpec:
    """Parse MDPL text into a checked DomainSpec; raises ParseError."""
    return _Parser(text).parse_file()


# -- pretty printer ---------------------------------------------------------


def format_domain(d: DomainSpec) -> str:
    """Render a DomainSpec back to canonical MDPL text.

    parse -> format -> parse is a fixed point: the re-parsed AST equals the
    original (token positions aside).
    """
    out: list[str] = [f"domain {d.name};", ""]
    if d.facts:
        out.append("facts {")
        out.append("  " + ", ".join(a.text() for a in d.facts))
        out.append("}")
        out.append("")
    out.append("init {")
    out.append("  " + ", ".join(a.text() for a in d.init.atoms))
    out.append("}")
    out.append("")
    for sv in d.statevars:
        out.append(
            f"statevar {sv.name} : [{sv.lo}..{sv.hi}] init {sv.init} "
            f"from {sv.pattern.text()};"
        )
    if d.statevars:
        out.append("")
    for s in d.schemas:
        params = ", ".join(p.name for p in s.params)
        out.append(f"action {s.name}({params}) {{")
        if s.static_pre:
            out.append(
                "  pre-static " + ", ".join(a.text() for a in s.static_pre) + ";"
            )
        if s.state_pre:
            out.append(
                "  pre-state " + ", ".join(a.text() for a in s.state_pre) + ";"
            )
        if s.verify:
            parts = []
            for c in s.verify:
                if isinstance(c, Bind):
                    parts.append(f"{c.var.name} := {E.render_expr(c.expr)}")
                else:
                    parts.append(E.render_expr(c.expr))
            out.append("  verify " + ", ".join(parts) + ";")
        for br in s.branches:
            ops = " ".join(f"{op.kind} {op.atom.text()};" for op in br.ops)
            out.append(f"  eff {E.render_expr(br.prob_expr)} {{ {ops} }}")
        out.append("}")
        out.append("")
    for r in d.rewards:
        parts = [f"reward {r.kind} {r.name}"]
        if r.action_patterns:
            parts.append(
                "match action " + " | ".join(a.text() for a in r.action_patterns)
            )
        for pat in r.cur_patterns:
            parts.append(f"match cur {pat.text()}")
        for pat in r.next_patterns:
            parts.append(f"match next {pat.text()}")
        if r.kind == "necessary":
            parts.append(f"require {E.render_expr(r.guard)}")
        else:
            if r.guard is not None:
                parts.append(f"when {E.render_expr(r.guard)}")
            parts.append(f"value {E.render_expr(r.value_expr)}")
        out.append(" ".join(parts) + ";")
    if d.rewards:
        out.append("")
    for c in d.classifiers:
        pats = " | ".join(a.text() for a in c.patterns)
        out.append(f"classifier {c.name} = {pats};")
    if d.classifiers:
        out.append("")
    for l in d.labels:
        out.append(f"label {l.name} = {E.render_expr(l.condition)};")
    if d.labels:
        out.append("")
    out.append(f"penalty {render_term(d.penalty)};")
    return "\n".join(out) + "\n"


# -- semantic lints ----------------------------------------------------------


def check_domain(d: DomainSpec) -> list[Diagnostic]:
    """Static semantic checks on a parsed domain.

    Errors make the domain unusable (bad statevar extraction, labels over
    unknown state variables, negative sufficient rewards); warnings flag
    likely authoring mistakes (schemas that can never be enabled).
    """
    from .grounder import match_atoms

    diags: list[Diagnostic] = []

    state_functors = {a.functor for a in d.init.atoms}
    for s in d.schemas:
        for br in s.branches:
            state_functors.update(a.functor for a in br.add_atoms())
    for s in d.schemas:
        if s.static_pre and not match_atoms(s.static_pre, d.facts, {}):
            diags.append(
                Diagnostic(
                    "warning", 0, 0,
                    f"action {s.name} can never be enabled: pre-static "
                    "atoms do not match the facts",
                )
            )
            continue
        for a in s.state_pre:
            if a.functor not in state_functors:
                diags.append(
                    Diagnostic(
                        "warning", 0, 0,
                        f"action {s.name} can never be enabled: no state "
                        f"atom with functor {a.functor} can exist",
                    )
                )
                break

    for sv in d.statevars:
        hits = [
            b for b in match_atoms((sv.pattern,), d.init.atoms, {})
        ]
        if len(hits) != 1:
            diags.append(
                Diagnostic(
                    "error", 0, 0,
                    f"statevar {sv.name}: pattern {sv.pattern.text()} matches "
                    f"{len(hits)} init atoms, expected exactly one",
                )
            )
            continue
        var = sv.pattern.args[sv.value_pos]
        val = hits[0][var]
        if val != sv.init:
            diags.append(
                Diagnostic(
                    "error", 0, 0,
                    f"statevar {sv.name}: declared init {sv.init} but init "
                    f"state gives {render_term(val)}",
                )
            )

    declared = {sv.name for sv in d.statevars}
    for l in d.labels:
        bad = sorted(
            {x.name for x in _label_syms(l.condition)}
            | {
                x.name
                for x in _label_staterefs(l.condition)
                if x.name not in declared
            }
        )
        for name in bad:
            diags.append(
                Diagnostic(
                    "error", 0, 0,
                    f"label {l.name} references undeclared state variable "
                    f"{name}",
                )
            )

    for r in d.rewards:
        if r.kind != "sufficient":
            continue
        try:
            v = eval_expr(r.value_expr, {})
        except EvalError:
            continue
        if v < 0:
            diags.append(
                Diagnostic(
                    "error", 0, 0,
                    f"sufficient reward {r.name} has negative value "
                    f"{render_term(v)}",
                )
            )
    return diags


def _label_syms(e):
    if isinstance(e, E.Sym):
        yield e
    elif isinstance(e, (E.And, E.Or, E.Bin, E.Cmp)):
        yield from _label_syms(e.left)
        yield from _label_syms(e.right)
    elif isinstance(e, (E.Not, E.Neg)):
        yield from _label_syms(e.operand)


def _label_staterefs(e):
    if isinstance(e, E.StateRef):
        yield e
    elif isinstance(e, (E.And, E.Or, E.Bin, E.Cmp)):
        yield from _label_staterefs(e.left)
        yield from _label_staterefs(e.right)
    elif isinstance(e, (E.Not, E.Neg)):
        yield from _label_staterefs(e.operand)
