from fractions import Fraction

import pytest

from mdplc import exprs as E
from mdplc.domain import Bind, Constrain
from mdplc.errors import ParseError
from mdplc.model import Atom, Var
from mdplc.parser import check_domain, format_domain, parse_domain

MINI = """
domain mini;
init { at(0) }
action go() {
  pre-state at(X);
  verify X < 2, NX := X + 1;
  eff 3/4 { del at(X); add at(NX); }
  eff 1/4 { }
}
label doneP = true;
"""


def perr(text):
    with pytest.raises(ParseError) as ei:
        parse_domain(text)
    return str(ei.value)


class TestBasics:
    def test_minimal_domain(self):
        d = parse_domain(MINI)
        assert d.name == "mini"
        assert d.init.text() == "at(0)"
        s = d.schema("go")
        assert s.params == ()
        assert s.state_pre == (Atom("at", (Var("X"),)),)
        assert isinstance(s.verify[0], Constrain)
        assert isinstance(s.verify[1], Bind)
        assert len(s.branches) == 2
        assert s.branches[1].ops == ()
        assert d.penalty == 1000  # default

    def test_comments_and_whitespace(self):
        d = parse_domain("domain c;  # trailing\n# full line\ninit { a(1) }\n")
        assert d.name == "c"

    def test_number_literals(self):
        d = parse_domain(
            "domain n;\ninit { a(1), b(1/2), c(0.25), d(-3) }\npenalty 2.5;"
        )
        atoms = {a.functor: a.args[0] for a in d.init.atoms}
        assert atoms["a"] == 1
        assert atoms["b"] == Fraction(1, 2)
        assert atoms["c"] == Fraction(1, 4)
        assert atoms["d"] == -3
        assert d.penalty == Fraction(5, 2)

    def test_facts_statevars_rewards_labels_classifiers(self):
        d = parse_domain("""
domain full;
facts { adj(0, 1, 97) }
init { at(0), flag(0) }
statevar pos : [0..3] init 0 from at(V);
statevar flag : [0..1] init 0 from flag(F);
action move(L, M) {
  pre-static adj(L, M, P);
  pre-state at(L);
  verify Ps := P / 100, Pf := 1 - P / 100;
  eff Ps { del at(L); add at(M); }
  eff Pf { }
}
reward necessary keep match next at(N) require next.pos >= 0;
reward sufficient step match action move(L, M) value 2;
classifier moves = move(L, M);
label doneP = pos = 1 & flag = 0;
penalty 500;
""")
        assert d.facts == (Atom("adj", (0, 1, 97)),)
        assert [sv.name for sv in d.statevars] == ["pos", "flag"]
        assert d.rewards[0].kind == "necessary"
        assert d.rewards[1].action_patterns[0].functor == "move"
        assert d.classifiers[0].patterns[0].functor == "move"
        assert d.penalty == 500

    def test_label_identifiers_resolve_to_declared_statevars(self):
        d = parse_domain("""
domain l;
init { at(0) }
statevar pos : [0..3] init 0 from at(V);
label doneP = pos = 3;
""")
        cond = d.label("doneP").condition
        assert isinstance(cond, E.Cmp)
        assert cond.left == E.StateRef("cur", "pos")

    def test_undeclared_label_identifier_stays_symbolic(self):
        d = parse_domain("domain l;\ninit { at(0) }\nlabel doneP = pos = 3;\n")
        assert isinstance(d.label("doneP").condition.left, E.Sym)
        msgs = [str(x) for x in check_domain(d)]
        assert any("undeclared state variable pos" in m for m in msgs)


class TestErrors:
    def test_missing_init(self):
        assert "no init section" in perr("domain x;\npenalty 1;\n")

    def test_unexpected_character(self):
        assert "unexpected character" in perr("domain x;\ninit { a(1) }\n$\n")

    def test_unknown_section(self):
        assert "section keyword" in perr("domain x;\ninit { a(1) }\nbogus { }\n")

    def test_duplicate_sections_and_names(self):
        base = "domain x;\ninit { a(1) }\n"
        assert "duplicate init" in perr(base + "init { a(2) }\n")
        assert "duplicate action" in perr(
            base + "action f() { eff 1 { } }\naction f() { eff 1 { } }\n"
        )
        assert "duplicate label" in perr(base + "label p = true;\nlabel p = true;\n")
        assert "duplicate penalty" in perr(base + "penalty 1;\npenalty 2;\n")
        assert "duplicate reward rule" in perr(
            base + "reward sufficient r value 1;\nreward sufficient r value 2;\n"
        )
        assert "duplicate classifier" in perr(
            base
            + "action f() { eff 1 { } }\nclassifier c = f();\nclassifier c = f();\n"
        )
        assert "duplicate statevar" in perr(
            base
            + "statevar v : [0..1] init 1 from a(X);\n"
            + "statevar v : [0..1] init 1 from a(X);\n"
        )

    def test_init_atoms_must_be_ground(self):
        assert "must be ground" in perr("domain x;\ninit { a(X) }\n")

    def test_arity_conflict(self):
        assert "conflicts" in perr(
            "domain x;\ninit { a(1) }\naction f() { pre-state a(1, 2); eff 1 { } }\n"
        )

    def test_action_without_branches(self):
        assert "no effect branches" in perr(
            "domain x;\ninit { a(1) }\naction f() { pre-state a(X); }\n"
        )

    def test_unbound_parameter(self):
        assert "never bound" in perr(
            "domain x;\ninit { a(1) }\naction f(Z) { eff 1 { } }\n"
        )

    def test_verify_rebind_and_unbound_vars(self):
        base = "domain x;\ninit { a(1) }\n"
        assert "rebinds" in perr(
            base + "action f() { pre-state a(X); verify X := 2; eff 1 { } }\n"
        )
        assert "unbound variable" in perr(
            base + "action f() { verify Y := Z + 1; eff 1 { } }\n"
        )
        assert "unbound variable" in perr(
            base + "action f() { verify Z > 1; eff 1 { } }\n"
        )

    def test_unbound_probability_and_add_vars(self):
        base = "domain x;\ninit { a(1) }\n"
        assert "branch probability" in perr(
            base + "action f() { eff P { } }\n"
        )
        assert "unbound variable" in perr(
            base + "action f() { pre-state a(X); eff 1 { add b(Q); } }\n"
        )

    def test_add_var_bound_by_delete_is_fine(self):
        d = parse_domain(
            "domain x;\ninit { a(1), b(1) }\n"
            "action f() { pre-state a(X); eff 1 { del b(Y); add c(Y); } }\n"
        )
        assert d.schema("f") is not None

    def test_constant_probabilities_checked_at_parse_time(self):
        base = "domain x;\ninit { a(1) }\n"
        assert "sum to" in perr(
            base + "action f() { eff 1/2 { } eff 1/3 { } }\n"
        )
        assert "outside [0, 1]" in perr(base + "action f() { eff 2 { } }\n")
        # non-constant probabilities postponed to grounding
        d = parse_domain(
            base + "action f() { pre-state a(X); verify P := X / 2,"
            " Q := 1 - X / 2; eff P { } eff Q { del a(X); add a(0); } }\n"
        )
        assert len(d.schema("f").branches) == 2

    def test_reward_and_classifier_patterns_must_name_schemas(self):
        base = "domain x;\ninit { a(1) }\naction f(Z) { pre-state a(Z); eff 1 { } }\n"
        assert "unknown action" in perr(base + "classifier c = g();\n")
        assert "does not match" in perr(base + "classifier c = f();\n")
        assert "unknown action" in perr(
            base + "reward sufficient r match action g() value 1;\n"
        )

    def test_statevar_validation(self):
        base = "domain x;\ninit { a(1) }\n"
        assert "exactly one" in perr(base + "statevar v : [0..1] init 0 from a(1);\n")
        assert "exactly one" in perr(
            "domain x;\ninit { b(1, 2) }\nstatevar v : [0..1] init 0 from b(X, Y);\n"
        )
        assert "empty range" in perr(base + "statevar v : [3..1] init 1 from a(X);\n")
        assert "outside" in perr(base + "statevar v : [0..1] init 5 from a(X);\n")

    def test_negative_penalty_rejected(self):
        assert "non-negative" in perr("domain x;\ninit { a(1) }\npenalty -4;\n")

    def test_diagnostic_positions(self):
        try:
            parse_domain("domain x;\ninit { a(X) }\n")
        except ParseError as e:
            d = e.diagnostics[0]
            assert (d.line, d.severity) == (2, "error")
        else:
            pytest.fail("expected ParseError")


class TestFormat:
    def test_format_is_a_fixed_point(self):
        once = format_domain(parse_domain(MINI))
        twice = format_domain(parse_domain(once))
        assert once == twice

    def test_format_preserves_semantics(self):
        d1 = parse_domain(MINI)
        d2 = parse_domain(format_domain(d1))
        assert d2.schemas == d1.schemas
        assert d2.init == d1.init
        assert d2.labels == d1.labels


class TestCheckDomain:
    def test_clean_domain_has_no_diagnostics(self):
        assert check_domain(parse_domain(MINI)) == []

    def test_never_enabled_schema_warning(self):
        d = parse_domain(
            "domain x;\ninit { a(1) }\n"
            "action f() { pre-state ghost(1); eff 1 { } }\n"
        )
        diags = check_domain(d)
        assert any(x.severity == "warning" and "never be enabled" in x.message for x in diags)

    def test_static_pre_that_matches_no_fact_warns(self):
        d = parse_domain(
            "domain x;\nfacts { adj(1, 2) }\ninit { a(1) }\n"
            "action f() { pre-static adj(5, 6); eff 1 { } }\n"
        )
        diags = check_domain(d)
        assert any("pre-static" in x.message for x in diags)

    def test_statevar_mismatch_is_an_error(self):
        d = parse_domain(
            "domain x;\ninit { a(1) }\nstatevar v : [0..3] init 3 from a(X);\n"
        )
        diags = check_domain(d)
        assert any(x.severity == "error" and "declared init 3" in x.message for x in diags)
