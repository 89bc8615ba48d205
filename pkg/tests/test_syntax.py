import pytest
from hypothesis import given, settings

from strategies import SIG, static_formula
from termplan.dsl import FormulaReader, TypeHierarchy, parse_infix, to_sexpr
from termplan.sexpr import read_one
from termplan.syntax import (
    AGT, OBJ, And, Atom, Const, Eq, Exists, Forall, Knows, Neq, Not, Signature,
    TermplanError, Var, conj, disj, free_vars, is_static, normalize, sort_of, subformulas,
    substitute, to_infix, well_formed, TOP, BOTTOM,
)

x, y = Var("x", AGT), Var("y", AGT)
o = Var("o", OBJ)
a, b, c = Const("a"), Const("b"), Const("c")
PREDS = {r: s for r, s in SIG.relations.items() if r != "="}


def test_sorts_of_terms():
    assert sort_of(a, SIG) == AGT
    assert sort_of(c, SIG) == OBJ
    assert sort_of(o, SIG) == OBJ


def test_well_formed_reports_arity_and_sort():
    assert well_formed(Atom("R", (a, c)), SIG) == []
    assert well_formed(Atom("R", (a,)), SIG)
    assert well_formed(Atom("R", (c, a)), SIG)
    assert well_formed(Knows(c, TOP), SIG)
    assert well_formed(Atom("Nope", ()), SIG)


def test_free_variables():
    f = Forall(x, And((Atom("R", (x, o)), Knows(y, Atom("S", (x,))))))
    assert free_vars(f) == {o, y}
    assert free_vars(Exists(o, f)) == {y}


def test_substitution_avoids_capture():
    f = Forall(y, Atom("R", (x, c)) & Eq(x, y))
    g = substitute(f, x, y)
    assert isinstance(g, Forall)
    assert g.var != y
    assert free_vars(g) == {y}


def test_substitution_stops_at_binder():
    f = Forall(x, Atom("S", (x,)))
    assert substitute(f, x, a) == f


def test_conj_disj_units():
    assert conj([]) == TOP
    assert disj([]) == BOTTOM
    p = Atom("Q", ())
    assert conj([p]) == p


def test_static_and_infix():
    f = Exists(o, Knows(a, Neq(o, c)))
    assert is_static(f)
    assert to_infix(f) == "exists o:obj. K[a] o != c"


def test_normalize_is_idempotent():
    f = Not(Not(And((Atom("Q", ()), And((Atom("S", (a,)), TOP))))))
    assert normalize(normalize(f)) == normalize(f)


def test_unknown_symbol_rejected_by_infix():
    with pytest.raises(TermplanError):
        parse_infix("Nope(a)", PREDS, {}, TypeHierarchy(), {})


@settings(max_examples=200, deadline=None)
@given(static_formula(4))
def test_infix_round_trip(f):
    assert parse_infix(to_infix(f), PREDS, {}, TypeHierarchy(), {}) == f


@settings(max_examples=200, deadline=None)
@given(static_formula(4))
def test_sexpr_round_trip(f):
    reader = FormulaReader(PREDS, {}, TypeHierarchy(), {})
    assert reader.formula(read_one(to_sexpr(f))) == f


@settings(max_examples=200, deadline=None)
@given(static_formula(4))
def test_generated_formulas_are_well_formed_sentences(f):
    assert well_formed(f, SIG) == []
    assert not free_vars(f)
    assert all(is_static(g) for g in subformulas(f))


def test_signature_rejects_bad_sort():
    with pytest.raises(TermplanError):
        Signature(constants={"a": "thing"}, relations={}, functions={})
