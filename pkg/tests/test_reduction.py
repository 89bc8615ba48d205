from collections import Counter

import pytest

from hypothesis import given, settings

from strategies import SIG, dynamic_formula, static_formula
from termplan.dynamics import ActionModel, compose
from termplan.reduction import (
    NoRedex, Options, action_complexity, check_equivalence, complexity, random_corpus,
    reduce_step, seeded_rng, FormulaGen, translate, translate_stepwise,
)
from termplan.semantics import EpistemicModel, truth_mask
from termplan.syntax import (
    AGT, Atom, Const, Dyn, Eq, Forall, Iff, Knows, Neq, Not, Var, XSTAR, And, Implies, TOP, BOTTOM,
    children, is_static, subformulas,
)

CORPUS = random_corpus(seeded_rng(11), SIG, n=25)
ROWS = {"atom", "top", "bottom", "neq", "negation", "conjunction", "disjunction",
        "implication", "biconditional", "knowledge", "quantifier", "composition"}


def test_complexity_values():
    p, q = Atom("Q", ()), Atom("S", (Const("a"),))
    assert complexity(p) == 1
    assert complexity(Neq(Const("a"), Const("b"))) == 2
    assert complexity(Not(p)) == 2
    assert complexity(And((p, Not(q)))) == 3
    assert complexity(Knows(Const("a"), Implies(p, q))) == 3
    A = ActionModel("A", ["e"], {"e": Not(p)})
    assert action_complexity(A) == 2
    assert complexity(Dyn(A, "e", Not(p))) == (4 + 2) * 2


@settings(max_examples=200, deadline=None)
@given(dynamic_formula(3, 2))
def test_complexity_exceeds_proper_subformulas(f):
    for g in children(f):
        assert complexity(g) < complexity(f)
        for h in subformulas(g):
            assert complexity(h) <= complexity(g)


def test_each_axiom_row_is_sound():
    rng = seeded_rng(21)
    seen = Counter()
    for _ in range(400):
        f = FormulaGen(rng, SIG).dynamic(3, 2)
        if is_static(f):
            continue
        g, step = reduce_step(f, SIG, "outermost")
        assert step.after < step.before
        seen[step.axiom] += 1
        rep = check_equivalence(f, g, CORPUS)
        assert rep.agree, (step.axiom, str(f))
    for _ in range(60):
        gen = FormulaGen(rng, SIG)
        A = gen.action()
        e = rng.choice(A.events)
        l, r = gen.static(2), gen.static(2)
        for f in (Dyn(A, e, Implies(l, r)), Dyn(A, e, Iff(l, r))):
            g, step = reduce_step(f, SIG)
            assert step.after < step.before
            seen[step.axiom] += 1
            assert check_equivalence(f, g, CORPUS).agree, (step.axiom, str(f))
    assert ROWS <= set(seen), seen


def test_top_row():
    A = ActionModel("A", ["e"], {"e": Atom("Q", ())})
    g, step = reduce_step(Dyn(A, "e", TOP), SIG)
    assert step.axiom == "top" and g == TOP
    g, step = reduce_step(Dyn(A, "e", BOTTOM), SIG)
    assert step.axiom == "bottom" and g == Not(Atom("Q", ()))


@settings(max_examples=150, deadline=None)
@given(dynamic_formula(3, 2))
def test_translation_is_static_and_equivalent(f):
    g = translate(f, SIG)
    assert is_static(g)
    assert check_equivalence(f, g, CORPUS[:8]).agree


@settings(max_examples=100, deadline=None)
@given(dynamic_formula(2, 2))
def test_strategies_agree_semantically(f):
    outer = translate_stepwise(f, SIG, strategy="outermost").formula
    inner = translate_stepwise(f, SIG, strategy="innermost").formula
    assert check_equivalence(outer, inner, CORPUS[:8]).agree


@settings(max_examples=100, deadline=None)
@given(static_formula(3))
def test_translate_is_identity_on_static(f):
    assert translate(f, SIG) is f
    with pytest.raises(NoRedex):
        reduce_step(f, SIG)


@settings(max_examples=50, deadline=None)
@given(dynamic_formula(2, 2))
def test_translate_idempotent(f):
    g = translate(f, SIG)
    assert translate(g, SIG) == g


def test_trace_records_strict_decrease():
    f = FormulaGen(seeded_rng(5), SIG).dynamic(3, 2)
    while is_static(f):
        f = FormulaGen(seeded_rng(len(str(f))), SIG).dynamic(3, 2)
    tr = translate(f, SIG, trace=True)
    assert tr.trace
    assert all(s.after < s.before for s in tr.trace)


def vacuous_model():
    # i sees only w1; Q is false at w0 and true at w1
    return EpistemicModel(SIG, ["i"], ["o"], ["w0", "w1"], {"i": {("w0", "w1")}},
                          {"a": "i", "b": "i", "c": "o", "d": "o"}, {"Q": {"w1": {()}}})


def test_unguarded_knowledge_row_is_unsound():
    # [A,e] K_a ~Q holds vacuously at w0 (pre false there); without the pre
    # guard the rewrite demands K_a [A,e] ~Q, which fails at w1
    q = Atom("Q", ())
    A = ActionModel("A", ["e"], {"e": q}, designated="e")
    f = Dyn(A, "e", Knows(Const("a"), Not(q)))
    M = vacuous_model()
    want = truth_mask(M, f)
    guarded = translate(f, SIG, knowledge_rule="guarded")
    printed = translate(f, SIG, knowledge_rule="printed")
    assert truth_mask(M, guarded) == want
    assert truth_mask(M, printed) != want


def test_naive_postcondition_merge_is_unsound_under_aliasing():
    # A1 sets P(c) and A2 sets P(d); c and d both denote o and P(o) starts
    # false.  Each action leaves its unlisted aliased atom unchanged, which
    # pins P(o) to false, but merging the two postcondition maps lists both
    # atoms and makes P(o) true
    c, d = Const("c"), Const("d")
    A1 = ActionModel("A1", ["e"], {}, post={"e": {Atom("P", (c,)): TOP}})
    A2 = ActionModel("A2", ["f"], {}, post={"f": {Atom("P", (d,)): TOP}})
    M = EpistemicModel(SIG, ["i"], ["o"], ["w"], {}, {"a": "i", "b": "i", "c": "o", "d": "o"})
    phi = Atom("P", (c,))
    want = truth_mask(M, Dyn(A1, "e", Dyn(A2, "f", phi)))
    assert want == 0
    for mode, agrees in (("sound", True), ("printed", False)):
        C, ce = compose(A1, "e", A2, "f", SIG, mode=mode)
        assert (truth_mask(M, Dyn(C, ce, phi)) == want) is agrees
    f = Dyn(A1, "e", Dyn(A2, "f", phi))
    assert truth_mask(M, translate(f, SIG)) == want


def test_quantifier_row_freshens_variable():
    x = Var("x", AGT)
    A = ActionModel("A", ["e"], {"e": Forall(x, Atom("S", (x,)))},
                    edges={("e", "e"): Eq(XSTAR, XSTAR)}, designated="e")
    f = Dyn(A, "e", Forall(x, Atom("S", (x,))))
    g, step = reduce_step(f, SIG)
    assert step.axiom == "quantifier"
    assert check_equivalence(f, g, CORPUS).agree


def test_options_defaults():
    o = Options()
    assert (o.knowledge_rule, o.composition, o.check) == ("guarded", "sound", True)
    assert isinstance(And((TOP, TOP)), And)
