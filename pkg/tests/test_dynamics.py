import itertools

import pytest
from hypothesis import given, settings

from strategies import SIG, action, model
from termplan.dynamics import (
    ActionModel, ActionSchema, EmptyUpdate, IncompleteSubstitution, NotApplicable,
    from_relational, ground_all, instantiate, product_update, skip_action, update_pointed,
)
from termplan.semantics import (
    EpistemicModel, PointedModel, holds, isomorphic, satisfies,
)
from termplan.syntax import (
    AGT, OBJ, XSTAR, Atom, Const, Eq, Knows, Not, SortMismatch, Var, BOTTOM, TOP,
)


def oracle_update(M, A):
    """Product update read off its definition: worlds are the (w, e) with
    pre(e) true at w; i relates (w,e) to (v,f) iff w R_i v and Q(e,f) holds
    at w for x* = i; each relation becomes (I(r,w) | r+) - r- where r+ / r-
    collect the denotations of ground atoms whose postcondition is true /
    false at w (identity outside the postcondition's domain)."""
    worlds = [(w, e) for w in M.worlds for e in A.events if satisfies(M, w, {}, A.pre[e])]
    access = {}
    for i in M.agents:
        access[i] = set()
        for (w, e), (v, f) in itertools.product(worlds, worlds):
            if v in M.successors(i, w) and satisfies(M, w, {XSTAR: i}, A.edges[(e, f)]):
                access[i].add(((w, e), (v, f)))
    consts = {c: {(w, e): M.const_value(c, w) for (w, e) in worlds} for c in M.cint}
    rels = {}
    for r, slots in M.sig.relations.items():
        if r == "=":
            continue
        pools = [[Const(c) for c, s in M.sig.constants.items() if s == sl] for sl in slots]
        ground = [Atom(r, args) for args in itertools.product(*pools)]
        rels[r] = {}
        for (w, e) in worlds:
            plus, minus = set(), set()
            for g in ground:
                cond = A.post[e].get(g, g)
                d = tuple(M.const_value(t.name, w) for t in g.args)
                (plus if satisfies(M, w, {}, cond) else minus).add(d)
            rels[r][(w, e)] = (set(M.rel_ext(r, w)) | plus) - minus
    return worlds, access, consts, rels


def same_as_oracle(M, A):
    N = product_update(M, A)
    worlds, access, consts, rels = oracle_update(M, A)
    name = {(w, e): f"{w}.{e}" for (w, e) in worlds}
    assert sorted(N.worlds) == sorted(name.values())
    for i in M.agents:
        assert N.pairs(i) == {(name[p], name[q]) for p, q in access[i]}
    for c in consts:
        for we, d in consts[c].items():
            assert N.const_value(c, name[we]) == d
    for r in rels:
        for we, ext in rels[r].items():
            assert set(N.rel_ext(r, name[we])) == ext, (r, we)


@settings(max_examples=200, deadline=None)
@given(model(), action())
def test_product_update_matches_definition(M, A):
    try:
        same_as_oracle(M, A)
    except EmptyUpdate:
        assert not any(satisfies(M, w, {}, A.pre[e]) for w in M.worlds for e in A.events)


@settings(max_examples=100, deadline=None)
@given(model())
def test_skip_is_identity_up_to_isomorphism(M):
    N = product_update(M, skip_action())
    assert len(N.worlds) == len(M.worlds)
    for w in M.worlds:
        assert isomorphic(M, N, w, f"{w}.e")


def aliased_model():
    # c and d both denote o at u; at v they differ
    return EpistemicModel(SIG, ["i"], ["o", "p"], ["u", "v"],
                          {"i": {("u", "v"), ("v", "u"), ("u", "u"), ("v", "v")}},
                          {"a": "i", "b": "i", "c": "o", "d": {"u": "o", "v": "p"}},
                          {"P": {"u": set(), "v": {("p",)}}})


def test_conflicting_postconditions_on_aliased_atoms():
    c, d = Const("c"), Const("d")
    A = ActionModel("set", ["e"], {"e": TOP}, post={"e": {Atom("P", (c,)): TOP, Atom("P", (d,)): BOTTOM}})
    M = aliased_model()
    N = product_update(M, A)
    assert ("o",) not in N.rel_ext("P", "u.e")      # removal wins where c = d
    assert ("o",) in N.rel_ext("P", "v.e")
    assert ("p",) not in N.rel_ext("P", "v.e")
    same_as_oracle(M, A)


def test_identity_atom_pins_aliased_tuple():
    # P(c) := T only; P(d) is unlisted and keeps its old value, so where d = c
    # and P(o) was false, the atom stays false
    c = Const("c")
    A = ActionModel("set", ["e"], {"e": TOP}, post={"e": {Atom("P", (c,)): TOP}})
    M = aliased_model()
    N = product_update(M, A)
    assert ("o",) not in N.rel_ext("P", "u.e")
    assert ("o",) in N.rel_ext("P", "v.e")
    same_as_oracle(M, A)


def test_edge_condition_on_agent():
    x = XSTAR
    A = ActionModel("tell", ["e", "f"], {"e": Atom("Q", ()), "f": Not(Atom("Q", ()))},
                    edges={("e", "f"): Eq(x, Const("b")), ("f", "e"): Eq(x, Const("b"))},
                    designated="e")
    M = EpistemicModel(SIG, ["i", "j"], ["o"], ["u", "v"],
                       {"i": {(p, q) for p in "uv" for q in "uv"},
                        "j": {(p, q) for p in "uv" for q in "uv"}},
                       {"a": "i", "b": "j", "c": "o", "d": "o"},
                       {"Q": {"u": {()}}})
    s = update_pointed(PointedModel(M, "u"), A, "e")
    assert holds(s, Knows(Const("a"), Atom("Q", ())))
    assert not holds(s, Knows(Const("b"), Atom("Q", ())))


def test_not_applicable():
    A = ActionModel("never", ["e"], {"e": BOTTOM})
    M = aliased_model()
    with pytest.raises(NotApplicable):
        update_pointed(PointedModel(M, "u"), A, "e")
    with pytest.raises(EmptyUpdate):
        product_update(M, A)


def test_action_model_defaults():
    A = ActionModel("x", ["e", "f"], {})
    assert A.pre == {"e": TOP, "f": TOP}
    assert A.edges[("e", "e")] == Eq(XSTAR, XSTAR)
    assert A.edges[("e", "f")] == BOTTOM


def test_from_relational_matches_relation_semantics():
    A = from_relational("r", ["e", "f"], {"a": {("e", "e"), ("e", "f"), ("f", "f")},
                                          "b": {("e", "e"), ("f", "f")}},
                        {"e": TOP, "f": TOP})
    M = aliased_model()
    N = product_update(M, A)
    assert ("u.e", "u.f") in N.pairs("i")    # a and b both name i
    assert ("u.f", "u.e") not in N.pairs("i")


def test_instantiate_and_errors():
    x, y = Var("x", AGT), Var("y", OBJ)
    S = ActionSchema("Pick", (x, y), ["e"], {"e": Atom("R", (x, y))},
                     post={"e": {Atom("P", (y,)): TOP}}, designated="e")
    A = instantiate(S, ["a", "c"], SIG)
    assert A.name == "Pick(a,c)"
    assert A.pre["e"] == Atom("R", (Const("a"), Const("c")))
    assert A.post["e"] == {Atom("P", (Const("c"),)): TOP}
    with pytest.raises(IncompleteSubstitution):
        instantiate(S, ["a"])
    with pytest.raises(SortMismatch):
        instantiate(S, ["c", "a"], SIG)
    assert len(ground_all(S, SIG)) == 2 * 2


def test_sc_first_update_names(sc):
    _, prob = sc
    A = prob.action_resolver()("Move", ("a1", "r1", "r2"))
    s1 = update_pointed(prob.initial, A, "em")
    assert s1.point == "w_red.em"
    assert sorted(s1.model.worlds) == ["w_green.em", "w_green.em2", "w_red.em", "w_red.em2"]
    assert holds(s1, prob.parse_formula("In(a1,r2) & ~In(a1,r1)"))
