import pytest
from hypothesis import given, settings, strategies as st

from conftest import fixture_text
from termplan.dsl import (
    PlanStep, SemanticError, TypeHierarchy, domains_equal, load_task, parse_domain,
    parse_plan, parse_problem, parse_step, parse_typed_list, plan_to_json, serialize_domain,
    serialize_plan, serialize_problem,
)
from termplan.dynamics import update_pointed
from termplan.semantics import holds, isomorphic, satisfies
from termplan.sexpr import DslSyntaxError
from termplan.syntax import AGT, OBJ, TermplanError

DOMAIN = """
;; a tiny domain
(define (domain tiny)
  (:types thing - object)
  (:predicates (P ?x - thing) (Q))
  (:action Flip
    :agent ?a - agent_id
    :parameters (?t - thing)
    (:actual_event e
      :precondition (TRUE)
      :postcondition (((P ?t) if (not (P ?t)))))
    (:event f
      :precondition (P ?t)
      :postcondition (id))
    (:edge-conditions
      :e -- f (not (= ?x* ?a)))))
"""


def problem(edges):
    return f"""
(define (problem tiny-1) (:domain tiny)
  (:universe A B - agent T - object)
  (:constants a b - agent_id t - thing)
  (:init
    (:actual_world w0 :constant_map ((a A) (b B) (t T)) :atoms ((P t)))
    (:world w1 :constant_map ((a A) (b B) (t T)) :atoms ())
    (:world w2 :constant_map ((a A) (b B) (t T)) :atoms ((Q)))
    {edges})
  (:goal (knows (a) (P t))))
"""


def test_closed_world_and_constants(sc):
    _, prob = sc
    M = prob.model
    assert satisfies(M, "w_red", {}, prob.parse_formula("Color(b1,red)"))
    assert not satisfies(M, "w_red", {}, prob.parse_formula("Color(b1,green)"))
    assert M.const_value("b1", "w_green") == "Beta1"


def test_equivalence_closure_of_undirected_chains():
    dom = parse_domain(DOMAIN)
    prob = parse_problem(problem("(:edges :A ((w0 -- w1) (w1 -- w2)))"), dom)
    M = prob.model
    assert M.pairs("A") == {(u, v) for u in M.worlds for v in M.worlds}
    assert M.pairs("B") == {(w, w) for w in M.worlds}


def test_raw_edges_are_not_closed():
    dom = parse_domain(DOMAIN)
    prob = parse_problem(problem("(:edges :A :raw ((w0 -> w1) (w1 -- w2)))"), dom)
    assert prob.model.pairs("A") == {("w0", "w1"), ("w1", "w2"), ("w2", "w1")}


def test_directed_edges_get_reflexive_transitive_closure():
    dom = parse_domain(DOMAIN)
    prob = parse_problem(problem("(:edges :A ((w0 -> w1 -> w2)))"), dom)
    P = prob.model.pairs("A")
    assert {("w0", "w2"), ("w0", "w0")} <= P


def test_action_parsing():
    dom = parse_domain(DOMAIN)
    S = dom.schema("Flip")
    assert S.events == ("e", "f")
    assert S.designated == "e"
    assert len(S.params) == 2 and S.params[0].sort == AGT and S.params[1].sort == OBJ
    assert str(S.edges[("e", "f")]) == str(S.edges[("f", "e")])


def test_update_through_parsed_schema():
    dom = parse_domain(DOMAIN)
    prob = parse_problem(problem("(:edges :A :raw ((w0 -> w0)) :B :raw ((w0 -> w0)))"), dom)
    A = prob.action_resolver()("Flip", ("a", "t"))
    s = update_pointed(prob.initial, A, "e")
    assert not holds(s, prob.parse_formula("P(t)"))
    # b cannot tell e from f; a can
    assert holds(s, prob.parse_formula("K[a] ~P(t)"))
    assert not holds(s, prob.parse_formula("K[b] ~P(t)"))


def test_type_hierarchy(mm):
    dom, prob = mm
    T = prob.types
    assert T.is_subtype("serial_number", "machine_id")
    assert not T.is_subtype("machine_id", "serial_number")
    assert T.root_sort("admin_agent_id") == AGT
    assert T.root_sort("serial_number") == OBJ
    assert T.constant_has_type("sn1", "machine_id")
    assert not T.constant_has_type("box", "serial_number")


def test_typed_list_with_glued_dash():
    assert parse_typed_list(["a", "b", "-t", "c", "-", "u", "d"]) == [
        ("a", "t"), ("b", "t"), ("c", "u"), ("d", None)]


@pytest.mark.parametrize("text, err", [
    ("(define (domain d) (:predicates (P ?x - object))", DslSyntaxError),
    ("(define (domain d) (:predicates (P ?x - object)) (:action A :parameters (?y - nosuch)"
     " (:actual_event e :precondition (TRUE) :postcondition (id))))", SemanticError),
    ("(define (domain d) (:predicates (P ?x - object)) (:action A :parameters (?y - object)"
     " (:actual_event e :precondition (R ?y) :postcondition (id))))", TermplanError),
    ("(define (domain d) (:predicates (P ?x - object)) (:action A :parameters (?y - object)"
     " (:actual_event e :precondition (P ?y ?y) :postcondition (id))))", TermplanError),
])
def test_domain_errors(text, err):
    with pytest.raises(err):
        parse_domain(text)


def test_problem_errors():
    dom = parse_domain(DOMAIN)
    with pytest.raises(TermplanError):
        parse_problem(problem("(:edges :Z (all))"), dom)
    with pytest.raises(TermplanError):
        parse_problem(problem("(:edges :A ((w0 -- w9)))"), dom)
    with pytest.raises(TermplanError):
        parse_problem(problem("(:edges :A ((w0 => w1)))"), dom)


def test_syntax_error_has_position():
    with pytest.raises(DslSyntaxError) as exc:
        parse_domain("(define (domain d)\n  (:predicates (P ?x)))\n)")
    assert "line" in str(exc.value) or exc.value.args


@pytest.mark.parametrize("name", ["sc", "mm"])
def test_fixture_round_trip(name):
    dom, prob = load_task(fixture_text(f"{name}.tmd"), fixture_text(f"{name}.tmp"))
    text = serialize_domain(dom)
    dom2 = parse_domain(text)
    assert domains_equal(dom, dom2)
    assert serialize_domain(dom2) == text
    ptext = serialize_problem(prob)
    prob2 = parse_problem(ptext, dom2)
    assert isomorphic(prob.model, prob2.model, prob.point, prob2.point)
    assert prob2.goal == prob.goal
    assert serialize_problem(prob2) == ptext


def test_small_domain_round_trip():
    dom = parse_domain(DOMAIN)
    for edges in ("(:edges :A (all))", "(:edges :A :raw ((w0 -> w1)))",
                  "(:edges :A ((w0 -- w2)) :B ((w1 -- w2)))"):
        prob = parse_problem(problem(edges), dom)
        prob2 = parse_problem(serialize_problem(prob), parse_domain(serialize_domain(dom)))
        assert isomorphic(prob.model, prob2.model, prob.point, prob2.point)
        for a in prob.model.agents:
            assert prob.model.pairs(a) == prob2.model.pairs(a)


names = st.from_regex(r"[A-Z][a-z0-9]{0,5}", fullmatch=True)
args = st.lists(st.from_regex(r"[a-z][a-z0-9_]{0,4}", fullmatch=True), max_size=3)
steps = st.builds(lambda n, a, e: PlanStep(n, tuple(a), e), names, args,
                  st.one_of(st.none(), st.from_regex(r"e[a-z0-9]{0,3}", fullmatch=True)))


@settings(max_examples=200, deadline=None)
@given(st.lists(steps, max_size=5))
def test_plan_round_trip(plan):
    assert parse_plan(serialize_plan(plan)) == plan
    assert parse_plan(plan_to_json(plan)) == plan


def test_plan_formats():
    assert serialize_plan([]) == "()\n"
    assert parse_plan("()") == []
    assert parse_plan('["Reboot(a1,sn1)@er1"]') == [PlanStep("Reboot", ("a1", "sn1"), "er1")]
    assert parse_step("Malfunction(m1, box)") == PlanStep("Malfunction", ("m1", "box"), None)
    with pytest.raises(DslSyntaxError):
        parse_step("not a step")


def test_type_hierarchy_copy_is_independent():
    T = TypeHierarchy({"room": "object"}, {"r1": "room"})
    U = T.copy(const_types={"r2": "room"})
    assert U.constant_has_type("r2", "object")
    assert not T.known("nosuch")
