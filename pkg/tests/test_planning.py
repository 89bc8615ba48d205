import pytest

from termplan.dsl import PlanStep
from termplan.planning import (
    NoneWithinBound, PlanningTask, SearchConfig, UnknownAction, all_plans, find_plan,
    goal_holds, nested_formula, transition, verify_plan,
)
from termplan.semantics import holds
from termplan.syntax import TermplanError, Var, Atom, AGT

PI = [PlanStep("Malfunction", ("m1", "box"), "em"), PlanStep("Reboot", ("a1", "sn1"), "er1")]


def test_mm_grounding(mm):
    _, prob = mm
    task = PlanningTask.from_problem(prob)
    labels = [f"{a.schema}({','.join(a.args)})" for a in task.actions]
    assert sorted(labels) == labels
    assert len(labels) == 8


def test_mm_plan(mm):
    _, prob = mm
    task = PlanningTask.from_problem(prob)
    res = find_plan(task, SearchConfig(3))
    assert [a.step() for a in res.plan] == PI
    assert verify_plan(task, PI).valid


@pytest.mark.parametrize("cfg", [SearchConfig(3, "bfs", "none"), SearchConfig(3, "iddfs")])
def test_search_variants_agree(mm, cfg):
    _, prob = mm
    task = PlanningTask.from_problem(prob)
    res = find_plan(task, cfg)
    assert len(res) == 2
    assert verify_plan(task, [a.step() for a in res.plan]).valid


def test_bfs_minimal_against_exhaustive_enumeration(mm):
    _, prob = mm
    task = PlanningTask.from_problem(prob)
    found = len(find_plan(task, SearchConfig(3)))
    for n in range(found):
        assert not any(goal_holds(s, task.goal) for _, s in all_plans(task, n))
    winners = [p for p, s in all_plans(task, found) if goal_holds(s, task.goal)]
    assert winners
    for p in winners:
        assert verify_plan(task, p).valid


def test_depth_zero_and_falsy_result(mm):
    _, prob = mm
    res = find_plan(PlanningTask.from_problem(prob), SearchConfig(0))
    assert isinstance(res, NoneWithinBound)
    assert not res
    assert not res.exhausted


def test_alternatives_without_first_admin(mm):
    _, prob = mm
    task = PlanningTask.from_problem(prob)
    task2 = PlanningTask.from_problem(prob, exclude=lambda g: g.schema == "Reboot" and g.args[0] == "a1")
    assert all(a.args[0] != "a1" for a in task2.actions if a.schema == "Reboot")
    res = find_plan(task2, SearchConfig(6))
    # no plan at any depth: the reachable states run out
    assert isinstance(res, NoneWithinBound) and res.exhausted
    # the second admin's reboot needs known malfunction, which the first reboot destroys
    alt = [PI[0], PlanStep("Reboot", ("a2", "sn1"), "er1"), PlanStep("Reboot", ("a2", "sn2"), "er1")]
    v = verify_plan(task, alt)
    assert not v.valid and v.failed_at == 2
    s = v.trace[-1]
    assert s.point == "w0.em.er1"
    assert not holds(s, prob.parse_formula("K[a2] exists x:obj. malfunction(x)"))


def test_inexecutable_plan_is_vacuous_in_nested_check(mm):
    _, prob = mm
    task = PlanningTask.from_problem(prob)
    plan = [PlanStep("Reboot", ("a1", "sn1"), "er1")]
    v = verify_plan(task, plan)
    assert v.failed_at == 0 and not v.valid
    assert v.nested_check is True
    assert transition(task.initial, task.lookup(plan[0])) is None


def test_nested_formula_matches_final_state(mm):
    _, prob = mm
    task = PlanningTask.from_problem(prob)
    steps = [task.lookup(p) for p in PI]
    assert holds(task.initial, nested_formula(steps, task.goal))
    assert not holds(task.initial, nested_formula(steps[:1], task.goal))


def test_lookup_errors(mm):
    _, prob = mm
    task = PlanningTask.from_problem(prob)
    with pytest.raises(UnknownAction):
        task.lookup(PlanStep("Reboot", ("m1", "sn1")))
    with pytest.raises(UnknownAction):
        task.lookup(PlanStep("Reboot", ("a1", "sn1"), "nosuch"))


def test_goal_must_be_static_sentence(mm):
    _, prob = mm
    with pytest.raises(TermplanError):
        PlanningTask(prob.initial, [], Atom("malfunction", (Var("x", AGT),)))


def test_config_validation():
    with pytest.raises(ValueError):
        SearchConfig(-1)
    with pytest.raises(ValueError):
        SearchConfig(1, strategy="dfs")
    assert SearchConfig(1, dedup="iso").dedup == "isomorphism"


def test_sc_plans(sc):
    _, prob = sc
    task = PlanningTask.from_problem(prob)
    assert len(task.actions) == 48 + 24 + 24
    assert isinstance(find_plan(task, SearchConfig(2)), NoneWithinBound)
    res = find_plan(task, SearchConfig(3))
    assert len(res) == 3
    assert verify_plan(task, [a.step() for a in res.plan]).valid
    story = [PlanStep("Move", ("a1", "r1", "r2")), PlanStep("SenseCol", ("a1", "red", "b1", "r2")),
             PlanStep("Announce", ("a1", "red", "b1", "r2"))]
    v = verify_plan(task, story)
    assert v.valid
    assert [len(s.model.worlds) for s in v.trace] == [2, 4, 6, 7]
