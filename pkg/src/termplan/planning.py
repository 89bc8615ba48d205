"""Planning tasks over pointed models: transitions, verification and bounded search."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .dsl import PlanStep, Problem
from .dynamics import ActionModel, ground_all, update_pointed
from .semantics import PointedModel, holds, isomorphic, model_hash
from .syntax import Dyn, TermplanError, is_static, free_vars


class UnknownAction(TermplanError):
    pass


@dataclass(frozen=True)
class GroundAction:
    schema: str
    args: tuple
    model: ActionModel = field(compare=False, hash=False)
    event: str = ""

    def __str__(self):
        return f"{self.schema}({','.join(self.args)})@{self.event}"

    def step(self) -> PlanStep:
        return PlanStep(self.schema, self.args, self.event)


@dataclass
class PlanningTask:
    initial: PointedModel
    actions: list                # GroundAction, in search order
    goal: object

    def __post_init__(self):
        if not is_static(self.goal):
            raise TermplanError("goal must be a static formula")
        if free_vars(self.goal):
            raise TermplanError("goal must be a sentence")
        self._index = {(a.schema, a.args): a for a in self.actions}

    @classmethod
    def from_problem(cls, prob: Problem, exclude=None, events: dict | None = None,
                     goal=None) -> "PlanningTask":
        """Ground every schema of the domain.  ``exclude`` filters ground actions;
        ``events`` overrides the designated event per schema name."""
        actions = []
        for S in prob.domain.schemas:
            ev = (events or {}).get(S.name, S.designated)
            if ev is None:
                raise TermplanError(f"schema {S.name} has no designated event")
            for A in ground_all(S, prob.sig, prob.types):
                g = GroundAction(S.name, tuple(A.args), A, ev)
                if exclude is None or not exclude(g):
                    actions.append(g)
        actions.sort(key=lambda g: (g.schema, g.args))
        return cls(prob.initial, actions, goal if goal is not None else prob.goal)

    def lookup(self, step: PlanStep) -> GroundAction:
        g = self._index.get((step.action, tuple(step.args)))
        if g is None:
            raise UnknownAction(f"{step.action}({','.join(step.args)}) is not a ground action of the task")
        if step.event and step.event != g.event:
            if step.event not in g.model.events:
                raise UnknownAction(f"{g.model.name} has no event {step.event}")
            return GroundAction(g.schema, g.args, g.model, step.event)
        return g


@dataclass
class SearchConfig:
    max_depth: int
    strategy: str = "bfs"
    dedup: str = "isomorphism"

    def __post_init__(self):
        if self.max_depth < 0:
            raise ValueError("max_depth must be non-negative")
        if self.strategy not in ("bfs", "iddfs"):
            raise ValueError(f"unknown strategy {self.strategy}")
        if self.dedup in ("iso",):
            self.dedup = "isomorphism"
        if self.dedup not in ("none", "isomorphism"):
            raise ValueError(f"unknown dedup mode {self.dedup}")


@dataclass
class NoneWithinBound:
    """No plan of length <= max_depth.  Not a proof that no plan exists,
    unless ``exhausted`` says the reachable states (up to isomorphism) ran out
    before the depth bound cut anything off."""
    max_depth: int
    expanded: int = 0
    exhausted: bool = False

    def __bool__(self):
        return False


@dataclass
class SearchResult:
    plan: list
    expanded: int = 0
    generated: int = 0

    def __len__(self):
        return len(self.plan)

    def __iter__(self):
        return iter(self.plan)

    def __str__(self):
        return ", ".join(str(a) for a in self.plan)


def transition(s: PointedModel, a: GroundAction):
    """The successor state, or None when the designated event is not applicable."""
    pre = a.model.pre[a.event]
    if not holds(s, pre):
        return None
    return update_pointed(s, a.model, a.event)


def goal_holds(s: PointedModel, goal) -> bool:
    return holds(s, goal)


@dataclass
class Verification:
    valid: bool
    trace: list
    failed_at: int | None = None
    nested_check: bool | None = None


def nested_formula(plan, goal):
    f = goal
    for a in reversed(plan):
        f = Dyn(a.model, a.event, f)
    return f


def verify_plan(task: PlanningTask, plan) -> Verification:
    steps = [task.lookup(p) if isinstance(p, PlanStep) else p for p in plan]
    trace = [task.initial]
    s = task.initial
    failed = None
    for i, a in enumerate(steps):
        s = transition(s, a)
        if s is None:
            failed = i
            break
        trace.append(s)
    valid = failed is None and goal_holds(s, task.goal)
    # [A1,e1]...[An,en]goal is vacuously true when some step is inapplicable,
    # so the nested route is compared against the conjunction of applicability
    # checks and the goal.
    nested = holds(task.initial, nested_formula(steps, task.goal))
    executable = failed is None
    if executable and nested != valid:
        raise AssertionError("iterated update and nested dynamic check disagree")
    if not executable and not nested:
        raise AssertionError("nested dynamic check false on an inexecutable plan")
    return Verification(valid, trace, failed, nested)


class _Visited:
    def __init__(self):
        self.buckets = {}

    def add(self, s: PointedModel) -> bool:
        """Record ``s``; False if an isomorphic state was already present."""
        key = model_hash(s.model, s.point)
        bucket = self.buckets.setdefault(key, [])
        for t in bucket:
            if isomorphic(s.model, t.model, s.point, t.point):
                return False
        bucket.append(s)
        return True


def find_plan(task: PlanningTask, cfg: SearchConfig):
    if cfg.strategy == "iddfs":
        return _iddfs(task, cfg)
    return _bfs(task, cfg)


def _bfs(task, cfg):
    frontier = deque([(task.initial, ())])
    visited = _Visited() if cfg.dedup == "isomorphism" else None
    if visited is not None:
        visited.add(task.initial)
    expanded = generated = 0
    cut = False
    while frontier:
        s, plan = frontier.popleft()
        if goal_holds(s, task.goal):
            return SearchResult(list(plan), expanded, generated)
        if len(plan) >= cfg.max_depth:
            cut = True
            continue
        expanded += 1
        for a in task.actions:
            t = transition(s, a)
            if t is None:
                continue
            if visited is not None and not visited.add(t):
                continue
            generated += 1
            frontier.append((t, plan + (a,)))
    return NoneWithinBound(cfg.max_depth, expanded, exhausted=visited is not None and not cut)


def _iddfs(task, cfg):
    expanded = 0

    def dfs(s, plan, limit):
        nonlocal expanded
        if goal_holds(s, task.goal):
            return plan
        if len(plan) >= limit:
            return None
        expanded += 1
        for a in task.actions:
            t = transition(s, a)
            if t is None:
                continue
            found = dfs(t, plan + [a], limit)
            if found is not None:
                return found
        return None

    for limit in range(cfg.max_depth + 1):
        found = dfs(task.initial, [], limit)
        if found is not None:
            return SearchResult(found, expanded)
    return NoneWithinBound(cfg.max_depth, expanded)


def all_plans(task: PlanningTask, length: int):
    """Every executable action sequence of exactly ``length`` steps (no dedup)."""
    def rec(s, plan):
        if len(plan) == length:
            yield plan, s
            return
        for a in task.actions:
            t = transition(s, a)
            if t is not None:
                yield from rec(t, plan + [a])
    yield from rec(task.initial, [])
