"""Translation of dynamic formulas into static ones by reduction axioms.

Each Dyn node ``[A,e]phi`` is rewritten according to the main connective of
``phi``.  A complexity measure on formulas decreases strictly with every
rewrite, which is what makes the translation terminate; the measure is
recomputed and checked on every step.
"""

from __future__ import annotations

import itertools
import os
import random
from dataclasses import dataclass, field

from .dynamics import (
    ActionModel, compose, effective_post, post_template, _s_and, _s_or, _s_not,
)
from .semantics import EpistemicModel, truth_mask, valuations
from .syntax import (
    AGT, OBJ, XSTAR, EQ, TermplanError, Signature, Var, Const,
    Atom, Top, Bottom, Not, And, Or, Implies, Iff, Knows, Forall, Exists, Neq, Dyn,
    TOP, BOTTOM, Eq, conj, disj, children, free_vars, subst_many, fresh_var,
    all_var_names, is_static,
)


class NoRedex(TermplanError):
    pass


class ComplexityViolation(TermplanError):
    pass


# ---------------------------------------------------------------- complexity


def complexity(f) -> int:
    c = f.__dict__.get("_c")
    if c is None:
        c = _complexity(f)
        object.__setattr__(f, "_c", c)
    return c


def _complexity(f) -> int:
    if isinstance(f, (Atom, Top, Bottom)):
        return 1
    if isinstance(f, Neq):
        return 2
    if isinstance(f, (Not, Knows, Forall, Exists)):
        return 1 + complexity(f.sub)
    if isinstance(f, (And, Or)):
        return 1 + max(complexity(s) for s in f.subs)
    if isinstance(f, (Implies, Iff)):
        return 1 + max(complexity(f.left), complexity(f.right))
    if isinstance(f, Dyn):
        return (4 + action_complexity(f.action)) * complexity(f.sub)
    raise TypeError(f"not a formula: {f!r}")


def action_complexity(A: ActionModel) -> int:
    cached = getattr(A, "_complexity", None)
    if cached is not None:
        return cached
    vals = [complexity(p) for p in A.pre.values()]
    vals += [complexity(q) for q in A.edges.values()]
    for e in A.events:
        rels = {}
        for g, v in A.post[e].items():
            vals.append(complexity(v))
            rels[g.rel] = len(g.args)
        for r, n in rels.items():
            vals.append(complexity(post_template(A, e, r, n)))
    c = max(vals)
    A._complexity = c
    return c


# ---------------------------------------------------------------- single rewrites


@dataclass
class Options:
    knowledge_rule: str = "guarded"     # or "printed": no pre(e) guard
    composition: str = "sound"          # or "printed"
    check: bool = True


@dataclass
class TraceStep:
    axiom: str
    path: tuple
    before: int
    after: int

    def to_json(self) -> dict:
        return {"axiom": self.axiom, "path": list(self.path),
                "complexity_before": self.before, "complexity_after": self.after}


def _imp(pre, f):
    if isinstance(pre, Top):
        return f
    return Implies(pre, f)


def rewrite(D: Dyn, sig: Signature, opts: Options | None = None):
    """Apply the axiom matching the Dyn node ``D``; returns ``(axiom, formula)``."""
    opts = opts or Options()
    A, e, phi = D.action, D.event, D.sub
    pre = A.pre[e]

    def dyn(ev, f):
        return Dyn(A, ev, f)

    if isinstance(phi, Atom):
        return "atom", _imp(pre, effective_post(A, e, phi, sig))
    if isinstance(phi, Top):
        return "top", TOP
    if isinstance(phi, Bottom):
        return "bottom", _s_not(pre)
    if isinstance(phi, Neq):
        return "neq", _imp(pre, phi)
    if isinstance(phi, Not):
        return "negation", _imp(pre, Not(dyn(e, phi.sub)))
    if isinstance(phi, And):
        return "conjunction", And(tuple(dyn(e, s) for s in phi.subs))
    if isinstance(phi, Or):
        return "disjunction", _imp(pre, Or(tuple(dyn(e, s) for s in phi.subs)))
    if isinstance(phi, Implies):
        return "implication", Implies(dyn(e, phi.left), dyn(e, phi.right))
    if isinstance(phi, Iff):
        return "biconditional", _imp(pre, Iff(dyn(e, phi.left), dyn(e, phi.right)))
    if isinstance(phi, Knows):
        parts = []
        for f in A.events:
            q = A.edges[(e, f)]
            if isinstance(q, Bottom):
                continue
            q = subst_many(q, {XSTAR: phi.agent})
            k = Knows(phi.agent, dyn(f, phi.sub))
            parts.append(k if isinstance(q, Top) else Implies(q, k))
        body = conj(parts)
        if opts.knowledge_rule == "printed":
            return "knowledge", body
        return "knowledge", _imp(pre, body)
    if isinstance(phi, (Forall, Exists)):
        x, body = phi.var, phi.sub
        if x.name in _action_var_names(A):
            avoid = _action_var_names(A) | all_var_names(body) | {v.name for v in free_vars(phi)}
            y = fresh_var(x, avoid)
            body = subst_many(body, {x: y})
            x = y
        q = Forall if isinstance(phi, Forall) else Exists
        return ("quantifier", _imp(pre, q(x, dyn(e, body))))
    if isinstance(phi, Dyn):
        C, ce = compose(A, e, phi.action, phi.event, sig, mode=opts.composition)
        return "composition", Dyn(C, ce, phi.sub)
    raise TypeError(f"not a formula: {phi!r}")


def _action_var_names(A: ActionModel) -> set:
    cached = getattr(A, "_var_names", None)
    if cached is None:
        names = set()
        for f in list(A.pre.values()) + list(A.edges.values()):
            names |= {v.name for v in free_vars(f)}
        for table in A.post.values():
            for g, v in table.items():
                names |= {v_.name for v_ in free_vars(v)}
        names.discard(XSTAR.name)
        A._var_names = cached = names
    return cached


# ---------------------------------------------------------------- stepping


def _rebuild(f, kids):
    if isinstance(f, Not):
        return Not(kids[0])
    if isinstance(f, And):
        return And(tuple(kids))
    if isinstance(f, Or):
        return Or(tuple(kids))
    if isinstance(f, Implies):
        return Implies(kids[0], kids[1])
    if isinstance(f, Iff):
        return Iff(kids[0], kids[1])
    if isinstance(f, Knows):
        return Knows(f.agent, kids[0])
    if isinstance(f, Forall):
        return Forall(f.var, kids[0])
    if isinstance(f, Exists):
        return Exists(f.var, kids[0])
    if isinstance(f, Dyn):
        return Dyn(f.action, f.event, kids[0])
    return f


def _find(f, strategy, path=()):
    """Path of the first redex: outermost-leftmost or innermost-leftmost."""
    if isinstance(f, Dyn):
        if strategy == "outermost":
            return path
        inner = _find(f.sub, strategy, path + (0,))
        return inner if inner is not None else path
    for i, c in enumerate(children(f)):
        hit = _find(c, strategy, path + (i,))
        if hit is not None:
            return hit
    return None


def _at(f, path):
    for i in path:
        f = children(f)[i]
    return f


def _replace(f, path, new):
    if not path:
        return new
    kids = list(children(f))
    kids[path[0]] = _replace(kids[path[0]], path[1:], new)
    return _rebuild(f, kids)


def reduce_step(f, sig: Signature, strategy: str = "outermost", opts: Options | None = None):
    """Rewrite one redex; returns ``(formula, TraceStep)``.  Raises NoRedex on
    static input."""
    opts = opts or Options()
    path = _find(f, strategy)
    if path is None:
        raise NoRedex("formula is already static")
    redex = _at(f, path)
    axiom, new = rewrite(redex, sig, opts)
    step = TraceStep(axiom, path, complexity(redex), complexity(new))
    if opts.check and step.after >= step.before:
        raise ComplexityViolation(f"{axiom} at {path}: {step.before} -> {step.after}")
    return _replace(f, path, new), step


@dataclass
class Translation:
    formula: object
    trace: list = field(default_factory=list)


class _Translator:
    def __init__(self, sig, opts, record):
        self.sig = sig
        self.opts = opts
        self.record = record
        self.trace = []
        self.memo = {}

    def run(self, f, path=()):
        hit = self.memo.get(id(f))
        if hit is not None and hit[0] is f:
            return hit[1]
        if isinstance(f, Dyn):
            axiom, new = rewrite(f, self.sig, self.opts)
            if self.opts.check or self.record:
                before, after = complexity(f), complexity(new)
                if self.opts.check and after >= before:
                    raise ComplexityViolation(f"{axiom} at {path}: {before} -> {after}")
                if self.record:
                    self.trace.append(TraceStep(axiom, path, before, after))
            out = self.run(new, path)
        else:
            kids = children(f)
            if not kids:
                out = f
            else:
                new_kids = [self.run(c, path + (i,)) for i, c in enumerate(kids)]
                same = all(a is b for a, b in zip(new_kids, kids))
                out = f if same else _rebuild(f, new_kids)
        self.memo[id(f)] = (f, out)
        return out


def translate(f, sig: Signature, trace: bool = False, knowledge_rule: str = "guarded",
              composition: str = "sound", check: bool = True):
    """Static equivalent of ``f``.  Rewrites outermost Dyn nodes first, so a
    stack of modalities is merged by composition before being reduced.
    Returns a Translation when ``trace`` is set, else the formula."""
    opts = Options(knowledge_rule, composition, check)
    tr = _Translator(sig, opts, trace)
    out = tr.run(f)
    assert is_static(out)
    if trace:
        return Translation(out, tr.trace)
    return out


def translate_stepwise(f, sig: Signature, strategy: str = "innermost", opts: Options | None = None,
                       max_steps: int = 100000) -> Translation:
    trace = []
    while not is_static(f):
        f, step = reduce_step(f, sig, strategy, opts)
        trace.append(step)
        if len(trace) > max_steps:
            raise TermplanError("step limit exceeded")
    return Translation(f, trace)


# ---------------------------------------------------------------- equivalence oracle


@dataclass
class EquivalenceReport:
    checked: int = 0
    disagreements: int = 0
    first: tuple | None = None

    @property
    def agree(self) -> bool:
        return self.disagreements == 0


def check_equivalence(phi, psi, corpus) -> EquivalenceReport:
    """Compare ``phi`` and ``psi`` at every world and valuation of every model."""
    fv = sorted(free_vars(phi) | free_vars(psi), key=lambda v: v.name)
    rep = EquivalenceReport()
    for M in corpus:
        for v in valuations(M, fv):
            m1 = truth_mask(M, phi, v)
            m2 = truth_mask(M, psi, v)
            rep.checked += len(M.worlds)
            diff = m1 ^ m2
            if diff:
                rep.disagreements += bin(diff).count("1")
                if rep.first is None:
                    w = M.mask_to_worlds(diff)[0]
                    rep.first = (M, w, v)
    return rep


# ---------------------------------------------------------------- random corpus


def seeded_rng(seed=None) -> random.Random:
    if seed is None:
        seed = int(os.environ.get("TERMPLAN_SEED", "0"))
    return random.Random(seed)


def small_signature() -> Signature:
    return Signature(
        constants={"a": AGT, "b": AGT, "c": OBJ, "d": OBJ},
        relations={"P": (OBJ,), "R": (AGT, OBJ), "S": (AGT,), "Q": ()},
        functions={},
    )


def random_model(rng: random.Random, sig: Signature, max_worlds=4, max_agents=3,
                 max_objects=2) -> EpistemicModel:
    n_w = rng.randint(1, max_worlds)
    agents = [f"i{k}" for k in range(rng.randint(1, max_agents))]
    objects = [f"o{k}" for k in range(rng.randint(1, max_objects))]
    worlds = [f"w{k}" for k in range(n_w)]
    dom = {AGT: agents, OBJ: objects}
    access = {}
    for i in agents:
        access[i] = {(u, v) for u in worlds for v in worlds if rng.random() < 0.5}
    constants = {}
    rigid = rng.random() < 0.5
    for c, s in sig.constants.items():
        if rigid:
            val = rng.choice(dom[s])
            constants[c] = {w: val for w in worlds}
        else:
            constants[c] = {w: rng.choice(dom[s]) for w in worlds}
    relations = {}
    for r, slots in sig.relations.items():
        if r == EQ:
            continue
        pools = [agents + objects if s not in dom else dom[s] for s in slots]
        tuples = list(itertools.product(*pools))
        relations[r] = {w: {t for t in tuples if rng.random() < 0.5} for w in worlds}
    return EpistemicModel(sig, agents, objects, worlds, access, constants, relations)


class FormulaGen:
    """Random well-formed formulas over ``sig``."""

    def __init__(self, rng, sig: Signature, n_actions=3):
        self.rng = rng
        self.sig = sig
        self.actions = []
        self.n_actions = n_actions

    def consts(self, sort):
        return [Const(c) for c, s in self.sig.constants.items() if s == sort]

    def term(self, sort, scope):
        pool = self.consts(sort) + [v for v in scope if v.sort == sort]
        return self.rng.choice(pool)

    def atom(self, scope):
        rels = [r for r in self.sig.relations if r != EQ]
        if self.rng.random() < 0.2:
            s = self.rng.choice([AGT, OBJ])
            return Eq(self.term(s, scope), self.term(s, scope))
        r = self.rng.choice(rels)
        slots = self.sig.relations[r]
        return Atom(r, tuple(self.term(s if s in (AGT, OBJ) else OBJ, scope) for s in slots))

    def static(self, depth, scope=()):
        rng = self.rng
        if depth <= 0 or rng.random() < 0.25:
            k = rng.random()
            if k < 0.05:
                return TOP
            if k < 0.08:
                return BOTTOM
            if k < 0.15:
                s = rng.choice([AGT, OBJ])
                return Neq(self.term(s, scope), self.term(s, scope))
            return self.atom(scope)
        k = rng.randrange(7)
        if k == 0:
            return Not(self.static(depth - 1, scope))
        if k == 1:
            return And((self.static(depth - 1, scope), self.static(depth - 1, scope)))
        if k == 2:
            return Or((self.static(depth - 1, scope), self.static(depth - 1, scope)))
        if k == 3:
            return Implies(self.static(depth - 1, scope), self.static(depth - 1, scope))
        if k == 4:
            return Knows(self.term(AGT, scope), self.static(depth - 1, scope))
        v = Var(rng.choice(["x", "y"]), rng.choice([AGT, OBJ]))
        inner = tuple(u for u in scope if u.name != v.name) + (v,)
        q = Forall if k == 5 else Exists
        return q(v, self.static(depth - 1, inner))

    def edge(self):
        rng = self.rng
        k = rng.random()
        if k < 0.25:
            return Eq(XSTAR, rng.choice(self.consts(AGT)))
        if k < 0.4:
            return Not(Eq(XSTAR, rng.choice(self.consts(AGT))))
        if k < 0.5:
            return TOP
        if k < 0.6:
            return BOTTOM
        if k < 0.8:
            return Atom("S", (XSTAR,))
        return Exists(Var("y", OBJ), Atom("R", (XSTAR, Var("y", OBJ))))

    def action(self, name=None) -> ActionModel:
        rng = self.rng
        n = rng.randint(1, 3)
        events = [f"e{k}" for k in range(n)]
        pre = {e: (TOP if rng.random() < 0.3 else self.static(1)) for e in events}
        edges = {}
        for e in events:
            for f in events:
                edges[(e, f)] = self.edge() if e != f or rng.random() < 0.3 else Eq(XSTAR, XSTAR)
        post = {}
        for e in events:
            table = {}
            for _ in range(rng.randint(0, 2)):
                g = self.atom(())
                if g.rel == EQ:
                    continue
                table[g] = rng.choice([TOP, BOTTOM, self.static(1)])
            post[e] = table
        return ActionModel(name or f"A{len(self.actions)}", events, pre, edges, post,
                           designated=events[0])

    def pick_action(self):
        if len(self.actions) < self.n_actions or self.rng.random() < 0.3:
            self.actions.append(self.action())
        return self.rng.choice(self.actions)

    def dynamic(self, depth, stack=2, scope=()):
        """A formula with at most ``stack`` nested action modalities."""
        rng = self.rng
        if stack > 0 and rng.random() < 0.5:
            A = self.pick_action()
            e = rng.choice(A.events)
            return Dyn(A, e, self.dynamic(depth, stack - 1, scope))
        if depth <= 0 or rng.random() < 0.3:
            return self.static(0, scope)
        k = rng.randrange(6)
        if k == 0:
            return Not(self.dynamic(depth - 1, stack, scope))
        if k == 1:
            return And((self.dynamic(depth - 1, stack, scope), self.dynamic(depth - 1, stack, scope)))
        if k == 2:
            return Or((self.dynamic(depth - 1, stack, scope), self.static(depth - 1, scope)))
        if k == 3:
            return Knows(self.term(AGT, scope), self.dynamic(depth - 1, stack, scope))
        v = Var(rng.choice(["x", "y"]), rng.choice([AGT, OBJ]))
        inner = tuple(u for u in scope if u.name != v.name) + (v,)
        q = Forall if k == 4 else Exists
        return q(v, self.dynamic(depth - 1, stack, inner))


def random_corpus(rng, sig, n=10, **kw) -> list:
    return [random_model(rng, sig, **kw) for _ in range(n)]


def stack_depth(f) -> int:
    if isinstance(f, Dyn):
        return 1 + stack_depth(f.sub)
    kids = children(f)
    return max((stack_depth(c) for c in kids), default=0)
