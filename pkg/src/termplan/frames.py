"""Frame properties, frame enumeration and empirical checks of the
characterization schemata (T, D, 4, 5 and the domain-size sentences)."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .semantics import EpistemicModel, truth_mask
from .syntax import (
    AGT, OBJ, Signature, Var, Const, Atom, Not, And, Or, Implies, Iff, Knows,
    Forall, Exists, Neq, TOP, BOTTOM, Eq, conj, disj,
)


class EnumerationBudgetExceeded(Exception):
    pass


PROPERTIES = ("reflexive", "serial", "transitive", "euclidean")
KIND_PROPERTY = {"T": "reflexive", "D": "serial", "4": "transitive", "5": "euclidean"}


# ---------------------------------------------------------------- relational checks


def relation_flags(pairs, worlds) -> dict:
    rel = set(pairs)
    succ = {w: {v for (u, v) in rel if u == w} for w in worlds}
    return {
        "reflexive": all(w in succ[w] for w in worlds),
        "serial": all(succ[w] for w in worlds),
        "transitive": all(succ[v] <= succ[u] for u in worlds for v in succ[u]),
        "euclidean": all(v2 in succ[v1] for u in worlds for v1 in succ[u] for v2 in succ[u]),
    }


@dataclass
class FrameReport:
    flags: dict                 # agent -> {property: bool}
    n_agents: int
    n_objects: int
    n_worlds: int

    def holds(self, prop: str) -> bool:
        return all(f[prop] for f in self.flags.values())

    def to_json(self) -> dict:
        return {"agents": self.flags, "sizes": [self.n_agents, self.n_objects, self.n_worlds]}


def frame_properties(M: EpistemicModel) -> FrameReport:
    flags = {a: relation_flags(M.pairs(a), M.worlds) for a in M.agents}
    return FrameReport(flags, len(M.agents), len(M.objects), len(M.worlds))


# ---------------------------------------------------------------- formulas


P0 = Atom("P", ())


def characterization_formula(kind: str, phi=None, n: int | None = None):
    """T, D, 4, 5 (quantified over agents), N(n) and M(m).  The schemata take
    ``phi`` as their instance (default: a 0-ary atom P)."""
    x = Var("x", AGT)
    if phi is None:
        phi = P0
    if kind == "T":
        return Forall(x, Implies(Knows(x, phi), phi))
    if kind == "D":
        return Forall(x, Not(Knows(x, BOTTOM)))
    if kind == "4":
        return Forall(x, Implies(Knows(x, phi), Knows(x, Knows(x, phi))))
    if kind == "5":
        return Forall(x, Implies(Not(Knows(x, phi)), Knows(x, Not(Knows(x, phi)))))
    if kind == "N":
        return _exactly(AGT, n, guard=True)
    if kind == "M":
        # variables are sorted, so a total count splits into agents and objects
        return disj(And((_exactly(AGT, k, guard=True), _exactly(OBJ, n - k)))
                    for k in range(n + 1))
    raise ValueError(f"unknown characterization kind {kind}")


def _exactly(sort, n, guard=False):
    if n is None or n < 0:
        raise ValueError("a non-negative size is required")
    y = Var("y", sort)
    if n == 0:
        return Forall(y, BOTTOM)
    xs = [Var(f"x{i + 1}", sort) for i in range(n)]
    parts = []
    if guard:
        parts += [Knows(v, TOP) for v in xs]
    parts += [Neq(a, b) for a, b in itertools.combinations(xs, 2)]
    cover = disj(Eq(y, v) for v in xs)
    if guard:
        cover = Implies(Knows(y, TOP), cover)
    parts.append(Forall(y, cover))
    body = conj(parts)
    for v in reversed(xs):
        body = Exists(v, body)
    return body


def constant_four(c: str = "c", b: str = "b"):
    """K_c(b=c) -> K_c K_c(b=c) with constant index."""
    phi = Eq(Const(b), Const(c))
    return Implies(Knows(Const(c), phi), Knows(Const(c), Knows(Const(c), phi)))


def rigidity_constant(a: str = "a", sort: str = AGT):
    x, y = Var("x", sort), Var("y", AGT)
    return Exists(x, And((Eq(x, Const(a)), Forall(y, Knows(y, Eq(x, Const(a)))))))


def rigidity_relation(r: str = "r", sort: str = OBJ):
    x, y = Var("x", sort), Var("y", AGT)
    return Forall(x, Iff(Atom(r, (x,)), Forall(y, Knows(y, Atom(r, (x,))))))


def guarded_four(r: str = "r", phi=None):
    x = Var("x", AGT)
    phi = P0 if phi is None else phi
    return Forall(x, Implies(Atom(r, (x,)), Implies(Knows(x, phi), Knows(x, Knows(x, phi)))))


def hintikka_four(c: str = "c", phi=None):
    """Exists x K_c(x=c) & K_c phi -> K_c K_c phi."""
    phi = P0 if phi is None else phi
    x = Var("x", AGT)
    cc = Const(c)
    return Implies(And((Exists(x, Knows(cc, Eq(x, cc))), Knows(cc, phi))), Knows(cc, Knows(cc, phi)))


# ---------------------------------------------------------------- golden model


def four_invalid_model() -> EpistemicModel:
    """Three worlds w, w', w''; alpha sees w -> w', beta sees w' -> w''.
    The constant c names alpha in w and w'' but beta in w'."""
    sig = Signature(constants={"a": AGT, "b": AGT, "c": AGT}, relations={}, functions={})
    worlds = ["w", "w'", "w''"]
    access = {"alpha": {("w", "w'")}, "beta": {("w'", "w''")}}
    constants = {
        "a": {"w": "alpha", "w'": "alpha", "w''": "alpha"},
        "b": {"w": "beta", "w'": "beta", "w''": "beta"},
        "c": {"w": "alpha", "w'": "beta", "w''": "alpha"},
    }
    return EpistemicModel(sig, ["alpha", "beta"], ["o"], worlds, access, constants)


# ---------------------------------------------------------------- enumeration


@dataclass
class EnumerationSpec:
    n_agents: int
    max_worlds: int
    n_objects: int = 1
    min_agents: int = 1
    min_worlds: int = 1
    budget: int = 2_000_000     # interpretations evaluated before giving up
    max_raw_frames: int = 5_000_000

    def __post_init__(self):
        if self.n_agents < 1 or self.max_worlds < 1 or self.n_objects < 1:
            raise ValueError("enumeration bounds must be at least 1")


def _perm_tables(k):
    """For each world permutation, a lookup from relation bitmask to permuted bitmask."""
    perms = list(itertools.permutations(range(k)))
    tables = []
    size = 1 << (k * k)
    for p in perms:
        tab = [0] * size
        bits = [(i * k + j, p[i] * k + p[j]) for i in range(k) for j in range(k)]
        for m in range(size):
            out = 0
            for src, dst in bits:
                if m >> src & 1:
                    out |= 1 << dst
            tab[m] = out
        tables.append(tab)
    return tables


def canonical_frames(n_agents: int, k: int):
    """Relation tuples (one k*k bitmask per agent) up to renaming worlds and agents."""
    tables = _perm_tables(k)
    agent_perms = list(itertools.permutations(range(n_agents)))
    size = 1 << (k * k)
    for rels in itertools.product(range(size), repeat=n_agents):
        best = rels
        for tab in tables:
            moved = [tab[r] for r in rels]
            for ap in agent_perms:
                cand = tuple(moved[i] for i in ap)
                if cand < best:
                    best = cand
                    break
            if best is not rels:
                break
        if best is rels:
            yield rels


def frame_pairs(rel: int, k: int) -> set:
    return {(i, j) for i in range(k) for j in range(k) if rel >> (i * k + j) & 1}


def _frame_model(sig, rels, k, n_objects, P_mask=None, agents=None):
    agents = agents or [f"i{n}" for n in range(len(rels))]
    worlds = [f"w{n}" for n in range(k)]
    succ = {}
    for a, rel in zip(agents, rels):
        rows = []
        for i in range(k):
            row = 0
            for j in range(k):
                if rel >> (i * k + j) & 1:
                    row |= 1 << j
            rows.append(row)
        succ[a] = rows
    rint = {}
    if P_mask is not None:
        rint["P"] = [frozenset({()}) if P_mask >> i & 1 else frozenset() for i in range(k)]
    objects = [f"o{n}" for n in range(n_objects)]
    return EpistemicModel.from_tables(sig, agents, objects, worlds, succ, {}, rint, {})


@dataclass
class FrameOutcome:
    n_agents: int
    n_worlds: int
    relations: tuple
    has_property: bool
    valid: bool | None           # None: inconclusive
    counterexample: int | None = None

    def to_json(self) -> dict:
        return {"agents": self.n_agents, "worlds": self.n_worlds,
                "relations": [sorted(frame_pairs(r, self.n_worlds)) for r in self.relations],
                "has_property": self.has_property, "valid": self.valid,
                "counterexample_P": self.counterexample}


@dataclass
class CharacterizationReport:
    kind: str
    frames: int = 0
    with_property: int = 0
    valid_on_property: int = 0
    falsified_off_property: int = 0
    inconclusive: int = 0
    failures: list = field(default_factory=list)
    outcomes: list = field(default_factory=list)

    @property
    def confirmed(self) -> bool:
        return not self.failures and not self.inconclusive

    def to_json(self, outcomes=False) -> dict:
        out = {"kind": self.kind, "frames": self.frames, "with_property": self.with_property,
               "valid_on_property": self.valid_on_property,
               "falsified_off_property": self.falsified_off_property,
               "inconclusive": self.inconclusive, "confirmed": self.confirmed,
               "failures": [f.to_json() for f in self.failures]}
        if outcomes:
            out["outcomes"] = [o.to_json() for o in self.outcomes]
        return out


def _sig_for(kind):
    rels = {"P": ()} if kind in ("T", "4", "5") else {}
    return Signature(constants={}, relations=rels, functions={})


def raw_frame_count(spec: EnumerationSpec) -> int:
    return sum((1 << (k * k)) ** na for na in range(spec.min_agents, spec.n_agents + 1)
               for k in range(spec.min_worlds, spec.max_worlds + 1))


def check_characterization(kind: str, spec: EnumerationSpec, n: int | None = None,
                           keep_outcomes: bool = False) -> CharacterizationReport:
    """Validity on every enumerated frame with the property; a falsifying
    interpretation of P on every frame without it."""
    raw = raw_frame_count(spec)
    if raw > spec.max_raw_frames:
        raise EnumerationBudgetExceeded(f"{raw} relation tuples exceed the limit of {spec.max_raw_frames}")
    if kind in ("N", "M"):
        return _check_size(kind, spec, n, keep_outcomes)
    prop = KIND_PROPERTY[kind]
    f = characterization_formula(kind)
    sig = _sig_for(kind)
    rep = CharacterizationReport(kind)
    spent = 0
    for na in range(spec.min_agents, spec.n_agents + 1):
        for k in range(spec.min_worlds, spec.max_worlds + 1):
            for rels in canonical_frames(na, k):
                has = all(relation_flags(frame_pairs(r, k), range(k))[prop] for r in rels)
                masks = range(1 << k) if kind != "D" else [None]
                valid, cex = True, None
                for pm in masks:
                    if spent >= spec.budget:
                        valid = None
                        break
                    spent += 1
                    M = _frame_model(sig, rels, k, spec.n_objects, pm)
                    if truth_mask(M, f) != M.full:
                        valid, cex = False, pm
                        break
                out = FrameOutcome(na, k, rels, has, valid, cex)
                _tally(rep, out, keep_outcomes)
    return rep


def _tally(rep, out, keep):
    rep.frames += 1
    if keep:
        rep.outcomes.append(out)
    if out.valid is None:
        rep.inconclusive += 1
        return
    if out.has_property:
        rep.with_property += 1
        if out.valid:
            rep.valid_on_property += 1
        else:
            rep.failures.append(out)
    elif not out.valid:
        rep.falsified_off_property += 1
    else:
        rep.failures.append(out)


def _check_size(kind, spec, n, keep):
    f = characterization_formula(kind, n=n)
    sig = Signature(constants={}, relations={}, functions={})
    rep = CharacterizationReport(f"{kind}({n})")
    for na in range(spec.min_agents, spec.n_agents + 1):
        for k in range(spec.min_worlds, spec.max_worlds + 1):
            for rels in canonical_frames(na, k):
                M = _frame_model(sig, rels, k, spec.n_objects)
                size = na if kind == "N" else na + spec.n_objects
                valid = truth_mask(M, f) == M.full
                _tally(rep, FrameOutcome(na, k, rels, size == n, valid), keep)
    return rep


def locally_rigid_constant(M: EpistemicModel, c: str) -> bool:
    """I(c,w) = I(c,w') whenever some agent relates w to w'."""
    for a in M.agents:
        for u, v in M.pairs(a):
            if M.const_value(c, u) != M.const_value(c, v):
                return False
    return True


def locally_rigid_relation(M: EpistemicModel, r: str) -> bool:
    for a in M.agents:
        for u, v in M.pairs(a):
            if M.rel_ext(r, u) != M.rel_ext(r, v):
                return False
    return True


def all_small_models(sig: Signature, n_agents: int, max_worlds: int, n_objects: int = 1,
                     constants=(), unary=()):
    """Every model over canonical frames with every interpretation of the given
    constants (sort from ``sig``) and unary relations (over objects)."""
    agents = [f"i{n}" for n in range(n_agents)]
    objects = [f"o{n}" for n in range(n_objects)]
    dom = {AGT: agents, OBJ: objects}
    for k in range(1, max_worlds + 1):
        worlds = [f"w{n}" for n in range(k)]
        for rels in canonical_frames(n_agents, k):
            access = {a: {(worlds[i], worlds[j]) for i, j in frame_pairs(r, k)}
                      for a, r in zip(agents, rels)}
            c_choices = [list(itertools.product(dom[sig.constants[c]], repeat=k)) for c in constants]
            r_choices = [list(itertools.product(range(1 << n_objects), repeat=k)) for _ in unary]
            for cvals in itertools.product(*c_choices):
                for rvals in itertools.product(*r_choices):
                    cmap = {c: dict(zip(worlds, vals)) for c, vals in zip(constants, cvals)}
                    rmap = {}
                    for r, vals in zip(unary, rvals):
                        rmap[r] = {w: {(o,) for i, o in enumerate(objects) if m >> i & 1}
                                   for w, m in zip(worlds, vals)}
                    yield EpistemicModel(sig, agents, objects, worlds, access, cmap, rmap)
