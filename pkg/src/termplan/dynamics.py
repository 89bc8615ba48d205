"""Edge-conditioned action models, product update, schemas and composition."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .semantics import EpistemicModel, Evaluator, PointedModel, ModelError, _ext
from .syntax import (
    AGT, OBJ, AGT_OR_OBJ, EQ, XSTAR, TermplanError, Signature, Var, Const, Apply,
    Atom, Top, Bottom, Not, And, Or, Dyn, TOP, BOTTOM, Eq, conj, disj,
    free_vars, subst_many, subst_term, term_vars, well_formed, sort_of, SortMismatch,
)

# Depth of function nesting used when enumerating ground terms.  With a
# function-free signature the enumeration is exact at any depth.
GROUND_DEPTH = 1


class EmptyUpdate(TermplanError):
    pass


class NotApplicable(TermplanError):
    pass


class IncompleteSubstitution(TermplanError):
    pass


# ---------------------------------------------------------------- ground terms


def ground_terms(sig: Signature, depth: int = GROUND_DEPTH) -> dict:
    """Ground terms per sort, closing constants under functions ``depth`` times."""
    out = {AGT: [Const(c) for c in sig.constants_of(AGT)],
           OBJ: [Const(c) for c in sig.constants_of(OBJ)]}
    for _ in range(depth):
        new = {AGT: list(out[AGT]), OBJ: list(out[OBJ])}
        seen = {AGT: set(out[AGT]), OBJ: set(out[OBJ])}
        for fn, (slots, res) in sig.functions.items():
            pools = [_slot_pool(out, s) for s in slots]
            for args in itertools.product(*pools):
                t = Apply(fn, tuple(args))
                if t not in seen[res]:
                    seen[res].add(t)
                    new[res].append(t)
        out = new
    return out


def _slot_pool(terms: dict, slot: str) -> list:
    if slot == AGT_OR_OBJ:
        return terms[AGT] + terms[OBJ]
    return terms[slot]


def ground_tuples(sig: Signature, rel: str, depth: int = GROUND_DEPTH) -> list:
    terms = ground_terms(sig, depth)
    return [tuple(t) for t in itertools.product(*[_slot_pool(terms, s) for s in sig.relations[rel]])]


# ---------------------------------------------------------------- action models


@dataclass
class UpdateResult:
    model: EpistemicModel | None
    index: dict          # (old world index, event) -> new world index
    pre_masks: dict      # event -> bitmask over old worlds


@dataclass(eq=False)
class ActionModel:
    """``(E, Q, pre, post)``.  Missing edge conditions default to ``x* = x*``
    on the diagonal and to falsum elsewhere."""

    name: str
    events: tuple
    pre: dict
    edges: dict = field(default_factory=dict)
    post: dict = field(default_factory=dict)
    designated: str | None = None
    schema: object = None
    args: tuple = ()

    def __post_init__(self):
        self.events = tuple(self.events)
        if not self.events:
            raise TermplanError("an action model needs at least one event")
        if len(set(self.events)) != len(self.events):
            raise TermplanError(f"duplicate events in {self.name}")
        pre = {}
        for e in self.events:
            pre[e] = self.pre.get(e, TOP)
        for e in self.pre:
            if e not in pre:
                raise TermplanError(f"precondition for unknown event {e}")
        self.pre = pre
        edges = {}
        for e in self.events:
            for f in self.events:
                default = Eq(XSTAR, XSTAR) if e == f else BOTTOM
                edges[(e, f)] = self.edges.get((e, f), default)
        for k in self.edges:
            if k not in edges:
                raise TermplanError(f"edge condition for unknown event pair {k}")
        self.edges = edges
        self.post = {e: dict(self.post.get(e, {})) for e in self.events}
        if self.designated is not None and self.designated not in self.events:
            raise TermplanError(f"designated event {self.designated} not in {self.name}")

    def __repr__(self):
        return f"ActionModel({self.name})"

    def product_with(self, M: EpistemicModel) -> UpdateResult:
        cache = M._products
        hit = cache.get(id(self))
        if hit is not None and hit[0] is self:
            return hit[1]
        res = _product(M, self)
        cache[id(self)] = (self, res)
        return res


def skip_action(name: str = "skip", event: str = "e") -> ActionModel:
    return ActionModel(name, (event,), {event: TOP}, designated=event)


def _product(M: EpistemicModel, A: ActionModel) -> UpdateResult:
    ev = Evaluator()
    n = len(M.worlds)
    pre_masks = {e: ev.mask(M, A.pre[e], {}) for e in A.events}
    new_worlds = []
    index = {}
    origin = []
    for i in range(n):
        for e in A.events:
            if pre_masks[e] >> i & 1:
                index[(i, e)] = len(new_worlds)
                new_worlds.append(f"{M.worlds[i]}.{e}")
                origin.append((i, e))
    if not new_worlds:
        return UpdateResult(None, index, pre_masks)

    succ = {}
    for a in M.agents:
        env = {XSTAR: a}
        qmask = {}
        for k, q in A.edges.items():
            qmask[k] = ev.mask(M, q, env) if not isinstance(q, Bottom) else 0
        old = M.succ[a]
        rows = []
        for (i, e) in origin:
            row = 0
            targets = old[i]
            for f in A.events:
                if not (qmask[(e, f)] >> i & 1):
                    continue
                for j in range(n):
                    if targets >> j & 1:
                        p = index.get((j, f))
                        if p is not None:
                            row |= 1 << p
            rows.append(row)
        succ[a] = rows

    cint = {c: [row[i] for (i, _) in origin] for c, row in M.cint.items()}
    fint = {fn: [row[i] for (i, _) in origin] for fn, row in M.fint.items()}

    touched = {}
    for e in A.events:
        for g in A.post[e]:
            touched.setdefault(g.rel, set()).add(e)
    rint = {}
    for r in set(M.rint) | set(touched):
        old = M.rint.get(r) or [frozenset()] * n
        evs = touched.get(r, ())
        changed = {e: _relation_after(M, A, e, r, ev) for e in evs}
        rint[r] = [changed[e][i] if e in changed else old[i] for (i, e) in origin]

    model = EpistemicModel.from_tables(M.sig, M.agents, M.objects, new_worlds,
                                       succ, cint, rint, fint)
    return UpdateResult(model, index, pre_masks)


def _relation_after(M, A, e, r, ev) -> list:
    """Extension of ``r`` at every world after event ``e`` (total post map)."""
    n = len(M.worlds)
    dom = {g: v for g, v in A.post[e].items() if g.rel == r}
    vals = {g: ev.mask(M, v, {}) for g, v in dom.items()}
    others = [t for t in ground_tuples(M.sig, r) if Atom(r, t) not in dom]
    old = M.rint.get(r) or [frozenset()] * n
    out = []
    for i in range(n):
        plus, minus = set(), set()
        for g, m in vals.items():
            d = _denote(M, g.args, i)
            if d is None:
                continue
            (plus if m >> i & 1 else minus).add(d)
        ident = set()
        for t in others:
            d = _denote(M, t, i)
            if d is not None:
                ident.add(d)
        cur = old[i]
        res = (set(cur) | plus) - minus
        res -= {d for d in ident if d not in cur}
        out.append(frozenset(res))
    return out


def _denote(M, terms, i):
    out = []
    for t in terms:
        d = _ext(M, t, i, {})
        if d is None:
            return None
        out.append(d)
    return tuple(out)


def product_update(M: EpistemicModel, A: ActionModel) -> EpistemicModel:
    res = A.product_with(M)
    if res.model is None:
        raise EmptyUpdate(f"no world satisfies any precondition of {A.name}")
    return res.model


def applicable(s: PointedModel, A: ActionModel, e: str) -> bool:
    res = A.product_with(s.model)
    return bool(res.pre_masks[e] >> s.model._wi(s.point) & 1)


def update_pointed(s: PointedModel, A: ActionModel, e: str) -> PointedModel:
    if e not in A.events:
        raise TermplanError(f"event {e} not in {A.name}")
    if not applicable(s, A, e):
        raise NotApplicable(f"{A.name}@{e} is not applicable at {s.point}")
    res = A.product_with(s.model)
    return PointedModel(res.model, res.model.worlds[res.index[(s.model._wi(s.point), e)]])


# ---------------------------------------------------------------- effective postconditions


def _s_and(items):
    out = []
    for f in items:
        if isinstance(f, Bottom):
            return BOTTOM
        if isinstance(f, Top):
            continue
        out.append(f)
    return conj(out)


def _s_or(items):
    out = []
    for f in items:
        if isinstance(f, Top):
            return TOP
        if isinstance(f, Bottom):
            continue
        out.append(f)
    return disj(out)


def _s_not(f):
    if isinstance(f, Top):
        return BOTTOM
    if isinstance(f, Bottom):
        return TOP
    return Not(f)


def _eqs(ts, gs):
    return _s_and(TOP if t == g else Eq(t, g) for t, g in zip(ts, gs))


def effective_post(A: ActionModel, e: str, atom: Atom, sig: Signature | None,
                   others=None) -> object:
    """A static-plus-dynamic formula true at ``w`` iff ``atom`` holds at ``(w,e)``
    (given ``pre(e)`` at ``w``).  Accounts for several ground atoms that
    denote the same tuple: a false postcondition on any of them removes it.
    ``others`` overrides the ground tuples outside ``dom(post(e))``."""
    r = atom.rel
    dom = [(g, v) for g, v in A.post[e].items() if g.rel == r]
    if not dom:
        return atom
    plus = _s_or(_s_and((_eqs(atom.args, g.args), v)) for g, v in dom)
    minus = _s_or(_s_and((_eqs(atom.args, g.args), _s_not(v))) for g, v in dom)
    if others is None:
        keys = {g for g, _ in dom}
        others = [t for t in ground_tuples(sig, r) if Atom(r, t) not in keys]
    ident = _s_or(_eqs(atom.args, t) for t in others)
    return _s_and((_s_or((atom, plus)), _s_not(minus), _s_or((atom, _s_not(ident)))))


def post_template(A: ActionModel, e: str, rel: str, arity: int) -> object:
    """Effective postcondition on placeholder variables; an upper bound for
    the complexity of every concrete instance."""
    vs = tuple(Var(f"_p{i}", OBJ) for i in range(arity))
    us = [tuple(Var(f"_q{k}_{i}", OBJ) for i in range(arity)) for k in range(2)]
    return effective_post(A, e, Atom(rel, vs), None, others=us)


# ---------------------------------------------------------------- validation


def validate_action(A, sig: Signature) -> list:
    out = []
    is_schema = isinstance(A, ActionSchema)
    params = set(A.params) if is_schema else set()
    for e in A.events:
        for p, msg in well_formed(A.pre[e], sig):
            out.append(f"pre({e}) {p}: {msg}")
        extra = free_vars(A.pre[e]) - params
        if extra:
            out.append(f"pre({e}) has free variables {sorted(v.name for v in extra)}")
        for g, v in A.post[e].items():
            if g.rel == EQ:
                out.append(f"post({e}) assigns equality atom {g}; equality must stay fixed")
            for p, msg in well_formed(g, sig):
                out.append(f"post({e}) key {g}: {msg}")
            gvars = set()
            for t in g.args:
                gvars |= term_vars(t)
            if not is_schema and gvars:
                out.append(f"post({e}) key {g} is not ground")
            if is_schema and gvars - params:
                out.append(f"post({e}) key {g} uses variables outside the parameter list")
            for p, msg in well_formed(v, sig):
                out.append(f"post({e})({g}) {p}: {msg}")
            if free_vars(v) - params:
                out.append(f"post({e})({g}) has free variables outside the parameter list")
    for (e, f), q in A.edges.items():
        for p, msg in well_formed(q, sig):
            out.append(f"Q({e},{f}) {p}: {msg}")
        extra = free_vars(q) - params - {XSTAR}
        if extra:
            out.append(f"Q({e},{f}) has free variables other than x*: {sorted(v.name for v in extra)}")
    if is_schema:
        if XSTAR in params:
            out.append("x* cannot be a schema parameter")
        if len({p.name for p in A.params}) != len(A.params):
            out.append("duplicate parameter names")
    return out


# ---------------------------------------------------------------- schemas


@dataclass(eq=False)
class ActionSchema:
    name: str
    params: tuple
    events: tuple
    pre: dict
    edges: dict = field(default_factory=dict)
    post: dict = field(default_factory=dict)
    designated: str | None = None
    param_types: tuple | None = None

    def __post_init__(self):
        # reuse the defaulting logic of ActionModel
        proto = ActionModel(self.name, self.events, self.pre, self.edges, self.post, self.designated)
        self.events, self.pre, self.edges, self.post = proto.events, proto.pre, proto.edges, proto.post
        self.params = tuple(self.params)
        if self.param_types is not None:
            self.param_types = tuple(self.param_types)
            if len(self.param_types) != len(self.params):
                raise TermplanError("param_types must match params")

    def __repr__(self):
        return f"ActionSchema({self.name}/{len(self.params)})"

    def same_structure(self, other: "ActionSchema") -> bool:
        return (self.name, self.params, self.events, self.pre, self.edges, self.post,
                self.designated, self.param_types) == (
                other.name, other.params, other.events, other.pre, other.edges, other.post,
                other.designated, other.param_types)


def instantiate(S: ActionSchema, sigma, sig: Signature | None = None) -> ActionModel:
    """Ground action induced by ``sigma`` (a dict from parameters, or a
    sequence of constants in parameter order)."""
    if not isinstance(sigma, dict):
        sigma = list(sigma)
        if len(sigma) != len(S.params):
            raise IncompleteSubstitution(f"{S.name} takes {len(S.params)} arguments, got {len(sigma)}")
        sigma = dict(zip(S.params, sigma))
    mapping = {}
    for p in S.params:
        key = p if p in sigma else p.name
        if key not in sigma:
            raise IncompleteSubstitution(f"parameter {p.name} of {S.name} is not mapped")
        c = sigma[key]
        mapping[p] = Const(c) if isinstance(c, str) else c
    if sig is not None:
        for p, t in mapping.items():
            if sort_of(t, sig) != p.sort:
                raise SortMismatch(f"{t} cannot instantiate {p.name}:{p.sort}")
    pre = {e: subst_many(f, mapping) for e, f in S.pre.items()}
    edges = {k: subst_many(q, mapping) for k, q in S.edges.items()}
    post = {}
    for e, table in S.post.items():
        new = {}
        for g, v in table.items():
            key = Atom(g.rel, tuple(subst_term(t, mapping) for t in g.args))
            val = subst_many(v, mapping)
            if key in new and new[key] != val:
                # two schema atoms collapse onto one ground atom: keep both demands
                val = _s_and((new[key], val))
            new[key] = val
        post[e] = new
    args = tuple(str(mapping[p]) for p in S.params)
    name = f"{S.name}({','.join(args)})"
    return ActionModel(name, S.events, pre, edges, post, S.designated, schema=S, args=args)


def candidate_constants(S: ActionSchema, sig: Signature, types=None) -> list:
    """Per-parameter candidate constant lists, in signature declaration order."""
    out = []
    for i, p in enumerate(S.params):
        pool = [c for c, s in sig.constants.items() if s == p.sort]
        if types is not None and S.param_types is not None and S.param_types[i] is not None:
            pool = [c for c in pool if types.constant_has_type(c, S.param_types[i])]
        out.append(pool)
    return out


def ground_all(S: ActionSchema, sig: Signature, types=None) -> list:
    pools = candidate_constants(S, sig, types)
    return [instantiate(S, combo) for combo in itertools.product(*pools)]


# ---------------------------------------------------------------- composition


def compose(A1: ActionModel, e1: str, A2: ActionModel, e2: str, sig: Signature,
            mode: str = "sound"):
    """``(A1,e1) o (A2,e2)``; returns ``(A, (e1 . e2))``.

    ``mode="printed"`` uses the textbook postcondition merge, which ignores
    aliasing between ground atoms; ``"sound"`` recomputes each touched atom
    through the effective postcondition of ``A2`` evaluated after ``A1``.
    """
    events = []
    name_of = {}
    for a in A1.events:
        for b in A2.events:
            nm = f"{a}.{b}"
            name_of[(a, b)] = nm
            events.append(nm)
    pre = {}
    edges = {}
    post = {}
    for a in A1.events:
        for b in A2.events:
            nm = name_of[(a, b)]
            pre[nm] = _s_and((A1.pre[a], _dyn(A1, a, A2.pre[b])))
            for a2 in A1.events:
                for b2 in A2.events:
                    q1, q2 = A1.edges[(a, a2)], A2.edges[(b, b2)]
                    if isinstance(q1, Bottom):
                        q = BOTTOM
                    else:
                        q = _s_and((q1, _dyn(A1, a, q2)))
                    edges[(nm, name_of[(a2, b2)])] = q
            post[nm] = _compose_post(A1, a, A2, b, sig, mode)
    A = ActionModel(f"({A1.name}@{e1};{A2.name}@{e2})", events, pre, edges, post,
                    designated=name_of[(e1, e2)])
    return A, name_of[(e1, e2)]


def _dyn(A, e, f):
    if isinstance(f, Top):
        return TOP
    return Dyn(A, e, f)


def _compose_post(A1, a, A2, b, sig, mode):
    p1, p2 = A1.post[a], A2.post[b]
    if mode == "printed":
        out = dict(p1)
        for g, v in p2.items():
            out[g] = _dyn(A1, a, v)
        return out
    if mode != "sound":
        raise ValueError(f"unknown composition mode {mode}")
    rels2 = {g.rel for g in p2}
    out = {g: v for g, v in p1.items() if g.rel not in rels2}
    for r in sorted(rels2):
        for t in ground_tuples(sig, r):
            g = Atom(r, t)
            out[g] = _dyn(A1, a, effective_post(A2, b, g, sig))
    return out


# ---------------------------------------------------------------- relational emulation


def from_relational(name, events, relations: dict, pre: dict, post: dict | None = None,
                    designated=None) -> ActionModel:
    """Edge-conditioned model emulating a relation-indexed action model.

    ``relations`` maps an agent constant name to a set of event pairs; the
    edge condition for ``(e,f)`` is the disjunction of ``x* = a`` over the
    agents ``a`` whose relation contains the pair.
    """
    edges = {}
    for e in events:
        for f in events:
            names = [a for a in sorted(relations) if (e, f) in relations[a]]
            edges[(e, f)] = disj(Eq(XSTAR, Const(a)) for a in names)
    return ActionModel(name, events, pre, edges, post or {}, designated)
