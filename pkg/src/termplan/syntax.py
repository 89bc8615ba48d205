"""Typed vocabulary, terms and formula trees for static and dynamic term-modal logic.

Formulas are immutable dataclasses.  Derived connectives (Or, Implies, Iff,
Exists, Neq) are kept as their own nodes so that printed output matches what
the user wrote; :func:`normalize` rewrites them into the core basis
{Atom, Top, Bottom, Not, And, Knows, Forall, Dyn}.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator

AGT = "agt"
OBJ = "obj"
AGT_OR_OBJ = "agt_or_obj"
SORTS = (AGT, OBJ)
EQ = "="


class TermplanError(Exception):
    """Base class for every error raised by this package."""


class UnknownSymbol(TermplanError):
    pass


class ArityMismatch(TermplanError):
    pass


class ArgumentSortMismatch(TermplanError):
    pass


class SortMismatch(TermplanError):
    pass


def sort_accepts(slot: str, sort: str) -> bool:
    return slot == AGT_OR_OBJ or slot == sort


# ---------------------------------------------------------------- terms


@dataclass(frozen=True)
class Var:
    name: str
    sort: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Const:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Apply:
    func: str
    args: tuple

    def __str__(self):
        return f"{self.func}({','.join(str(a) for a in self.args)})"


XSTAR = Var("x*", AGT)


def term_vars(t) -> set:
    if isinstance(t, Var):
        return {t}
    if isinstance(t, Apply):
        out = set()
        for a in t.args:
            out |= term_vars(a)
        return out
    return set()


def is_ground_term(t) -> bool:
    return not term_vars(t)


def subst_term(t, mapping: dict):
    if isinstance(t, Var):
        return mapping.get(t, t)
    if isinstance(t, Apply):
        return Apply(t.func, tuple(subst_term(a, mapping) for a in t.args))
    return t


# ---------------------------------------------------------------- signature


@dataclass
class Signature:
    constants: dict = field(default_factory=dict)   # name -> sort
    relations: dict = field(default_factory=dict)   # name -> tuple of slot sorts
    functions: dict = field(default_factory=dict)   # name -> (arg slots, result sort)
    variables: dict = field(default_factory=dict)   # declared variables, name -> sort

    def __post_init__(self):
        self.relations = dict(self.relations)
        self.relations.setdefault(EQ, (AGT_OR_OBJ, AGT_OR_OBJ))
        if self.relations[EQ] != (AGT_OR_OBJ, AGT_OR_OBJ):
            raise ArgumentSortMismatch("equality must have type (agt_or_obj, agt_or_obj)")
        for name, s in self.constants.items():
            if s not in SORTS:
                raise SortMismatch(f"constant {name} has sort {s}")
        for name, (_, res) in self.functions.items():
            if res not in SORTS:
                raise SortMismatch(f"function {name} has result sort {res}")

    def constants_of(self, sort: str) -> list:
        return [c for c, s in self.constants.items() if s == sort]

    def fresh_var(self, base: Var, avoid: Iterable = ()) -> Var:
        return fresh_var(base, set(avoid) | set(self.variables))


def fresh_var(base: Var, avoid: Iterable) -> Var:
    """A variable with the same sort as ``base`` whose name is not in ``avoid``."""
    taken = {v.name if isinstance(v, Var) else v for v in avoid}
    name = base.name.rstrip("'") if base.name != "x*" else "x"
    cand = name + "'"
    while cand in taken:
        cand += "'"
    return Var(cand, base.sort)


def sort_of(t, sig: Signature) -> str:
    if isinstance(t, Var):
        if t.sort not in SORTS:
            raise SortMismatch(f"variable {t.name} has illegal sort {t.sort}")
        return t.sort
    if isinstance(t, Const):
        if t.name not in sig.constants:
            raise UnknownSymbol(f"unknown constant {t.name}")
        return sig.constants[t.name]
    if isinstance(t, Apply):
        if t.func not in sig.functions:
            raise UnknownSymbol(f"unknown function {t.func}")
        slots, res = sig.functions[t.func]
        if len(slots) != len(t.args):
            raise ArityMismatch(f"{t.func} expects {len(slots)} arguments, got {len(t.args)}")
        for i, (slot, a) in enumerate(zip(slots, t.args)):
            s = sort_of(a, sig)
            if not sort_accepts(slot, s):
                raise ArgumentSortMismatch(f"argument {i + 1} of {t.func} must be {slot}, got {s}")
        return res
    raise TypeError(f"not a term: {t!r}")


# ---------------------------------------------------------------- formulas


class Formula:
    """Marker base class; concrete nodes are frozen dataclasses below."""

    __slots__ = ()

    def __invert__(self):
        return Not(self)

    def __and__(self, other):
        return And((self, other))

    def __or__(self, other):
        return Or((self, other))

    def __rshift__(self, other):
        return Implies(self, other)

    def __str__(self):
        return to_infix(self)


@dataclass(frozen=True)
class Atom(Formula):
    rel: str
    args: tuple = ()


@dataclass(frozen=True)
class Top(Formula):
    pass


@dataclass(frozen=True)
class Bottom(Formula):
    pass


@dataclass(frozen=True)
class Not(Formula):
    sub: Formula


@dataclass(frozen=True)
class And(Formula):
    subs: tuple


@dataclass(frozen=True)
class Or(Formula):
    subs: tuple


@dataclass(frozen=True)
class Implies(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Iff(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Knows(Formula):
    agent: object
    sub: Formula


@dataclass(frozen=True)
class Forall(Formula):
    var: Var
    sub: Formula


@dataclass(frozen=True)
class Exists(Formula):
    var: Var
    sub: Formula


@dataclass(frozen=True)
class Neq(Formula):
    left: object
    right: object


@dataclass(frozen=True)
class Dyn(Formula):
    """``[A,e] sub``.  ``action`` is an ActionModel object (compared by identity)."""

    action: object
    event: str
    sub: Formula


TOP = Top()
BOTTOM = Bottom()


def Eq(a, b) -> Atom:
    return Atom(EQ, (a, b))


def conj(items) -> Formula:
    items = tuple(items)
    if not items:
        return TOP
    if len(items) == 1:
        return items[0]
    return And(items)


def disj(items) -> Formula:
    items = tuple(items)
    if not items:
        return BOTTOM
    if len(items) == 1:
        return items[0]
    return Or(items)


def forall(vs, body) -> Formula:
    for v in reversed(list(vs)):
        body = Forall(v, body)
    return body


def exists(vs, body) -> Formula:
    for v in reversed(list(vs)):
        body = Exists(v, body)
    return body


def children(f) -> tuple:
    if isinstance(f, (Not, Knows, Forall, Exists, Dyn)):
        return (f.sub,)
    if isinstance(f, (And, Or)):
        return f.subs
    if isinstance(f, (Implies, Iff)):
        return (f.left, f.right)
    return ()


def subformulas(f) -> Iterator:
    yield f
    for c in children(f):
        yield from subformulas(c)


def formula_terms(f) -> tuple:
    if isinstance(f, Atom):
        return f.args
    if isinstance(f, Neq):
        return (f.left, f.right)
    if isinstance(f, Knows):
        return (f.agent,)
    return ()


def free_vars(f) -> frozenset:
    """Free variables, modal indices included.  Action models are closed."""
    if isinstance(f, (Atom, Neq)):
        out = set()
        for t in formula_terms(f):
            out |= term_vars(t)
        return frozenset(out)
    if isinstance(f, (Top, Bottom)):
        return frozenset()
    if isinstance(f, Knows):
        return free_vars(f.sub) | frozenset(term_vars(f.agent))
    if isinstance(f, (Forall, Exists)):
        return free_vars(f.sub) - {f.var}
    out = frozenset()
    for c in children(f):
        out |= free_vars(c)
    return out


def all_var_names(f) -> set:
    names = set()
    for g in subformulas(f):
        for t in formula_terms(g):
            names |= {v.name for v in term_vars(t)}
        if isinstance(g, (Forall, Exists)):
            names.add(g.var.name)
    return names


def is_static(f) -> bool:
    return not any(isinstance(g, Dyn) for g in subformulas(f))


def classify(f) -> dict:
    fv = free_vars(f)
    atomic = isinstance(f, Atom)
    return {
        "is_sentence": not fv,
        "is_ground_atom": atomic and not fv,
        "is_free_atom": atomic and bool(fv),
        "is_static": is_static(f),
    }


# ---------------------------------------------------------------- substitution


def substitute(f, x: Var, t) -> Formula:
    """Capture-avoiding ``f(x -> t)``; bound variables are renamed when needed."""
    return subst_many(f, {x: t})


def subst_many(f, mapping: dict, sig: Signature | None = None) -> Formula:
    """Simultaneous capture-avoiding substitution of variables by terms.

    When ``sig`` is given every replacement is sort checked.
    """
    for x, t in mapping.items():
        if isinstance(t, Var):
            s = t.sort
        elif sig is not None:
            s = sort_of(t, sig)
        else:
            s = None
        if s is not None and s != x.sort:
            raise SortMismatch(f"cannot substitute {t} of sort {s} for {x.name}:{x.sort}")
    mapping = {x: t for x, t in mapping.items() if x != t}
    if not mapping:
        return f
    return _subst(f, mapping)


def _subst(f, mapping):
    if not mapping:
        return f
    if isinstance(f, Atom):
        return Atom(f.rel, tuple(subst_term(a, mapping) for a in f.args))
    if isinstance(f, Neq):
        return Neq(subst_term(f.left, mapping), subst_term(f.right, mapping))
    if isinstance(f, (Top, Bottom)):
        return f
    if isinstance(f, Not):
        return Not(_subst(f.sub, mapping))
    if isinstance(f, And):
        return And(tuple(_subst(s, mapping) for s in f.subs))
    if isinstance(f, Or):
        return Or(tuple(_subst(s, mapping) for s in f.subs))
    if isinstance(f, Implies):
        return Implies(_subst(f.left, mapping), _subst(f.right, mapping))
    if isinstance(f, Iff):
        return Iff(_subst(f.left, mapping), _subst(f.right, mapping))
    if isinstance(f, Knows):
        return Knows(subst_term(f.agent, mapping), _subst(f.sub, mapping))
    if isinstance(f, Dyn):
        return Dyn(f.action, f.event, _subst(f.sub, mapping))
    if isinstance(f, (Forall, Exists)):
        fv = free_vars(f.sub)
        inner = {x: t for x, t in mapping.items() if x != f.var and x in fv}
        if not inner:
            return f
        incoming = set()
        for t in inner.values():
            incoming |= {v.name for v in term_vars(t)}
        var = f.var
        body = f.sub
        if var.name in incoming:
            avoid = incoming | all_var_names(body) | {x.name for x in inner}
            new = fresh_var(var, avoid)
            body = _subst(body, {var: new})
            var = new
        return type(f)(var, _subst(body, inner))
    raise TypeError(f"not a formula: {f!r}")


# ---------------------------------------------------------------- normalization


def normalize(f) -> Formula:
    """Rewrite derived connectives into the core basis."""
    if isinstance(f, (Atom, Top, Bottom)):
        return f
    if isinstance(f, Neq):
        return Not(Eq(f.left, f.right))
    if isinstance(f, Not):
        return Not(normalize(f.sub))
    if isinstance(f, And):
        return And(tuple(normalize(s) for s in f.subs))
    if isinstance(f, Or):
        return Not(And(tuple(Not(normalize(s)) for s in f.subs)))
    if isinstance(f, Implies):
        return Not(And((normalize(f.left), Not(normalize(f.right)))))
    if isinstance(f, Iff):
        a, b = normalize(f.left), normalize(f.right)
        return And((Not(And((a, Not(b)))), Not(And((b, Not(a))))))
    if isinstance(f, Knows):
        return Knows(f.agent, normalize(f.sub))
    if isinstance(f, Forall):
        return Forall(f.var, normalize(f.sub))
    if isinstance(f, Exists):
        return Not(Forall(f.var, Not(normalize(f.sub))))
    if isinstance(f, Dyn):
        return Dyn(f.action, f.event, normalize(f.sub))
    raise TypeError(f"not a formula: {f!r}")


# ---------------------------------------------------------------- well-formedness


def well_formed(f, sig: Signature, path: tuple = ()) -> list:
    """List of ``(path, message)`` violations; empty means well-formed."""
    out = []

    def term_sort(t, where):
        try:
            return sort_of(t, sig)
        except TermplanError as exc:
            out.append((where, str(exc)))
            return None

    if isinstance(f, Atom):
        if f.rel not in sig.relations:
            out.append((path, f"unknown relation {f.rel}"))
            return out
        slots = sig.relations[f.rel]
        if len(slots) != len(f.args):
            out.append((path, f"{f.rel} expects {len(slots)} arguments, got {len(f.args)}"))
            return out
        for i, (slot, a) in enumerate(zip(slots, f.args)):
            s = term_sort(a, path)
            if s is not None and not sort_accepts(slot, s):
                out.append((path, f"argument {i + 1} of {f.rel} must be {slot}, got {s}"))
        return out
    if isinstance(f, Neq):
        term_sort(f.left, path)
        term_sort(f.right, path)
        return out
    if isinstance(f, Knows):
        s = term_sort(f.agent, path)
        if s is not None and s != AGT:
            out.append((path, f"modal index {f.agent} has sort {s}, expected agt"))
    if isinstance(f, (Forall, Exists)):
        if f.var.sort not in SORTS:
            out.append((path, f"bound variable {f.var.name} has illegal sort {f.var.sort}"))
        declared = sig.variables.get(f.var.name)
        if declared is not None and declared != f.var.sort:
            out.append((path, f"variable {f.var.name} declared {declared}, bound as {f.var.sort}"))
    if isinstance(f, Dyn):
        events = getattr(f.action, "events", ())
        if f.event not in events:
            out.append((path, f"event {f.event} not in action {getattr(f.action, 'name', '?')}"))
    for i, c in enumerate(children(f)):
        out.extend(well_formed(c, sig, path + (i,)))
    return out


# ---------------------------------------------------------------- printing


def term_str(t) -> str:
    return str(t)


_PREC = {"iff": 1, "imp": 2, "or": 3, "and": 4, "un": 5}


def to_infix(f, _ctx: int = 0) -> str:
    """Infix rendering accepted by :func:`termplan.dsl.parse_infix`."""

    def wrap(s, p):
        return f"({s})" if p < _ctx else s

    if isinstance(f, Atom):
        if f.rel == EQ:
            return f"{term_str(f.args[0])} = {term_str(f.args[1])}"
        if not f.args:
            return f.rel
        return f"{f.rel}({','.join(term_str(a) for a in f.args)})"
    if isinstance(f, Neq):
        return f"{term_str(f.left)} != {term_str(f.right)}"
    if isinstance(f, Top):
        return "true"
    if isinstance(f, Bottom):
        return "false"
    if isinstance(f, Not):
        inner = to_infix(f.sub, _PREC["un"])
        if isinstance(f.sub, Atom) and f.sub.rel == EQ:
            inner = f"({inner})"
        return "~" + inner
    if isinstance(f, And):
        return wrap(" & ".join(to_infix(s, _PREC["and"] + 1) for s in f.subs), _PREC["and"])
    if isinstance(f, Or):
        return wrap(" | ".join(to_infix(s, _PREC["or"] + 1) for s in f.subs), _PREC["or"])
    if isinstance(f, Implies):
        s = f"{to_infix(f.left, _PREC['imp'] + 1)} -> {to_infix(f.right, _PREC['imp'])}"
        return wrap(s, _PREC["imp"])
    if isinstance(f, Iff):
        s = f"{to_infix(f.left, _PREC['iff'] + 1)} <-> {to_infix(f.right, _PREC['iff'] + 1)}"
        return wrap(s, _PREC["iff"])
    if isinstance(f, Knows):
        inner = to_infix(f.sub, _PREC["un"])
        if isinstance(f.sub, Atom) and f.sub.rel == EQ:
            inner = f"({inner})"
        return f"K[{term_str(f.agent)}] {inner}"
    if isinstance(f, (Forall, Exists)):
        q = "forall" if isinstance(f, Forall) else "exists"
        return wrap(f"{q} {f.var.name}:{f.var.sort}. {to_infix(f.sub, 0)}", 0)
    if isinstance(f, Dyn):
        inner = to_infix(f.sub, _PREC["un"])
        if isinstance(f.sub, Atom) and f.sub.rel == EQ:
            inner = f"({inner})"
        return f"[{getattr(f.action, 'name', 'A')}@{f.event}] {inner}"
    raise TypeError(f"not a formula: {f!r}")
