"""First-order Kripke models and the satisfaction relation.

Truth is computed set-wise: :func:`truth_mask` returns an integer bitmask over
the model's worlds (bit ``i`` is world ``model.worlds[i]``).  Dynamic
modalities are evaluated by building the product update lazily; the update
itself lives in :mod:`termplan.dynamics` and is reached through the action
object, which keeps this module free of an import cycle.
"""

from __future__ import annotations

from dataclasses import dataclass

from .syntax import (
    AGT, OBJ, EQ, AGT_OR_OBJ, Signature, TermplanError, Var, Const, Apply,
    Atom, Top, Bottom, Not, And, Or, Implies, Iff, Knows, Forall, Exists, Neq, Dyn,
    free_vars, sort_accepts, children,
)


class UnboundVariable(TermplanError):
    pass


class UndefinedModalIndex(TermplanError):
    pass


class ModelError(TermplanError):
    pass


class EpistemicModel:
    """A finite model ``(D, W, R, I)`` over a signature.

    ``access`` maps each agent to an iterable of world pairs.  ``constants``
    maps a constant to either one element (rigid) or a dict world -> element.
    ``relations`` maps a relation to a dict world -> iterable of tuples; a
    relation missing from the dict is empty everywhere.  ``functions`` maps a
    function symbol to a dict world -> {argument tuple: value}.
    """

    def __init__(self, sig: Signature, agents, objects, worlds, access,
                 constants, relations=None, functions=None):
        self.sig = sig
        self.agents = tuple(agents)
        self.objects = tuple(objects)
        self.worlds = tuple(worlds)
        if len(set(self.worlds)) != len(self.worlds):
            raise ModelError("duplicate world names")
        if set(self.agents) & set(self.objects):
            raise ModelError("agent and object names must be disjoint")
        self.windex = {w: i for i, w in enumerate(self.worlds)}
        self.elem_sort = {a: AGT for a in self.agents}
        self.elem_sort.update({o: OBJ for o in self.objects})
        self.full = (1 << len(self.worlds)) - 1
        n = len(self.worlds)

        self.succ = {}
        for a in self.agents:
            rows = [0] * n
            for (u, v) in access.get(a, ()):
                rows[self._wi(u)] |= 1 << self._wi(v)
            self.succ[a] = rows
        for a in access:
            if a not in self.elem_sort or self.elem_sort[a] != AGT:
                raise ModelError(f"accessibility given for non-agent {a}")

        self.cint = {}
        for c, val in constants.items():
            if isinstance(val, dict):
                row = [None] * n
                for w, d in val.items():
                    row[self._wi(w)] = d
                if any(d is None for d in row):
                    raise ModelError(f"constant {c} not interpreted at every world")
            else:
                row = [val] * n
            self.cint[c] = row

        self.rint = {}
        for r, per_world in (relations or {}).items():
            row = [frozenset()] * n
            for w, tuples in per_world.items():
                row[self._wi(w)] = frozenset(tuple(t) for t in tuples)
            self.rint[r] = row

        self.fint = {}
        self.raw_function_pairs = {}
        for fn, per_world in (functions or {}).items():
            row = [dict() for _ in range(n)]
            for w, table in per_world.items():
                items = table.items() if isinstance(table, dict) else table
                cell = row[self._wi(w)]
                for k, v in items:
                    k = tuple(k)
                    if k in cell and cell[k] != v:
                        self.raw_function_pairs.setdefault(fn, []).append((w, k, cell[k]))
                        self.raw_function_pairs[fn].append((w, k, v))
                    cell[k] = v
            self.fint[fn] = row

        self._products = {}

    @classmethod
    def from_tables(cls, sig, agents, objects, worlds, succ, cint, rint, fint):
        """Build directly from the internal index-based tables (no copying)."""
        self = cls.__new__(cls)
        self.sig = sig
        self.agents = tuple(agents)
        self.objects = tuple(objects)
        self.worlds = tuple(worlds)
        if len(set(self.worlds)) != len(self.worlds):
            raise ModelError("duplicate world names")
        self.windex = {w: i for i, w in enumerate(self.worlds)}
        self.elem_sort = {a: AGT for a in self.agents}
        self.elem_sort.update({o: OBJ for o in self.objects})
        self.full = (1 << len(self.worlds)) - 1
        self.succ = succ
        self.cint = cint
        self.rint = rint
        self.fint = fint
        self.raw_function_pairs = {}
        self._products = {}
        return self

    def _wi(self, w):
        try:
            return self.windex[w]
        except KeyError:
            raise ModelError(f"unknown world {w}") from None

    # convenient views --------------------------------------------------
    def domain(self, sort: str) -> tuple:
        return self.agents if sort == AGT else self.objects

    def successors(self, agent, w) -> list:
        row = self.succ[agent][self._wi(w)]
        return [self.worlds[j] for j in range(len(self.worlds)) if row >> j & 1]

    def pairs(self, agent) -> set:
        out = set()
        for i, row in enumerate(self.succ[agent]):
            for j in range(len(self.worlds)):
                if row >> j & 1:
                    out.add((self.worlds[i], self.worlds[j]))
        return out

    def const_value(self, c, w):
        return self.cint[c][self._wi(w)]

    def rel_ext(self, r, w) -> frozenset:
        if r not in self.rint:
            return frozenset()
        return self.rint[r][self._wi(w)]

    def mask_to_worlds(self, mask: int) -> list:
        return [w for i, w in enumerate(self.worlds) if mask >> i & 1]

    def __repr__(self):
        return f"EpistemicModel(worlds={list(self.worlds)}, agents={list(self.agents)}, objects={list(self.objects)})"


@dataclass(frozen=True)
class PointedModel:
    model: EpistemicModel
    point: str

    def __post_init__(self):
        if self.point not in self.model.windex:
            raise ModelError(f"point {self.point} is not a world")


# ---------------------------------------------------------------- terms


def _ext(M: EpistemicModel, t, wi: int, env: dict):
    if isinstance(t, Var):
        try:
            return env[t]
        except KeyError:
            raise UnboundVariable(f"variable {t.name} is unbound") from None
    if isinstance(t, Const):
        row = M.cint.get(t.name)
        if row is None:
            raise ModelError(f"constant {t.name} has no interpretation")
        return row[wi]
    if isinstance(t, Apply):
        args = []
        for a in t.args:
            d = _ext(M, a, wi, env)
            if d is None:
                return None
            args.append(d)
        row = M.fint.get(t.func)
        if row is None:
            return None
        return row[wi].get(tuple(args))
    raise TypeError(f"not a term: {t!r}")


def extension(t, M: EpistemicModel, w, v: dict | None = None):
    """Denotation of ``t`` at ``w``; ``None`` when a function value is undefined."""
    return _ext(M, t, M._wi(w), dict(v or {}))


# ---------------------------------------------------------------- evaluation


class Evaluator:
    """Memoizing evaluator.  Memo keys use object ids, so an evaluator must
    not outlive the formulas it was used on; create one per query."""

    def __init__(self):
        self.memo = {}
        self.fv = {}

    def _free_set(self, f):
        k = id(f)
        r = self.fv.get(k)
        if r is None:
            if isinstance(f, (Forall, Exists)):
                fs = self._free_set(f.sub) - {f.var}
            elif isinstance(f, Knows):
                fs = self._free_set(f.sub) | free_vars(Atom("", (f.agent,)))
            elif isinstance(f, (Atom, Neq, Top, Bottom)):
                fs = free_vars(f)
            else:
                fs = frozenset()
                for c in children(f):
                    fs |= self._free_set(c)
            r = (f, fs, tuple(sorted(fs, key=lambda v: (v.name, v.sort))))
            self.fv[k] = r
        return r[1]

    def _free(self, f):
        self._free_set(f)
        return self.fv[id(f)][2]

    def mask(self, M: EpistemicModel, f, env: dict) -> int:
        fv = self._free(f)
        try:
            key = (id(M), id(f), tuple(env[v] for v in fv))
        except KeyError as exc:
            raise UnboundVariable(f"variable {exc.args[0].name} is unbound") from None
        hit = self.memo.get(key)
        if hit is not None:
            return hit[0]
        m = self._mask(M, f, env)
        self.memo[key] = (m, f, M)
        return m

    def _mask(self, M, f, env):
        n = len(M.worlds)
        if isinstance(f, Atom):
            m = 0
            if f.rel == EQ:
                a, b = f.args
                for i in range(n):
                    x = _ext(M, a, i, env)
                    if x is not None and x == _ext(M, b, i, env):
                        m |= 1 << i
                return m
            row = M.rint.get(f.rel)
            if row is None:
                return 0
            for i in range(n):
                tup = []
                for a in f.args:
                    d = _ext(M, a, i, env)
                    if d is None:
                        break
                    tup.append(d)
                else:
                    if tuple(tup) in row[i]:
                        m |= 1 << i
            return m
        if isinstance(f, Top):
            return M.full
        if isinstance(f, Bottom):
            return 0
        if isinstance(f, Neq):
            return M.full & ~self._mask(M, Atom(EQ, (f.left, f.right)), env)
        if isinstance(f, Not):
            return M.full & ~self.mask(M, f.sub, env)
        if isinstance(f, And):
            m = M.full
            for s in f.subs:
                m &= self.mask(M, s, env)
                if not m:
                    break
            return m
        if isinstance(f, Or):
            m = 0
            for s in f.subs:
                m |= self.mask(M, s, env)
                if m == M.full:
                    break
            return m
        if isinstance(f, Implies):
            a = self.mask(M, f.left, env)
            if not a:
                return M.full
            return (M.full & ~a) | self.mask(M, f.right, env)
        if isinstance(f, Iff):
            a = self.mask(M, f.left, env)
            b = self.mask(M, f.right, env)
            return M.full & ~(a ^ b)
        if isinstance(f, Knows):
            sub = self.mask(M, f.sub, env)
            bad = M.full & ~sub
            m = 0
            for i in range(n):
                ag = _ext(M, f.agent, i, env)
                rows = M.succ.get(ag) if ag is not None else None
                if rows is None:
                    raise UndefinedModalIndex(
                        f"modal index {f.agent} does not denote an agent at {M.worlds[i]}")
                if not rows[i] & bad:
                    m |= 1 << i
            return m
        if isinstance(f, (Forall, Exists)):
            univ = isinstance(f, Forall)
            m = M.full if univ else 0
            saved = env.get(f.var, _MISSING)
            try:
                for d in M.domain(f.var.sort):
                    env[f.var] = d
                    s = self.mask(M, f.sub, env)
                    if univ:
                        m &= s
                        if not m:
                            break
                    else:
                        m |= s
                        if m == M.full:
                            break
            finally:
                if saved is _MISSING:
                    env.pop(f.var, None)
                else:
                    env[f.var] = saved
            return m
        if isinstance(f, Dyn):
            upd = f.action.product_with(M)
            pre = upd.pre_masks[f.event]
            m = M.full & ~pre
            if not pre:
                return m
            sub = self.mask(upd.model, f.sub, env)
            for i in range(n):
                if pre >> i & 1 and sub >> upd.index[(i, f.event)] & 1:
                    m |= 1 << i
            return m
        raise TypeError(f"not a formula: {f!r}")


_MISSING = object()


def truth_mask(M: EpistemicModel, f, v: dict | None = None) -> int:
    return Evaluator().mask(M, f, dict(v or {}))


def satisfies(M: EpistemicModel, w, v, f) -> bool:
    """``M, w |=_v f``.  ``v`` maps Var objects to domain elements."""
    return bool(truth_mask(M, f, v) >> M._wi(w) & 1)


def holds(s: PointedModel, f, v=None) -> bool:
    return satisfies(s.model, s.point, v, f)


def valuations(M: EpistemicModel, variables):
    variables = sorted(variables, key=lambda x: (x.name, x.sort))
    if not variables:
        yield {}
        return
    first, rest = variables[0], variables[1:]
    for d in M.domain(first.sort):
        for tail in valuations(M, rest):
            out = {first: d}
            out.update(tail)
            yield out


def valid_on_model(M: EpistemicModel, f) -> bool:
    ev = Evaluator()
    for v in valuations(M, free_vars(f)):
        if ev.mask(M, f, v) != M.full:
            return False
    return True


# ---------------------------------------------------------------- validation


def validate_model(M: EpistemicModel, sig: Signature | None = None, formulas=()) -> list:
    """Return a list of human-readable invariant violations (empty when fine)."""
    from .syntax import subformulas, formula_terms, term_vars

    sig = sig or M.sig
    out = []
    if not M.agents:
        out.append("agent domain is empty")
    if not M.objects:
        out.append("object domain is empty")
    if not M.worlds:
        out.append("no worlds")
    for c, s in sig.constants.items():
        if c not in M.cint:
            out.append(f"constant {c} has no interpretation")
            continue
        for i, d in enumerate(M.cint[c]):
            if M.elem_sort.get(d) != s:
                out.append(f"constant {c} denotes {d} at {M.worlds[i]}, which is not of sort {s}")
    for c in M.cint:
        if c not in sig.constants:
            out.append(f"interpretation given for undeclared constant {c}")
    if EQ in M.rint:
        for i, ext in enumerate(M.rint[EQ]):
            for t in ext:
                if len(t) != 2 or t[0] != t[1]:
                    out.append(f"equality not diagonal at {M.worlds[i]}: {t}")
    for r, row in M.rint.items():
        if r == EQ:
            continue
        slots = sig.relations.get(r)
        if slots is None:
            out.append(f"interpretation given for undeclared relation {r}")
            continue
        for i, ext in enumerate(row):
            for t in ext:
                if len(t) != len(slots):
                    out.append(f"tuple {t} of {r} at {M.worlds[i]} has wrong arity")
                    continue
                for slot, d in zip(slots, t):
                    s = M.elem_sort.get(d)
                    if s is None or not sort_accepts(slot, s):
                        out.append(f"tuple {t} of {r} at {M.worlds[i]} violates argument sorts")
                        break
    for fn, row in M.fint.items():
        decl = sig.functions.get(fn)
        if decl is None:
            out.append(f"interpretation given for undeclared function {fn}")
            continue
        slots, res = decl
        for i, table in enumerate(row):
            for args, val in table.items():
                if M.elem_sort.get(val) != res:
                    out.append(f"{fn}{args} at {M.worlds[i]} has value of wrong sort")
                if len(args) != len(slots) or any(
                        M.elem_sort.get(d) is None or not sort_accepts(sl, M.elem_sort[d])
                        for sl, d in zip(slots, args)):
                    out.append(f"{fn}{args} at {M.worlds[i]} violates argument sorts")
    # conflicting pairs are recorded at construction time
    for fn, pairs in M.raw_function_pairs.items():
        seen = {}
        for (w, args, val) in pairs:
            key = (w, tuple(args))
            if key in seen and seen[key] != val:
                out.append(f"{fn} non-functional at {w} on {args}")
            seen[key] = val
    for phi in formulas:
        for g in subformulas(phi):
            for t in formula_terms(g):
                if term_vars(t) or not isinstance(t, Apply):
                    continue
                for i in range(len(M.worlds)):
                    if _ext(M, t, i, {}) is None:
                        out.append(f"ground term {t} undefined at {M.worlds[i]}")
    return out


# ---------------------------------------------------------------- isomorphism


def _graph(M: EpistemicModel, point=None):
    import networkx as nx

    g = nx.DiGraph()
    for i, w in enumerate(M.worlds):
        consts = tuple(sorted((c, row[i]) for c, row in M.cint.items()))
        rels = tuple(sorted((r, tuple(sorted(row[i]))) for r, row in M.rint.items()
                            if r != EQ and row[i]))
        funcs = tuple(sorted((fn, tuple(sorted(row[i].items()))) for fn, row in M.fint.items()
                             if row[i]))
        label = repr((w == point, consts, rels, funcs))
        g.add_node(i, label=label)
    edges = {}
    for a in M.agents:
        for i, row in enumerate(M.succ[a]):
            for j in range(len(M.worlds)):
                if row >> j & 1:
                    edges.setdefault((i, j), []).append(a)
    for (i, j), ags in edges.items():
        g.add_edge(i, j, label=repr(tuple(sorted(ags))))
    return g


def isomorphic(M1: EpistemicModel, M2: EpistemicModel, point1=None, point2=None) -> bool:
    """World-renaming isomorphism with the domain held fixed."""
    import networkx as nx
    from networkx.algorithms.isomorphism import categorical_node_match, categorical_edge_match

    if set(M1.agents) != set(M2.agents) or set(M1.objects) != set(M2.objects):
        return False
    if len(M1.worlds) != len(M2.worlds):
        return False
    if (point1 is None) != (point2 is None):
        return False
    g1, g2 = _graph(M1, point1), _graph(M2, point2)
    return nx.is_isomorphic(g1, g2, node_match=categorical_node_match("label", None),
                            edge_match=categorical_edge_match("label", None))


def model_hash(M: EpistemicModel, point=None) -> str:
    """Isomorphism-invariant hash (equal for isomorphic pointed models)."""
    import networkx as nx

    g = _graph(M, point)
    return nx.weisfeiler_lehman_graph_hash(g, node_attr="label", edge_attr="label")
