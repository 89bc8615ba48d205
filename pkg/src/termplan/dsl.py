"""Domain (.tmd) and problem (.tmp) files, formula syntaxes, plans.

The grammar is a small PDDL-like S-expression language::

    (define (domain NAME)
      (:types sub1 sub2 - parent other)
      (:predicates (In ?x - agt_or_obj ?y - room))
      (:functions (boss ?x - agent_id) - agent_id)          ; optional
      (:action NAME
        :agent ?a - agent_id                                ; optional, first parameter
        :parameters (?y ?z - room)
        (:actual_event e1 :precondition F :postcondition ((In ?a ?z if TRUE)))
        (:event e2 :precondition TRUE :postcondition (id))
        (:edge-conditions :e1 -- e2 F  :e2 -> e1 F)))

Problem files follow the layout of the machine-malfunction example, with
``:universe``, ``:constants``, ``:init`` (worlds with ``:constant_map``,
``:atoms`` and optional ``:function_map``, then ``:edges``) and ``:goal``.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from .dynamics import ActionSchema, instantiate
from .semantics import EpistemicModel, PointedModel
from .sexpr import DslSyntaxError, SList, Sym, read_all, read_one, pos
from .syntax import (
    AGT, OBJ, AGT_OR_OBJ, EQ, XSTAR, TermplanError, Signature, Var, Const, Apply,
    Atom, Top, Bottom, Not, And, Or, Implies, Iff, Knows, Forall, Exists, Neq, Dyn,
    TOP, BOTTOM, Eq, conj, disj,
)

BUILTIN_ROOTS = {"agent": AGT, "agent_id": AGT, "agt": AGT,
                 "object": OBJ, "object_id": OBJ, "obj": OBJ}


class SemanticError(TermplanError):
    def __init__(self, msg, where=None):
        line, col = pos(where) if where is not None else (None, None)
        self.line, self.col = line, col
        prefix = f"{line}:{col}: " if line else ""
        super().__init__(prefix + msg)


# ---------------------------------------------------------------- types


class TypeHierarchy:
    """Subtype declarations.  Built-in roots map to the two core sorts; a
    declared type without a parent hangs under ``object``."""

    def __init__(self, parents=None, const_types=None):
        self.parents = dict(parents or {})
        self.const_types = dict(const_types or {})
        for t in self.parents:
            self.chain(t)

    def known(self, t) -> bool:
        return t in BUILTIN_ROOTS or t in self.parents or t == AGT_OR_OBJ

    def chain(self, t) -> list:
        out = [t]
        seen = {t}
        while t in self.parents and self.parents[t] is not None:
            t = self.parents[t]
            if t in seen:
                raise SemanticError(f"cycle in type declarations through {t}")
            seen.add(t)
            out.append(t)
        return out

    def root_sort(self, t) -> str:
        if t == AGT_OR_OBJ:
            return AGT_OR_OBJ
        if not self.known(t):
            raise SemanticError(f"unknown type {t}", t)
        for u in self.chain(t):
            if u in BUILTIN_ROOTS:
                return BUILTIN_ROOTS[u]
        return OBJ

    def is_subtype(self, t, u) -> bool:
        if u == AGT_OR_OBJ:
            return True
        if u in ("agt", "obj") or (u in BUILTIN_ROOTS and u not in self.parents):
            return self.root_sort(t) == BUILTIN_ROOTS[u]
        return u in self.chain(t)

    def constant_has_type(self, c, t) -> bool:
        ct = self.const_types.get(c)
        return ct is not None and self.is_subtype(ct, t)

    def copy(self, const_types=None):
        return TypeHierarchy(self.parents, self.const_types if const_types is None else const_types)


def parse_typed_list(items, default=None) -> list:
    """``a b - t c - u d`` -> [(a,t),(b,t),(c,u),(d,default)]."""
    out, pending = [], []
    i = 0
    while i < len(items):
        tok = items[i]
        if isinstance(tok, list):
            raise DslSyntaxError("unexpected list in typed list", *pos(tok))
        if tok == "-":
            if i + 1 >= len(items):
                raise DslSyntaxError("type expected after '-'", *pos(tok))
            t = items[i + 1]
            out.extend((n, str(t)) for n in pending)
            pending = []
            i += 2
            continue
        if tok.startswith("-") and len(tok) > 1 and tok != "--":
            out.extend((n, str(tok[1:])) for n in pending)
            pending = []
            i += 1
            continue
        pending.append(tok)
        i += 1
    out.extend((n, default) for n in pending)
    return out


# ---------------------------------------------------------------- formulas (S-expr)


class FormulaReader:
    def __init__(self, predicates: dict, functions: dict, types: TypeHierarchy,
                 actions=None):
        self.predicates = predicates     # name -> list of slot types
        self.functions = functions       # name -> (arg types, result type)
        self.types = types
        self.actions = actions           # callable (name, args) -> ActionModel

    def var_sort(self, t, where) -> str:
        if t is None:
            t = "object"
        s = self.types.root_sort(t)
        if s == AGT_OR_OBJ:
            raise SemanticError("variables cannot have sort agt_or_obj", where)
        return s

    def term(self, x, scope):
        if isinstance(x, list):
            if not x:
                raise DslSyntaxError("empty term", *pos(x))
            if len(x) == 1:
                return self.term(x[0], scope)
            head = str(x[0])
            if head not in self.functions:
                raise SemanticError(f"unknown function {head}", x[0])
            return Apply(head, tuple(self.term(a, scope) for a in x[1:]))
        s = str(x)
        if s.startswith("?"):
            name = s[1:]
            if name == "x*":
                return XSTAR
            if name not in scope:
                raise SemanticError(f"unbound variable {s}", x)
            return scope[name]
        return Const(s)

    def formula(self, x, scope=None):
        scope = dict(scope or {})
        if not isinstance(x, list):
            s = str(x)
            if s in ("TRUE", "true"):
                return TOP
            if s in ("FALSE", "false"):
                return BOTTOM
            if s in self.predicates and not self.predicates[s]:
                return Atom(s, ())
            raise SemanticError(f"expected a formula, found {s}", x)
        if not x:
            raise DslSyntaxError("empty formula", *pos(x))
        head = x[0]
        if isinstance(head, list):
            raise DslSyntaxError("formula head must be a symbol", *pos(x))
        h = str(head)
        args = x[1:]

        def need(n):
            if len(args) != n:
                raise DslSyntaxError(f"'{h}' takes {n} arguments, got {len(args)}", *pos(x))

        if h in ("TRUE", "true"):
            need(0)
            return TOP
        if h in ("FALSE", "false"):
            need(0)
            return BOTTOM
        if h == "and":
            return conj(self.formula(a, scope) for a in args)
        if h == "or":
            return disj(self.formula(a, scope) for a in args)
        if h == "not":
            need(1)
            return Not(self.formula(args[0], scope))
        if h in ("imply", "implies"):
            need(2)
            return Implies(self.formula(args[0], scope), self.formula(args[1], scope))
        if h == "iff":
            need(2)
            return Iff(self.formula(args[0], scope), self.formula(args[1], scope))
        if h in ("forall", "exists"):
            need(2)
            if not isinstance(args[0], list):
                raise DslSyntaxError(f"'{h}' expects a variable list", *pos(x))
            vs = []
            inner = dict(scope)
            for name, t in parse_typed_list(args[0]):
                if not str(name).startswith("?"):
                    raise DslSyntaxError(f"variable expected, found {name}", *pos(name))
                v = Var(str(name)[1:], self.var_sort(t, name))
                inner[v.name] = v
                vs.append(v)
            body = self.formula(args[1], inner)
            for v in reversed(vs):
                body = Forall(v, body) if h == "forall" else Exists(v, body)
            return body
        if h == "knows":
            need(2)
            return Knows(self.term(args[0], scope), self.formula(args[1], scope))
        if h == "=":
            need(2)
            return Eq(self.term(args[0], scope), self.term(args[1], scope))
        if h == "neq":
            need(2)
            return Neq(self.term(args[0], scope), self.term(args[1], scope))
        if h == "after":
            need(3)
            spec = args[0]
            if self.actions is None:
                raise SemanticError("dynamic modalities need an action context", x)
            if isinstance(spec, list):
                name, cargs = str(spec[0]), tuple(str(a) for a in spec[1:])
            else:
                name, cargs = str(spec), ()
            A = self.actions(name, cargs)
            ev = str(args[1])
            if ev not in A.events:
                raise SemanticError(f"event {ev} not in {A.name}", args[1])
            return Dyn(A, ev, self.formula(args[2], scope))
        if h in self.predicates:
            slots = self.predicates[h]
            if len(slots) != len(args):
                raise SemanticError(f"{h} expects {len(slots)} arguments, got {len(args)}", x)
            return Atom(h, tuple(self.term(a, scope) for a in args))
        raise SemanticError(f"unknown predicate or connective {h}", head)


def term_to_sexpr(t) -> str:
    if isinstance(t, Var):
        return "?" + t.name
    if isinstance(t, Const):
        return t.name
    if isinstance(t, Apply):
        return "(" + " ".join([t.func] + [term_to_sexpr(a) for a in t.args]) + ")"
    raise TypeError(t)


def to_sexpr(f) -> str:
    if isinstance(f, Atom):
        if f.rel == EQ:
            return f"(= {term_to_sexpr(f.args[0])} {term_to_sexpr(f.args[1])})"
        return "(" + " ".join([f.rel] + [term_to_sexpr(a) for a in f.args]) + ")"
    if isinstance(f, Top):
        return "TRUE"
    if isinstance(f, Bottom):
        return "FALSE"
    if isinstance(f, Neq):
        return f"(neq {term_to_sexpr(f.left)} {term_to_sexpr(f.right)})"
    if isinstance(f, Not):
        return f"(not {to_sexpr(f.sub)})"
    if isinstance(f, And):
        return "(and " + " ".join(to_sexpr(s) for s in f.subs) + ")"
    if isinstance(f, Or):
        return "(or " + " ".join(to_sexpr(s) for s in f.subs) + ")"
    if isinstance(f, Implies):
        return f"(imply {to_sexpr(f.left)} {to_sexpr(f.right)})"
    if isinstance(f, Iff):
        return f"(iff {to_sexpr(f.left)} {to_sexpr(f.right)})"
    if isinstance(f, Knows):
        return f"(knows ({term_to_sexpr(f.agent)}) {to_sexpr(f.sub)})"
    if isinstance(f, (Forall, Exists)):
        q = "forall" if isinstance(f, Forall) else "exists"
        return f"({q} (?{f.var.name} - {f.var.sort}) {to_sexpr(f.sub)})"
    if isinstance(f, Dyn):
        A = f.action
        if getattr(A, "schema", None) is not None:
            spec = "(" + " ".join([A.schema.name] + list(A.args)) + ")"
        else:
            spec = A.name
        return f"(after {spec} {f.event} {to_sexpr(f.sub)})"
    raise TypeError(f"not a formula: {f!r}")


# ---------------------------------------------------------------- formulas (infix)


_INFIX_TOKEN = re.compile(r"\s*(<->|->|!=|[~&|()\[\],.:@=]|\?[A-Za-z_][\w'*]*|[A-Za-z_][\w'*]*)")


def _infix_tokens(text):
    pos_ = 0
    out = []
    text = text.rstrip()
    while pos_ < len(text):
        m = _INFIX_TOKEN.match(text, pos_)
        if not m:
            raise DslSyntaxError(f"unexpected character {text[pos_]!r} at offset {pos_}")
        out.append(m.group(1))
        pos_ = m.end()
    return out


class _Infix:
    def __init__(self, text, predicates, functions, types, actions):
        self.toks = _infix_tokens(text)
        self.i = 0
        self.predicates = predicates
        self.functions = functions
        self.types = types or TypeHierarchy()
        self.actions = actions

    def peek(self, k=0):
        j = self.i + k
        return self.toks[j] if j < len(self.toks) else None

    def take(self, expect=None, what=None):
        tok = self.peek()
        if tok is None:
            want = expect or what
            raise DslSyntaxError(f"unexpected end of formula{'; expected ' + want if want else ''}")
        if expect is not None and tok != expect:
            raise DslSyntaxError(f"expected {expect!r}, found {tok!r}")
        self.i += 1
        return tok

    def parse(self):
        f = self.iff({})
        if self.peek() is not None:
            raise DslSyntaxError(f"trailing input at {self.peek()!r}")
        return f

    def iff(self, sc):
        f = self.imp(sc)
        while self.peek() == "<->":
            self.take()
            f = Iff(f, self.imp(sc))
        return f

    def imp(self, sc):
        f = self.disj(sc)
        if self.peek() == "->":
            self.take()
            return Implies(f, self.imp(sc))
        return f

    def disj(self, sc):
        items = [self.conj(sc)]
        while self.peek() == "|":
            self.take()
            items.append(self.conj(sc))
        return disj(items)

    def conj(self, sc):
        items = [self.unary(sc)]
        while self.peek() == "&":
            self.take()
            items.append(self.unary(sc))
        return conj(items)

    def unary(self, sc):
        tok = self.peek()
        if tok == "~":
            self.take()
            return Not(self.unary(sc))
        if tok == "K" and self.peek(1) == "[":
            self.take()
            self.take("[")
            t = self.term(sc)
            self.take("]")
            return Knows(t, self.unary(sc))
        if tok in ("forall", "exists"):
            self.take()
            vs = []
            inner = dict(sc)
            while True:
                name = self.take()
                self.take(":")
                sort = self.types.root_sort(self.take())
                v = Var(name.lstrip("?"), sort)
                vs.append(v)
                inner[v.name] = v
                if self.peek() == ",":
                    self.take()
                    continue
                break
            self.take(".")
            body = self.iff(inner)
            for v in reversed(vs):
                body = Forall(v, body) if tok == "forall" else Exists(v, body)
            return body
        if tok == "[":
            self.take()
            name = self.take()
            cargs = []
            if self.peek() == "(":
                self.take()
                while self.peek() != ")":
                    cargs.append(self.take())
                    if self.peek() == ",":
                        self.take()
                self.take(")")
            self.take("@")
            ev = self.take()
            self.take("]")
            if self.actions is None:
                raise SemanticError("dynamic modalities need an action context")
            A = self.actions(name, tuple(cargs))
            if ev not in A.events:
                raise SemanticError(f"event {ev} not in {A.name}")
            return Dyn(A, ev, self.unary(sc))
        if tok == "(":
            save = self.i
            self.take()
            try:
                f = self.iff(sc)
                self.take(")")
                return f
            except DslSyntaxError:
                self.i = save      # maybe a parenthesized term in an equation
        if tok in ("true", "TRUE"):
            self.take()
            return TOP
        if tok in ("false", "FALSE"):
            self.take()
            return BOTTOM
        if tok in self.predicates and tok not in sc:
            self.take()
            args = []
            if self.peek() == "(":
                self.take()
                while self.peek() != ")":
                    args.append(self.term(sc))
                    if self.peek() == ",":
                        self.take()
                self.take(")")
            if len(args) != len(self.predicates[tok]):
                raise SemanticError(f"{tok} expects {len(self.predicates[tok])} arguments")
            return Atom(tok, tuple(args))
        left = self.term(sc)
        op = self.take(what="'=' or '!='")
        if op not in ("=", "!="):
            raise DslSyntaxError(f"expected '=' or '!=', found {op!r}")
        right = self.term(sc)
        return Eq(left, right) if op == "=" else Neq(left, right)

    def term(self, sc):
        tok = self.take(what="a term")
        if tok == "(":
            t = self.term(sc)
            self.take(")")
            return t
        name = tok.lstrip("?")
        if name == "x*":
            return XSTAR
        if name in sc:
            return sc[name]
        if tok.startswith("?"):
            raise SemanticError(f"unbound variable {tok}")
        if tok in self.functions and self.peek() == "(":
            self.take()
            args = []
            while self.peek() != ")":
                args.append(self.term(sc))
                if self.peek() == ",":
                    self.take()
            self.take(")")
            return Apply(tok, tuple(args))
        if not re.match(r"[A-Za-z_]", tok):
            raise DslSyntaxError(f"term expected, found {tok!r}")
        return Const(tok)


def parse_infix(text: str, predicates: dict, functions: dict | None = None,
                types: TypeHierarchy | None = None, actions=None):
    """Parse the infix syntax, e.g. ``forall x:agt. K[x] In(b1,r2)``."""
    return _Infix(text, predicates, functions or {}, types, actions).parse()


# ---------------------------------------------------------------- domain files


@dataclass
class Domain:
    name: str
    types: TypeHierarchy
    type_order: list
    predicates: dict            # name -> list of slot type names
    functions: dict             # name -> (list of arg type names, result type name)
    schemas: list
    agent_param: dict = field(default_factory=dict)   # schema name -> bool

    def schema(self, name) -> ActionSchema:
        for s in self.schemas:
            if s.name == name:
                return s
        raise SemanticError(f"unknown action {name}")

    def relation_sorts(self) -> dict:
        return {r: tuple(self.types.root_sort(t) for t in slots)
                for r, slots in self.predicates.items()}

    def function_sorts(self) -> dict:
        return {f: (tuple(self.types.root_sort(t) for t in a), self.types.root_sort(r))
                for f, (a, r) in self.functions.items()}

    def reader(self, types=None, actions=None) -> FormulaReader:
        return FormulaReader(self.predicates, self.functions, types or self.types, actions)


def domains_equal(d1: Domain, d2: Domain) -> bool:
    """Structural equality, ignoring declaration order of types."""
    return (d1.name == d2.name and d1.types.parents == d2.types.parents
            and d1.predicates == d2.predicates and d1.functions == d2.functions
            and d1.agent_param == d2.agent_param
            and len(d1.schemas) == len(d2.schemas)
            and all(a.same_structure(b) for a, b in zip(d1.schemas, d2.schemas)))


def _sections(lst, start=1):
    """Yield ``(keyword, body)`` for each ``(:keyword ...)`` child."""
    for item in lst[start:]:
        if not isinstance(item, list) or not item or isinstance(item[0], list):
            raise DslSyntaxError("section expected", *pos(item))
        yield str(item[0]), item


def _header(expr, kind):
    if (not isinstance(expr, list) or len(expr) < 2 or expr[0] != "define"
            or not isinstance(expr[1], list) or len(expr[1]) != 2 or expr[1][0] != kind):
        raise DslSyntaxError(f"expected (define ({kind} NAME) ...)", *pos(expr))
    return str(expr[1][1])


def _keyword_args(items):
    """Split ``:key value :key2 value2 ...`` (values are single items)."""
    out = {}
    i = 0
    while i < len(items):
        k = items[i]
        if isinstance(k, list) or not str(k).startswith(":"):
            raise DslSyntaxError(f"keyword expected, found {k}", *pos(k))
        if i + 1 >= len(items):
            raise DslSyntaxError(f"value expected after {k}", *pos(k))
        out[str(k)] = items[i + 1]
        i += 2
    return out


def parse_domain(text: str) -> Domain:
    exprs = read_all(text)
    if len(exprs) != 1:
        raise DslSyntaxError("a domain file holds exactly one (define ...) form")
    expr = exprs[0]
    name = _header(expr, "domain")
    parents, order = {}, []
    predicates, functions = {}, {}
    raw_actions = []
    for kw, sec in _sections(expr, 2):
        if kw == ":types":
            for t, parent in parse_typed_list(sec[1:]):
                t = str(t)
                if t in BUILTIN_ROOTS:
                    continue
                if t in parents:
                    raise SemanticError(f"type {t} declared twice", t)
                parents[t] = parent
                order.append(t)
        elif kw == ":predicates":
            for p in sec[1:]:
                if not isinstance(p, list) or not p:
                    raise DslSyntaxError("predicate declaration expected", *pos(p))
                pname = str(p[0])
                if pname in predicates or pname == EQ:
                    raise SemanticError(f"predicate {pname} declared twice", p[0])
                predicates[pname] = [t or "object" for _, t in parse_typed_list(p[1:])]
        elif kw == ":functions":
            items = sec[1:]
            i = 0
            while i < len(items):
                decl = items[i]
                if not isinstance(decl, list) or not decl:
                    raise DslSyntaxError("function declaration expected", *pos(decl))
                res = "object"
                if i + 2 < len(items) + 1 and i + 1 < len(items) and items[i + 1] == "-":
                    res = str(items[i + 2])
                    i += 3
                else:
                    i += 1
                functions[str(decl[0])] = ([t or "object" for _, t in parse_typed_list(decl[1:])], res)
        elif kw == ":action":
            raw_actions.append(sec)
        elif kw == ":requirements":
            continue
        else:
            raise SemanticError(f"unknown domain section {kw}", sec[0])
    for p in parents.values():
        if p is not None and p not in parents and p not in BUILTIN_ROOTS:
            raise SemanticError(f"undeclared parent type {p}")
    types = TypeHierarchy(parents)
    for pname, slots in predicates.items():
        for t in slots:
            types.root_sort(t)
    dom = Domain(name, types, order, predicates, functions, [])
    reader = dom.reader()
    for sec in raw_actions:
        schema, has_agent = _parse_action(sec, types, reader)
        if any(s.name == schema.name for s in dom.schemas):
            raise SemanticError(f"action {schema.name} declared twice", sec[1])
        dom.schemas.append(schema)
        dom.agent_param[schema.name] = has_agent
    return dom


def _parse_action(sec, types, reader):
    if len(sec) < 2 or isinstance(sec[1], list):
        raise DslSyntaxError("action name expected", *pos(sec))
    name = str(sec[1])
    params, ptypes = [], []
    has_agent = False
    events, pre, post = [], {}, {}
    edges_raw = []
    designated = None
    i = 2
    items = sec
    while i < len(items):
        it = items[i]
        if isinstance(it, Sym) and it == ":agent":
            if params:
                raise SemanticError(":agent must precede :parameters", it)
            toks = []
            j = i + 1
            while j < len(items) and not isinstance(items[j], list) and not (
                    str(items[j]).startswith(":") and str(items[j]) != ":"):
                toks.append(items[j])
                j += 1
            for n, t in parse_typed_list(toks, "agent"):
                params.append(n)
                ptypes.append(t)
            has_agent = True
            i = j
            continue
        if isinstance(it, Sym) and it == ":parameters":
            plist = items[i + 1]
            if not isinstance(plist, list):
                raise DslSyntaxError(":parameters expects a list", *pos(it))
            for n, t in parse_typed_list(plist, "object"):
                params.append(n)
                ptypes.append(t)
            i += 2
            continue
        if isinstance(it, list) and it and it[0] in (":actual_event", ":event"):
            if len(it) < 2:
                raise DslSyntaxError("event name expected", *pos(it))
            ev = str(it[1])
            if ev in events:
                raise SemanticError(f"event {ev} declared twice", it[1])
            events.append(ev)
            if it[0] == ":actual_event":
                if designated is not None:
                    raise SemanticError("more than one :actual_event", it)
                designated = ev
            kws = {}
            for k, v in _keyword_args(it[2:]).items():
                if k == ":posttcondition":
                    k = ":postcondition"
                kws[k] = v
            unknown = set(kws) - {":precondition", ":postcondition"}
            if unknown:
                raise SemanticError(f"unknown event keys {sorted(unknown)}", it)
            pre[ev] = kws.get(":precondition", Sym("TRUE"))
            post[ev] = kws.get(":postcondition", SList())
            i += 1
            continue
        if isinstance(it, list) and it and it[0] == ":edge-conditions":
            edges_raw.append(it)
            i += 1
            continue
        raise DslSyntaxError(f"unexpected item in action {name}: {it}", *pos(it))

    scope = {}
    pvars = []
    for n, t in zip(params, ptypes):
        if not str(n).startswith("?"):
            raise DslSyntaxError(f"parameter must start with '?': {n}", *pos(n))
        vname = str(n)[1:]
        if vname in scope:
            raise SemanticError(f"duplicate parameter {n}", n)
        v = Var(vname, reader.var_sort(t, n))
        scope[vname] = v
        pvars.append(v)
    pre_f = {}
    for ev, x in pre.items():
        if isinstance(x, list) and len(x) == 1 and str(x[0]) in ("TRUE", "FALSE"):
            x = x[0]
        pre_f[ev] = reader.formula(x, scope)
    post_f = {ev: _parse_post(x, reader, scope) for ev, x in post.items()}
    edges = {}
    for block in edges_raw:
        toks = block[1:]
        j = 0
        while j < len(toks):
            if j + 3 >= len(toks) + 0 and j + 3 > len(toks):
                raise DslSyntaxError("incomplete edge condition", *pos(block))
            a, arrow, b, cond = toks[j], toks[j + 1], toks[j + 2], toks[j + 3]
            a, b = str(a).lstrip(":"), str(b).lstrip(":")
            for e in (a, b):
                if e not in events:
                    raise SemanticError(f"edge condition mentions unknown event {e}", toks[j])
            q = reader.formula(cond, scope)
            if arrow == "--":
                edges[(a, b)] = q
                edges[(b, a)] = q
            elif arrow == "->":
                edges[(a, b)] = q
            else:
                raise DslSyntaxError(f"expected '--' or '->', found {arrow}", *pos(arrow))
            j += 4
    schema = ActionSchema(name, tuple(pvars), tuple(events), pre_f, edges, post_f,
                          designated, tuple(ptypes))
    return schema, has_agent


def _parse_post(x, reader, scope):
    if isinstance(x, Sym):
        if x == "id":
            return {}
        raise DslSyntaxError(f"postcondition list expected, found {x}", *pos(x))
    if len(x) == 1 and x[0] == "id":
        return {}
    out = {}
    for entry in x:
        if not isinstance(entry, list) or "if" not in [str(e) for e in entry if not isinstance(e, list)]:
            raise DslSyntaxError("postcondition entry must look like (atom ... if condition)", *pos(entry))
        k = [str(e) if not isinstance(e, list) else None for e in entry].index("if")
        atom_part, cond = entry[:k], entry[k + 1:]
        if len(cond) != 1:
            raise DslSyntaxError("exactly one condition expected after 'if'", *pos(entry))
        if len(atom_part) == 1 and isinstance(atom_part[0], list):
            atom_part = atom_part[0]
        atom = reader.formula(SList(atom_part), scope)
        if not isinstance(atom, Atom):
            raise SemanticError("postcondition key must be an atom", entry)
        if atom.rel == EQ:
            raise SemanticError("equality cannot be assigned by a postcondition", entry)
        c = cond[0]
        if isinstance(c, list) and len(c) == 1 and str(c[0]) in ("TRUE", "FALSE"):
            c = c[0]
        out[atom] = reader.formula(c, scope)
    return out


# ---------------------------------------------------------------- problem files


@dataclass
class Problem:
    name: str
    domain: Domain
    entity_types: dict          # entity -> type, declaration order
    const_types: dict           # constant -> type, declaration order
    sig: Signature
    types: TypeHierarchy
    model: EpistemicModel
    point: str
    goal: object = None

    @property
    def initial(self) -> PointedModel:
        return PointedModel(self.model, self.point)

    def reader(self, actions=None):
        return self.domain.reader(self.types, actions if actions is not None else self.action_resolver())

    def action_resolver(self):
        cache = {}

        def resolve(name, args):
            key = (name, tuple(args))
            if key not in cache:
                S = self.domain.schema(name)
                for c in args:
                    if c not in self.sig.constants:
                        raise SemanticError(f"unknown constant {c}")
                cache[key] = instantiate(S, list(args), self.sig)
            return cache[key]

        return resolve

    def parse_formula(self, text: str):
        """S-expression when the text starts with '(' and infix otherwise."""
        t = text.strip()
        if t.startswith("("):
            return self.reader().formula(read_one(t))
        return parse_infix(t, self.domain.predicates, self.domain.functions, self.types,
                           self.action_resolver())

    def with_state(self, s: PointedModel) -> "Problem":
        return Problem(self.name, self.domain, self.entity_types, self.const_types, self.sig,
                       self.types, s.model, s.point, self.goal)


def parse_problem(text: str, dom: Domain) -> Problem:
    exprs = read_all(text)
    if len(exprs) != 1:
        raise DslSyntaxError("a problem file holds exactly one (define ...) form")
    expr = exprs[0]
    name = _header(expr, "problem")
    entity_types, const_types = {}, {}
    init = None
    goal_x = None
    for kw, sec in _sections(expr, 2):
        if kw == ":domain":
            if len(sec) != 2 or str(sec[1]) != dom.name:
                raise SemanticError(f"problem refers to domain {sec[1:]}, loaded {dom.name}", sec)
        elif kw == ":universe":
            for n, t in parse_typed_list(sec[1:], "object"):
                if str(n) in entity_types:
                    raise SemanticError(f"entity {n} declared twice", n)
                entity_types[str(n)] = str(t)
        elif kw == ":constants":
            for n, t in parse_typed_list(sec[1:], "object"):
                if str(n) in const_types:
                    raise SemanticError(f"constant {n} declared twice", n)
                const_types[str(n)] = str(t)
        elif kw == ":init":
            init = sec
        elif kw == ":goal":
            if len(sec) != 2:
                raise DslSyntaxError(":goal takes one formula", *pos(sec))
            goal_x = sec[1]
        else:
            raise SemanticError(f"unknown problem section {kw}", sec[0])
    types = dom.types.copy(const_types)
    agents, objects = [], []
    for e, t in entity_types.items():
        s = types.root_sort(t)
        if s == AGT_OR_OBJ:
            raise SemanticError(f"entity {e} needs a concrete sort")
        (agents if s == AGT else objects).append(e)
    if set(entity_types) & set(const_types):
        raise SemanticError(f"names used both as entity and constant: {sorted(set(entity_types) & set(const_types))}")
    sig = Signature(
        constants={c: types.root_sort(t) for c, t in const_types.items()},
        relations=dom.relation_sorts(),
        functions=dom.function_sorts(),
    )
    if init is None:
        raise SemanticError("missing :init section")
    worlds, point = [], None
    cmap, atoms, fmap = {}, {}, {}
    access_raw = None
    for item in init[1:]:
        if not isinstance(item, list) or not item:
            raise DslSyntaxError("world or edges section expected", *pos(item))
        head = str(item[0])
        if head in (":world", ":actual_world"):
            w = str(item[1])
            if w in cmap:
                raise SemanticError(f"world {w} declared twice", item[1])
            if head == ":actual_world":
                if point is not None:
                    raise SemanticError("more than one :actual_world", item)
                point = w
            worlds.append(w)
            kws = _keyword_args(item[2:])
            unknown = set(kws) - {":constant_map", ":atoms", ":function_map"}
            if unknown:
                raise SemanticError(f"unknown world keys {sorted(unknown)}", item)
            cmap[w] = {}
            for pair in kws.get(":constant_map", []):
                if not isinstance(pair, list) or len(pair) != 2:
                    raise DslSyntaxError("(constant entity) pair expected", *pos(pair))
                c, e = str(pair[0]), str(pair[1])
                if c not in const_types:
                    raise SemanticError(f"undeclared constant {c}", pair[0])
                if e not in entity_types:
                    raise SemanticError(f"unknown entity {e}", pair[1])
                if c in cmap[w]:
                    raise SemanticError(f"constant {c} mapped twice in {w}", pair[0])
                cmap[w][c] = e
            missing = [c for c in const_types if c not in cmap[w]]
            if missing:
                raise SemanticError(f"world {w} leaves constants unmapped: {missing}", item)
            atoms[w] = kws.get(":atoms", [])
            fmap[w] = kws.get(":function_map", [])
        elif head == ":edges":
            access_raw = item
        else:
            raise SemanticError(f"unexpected {head} in :init", item[0])
    if point is None:
        raise SemanticError("no :actual_world declared")

    def denote(tok, w):
        s = str(tok)
        if s in entity_types:
            return s
        if s in cmap[w]:
            return cmap[w][s]
        raise SemanticError(f"unknown constant or entity {s}", tok)

    relations = {r: {w: set() for w in worlds} for r in dom.predicates}
    for w in worlds:
        for a in atoms[w]:
            if not isinstance(a, list) or not a:
                raise DslSyntaxError("atom expected", *pos(a))
            r = str(a[0])
            if r not in dom.predicates:
                raise SemanticError(f"unknown predicate {r}", a[0])
            if len(a) - 1 != len(dom.predicates[r]):
                raise SemanticError(f"{r} expects {len(dom.predicates[r])} arguments", a)
            relations[r][w].add(tuple(denote(x, w) for x in a[1:]))
    functions = {}
    for w in worlds:
        for entry in fmap[w]:
            if not isinstance(entry, list) or len(entry) != 3 or not isinstance(entry[1], list):
                raise DslSyntaxError("(f (args) value) expected", *pos(entry))
            fn = str(entry[0])
            if fn not in dom.functions:
                raise SemanticError(f"unknown function {fn}", entry[0])
            args = tuple(denote(x, w) for x in entry[1])
            functions.setdefault(fn, {}).setdefault(w, []).append((args, denote(entry[2], w)))
    access = _parse_edges(access_raw, worlds, agents)
    model = EpistemicModel(sig, agents, objects, worlds, access,
                           {c: {w: cmap[w][c] for w in worlds} for c in const_types},
                           relations, functions)
    prob = Problem(name, dom, entity_types, const_types, sig, types, model, point)
    if goal_x is not None:
        prob.goal = prob.reader().formula(goal_x)
    return prob


def _closure(pairs, worlds):
    parent = {w: w for w in worlds}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in pairs:
        parent[find(a)] = find(b)
    classes = {}
    for w in worlds:
        classes.setdefault(find(w), []).append(w)
    out = set()
    for cls in classes.values():
        for a in cls:
            for b in cls:
                out.add((a, b))
    return out


def _parse_edges(sec, worlds, agents):
    access = {a: {(w, w) for w in worlds} for a in agents}
    if sec is None:
        return access
    items = sec[1:]
    i = 0
    wset = set(worlds)
    seen = set()
    while i < len(items):
        k = items[i]
        if isinstance(k, list) or not str(k).startswith(":"):
            raise DslSyntaxError(f"agent keyword expected, found {k}", *pos(k))
        agent = str(k)[1:]
        if agent not in agents:
            raise SemanticError(f"{agent} is not an agent", k)
        if agent in seen:
            raise SemanticError(f"edges for {agent} given twice", k)
        seen.add(agent)
        raw = False
        i += 1
        if i < len(items) and items[i] == ":raw":
            raw = True
            i += 1
        if i >= len(items) or not isinstance(items[i], list):
            raise DslSyntaxError(f"edge list expected for {agent}", *pos(k))
        spec = items[i]
        i += 1
        if len(spec) == 1 and spec[0] == "all":
            access[agent] = {(u, v) for u in worlds for v in worlds}
            continue
        directed, undirected = [], []
        for chain in spec:
            if not isinstance(chain, list) or len(chain) < 3 or len(chain) % 2 == 0:
                raise DslSyntaxError("(w -- w') or (w -> w') expected", *pos(chain))
            for j in range(0, len(chain) - 2, 2):
                a, arrow, b = str(chain[j]), str(chain[j + 1]), str(chain[j + 2])
                for w in (a, b):
                    if w not in wset:
                        raise SemanticError(f"unknown world {w} in edges", chain)
                if arrow == "--":
                    undirected.append((a, b))
                elif arrow == "->":
                    directed.append((a, b))
                else:
                    raise DslSyntaxError(f"expected '--' or '->', found {arrow}", *pos(chain[j + 1]))
        if raw:
            rel = set(directed)
            for a, b in undirected:
                rel |= {(a, b), (b, a)}
            access[agent] = rel
        else:
            access[agent] = _closure(directed + undirected, worlds)
    return access


# ---------------------------------------------------------------- serialization


def _typed_groups(mapping: dict) -> list:
    groups = []
    for name, t in mapping.items():
        if groups and groups[-1][1] == t:
            groups[-1][0].append(name)
        else:
            groups.append(([name], t))
    return groups


def serialize_domain(dom: Domain) -> str:
    lines = [f"(define (domain {dom.name})"]
    if dom.type_order:
        parts = []
        for t in dom.type_order:
            p = dom.types.parents.get(t)
            parts.append(f"{t} - {p}" if p else t)
        lines.append("  (:types " + "\n          ".join(parts) + ")")
    preds = []
    for r, slots in dom.predicates.items():
        args = " ".join(f"?v{i} - {t}" for i, t in enumerate(slots))
        preds.append(f"({r}{' ' + args if args else ''})")
    lines.append("  (:predicates " + "\n               ".join(preds) + ")" if preds else "  (:predicates)")
    if dom.functions:
        fs = []
        for fn, (slots, res) in dom.functions.items():
            args = " ".join(f"?v{i} - {t}" for i, t in enumerate(slots))
            fs.append(f"({fn} {args}) - {res}")
        lines.append("  (:functions " + " ".join(fs) + ")")
    for S in dom.schemas:
        lines.append(_serialize_schema(S, dom.agent_param.get(S.name, False)))
    lines[-1] += ")"
    return "\n".join(lines) + "\n"


def _serialize_schema(S: ActionSchema, has_agent: bool) -> str:
    out = [f"  (:action {S.name}"]
    ptypes = S.param_types or tuple(p.sort for p in S.params)
    params = list(zip(S.params, ptypes))
    if has_agent:
        p, t = params[0]
        out.append(f"    :agent ?{p.name} - {t}")
        params = params[1:]
    out.append("    :parameters (" + " ".join(f"?{p.name} - {t}" for p, t in params) + ")")
    for e in S.events:
        kw = ":actual_event" if e == S.designated else ":event"
        out.append(f"    ({kw} {e}")
        out.append(f"      :precondition {to_sexpr(S.pre[e])}")
        post = S.post[e]
        if not post:
            out.append("      :postcondition (id))")
        else:
            entries = " ".join(f"({_atom_body(g)} if {to_sexpr(v)})" for g, v in post.items())
            out.append(f"      :postcondition ({entries}))")
    lines = []
    done = set()
    for a in S.events:
        for b in S.events:
            if (a, b) in done:
                continue
            q = S.edges[(a, b)]
            default = Eq(XSTAR, XSTAR) if a == b else BOTTOM
            if q == default:
                continue
            if a != b and S.edges[(b, a)] == q:
                lines.append(f":{a} -- {b} {to_sexpr(q)}")
                done.add((b, a))
            else:
                lines.append(f":{a} -> {b} {to_sexpr(q)}")
            done.add((a, b))
    if lines:
        out.append("    (:edge-conditions\n      " + "\n      ".join(lines) + ")")
    out[-1] += ")"
    return "\n".join(out)


def _atom_body(g: Atom) -> str:
    return " ".join([g.rel] + [term_to_sexpr(t) for t in g.args])


def _is_equivalence(pairs, worlds):
    ws = set(worlds)
    rel = set(pairs)
    if any((w, w) not in rel for w in ws):
        return False
    for (a, b) in rel:
        if (b, a) not in rel:
            return False
    for (a, b) in rel:
        for (c, d) in rel:
            if b == c and (a, d) not in rel:
                return False
    return True


def serialize_problem(prob: Problem) -> str:
    M = prob.model
    lines = [f"(define (problem {prob.name})", f"  (:domain {prob.domain.name})"]
    uni = " ".join(f"{' '.join(ns)} - {t}" for ns, t in _typed_groups(prob.entity_types))
    lines.append(f"  (:universe {uni})")
    cons = " ".join(f"{' '.join(ns)} - {t}" for ns, t in _typed_groups(prob.const_types))
    lines.append(f"  (:constants {cons})")
    lines.append("  (:init")
    for i, w in enumerate(M.worlds):
        kw = ":actual_world" if w == prob.point else ":world"
        cm = " ".join(f"({c} {M.cint[c][i]})" for c in prob.const_types)
        atoms = []
        for r in prob.domain.predicates:
            for t in sorted(M.rint.get(r, [frozenset()] * len(M.worlds))[i]):
                atoms.append("(" + " ".join((r,) + tuple(t)) + ")")
        lines.append(f"    ({kw} {w}")
        lines.append(f"      :constant_map ({cm})")
        fm = []
        for fn in prob.domain.functions:
            row = M.fint.get(fn)
            if row:
                for args, val in sorted(row[i].items()):
                    fm.append(f"({fn} ({' '.join(args)}) {val})")
        if fm:
            lines.append(f"      :function_map ({' '.join(fm)})")
        lines.append(f"      :atoms ({' '.join(atoms)}))")
    edge_lines = []
    full = {(u, v) for u in M.worlds for v in M.worlds}
    for a in M.agents:
        pairs = M.pairs(a)
        if pairs == full:
            edge_lines.append(f":{a} (all)")
        elif _is_equivalence(pairs, M.worlds):
            classes = []
            seen = set()
            for w in M.worlds:
                if w in seen:
                    continue
                cls = [v for v in M.worlds if (w, v) in pairs]
                seen |= set(cls)
                if len(cls) > 1:
                    classes.append(cls)
            chains = []
            for cls in classes:
                chains.extend(f"({x} -- {y})" for x, y in zip(cls, cls[1:]))
            edge_lines.append(f":{a} ({' '.join(chains)})")
        else:
            ordered = sorted(pairs, key=lambda p: (M.windex[p[0]], M.windex[p[1]]))
            edge_lines.append(f":{a} :raw ({' '.join(f'({x} -> {y})' for x, y in ordered)})")
    lines.append("    (:edges\n      " + "\n      ".join(edge_lines) + "))")
    if prob.goal is not None:
        lines.append(f"  (:goal {to_sexpr(prob.goal)}))")
    else:
        lines[-1] += ")"
    return "\n".join(lines) + "\n"


def model_to_json(prob: Problem) -> dict:
    M = prob.model
    return {
        "worlds": [
            {
                "name": w,
                "constant_map": {c: M.cint[c][i] for c in prob.const_types},
                "atoms": sorted([r] + list(t) for r in prob.domain.predicates
                                for t in M.rint.get(r, [frozenset()] * len(M.worlds))[i]),
            }
            for i, w in enumerate(M.worlds)
        ],
        "actual_world": prob.point,
        "edges": {a: sorted([u, v] for u, v in M.pairs(a)) for a in M.agents},
        "universe": dict(prob.entity_types),
        "constants": dict(prob.const_types),
    }


# ---------------------------------------------------------------- plans


_STEP = re.compile(r"^\s*([A-Za-z_][\w\-]*)\s*(?:\(([^)]*)\))?\s*(?:@\s*([\w'.\-]+))?\s*$")


@dataclass(frozen=True)
class PlanStep:
    action: str
    args: tuple
    event: str | None = None

    def __str__(self):
        ev = f"@{self.event}" if self.event else ""
        return f"{self.action}({','.join(self.args)}){ev}"

    def to_json(self) -> dict:
        return {"action": self.action, "args": list(self.args), "event": self.event}


def parse_step(text: str) -> PlanStep:
    m = _STEP.match(text)
    if not m:
        raise DslSyntaxError(f"cannot parse plan step {text!r}")
    args = tuple(a.strip() for a in (m.group(2) or "").split(",") if a.strip())
    return PlanStep(m.group(1), args, m.group(3))


def serialize_plan(steps) -> str:
    steps = list(steps)
    if not steps:
        return "()\n"
    return "".join(f"{s}\n" for s in steps)


def plan_to_json(steps) -> str:
    return json.dumps([s.to_json() for s in steps])


def parse_plan(text: str) -> list:
    t = text.strip()
    if t.startswith("["):
        out = []
        for item in json.loads(t):
            if isinstance(item, str):
                out.append(parse_step(item))
            else:
                out.append(PlanStep(item["action"], tuple(item.get("args", ())), item.get("event")))
        return out
    if t == "()" or not t:
        return []
    out = []
    for line in t.splitlines():
        line = line.split(";", 1)[0].strip()
        if line:
            out.append(parse_step(line))
    return out


def load_task(domain_text: str, problem_text: str):
    dom = parse_domain(domain_text)
    return dom, parse_problem(problem_text, dom)
