"""Unified term AST: types, terms, and formulas share one representation.

Types and propositions are terms of sort ``type`` / ``prop``; this keeps one
substitution and one traversal for the whole language.  All nodes are frozen
dataclasses; a ``span`` field (ignored by equality) carries source locations.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import Iterator, Optional

from .errors import Span


class Term:
    """Base class; all concrete nodes are frozen dataclasses."""

    __slots__ = ()


@dataclass(frozen=True)
class Var(Term):
    name: str
    span: Optional[Span] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Const(Term):
    """A declared symbol; ``targs`` are explicit type arguments filled in by
    type inference for polymorphic symbols (empty until then)."""

    name: str
    targs: tuple[Term, ...] = ()
    span: Optional[Span] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class App(Term):
    fn: Term
    args: tuple[Term, ...]
    span: Optional[Span] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Lam(Term):
    var: str
    var_ty: Optional[Term]
    body: Term
    span: Optional[Span] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Pi(Term):
    """Dependent product.  ``var_ty == TYPE`` gives prenex polymorphism; a
    term-sorted ``var_ty`` only occurs in the dependent frontend."""

    var: str
    var_ty: Term
    body: Term
    span: Optional[Span] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Arrow(Term):
    dom: Term
    cod: Term
    span: Optional[Span] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Forall(Term):
    var: str
    var_ty: Optional[Term]
    body: Term
    span: Optional[Span] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Exists(Term):
    var: str
    var_ty: Optional[Term]
    body: Term
    span: Optional[Span] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class And(Term):
    lhs: Term
    rhs: Term
    span: Optional[Span] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Or(Term):
    lhs: Term
    rhs: Term
    span: Optional[Span] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Implies(Term):
    lhs: Term
    rhs: Term
    span: Optional[Span] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Not(Term):
    body: Term
    span: Optional[Span] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Eq(Term):
    lhs: Term
    rhs: Term
    span: Optional[Span] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Ite(Term):
    cond: Term
    then: Term
    els: Term
    span: Optional[Span] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class MatchBranch:
    ctor: str
    vars: tuple[str, ...]
    rhs: Term


@dataclass(frozen=True)
class Match(Term):
    scrutinee: Term
    branches: tuple[MatchBranch, ...]
    span: Optional[Span] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Asserting(Term):
    """``body asserting guard``: body evaluates only where guard holds."""

    body: Term
    guard: Term
    span: Optional[Span] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class IntLit(Term):
    value: int
    span: Optional[Span] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class IntOp(Term):
    """Built-in integer operator, op in {"<=", "+", "-", "*"}."""

    op: str
    lhs: Term
    rhs: Term
    span: Optional[Span] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Builtin(Term):
    """Nullary builtin: true, false, prop, type, int."""

    kind: str
    span: Optional[Span] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Unknown(Term):
    """The ``?__`` placeholder; appears only in models."""

    tag: str
    span: Optional[Span] = field(default=None, compare=False, repr=False)


TRUE = Builtin("true")
FALSE = Builtin("false")
PROP = Builtin("prop")
TYPE = Builtin("type")
INT = Builtin("int")

INT_OPS = ("<=", "+", "-", "*")


def app(fn: Term, args) -> Term:
    """Build an application, flattening nested App spines."""
    args = tuple(args)
    if not args:
        return fn
    if isinstance(fn, App):
        return App(fn.fn, fn.args + args)
    return App(fn, args)


def conj(parts) -> Term:
    parts = list(parts)
    if not parts:
        return TRUE
    out = parts[0]
    for p in parts[1:]:
        out = And(out, p)
    return out


def disj(parts) -> Term:
    parts = list(parts)
    if not parts:
        return FALSE
    out = parts[0]
    for p in parts[1:]:
        out = Or(out, p)
    return out


def foralls(binders, body: Term) -> Term:
    for name, ty in reversed(list(binders)):
        body = Forall(name, ty, body)
    return body


def existss(binders, body: Term) -> Term:
    for name, ty in reversed(list(binders)):
        body = Exists(name, ty, body)
    return body


def lams(binders, body: Term) -> Term:
    for name, ty in reversed(list(binders)):
        body = Lam(name, ty, body)
    return body


def arrows(doms, cod: Term) -> Term:
    for d in reversed(list(doms)):
        cod = Arrow(d, cod)
    return cod


def strip_arrows(ty: Term) -> tuple[list[Term], Term]:
    doms = []
    while isinstance(ty, Arrow):
        doms.append(ty.dom)
        ty = ty.cod
    return doms, ty


def strip_pis(ty: Term) -> tuple[list[tuple[str, Term]], Term]:
    binders = []
    while isinstance(ty, Pi):
        binders.append((ty.var, ty.var_ty))
        ty = ty.body
    return binders, ty


def strip_foralls(t: Term) -> tuple[list[tuple[str, Optional[Term]]], Term]:
    binders = []
    while isinstance(t, Forall):
        binders.append((t.var, t.var_ty))
        t = t.body
    return binders, t


def subterms(t: Term) -> Iterator[Term]:
    """Yield t and every subterm, pre-order."""
    yield t
    for c in children(t):
        yield from subterms(c)


def children(t: Term) -> tuple[Term, ...]:
    match t:
        case Var() | Const() | IntLit() | Builtin() | Unknown():
            return t.targs if isinstance(t, Const) else ()
        case App(fn, args):
            return (fn, *args)
        case Lam(_, ty, body):
            return (body,) if ty is None else (ty, body)
        case Pi(_, ty, body):
            return (ty, body)
        case Arrow(dom, cod):
            return (dom, cod)
        case Forall(_, ty, body) | Exists(_, ty, body):
            return (body,) if ty is None else (ty, body)
        case And(a, b) | Or(a, b) | Implies(a, b) | Eq(a, b) | IntOp(_, a, b):
            return (a, b)
        case Not(body):
            return (body,)
        case Ite(c, a, b):
            return (c, a, b)
        case Match(scrut, branches):
            return (scrut, *(b.rhs for b in branches))
        case Asserting(body, guard):
            return (body, guard)
    raise TypeError(f"unhandled term node {t!r}")


def free_vars(t: Term) -> frozenset[str]:
    """Names occurring outside any binder for them."""
    match t:
        case Var(name):
            return frozenset((name,))
        case Const(_, targs):
            out: frozenset[str] = frozenset()
            for ta in targs:
                out |= free_vars(ta)
            return out
        case Lam(v, ty, body) | Pi(v, ty, body) | Forall(v, ty, body) | Exists(v, ty, body):
            out = free_vars(body) - {v}
            if ty is not None:
                out |= free_vars(ty)
            return out
        case Match(scrut, branches):
            out = free_vars(scrut)
            for b in branches:
                out |= free_vars(b.rhs) - set(b.vars)
            return out
        case _:
            out = frozenset()
            for c in children(t):
                out |= free_vars(c)
            return out


_FRESH_SEP = "_"


def fresh_name(base: str, avoid) -> str:
    """First of base, base_1, base_2, ... not in avoid."""
    if base not in avoid:
        return base
    i = 1
    while f"{base}{_FRESH_SEP}{i}" in avoid:
        i += 1
    return f"{base}{_FRESH_SEP}{i}"


class NameSupply:
    """Deterministic fresh-name source seeded with the names to avoid."""

    def __init__(self, avoid=()):
        self.used = set(avoid)

    def fresh(self, base: str) -> str:
        name = fresh_name(base, self.used)
        self.used.add(name)
        return name


def substitute(t: Term, binding: dict[str, Term]) -> Term:
    """Capture-avoiding simultaneous substitution of variables by terms."""
    if not binding:
        return t
    fv_repl: set[str] = set()
    for r in binding.values():
        fv_repl |= free_vars(r)
    return _subst(t, binding, fv_repl)


def _subst(t: Term, binding: dict[str, Term], fv_repl: set[str]) -> Term:
    match t:
        case Var(name):
            return binding.get(name, t)
        case Const(name, targs):
            if not targs:
                return t
            return Const(name, tuple(_subst(a, binding, fv_repl) for a in targs), span=t.span)
        case IntLit() | Builtin() | Unknown():
            return t
        case App(fn, args):
            return app(_subst(fn, binding, fv_repl),
                       tuple(_subst(a, binding, fv_repl) for a in args))
        case Lam(v, ty, body) | Pi(v, ty, body) | Forall(v, ty, body) | Exists(v, ty, body):
            ty2 = None if ty is None else _subst(ty, binding, fv_repl)
            inner = {k: r for k, r in binding.items() if k != v}
            if not inner:
                body2 = body
                v2 = v
            elif v in fv_repl:
                relevant_fv = set(fv_repl)
                for sub in subterms(body):
                    if isinstance(sub, Var):
                        relevant_fv.add(sub.name)
                v2 = fresh_name(v, relevant_fv | set(inner))
                inner[v] = Var(v2)
                body2 = _subst(body, inner, fv_repl | {v2})
            else:
                v2 = v
                body2 = _subst(body, inner, fv_repl)
            return type(t)(v2, ty2, body2, span=t.span)
        case Match(scrut, branches):
            new_branches = []
            for b in branches:
                inner = {k: r for k, r in binding.items() if k not in b.vars}
                if inner and any(v in fv_repl for v in b.vars):
                    taken = set(fv_repl) | set(inner)
                    for sub in subterms(b.rhs):
                        if isinstance(sub, Var):
                            taken.add(sub.name)
                    ren = {}
                    new_vars = []
                    for v in b.vars:
                        if v in fv_repl:
                            v2 = fresh_name(v, taken)
                            taken.add(v2)
                            ren[v] = Var(v2)
                            new_vars.append(v2)
                        else:
                            new_vars.append(v)
                    rhs = _subst(b.rhs, {**ren, **{k: r for k, r in inner.items()}},
                                 fv_repl | set(new_vars))
                    new_branches.append(MatchBranch(b.ctor, tuple(new_vars), rhs))
                elif inner:
                    new_branches.append(
                        MatchBranch(b.ctor, b.vars, _subst(b.rhs, inner, fv_repl)))
                else:
                    new_branches.append(b)
            return Match(_subst(scrut, binding, fv_repl), tuple(new_branches), span=t.span)
        case Arrow(dom, cod):
            return Arrow(_subst(dom, binding, fv_repl), _subst(cod, binding, fv_repl),
                         span=t.span)
        case And() | Or() | Implies() | Eq():
            return type(t)(_subst(t.lhs, binding, fv_repl), _subst(t.rhs, binding, fv_repl),
                           span=t.span)
        case IntOp(op, a, b):
            return IntOp(op, _subst(a, binding, fv_repl), _subst(b, binding, fv_repl),
                         span=t.span)
        case Not(body):
            return Not(_subst(body, binding, fv_repl), span=t.span)
        case Ite(c, a, b):
            return Ite(_subst(c, binding, fv_repl), _subst(a, binding, fv_repl),
                       _subst(b, binding, fv_repl), span=t.span)
        case Asserting(body, guard):
            return Asserting(_subst(body, binding, fv_repl), _subst(guard, binding, fv_repl),
                             span=t.span)
    raise TypeError(f"unhandled term node {t!r}")


def alpha_eq(a: Term, b: Term, env: tuple[dict[str, str], dict[str, str]] | None = None) -> bool:
    """Equality up to renaming of bound variables (spans ignored)."""
    if env is None:
        env = ({}, {})
    la, lb = env
    match (a, b):
        case (Var(x), Var(y)):
            return la.get(x, x) == lb.get(y, y) and (x in la) == (y in lb)
        case (Const(x, ta), Const(y, tb)):
            return x == y and len(ta) == len(tb) and all(
                alpha_eq(s, t, env) for s, t in zip(ta, tb))
        case (IntLit(x), IntLit(y)):
            return x == y
        case (Builtin(x), Builtin(y)):
            return x == y
        case (Unknown(x), Unknown(y)):
            return x == y
        case (App(f, xs), App(g, ys)):
            return len(xs) == len(ys) and alpha_eq(f, g, env) and all(
                alpha_eq(s, t, env) for s, t in zip(xs, ys))
        case ((Lam(v, ty, s), Lam(w, tz, t)) | (Forall(v, ty, s), Forall(w, tz, t))
              | (Exists(v, ty, s), Exists(w, tz, t)) | (Pi(v, ty, s), Pi(w, tz, t))):
            if (ty is None) != (tz is None):
                return False
            if ty is not None and not alpha_eq(ty, tz, env):
                return False
            mark = f"!{len(la)}"
            return alpha_eq(s, t, ({**la, v: mark}, {**lb, w: mark}))
        case (Arrow(d1, c1), Arrow(d2, c2)):
            return alpha_eq(d1, d2, env) and alpha_eq(c1, c2, env)
        case ((And(x1, y1), And(x2, y2)) | (Or(x1, y1), Or(x2, y2))
              | (Implies(x1, y1), Implies(x2, y2)) | (Eq(x1, y1), Eq(x2, y2))):
            if type(a) is not type(b):
                return False
            return alpha_eq(x1, x2, env) and alpha_eq(y1, y2, env)
        case (IntOp(o1, x1, y1), IntOp(o2, x2, y2)):
            return o1 == o2 and alpha_eq(x1, x2, env) and alpha_eq(y1, y2, env)
        case (Not(x), Not(y)):
            return alpha_eq(x, y, env)
        case (Ite(c1, t1, e1), Ite(c2, t2, e2)):
            return alpha_eq(c1, c2, env) and alpha_eq(t1, t2, env) and alpha_eq(e1, e2, env)
        case (Asserting(b1, g1), Asserting(b2, g2)):
            return alpha_eq(b1, b2, env) and alpha_eq(g1, g2, env)
        case (Match(s1, bs1), Match(s2, bs2)):
            if len(bs1) != len(bs2) or not alpha_eq(s1, s2, env):
                return False
            for b1, b2 in zip(bs1, bs2):
                if b1.ctor != b2.ctor or len(b1.vars) != len(b2.vars):
                    return False
                la2, lb2 = dict(la), dict(lb)
                for i, (v, w) in enumerate(zip(b1.vars, b2.vars)):
                    mark = f"!{len(la)}.{i}"
                    la2[v] = mark
                    lb2[w] = mark
                if not alpha_eq(b1.rhs, b2.rhs, (la2, lb2)):
                    return False
            return True
    return False


def map_subterms(t: Term, f) -> Term:
    """Rebuild t with f applied to each direct child (binders preserved)."""
    match t:
        case Var() | Const() | IntLit() | Builtin() | Unknown():
            return t
        case App(fn, args):
            return app(f(fn), tuple(f(a) for a in args))
        case Lam(v, ty, body) | Pi(v, ty, body) | Forall(v, ty, body) | Exists(v, ty, body):
            return type(t)(v, None if ty is None else f(ty), f(body), span=t.span)
        case Arrow(dom, cod):
            return Arrow(f(dom), f(cod), span=t.span)
        case And() | Or() | Implies() | Eq():
            return type(t)(f(t.lhs), f(t.rhs), span=t.span)
        case IntOp(op, a, b):
            return IntOp(op, f(a), f(b), span=t.span)
        case Not(body):
            return Not(f(body), span=t.span)
        case Ite(c, a, b):
            return Ite(f(c), f(a), f(b), span=t.span)
        case Match(scrut, branches):
            return Match(f(scrut),
                         tuple(MatchBranch(b.ctor, b.vars, f(b.rhs)) for b in branches),
                         span=t.span)
        case Asserting(body, guard):
            return Asserting(f(body), f(guard), span=t.span)
    raise TypeError(f"unhandled term node {t!r}")


def rewrite(t: Term, f) -> Term:
    """Bottom-up rewrite: apply f to every node after rewriting children."""
    return f(map_subterms(t, lambda c: rewrite(c, f)))


def contains(t: Term, pred) -> bool:
    return any(pred(s) for s in subterms(t))
