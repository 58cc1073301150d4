"""Type inference and well-formedness checking (the pipeline's first phase).

Hindley-Milner style with prenex polymorphism only: symbol types may be
Pi-quantified, unification solves monotypes.  ``infer`` returns a new problem
in which every binder carries its principal monotype and every occurrence of
a polymorphic symbol carries explicit type arguments in ``Const.targs``.
"""

from __future__ import annotations

from .errors import Span, TypecheckError
from .problems import (
    AxiomStmt,
    DEP_STATEMENTS,
    DataDef,
    GoalStmt,
    PredDef,
    PredOne,
    Problem,
    RecDef,
    RecOne,
    ValDecl,
    map_statement_terms,
)
from .terms import (
    INT,
    PROP,
    TYPE,
    And,
    App,
    Arrow,
    Asserting,
    Builtin,
    Const,
    Eq,
    Exists,
    Forall,
    Implies,
    IntLit,
    IntOp,
    Ite,
    Lam,
    Match,
    MatchBranch,
    Not,
    Or,
    Pi,
    Term,
    Unknown,
    Var,
    app,
    free_vars,
    strip_arrows,
    strip_foralls,
    strip_pis,
    subterms,
)

SELECT_SCHEME = Pi("k", TYPE, Pi("v", TYPE,
                  Arrow(App(Const("array"), (Var("k"), Var("v"))),
                        Arrow(Var("k"), Var("v")))))


def _is_uvar(t: Term) -> bool:
    return isinstance(t, Var) and t.name.startswith("?")


class Unifier:
    def __init__(self):
        self.subst: dict[str, Term] = {}
        self.counter = 0

    def fresh(self) -> Var:
        self.counter += 1
        return Var(f"?t{self.counter}")

    def resolve(self, t: Term) -> Term:
        while _is_uvar(t) and t.name in self.subst:
            t = self.subst[t.name]
        return t

    def zonk(self, t: Term) -> Term:
        t = self.resolve(t)
        match t:
            case Var() | Builtin() | Const(_, ()):
                return t
            case Const(name, targs):
                return Const(name, tuple(self.zonk(a) for a in targs), span=t.span)
            case App(fn, args):
                return App(self.zonk(fn), tuple(self.zonk(a) for a in args), span=t.span)
            case Arrow(d, c):
                return Arrow(self.zonk(d), self.zonk(c), span=t.span)
            case Pi(v, vt, b):
                return Pi(v, self.zonk(vt), self.zonk(b), span=t.span)
        raise TypecheckError(f"not a type: {t!r}")

    def occurs(self, name: str, t: Term) -> bool:
        t = self.resolve(t)
        if _is_uvar(t):
            return t.name == name
        return any(self.occurs(name, c) for c in _type_children(t))

    def unify(self, a: Term, b: Term, span: Span | None = None):
        a, b = self.resolve(a), self.resolve(b)
        if a == b:
            return
        if _is_uvar(a):
            if self.occurs(a.name, b):
                raise TypecheckError(f"occurs check failed: {a.name} in {b!r}", span)
            self.subst[a.name] = b
            return
        if _is_uvar(b):
            self.unify(b, a, span)
            return
        match (a, b):
            case (Arrow(d1, c1), Arrow(d2, c2)):
                self.unify(d1, d2, span)
                self.unify(c1, c2, span)
                return
            case (App(f1, a1), App(f2, a2)) if len(a1) == len(a2):
                self.unify(f1, f2, span)
                for x, y in zip(a1, a2):
                    self.unify(x, y, span)
                return
        from .printer import print_term

        raise TypecheckError(
            f"cannot unify {print_term(self.zonk_safe(a))} with "
            f"{print_term(self.zonk_safe(b))}", span)

    def zonk_safe(self, t: Term) -> Term:
        try:
            return self.zonk(t)
        except TypecheckError:
            return t


def _type_children(t: Term):
    match t:
        case App(fn, args):
            return (fn, *args)
        case Arrow(d, c):
            return (d, c)
        case Pi(_, vt, b):
            return (vt, b)
        case Const(_, targs):
            return targs
    return ()


class Inferencer:
    def __init__(self, problem: Problem):
        self.problem = problem
        self.u = Unifier()
        # within a definition block, occurrences of the block's own symbols are
        # instantiated at the definition's type parameters (no polymorphic
        # recursion); maps symbol name -> forced type arguments
        self.self_targs: dict[str, tuple[Term, ...]] = {}

    # -- schemes ------------------------------------------------------------

    def instantiate(self, scheme: Term, targs: tuple[Term, ...], span) -> tuple[Term, tuple]:
        binders, mono = strip_pis(scheme)
        if targs:
            if len(targs) != len(binders):
                raise TypecheckError("wrong number of type arguments", span)
            mapping = {v: targs[i] for i, (v, _) in enumerate(binders)}
        else:
            mapping = {v: self.u.fresh() for v, _ in binders}
        out_targs = tuple(mapping[v] for v, _ in binders)
        return _subst_type(mono, mapping), out_targs

    # -- terms ---------------------------------------------------------------

    def infer(self, t: Term, env: dict[str, Term], rigid: frozenset[str]) -> tuple[Term, Term]:
        """Return (rebuilt term, its type)."""
        match t:
            case Builtin("true") | Builtin("false"):
                return t, PROP
            case Builtin("prop") | Builtin("type") | Builtin("int"):
                return t, TYPE
            case IntLit():
                return t, INT
            case Unknown():
                raise TypecheckError("?__ placeholder outside a model", t.span)
            case Var(name):
                if name in env:
                    return t, env[name]
                if name in rigid:
                    return t, TYPE
                raise TypecheckError(f"unbound variable {name!r}", t.span)
            case Const(name, targs):
                return self._infer_const(name, targs, t.span, env, rigid)
            case App(fn, args):
                if self._is_type_head(fn, env, rigid):
                    return self._check_type_expr(t, rigid), TYPE
                fn2, fty = self.infer(fn, env, rigid)
                args2 = []
                for a in args:
                    a2, aty = self.infer(a, env, rigid)
                    res = self.u.fresh()
                    self.u.unify(fty, Arrow(aty, res), a.span or t.span)
                    fty = res
                    args2.append(a2)
                return app(fn2, tuple(args2)), fty
            case Lam(v, vty, body):
                vty2 = self._binder_type(vty, rigid)
                body2, bty = self.infer(body, {**env, v: vty2}, rigid)
                return Lam(v, vty2, body2, span=t.span), Arrow(vty2, bty)
            case Forall(v, vty, body) | Exists(v, vty, body):
                if vty == TYPE:
                    body2, bty = self.infer(body, env, rigid | {v})
                    self.u.unify(bty, PROP, t.span)
                    return type(t)(v, TYPE, body2, span=t.span), PROP
                vty2 = self._binder_type(vty, rigid)
                body2, bty = self.infer(body, {**env, v: vty2}, rigid)
                self.u.unify(bty, PROP, t.span)
                return type(t)(v, vty2, body2, span=t.span), PROP
            case Pi():
                return self._check_type_expr(t, rigid), TYPE
            case Arrow():
                return self._check_type_expr(t, rigid), TYPE
            case And(a, b) | Or(a, b) | Implies(a, b):
                a2, aty = self.infer(a, env, rigid)
                if type(t) is Implies and self.u.resolve(aty) == TYPE:
                    # dependent-frontend constraint arrow, e.g. monoid a => ...
                    return self._check_type_expr(t, rigid), TYPE
                b2, bty = self.infer(b, env, rigid)
                self.u.unify(aty, PROP, a.span or t.span)
                self.u.unify(bty, PROP, b.span or t.span)
                return type(t)(a2, b2, span=t.span), PROP
            case Not(a):
                a2, aty = self.infer(a, env, rigid)
                self.u.unify(aty, PROP, t.span)
                return Not(a2, span=t.span), PROP
            case Eq(a, b):
                a2, aty = self.infer(a, env, rigid)
                b2, bty = self.infer(b, env, rigid)
                self.u.unify(aty, bty, t.span)
                if self.u.resolve(aty) == TYPE:
                    raise TypecheckError("equality between types is not supported", t.span)
                return Eq(a2, b2, span=t.span), PROP
            case IntOp(op, a, b):
                a2, aty = self.infer(a, env, rigid)
                b2, bty = self.infer(b, env, rigid)
                self.u.unify(aty, INT, a.span or t.span)
                self.u.unify(bty, INT, b.span or t.span)
                return IntOp(op, a2, b2, span=t.span), PROP if op == "<=" else INT
            case Ite(c, a, b):
                c2, cty = self.infer(c, env, rigid)
                self.u.unify(cty, PROP, c.span or t.span)
                a2, aty = self.infer(a, env, rigid)
                b2, bty = self.infer(b, env, rigid)
                self.u.unify(aty, bty, t.span)
                return Ite(c2, a2, b2, span=t.span), aty
            case Asserting(body, guard):
                g2, gty = self.infer(guard, env, rigid)
                self.u.unify(gty, PROP, guard.span or t.span)
                b2, bty = self.infer(body, env, rigid)
                return Asserting(b2, g2, span=t.span), bty
            case Match(scrut, branches):
                return self._infer_match(t, scrut, branches, env, rigid)
        raise TypecheckError(f"cannot typecheck term {t!r}", getattr(t, "span", None))

    def _infer_const(self, name, targs, span, env, rigid):
        if name == "select":
            mono, out = self.instantiate(SELECT_SCHEME, targs, span)
            return Const(name, out, span=span), mono
        if name.startswith("$"):
            base = name[1:].rpartition("_")[0]
            return Const(name, span=span), Const(base)
        info = self.problem.symbols.get(name)
        if info is None:
            raise TypecheckError(f"unbound symbol {name!r}", span)
        if info.kind in ("type", "depdata", "class"):
            return Const(name, span=span), TYPE
        if not targs and name in self.self_targs:
            targs = self.self_targs[name]
        mono, out = self.instantiate(info.ty, targs, span)
        return Const(name, out, span=span), mono

    def _is_type_head(self, fn: Term, env, rigid) -> bool:
        match fn:
            case Const(name, _):
                info = self.problem.symbols.get(name)
                if name == "array":
                    return True
                return info is not None and info.kind in ("type", "depdata", "class") \
                    and name not in env
            case Var(name):
                return name in rigid and name not in env
        return False

    def _infer_match(self, t, scrut, branches, env, rigid):
        scrut2, sty = self.infer(scrut, env, rigid)
        res = self.u.fresh()
        new_branches = []
        for b in branches:
            info = self.problem.symbols.get(b.ctor)
            if info is None or info.kind != "ctor":
                raise TypecheckError(f"{b.ctor!r} is not a constructor", t.span)
            cmono, _ = self.instantiate(info.ty, (), t.span)
            doms, ret = strip_arrows(cmono)
            if len(doms) != len(b.vars):
                raise TypecheckError(
                    f"constructor {b.ctor} expects {len(doms)} arguments, "
                    f"pattern binds {len(b.vars)}", t.span)
            self.u.unify(ret, sty, t.span)
            env2 = dict(env)
            env2.update(zip(b.vars, doms))
            rhs2, rty = self.infer(b.rhs, env2, rigid)
            self.u.unify(rty, res, t.span)
            new_branches.append(MatchBranch(b.ctor, b.vars, rhs2))
        return Match(scrut2, tuple(new_branches), span=t.span), res

    def _binder_type(self, vty: Term | None, rigid: frozenset[str]) -> Term:
        if vty is None:
            return self.u.fresh()
        return self._check_type_expr(vty, rigid)

    def _check_type_expr(self, ty: Term, rigid: frozenset[str]) -> Term:
        match ty:
            case Builtin("prop") | Builtin("type") | Builtin("int"):
                return ty
            case Var(name):
                if name.startswith("?") or name in rigid:
                    return ty
                raise TypecheckError(f"unbound type variable {name!r}", ty.span)
            case Const(name, _):
                info = self.problem.symbols.get(name)
                if info is None and name != "array":
                    raise TypecheckError(f"unbound type {name!r}", ty.span)
                if info is not None and info.kind not in ("type", "depdata", "class"):
                    raise TypecheckError(f"{name!r} is not a type", ty.span)
                return Const(name, span=ty.span)
            case App(fn, args):
                fn2 = self._check_type_expr(fn, rigid)
                return App(fn2, tuple(self._check_type_expr(a, rigid) for a in args),
                           span=ty.span)
            case Arrow(d, c):
                return Arrow(self._check_type_expr(d, rigid),
                             self._check_type_expr(c, rigid), span=ty.span)
            case Pi(v, vt, b):
                if vt != TYPE:
                    raise TypecheckError(
                        "term-dependent function types require the dependent frontend",
                        ty.span)
                return Pi(v, TYPE, self._check_type_expr(b, rigid | {v}), span=ty.span)
            case Implies(a, b):
                raise TypecheckError(
                    "class constraints require the dependent frontend", ty.span)
        raise TypecheckError(f"not a type expression: {ty!r}", getattr(ty, "span", None))

    # -- statements ----------------------------------------------------------

    def check_formula(self, t: Term, rigid: frozenset[str], what: str) -> Term:
        self.u.subst.clear()
        t2, ty = self.infer(t, {}, rigid)
        self.u.unify(ty, PROP, t.span)
        return self._finish(t2, what, t.span)

    def _finish(self, t: Term, what: str, span) -> Term:
        out = _zonk_term(self.u, t)
        for sub in subterms(out):
            for node in _embedded_types(sub):
                for leaf in subterms(node):
                    if _is_uvar(leaf):
                        raise TypecheckError(
                            f"cannot infer a type in {what} "
                            f"(ambiguous binder or type argument)", span)
        return out


def _subst_type(t: Term, mapping: dict[str, Term]) -> Term:
    match t:
        case Var(name):
            return mapping.get(name, t)
        case Builtin():
            return t
        case Const(name, targs):
            return Const(name, tuple(_subst_type(a, mapping) for a in targs), span=t.span)
        case App(fn, args):
            return App(_subst_type(fn, mapping),
                       tuple(_subst_type(a, mapping) for a in args), span=t.span)
        case Arrow(d, c):
            return Arrow(_subst_type(d, mapping), _subst_type(c, mapping), span=t.span)
        case Pi(v, vt, b):
            inner = {k: x for k, x in mapping.items() if k != v}
            return Pi(v, _subst_type(vt, mapping), _subst_type(b, inner), span=t.span)
    raise TypecheckError(f"not a type: {t!r}")


def _embedded_types(t: Term):
    match t:
        case Const(_, targs):
            return targs
        case Lam(_, vt, _) | Forall(_, vt, _) | Exists(_, vt, _):
            return (vt,) if vt is not None else ()
        case Pi(_, vt, _):
            return (vt,)
    return ()


def _zonk_term(u: Unifier, t: Term) -> Term:
    match t:
        case Var() | IntLit() | Builtin() | Unknown():
            return t
        case Const(name, targs):
            return Const(name, tuple(u.zonk_safe(a) for a in targs), span=t.span)
        case App(fn, args):
            return app(_zonk_term(u, fn), tuple(_zonk_term(u, a) for a in args))
        case Lam(v, vt, b) | Forall(v, vt, b) | Exists(v, vt, b):
            vt2 = None if vt is None else u.zonk_safe(vt)
            return type(t)(v, vt2, _zonk_term(u, b), span=t.span)
        case Pi(v, vt, b):
            return Pi(v, u.zonk_safe(vt), _zonk_term(u, b), span=t.span)
        case Arrow(d, c):
            return Arrow(_zonk_term(u, d), _zonk_term(u, c), span=t.span)
        case And(a, b) | Or(a, b) | Implies(a, b) | Eq(a, b):
            return type(t)(_zonk_term(u, a), _zonk_term(u, b), span=t.span)
        case IntOp(op, a, b):
            return IntOp(op, _zonk_term(u, a), _zonk_term(u, b), span=t.span)
        case Not(a):
            return Not(_zonk_term(u, a), span=t.span)
        case Ite(c, a, b):
            return Ite(_zonk_term(u, c), _zonk_term(u, a), _zonk_term(u, b), span=t.span)
        case Match(scrut, branches):
            return Match(_zonk_term(u, scrut),
                         tuple(MatchBranch(b.ctor, b.vars, _zonk_term(u, b.rhs))
                               for b in branches), span=t.span)
        case Asserting(body, guard):
            return Asserting(_zonk_term(u, body), _zonk_term(u, guard), span=t.span)
    raise TypecheckError(f"cannot zonk {t!r}")


def infer(problem: Problem) -> Problem:
    """Typecheck a core problem, returning it with all binders annotated."""
    for stmt in problem.statements:
        if isinstance(stmt, DEP_STATEMENTS):
            raise TypecheckError(
                "dependent statements must be encoded by the dependent frontend "
                "before core type inference", stmt.span)
    problem.goal()  # exactly one
    inf = Inferencer(problem)
    new_statements = []
    for stmt in problem.statements:
        match stmt:
            case DataDef(name, params, ctors):
                rigid = frozenset(params)
                for c in ctors:
                    for at in c.arg_types:
                        inf._check_type_expr(at, rigid)
                new_statements.append(stmt)
            case ValDecl(name, ty):
                if ty != TYPE:
                    binders, mono = strip_pis(ty)
                    inf._check_type_expr(mono, frozenset(v for v, _ in binders))
                new_statements.append(stmt)
            case PredDef(defs, co):
                new_defs = []
                block_names = [d.name for d in defs]
                for d in defs:
                    _set_block_targs(inf, block_names, d)
                    new_defs.append(PredOne(d.name, d.ty, tuple(
                        _check_clause(inf, problem, d, c) for c in d.clauses)))
                    inf.self_targs.clear()
                new_statements.append(
                    PredDef(tuple(new_defs), co=co, origin=stmt.origin, span=stmt.span))
            case RecDef(defs):
                new_defs = []
                block_names = [d.name for d in defs]
                for d in defs:
                    _set_block_targs(inf, block_names, d)
                    new_defs.append(RecOne(d.name, d.ty, tuple(
                        _check_equation(inf, problem, d, e) for e in d.equations)))
                    inf.self_targs.clear()
                new_statements.append(RecDef(tuple(new_defs), origin=stmt.origin,
                                             span=stmt.span))
            case AxiomStmt(formula):
                new_statements.append(AxiomStmt(
                    inf.check_formula(formula, frozenset(), "axiom"),
                    origin=stmt.origin, span=stmt.span))
            case GoalStmt(formula):
                new_statements.append(GoalStmt(
                    inf.check_formula(formula, frozenset(), "goal"),
                    origin=stmt.origin, span=stmt.span))
            case _:
                new_statements.append(stmt)
    return problem.with_statements(new_statements)


def _rigid_of(ty: Term) -> frozenset[str]:
    return frozenset(v for v, _ in strip_pis(ty)[0])


def _set_block_targs(inf: Inferencer, block_names: list[str], d) -> None:
    """Pin type arguments of the block's symbols to d's own type parameters."""
    own = tuple(Var(v) for v, _ in strip_pis(d.ty)[0])
    inf.self_targs.clear()
    for name in block_names:
        other = inf.problem.symbols[name]
        if len(strip_pis(other.ty)[0]) == len(own):
            inf.self_targs[name] = own


def _check_clause(inf: Inferencer, problem: Problem, d: PredOne, clause: Term) -> Term:
    rigid = _rigid_of(d.ty)
    inf._check_type_expr(strip_pis(d.ty)[1], rigid)
    doms, ret = strip_arrows(strip_pis(d.ty)[1])
    if ret != PROP:
        raise TypecheckError(f"predicate {d.name!r} must return prop", None)
    out = inf.check_formula(clause, rigid, f"clause of {d.name}")
    body = strip_foralls(out)[1]
    while isinstance(body, Implies):
        body = body.rhs
    head = body.fn if isinstance(body, App) else body
    if not (isinstance(head, Const) and head.name == d.name):
        raise TypecheckError(
            f"clause of {d.name!r} must conclude with an application of it",
            clause.span)
    return out


def _check_equation(inf: Inferencer, problem: Problem, d: RecOne, eq: Term) -> Term:
    rigid = _rigid_of(d.ty)
    inf._check_type_expr(strip_pis(d.ty)[1], rigid)
    out = inf.check_formula(eq, rigid, f"equation of {d.name}")
    body = strip_foralls(out)[1]
    if not isinstance(body, Eq):
        raise TypecheckError(f"equation of {d.name!r} must be an equality", eq.span)
    head = body.lhs.fn if isinstance(body.lhs, App) else body.lhs
    if not (isinstance(head, Const) and head.name == d.name):
        raise TypecheckError(
            f"equation of {d.name!r} must define an application of it", eq.span)
    return out


def sort_of(problem: Problem, t: Term, env: dict[str, Term] | None = None) -> Term:
    """Type of a fully annotated term (bottom-up, no unification)."""
    env = env or {}
    match t:
        case Builtin("true") | Builtin("false"):
            return PROP
        case Builtin():
            return TYPE
        case IntLit():
            return INT
        case Unknown():
            raise TypecheckError("?__ has no type")
        case Var(name):
            if name in env:
                return env[name]
            raise TypecheckError(f"unbound variable {name!r} in sort_of")
        case Const(name, targs):
            if name == "select":
                mono = strip_pis(SELECT_SCHEME)[1]
                binders = strip_pis(SELECT_SCHEME)[0]
                return _subst_type(mono, {v: targs[i] for i, (v, _) in enumerate(binders)})
            if name.startswith("$"):
                return Const(name[1:].rpartition("_")[0])
            info = problem.symbols.get(name)
            if info is None:
                raise TypecheckError(f"unbound symbol {name!r} in sort_of")
            if info.kind in ("type", "depdata", "class"):
                return TYPE
            binders, mono = strip_pis(info.ty)
            if binders:
                if len(targs) != len(binders):
                    raise TypecheckError(f"{name!r} lacks type arguments in sort_of")
                return _subst_type(mono, {v: targs[i]
                                          for i, (v, _) in enumerate(binders)})
            return mono
        case App(fn, args):
            if isinstance(fn, (Const, Var)):
                try:
                    is_ty = sort_of(problem, fn, env) == TYPE
                except TypecheckError:
                    is_ty = False
                if is_ty:
                    return TYPE
            fty = sort_of(problem, fn, env)
            for _ in args:
                if not isinstance(fty, Arrow):
                    raise TypecheckError("application of a non-function in sort_of")
                fty = fty.cod
            return fty
        case Lam(v, vt, body):
            if vt is None:
                raise TypecheckError("unannotated binder in sort_of")
            return Arrow(vt, sort_of(problem, body, {**env, v: vt}))
        case Forall() | Exists() | And() | Or() | Implies() | Not() | Eq():
            return PROP
        case IntOp(op, _, _):
            return PROP if op == "<=" else INT
        case Ite(_, a, _):
            return sort_of(problem, a, env)
        case Asserting(body, _):
            return sort_of(problem, body, env)
        case Match(scrut, branches):
            if not branches:
                raise TypecheckError("empty match in sort_of")
            b = branches[0]
            info = problem.symbols[b.ctor]
            sty = sort_of(problem, scrut, env)
            mapping = _match_type_args(problem, info.owner, sty)
            doms = strip_arrows(_subst_type(strip_pis(info.ty)[1], mapping))[0]
            env2 = dict(env)
            env2.update(zip(b.vars, doms))
            return sort_of(problem, b.rhs, env2)
        case Arrow() | Pi():
            return TYPE
    raise TypecheckError(f"sort_of: unhandled term {t!r}")


def _match_type_args(problem: Problem, datatype: str, sty: Term) -> dict[str, Term]:
    d = problem.datatypes().get(datatype)
    params = d.params if d is not None else ()
    if isinstance(sty, App):
        return dict(zip(params, sty.args))
    return {}
