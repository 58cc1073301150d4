"""Functional phases: lambda lifting, elimination of higher-order constructs
via array sorts, and the abstract-subset encoding of recursive functions."""

from __future__ import annotations

from dataclasses import replace

from ..errors import PhaseError
from ..models import FunctionEntry, FunctionTable, Model
from ..problems import (
    AxiomStmt,
    CtorDecl,
    DataDef,
    GoalStmt,
    Problem,
    RecDef,
    RecOne,
    Statement,
    ValDecl,
    map_statement_terms,
)
from ..terms import (
    TYPE,
    App,
    Arrow,
    Asserting,
    Const,
    Eq,
    Exists,
    Forall,
    Lam,
    NameSupply,
    Term,
    Var,
    app,
    arrows,
    conj,
    existss,
    foralls,
    free_vars,
    map_subterms,
    strip_arrows,
    strip_foralls,
    strip_pis,
    substitute,
    subterms,
)
from ..typecheck import sort_of


# -- lambda lifting -----------------------------------------------------------


def lambda_lift(p: Problem):
    """Replace every lambda by a named function closed over its free vars."""
    from . import Transform

    supply = NameSupply(p.symbols.keys())
    lifted: list[RecDef] = []
    lifted_names: list[str] = []

    def lift(t: Term, env: dict[str, Term]) -> Term:
        match t:
            case Lam():
                binders = []
                body = t
                env2 = dict(env)
                while isinstance(body, Lam):
                    if body.var_ty is None:
                        raise PhaseError("lambda_lift",
                                         "unannotated lambda binder")
                    binders.append((body.var, body.var_ty))
                    env2[body.var] = body.var_ty
                    body = body.body
                body2 = lift(body, env2)
                bound = {v for v, _ in binders}
                fvs = sorted(v for v in free_vars(body2) - bound if v in env)
                name = supply.fresh("lam0")
                lifted_names.append(name)
                all_binders = [(v, env[v]) for v in fvs] + binders
                ret = sort_of(p, body2, dict(all_binders))
                ty = arrows([ty for _, ty in all_binders], ret)
                lhs = app(Const(name), tuple(Var(v) for v, _ in all_binders))
                eqn = foralls(all_binders, Eq(lhs, body2))
                lifted.append(RecDef((RecOne(name, ty, (eqn,)),),
                                     origin="lambda_lift"))
                return app(Const(name), tuple(Var(v) for v in fvs))
            case Forall(v, ty, b) | Exists(v, ty, b):
                return type(t)(v, ty, lift(b, {**env, v: ty} if ty else env),
                               span=t.span)
            case _:
                return map_subterms(t, lambda c: lift(c, env))

    new_statements: list[Statement] = []
    for stmt in p.statements:
        if isinstance(stmt, RecDef):
            new_defs = []
            for d in stmt.defs:
                new_eqs = []
                for eqn in d.equations:
                    binders, body = strip_foralls(eqn)
                    env = dict(binders)
                    if isinstance(body, Eq):
                        body = Eq(body.lhs, lift(body.rhs, env), span=body.span)
                    new_eqs.append(foralls(binders, body))
                new_defs.append(RecOne(d.name, d.ty, tuple(new_eqs)))
            before = len(lifted)
            stmt2 = RecDef(tuple(new_defs), origin=stmt.origin, span=stmt.span)
            new_statements.extend(lifted[before - len(lifted):] if False else [])
            new_statements.extend(_drain(lifted))
            new_statements.append(stmt2)
        elif isinstance(stmt, (AxiomStmt, GoalStmt)):
            f2 = lift(stmt.formula, {})
            new_statements.extend(_drain(lifted))
            new_statements.append(replace(stmt, formula=f2))
        else:
            new_statements.append(stmt)

    names = list(lifted_names)

    def decode(m: Model) -> Model:
        return m.without_symbols(names)

    return Transform("lambda_lift", Problem(new_statements, selectors=p.selectors),
                     decode)


def _rebuild_lams(binders, body):
    for v, ty in reversed(binders):
        body = Lam(v, ty, body)
    return body


def _drain(acc: list) -> list:
    out = list(acc)
    acc.clear()
    return out


# -- elimination of higher-order constructs ------------------------------------


def array_ty(dom: Term, cod: Term) -> Term:
    return App(Const("array"), (dom, cod))


def _deep_array(ty: Term) -> Term:
    """Convert every arrow in a value position to an array sort."""
    match ty:
        case Arrow(d, c):
            return array_ty(_deep_array(d), _deep_array(c))
        case App(fn, args):
            return App(_deep_array(fn), tuple(_deep_array(a) for a in args),
                       span=ty.span)
        case _:
            return ty


def _spine_arrays(ty: Term) -> Term:
    """Keep the top-level curried spine, array the argument/result interiors."""
    doms, ret = strip_arrows(ty)
    return arrows([_deep_array(d) for d in doms], _deep_array(ret))


def elim_ho(p: Problem):
    """Substitute SMT-style arrays for higher-order functions: quantified
    function variables and function-sorted arguments become arrays accessed
    through select; value uses of named functions go through graph bridges."""
    from . import Transform

    supply = NameSupply(p.symbols.keys())
    arity: dict[str, int] = {}
    for name, info in p.symbols.items():
        if info.kind in ("val", "rec", "pred", "copred", "ctor"):
            arity[name] = len(strip_arrows(strip_pis(info.ty)[1])[0])

    bridges: dict[str, str] = {}
    bridge_stmts: list[Statement] = []

    def bridge_for(name: str) -> str:
        if name in bridges:
            return bridges[name]
        gname = supply.fresh(name + "_graph")
        bridges[name] = gname
        ty = strip_pis(p.symbols[name].ty)[1]
        doms, ret = strip_arrows(ty)
        gty = _deep_array(ty)
        bridge_stmts.append(ValDecl(gname, gty, origin="elim_ho"))
        xs = [(supply.fresh(f"b{i}"), _deep_array(d)) for i, d in enumerate(doms)]
        select_chain: Term = Const(gname)
        for x, _ in xs:
            select_chain = app(Const("select"), (select_chain, Var(x)))
        direct = app(Const(name), tuple(Var(x) for x, _ in xs))
        bridge_stmts.append(AxiomStmt(
            foralls(xs, Eq(select_chain, direct)), origin="elim_ho"))
        return gname

    def is_fun_sort(ty: Term) -> bool:
        return isinstance(ty, Arrow)

    def rewrite(t: Term, env: dict[str, Term], value_pos: bool) -> Term:
        """value_pos: the result is consumed as a value (argument, equality
        operand), so bare function symbols must become graphs."""
        match t:
            case Var(name):
                return t
            case Const(name, _):
                if value_pos and arity.get(name, 0) > 0:
                    return Const(bridge_for(name), span=t.span)
                return t
            case App(fn, args):
                new_args = tuple(rewrite(a, env, True) for a in args)
                if isinstance(fn, Var):
                    out: Term = fn
                    for a in new_args:
                        out = app(Const("select"), (out, a))
                    return out
                if isinstance(fn, Const):
                    n = arity.get(fn.name)
                    if fn.name == "select" or n is None or len(new_args) == n:
                        return App(fn, new_args, span=t.span)
                    if len(new_args) < n:
                        out = Const(bridge_for(fn.name))
                        for a in new_args:
                            out = app(Const("select"), (out, a))
                        return out
                    raise PhaseError("elim_ho",
                                     f"over-application of {fn.name!r}")
                fn2 = rewrite(fn, env, True)
                out = fn2
                for a in new_args:
                    out = app(Const("select"), (out, a))
                return out
            case Forall(v, ty, b) | Exists(v, ty, b):
                ty2 = _deep_array(ty) if ty is not None else None
                return type(t)(v, ty2, rewrite(b, {**env, v: ty2}, False),
                               span=t.span)
            case Eq(a, b):
                return Eq(rewrite(a, env, True), rewrite(b, env, True), span=t.span)
            case Lam():
                raise PhaseError("elim_ho", "lambda remains after lifting")
            case _:
                return map_subterms(t, lambda c: rewrite(c, env, False))

    new_statements: list[Statement] = []
    for stmt in p.statements:
        match stmt:
            case DataDef(name, params, ctors):
                new_statements.append(DataDef(name, params, tuple(
                    CtorDecl(c.name, tuple(_deep_array(a) for a in c.arg_types))
                    for c in ctors), codata=stmt.codata, origin=stmt.origin,
                    span=stmt.span))
            case ValDecl(name, ty):
                from ..terms import TYPE

                new_statements.append(
                    stmt if ty == TYPE else replace(stmt, ty=_spine_arrays(ty)))
            case RecDef(defs):
                new_defs = []
                for d in defs:
                    new_eqs = []
                    for eqn in d.equations:
                        binders, body = strip_foralls(eqn)
                        binders = [(v, _deep_array(ty) if ty is not None else None)
                                   for v, ty in binders]
                        env = dict(binders)
                        if not isinstance(body, Eq):
                            raise PhaseError("elim_ho", "malformed equation")
                        lhs = body.lhs
                        if isinstance(lhs, App):
                            lhs = App(lhs.fn, tuple(
                                rewrite(a, env, True) for a in lhs.args),
                                span=lhs.span)
                        rhs = rewrite(body.rhs, env, False)
                        new_eqs.append(foralls(binders, Eq(lhs, rhs)))
                    new_defs.append(RecOne(d.name, _spine_arrays(d.ty),
                                           tuple(new_eqs)))
                new_statements.extend(_drain(bridge_stmts))
                new_statements.append(RecDef(tuple(new_defs), origin=stmt.origin,
                                             span=stmt.span))
            case AxiomStmt(formula):
                f2 = rewrite(formula, {}, False)
                new_statements.extend(_drain(bridge_stmts))
                new_statements.append(replace(stmt, formula=f2))
            case GoalStmt(formula):
                f2 = rewrite(formula, {}, False)
                new_statements.extend(_drain(bridge_stmts))
                new_statements.append(replace(stmt, formula=f2))
            case _:
                new_statements.append(stmt)

    bridge_names = list(bridges.values())

    def decode(m: Model) -> Model:
        return m.without_symbols(bridge_names)

    return Transform("elim_ho", Problem(new_statements, selectors=p.selectors),
                     decode)


# -- elimination of recursive functions -----------------------------------------


def _rec_blocks(p: Problem) -> list[RecDef]:
    return [s for s in p.statements if isinstance(s, RecDef)]


def _calls_in(t: Term, names: set[str]) -> set[str]:
    out = set()
    for s in subterms(t):
        if isinstance(s, Const) and s.name in names:
            out.add(s.name)
    return out


def elim_rec(p: Problem):
    """Encode recursive functions for finite model finding: restrict each
    defining equation to an abstract subset type with projections, and guard
    every call site with membership of the argument tuple in that subset."""
    from . import Transform

    supply = NameSupply(p.symbols.keys())
    all_rec_names = {d.name for b in _rec_blocks(p) for d in b.defs}

    # seed: recursive definitions (direct or mutual) and guard-carrying bodies
    calls: dict[str, set[str]] = {}
    has_assert: dict[str, bool] = {}
    block_of: dict[str, frozenset[str]] = {}
    for block in _rec_blocks(p):
        names = frozenset(d.name for d in block.defs)
        for d in block.defs:
            block_of[d.name] = names
            body_calls: set[str] = set()
            any_assert = False
            for eqn in d.equations:
                body = strip_foralls(eqn)[1]
                rhs = body.rhs if isinstance(body, Eq) else body
                body_calls |= _calls_in(rhs, all_rec_names)
                any_assert = any_assert or any(
                    isinstance(s, Asserting) for s in subterms(rhs))
            calls[d.name] = body_calls
            has_assert[d.name] = any_assert

    abstracted: set[str] = set()
    for name in calls:
        if has_assert[name] or calls[name] & block_of[name]:
            abstracted |= block_of[name]
    changed = True
    while changed:
        changed = False
        for name in calls:
            if name not in abstracted and calls[name] & abstracted:
                abstracted |= block_of[name]
                changed = True

    if not abstracted:
        return Transform("elim_rec", p, lambda m: m)

    alpha: dict[str, str] = {}
    gammas: dict[str, list[str]] = {}
    arities: dict[str, list[Term]] = {}
    for block in _rec_blocks(p):
        for d in block.defs:
            if d.name not in abstracted:
                continue
            if strip_pis(d.ty)[0]:
                raise PhaseError("elim_rec",
                                 f"polymorphic rec {d.name!r} survived "
                                 "monomorphization")
            doms = strip_arrows(d.ty)[0]
            alpha[d.name] = supply.fresh(f"alpha_{d.name}")
            if len(doms) == 1:
                gammas[d.name] = [supply.fresh(f"gamma_{d.name}")]
            else:
                gammas[d.name] = [supply.fresh(f"gamma_{d.name}_{i + 1}")
                                  for i in range(len(doms))]
            arities[d.name] = doms

    def membership_guard(fname: str, args: tuple[Term, ...]) -> Term:
        b = supply.fresh("b")
        eqs = [Eq(app(Const(g), (Var(b),)), a)
               for g, a in zip(gammas[fname], args)]
        return Exists(b, Const(alpha[fname]), conj(eqs))

    def wrap_calls(t: Term) -> Term:
        if isinstance(t, App) and isinstance(t.fn, Const):
            t2 = App(t.fn, tuple(wrap_calls(a) for a in t.args), span=t.span)
            fname = t.fn.name
            if fname in abstracted:
                if len(t2.args) != len(arities[fname]):
                    raise PhaseError("elim_rec",
                                     f"partial application of {fname!r} remains")
                return Asserting(t2, membership_guard(fname, t2.args), span=t2.span)
            return t2
        if isinstance(t, Const) and t.name in abstracted:
            raise PhaseError("elim_rec",
                             f"higher-order use of {t.name!r} remains")
        return map_subterms(t, wrap_calls)

    new_statements: list[Statement] = []
    for stmt in p.statements:
        match stmt:
            case RecDef(defs):
                plain_defs = []
                axioms: list[AxiomStmt] = []
                for d in defs:
                    if d.name not in abstracted:
                        plain_defs.append(RecOne(d.name, d.ty, tuple(
                            _wrap_equation(eqn, wrap_calls) for eqn in d.equations)))
                        continue
                    doms = arities[d.name]
                    new_statements.append(ValDecl(alpha[d.name], TYPE,
                                                  origin="elim_rec"))
                    for g, dom in zip(gammas[d.name], doms):
                        new_statements.append(ValDecl(
                            g, Arrow(Const(alpha[d.name]), dom), origin="elim_rec"))
                    new_statements.append(ValDecl(d.name, d.ty, origin="elim_rec"))
                    if len(d.equations) != 1:
                        raise PhaseError("elim_rec",
                                         f"{d.name!r} has multiple equations")
                    binders, body = strip_foralls(d.equations[0])
                    if not isinstance(body, Eq) or not isinstance(body.lhs,
                                                                  (App, Const)):
                        raise PhaseError("elim_rec", "malformed defining equation")
                    pats = body.lhs.args if isinstance(body.lhs, App) else ()
                    if not all(isinstance(x, Var) for x in pats):
                        raise PhaseError("elim_rec",
                                         "pattern equations must be eliminated "
                                         "before recursive-function encoding")
                    a_var = supply.fresh("a")
                    binding = {x.name: app(Const(g), (Var(a_var),))
                               for x, g in zip(pats, gammas[d.name])}
                    lhs = app(Const(d.name),
                              tuple(app(Const(g), (Var(a_var),))
                                    for g in gammas[d.name]))
                    rhs = wrap_calls(substitute(body.rhs, binding))
                    axiom = Forall(a_var, Const(alpha[d.name]), Eq(lhs, rhs))
                    axioms.append(AxiomStmt(axiom, origin="elim_rec"))
                new_statements.extend(axioms)
                if plain_defs:
                    new_statements.append(RecDef(tuple(plain_defs),
                                                 origin=stmt.origin, span=stmt.span))
            case AxiomStmt(formula) if stmt.origin == "elim_ho":
                new_statements.append(replace(
                    stmt, formula=_restrict_bridge(formula, abstracted, alpha,
                                                   gammas, supply, wrap_calls)))
            case AxiomStmt(formula):
                new_statements.append(replace(stmt, formula=wrap_calls(formula)))
            case GoalStmt(formula):
                new_statements.append(replace(stmt, formula=wrap_calls(formula)))
            case _:
                new_statements.append(stmt)

    abstracted_list = sorted(abstracted)
    alpha_copy = dict(alpha)
    gamma_copy = {k: list(v) for k, v in gammas.items()}
    arity_copy = {k: list(v) for k, v in arities.items()}

    def decode(m: Model) -> Model:
        from ..evaluator import Evaluator, UNDEF, term_to_value, value_to_term

        for fname in abstracted_list:
            a_ty = alpha_copy[fname]
            carrier = m.carrier(a_ty) or ()
            table = m.function(fname)
            gtables = [m.function(g) for g in gamma_copy[fname]]
            image: list[tuple] = []
            for elem in carrier:
                point = []
                ok = True
                for gt in gtables:
                    v = gt.lookup((elem,)) if gt is not None else None
                    if v is None:
                        ok = False
                        break
                    point.append(v)
                if ok and tuple(point) not in image:
                    image.append(tuple(point))
            entries = []
            if table is not None:
                for args in image:
                    v = table.lookup(args)
                    if v is not None:
                        entries.append(FunctionEntry(args, v))
            entries.sort(key=lambda e: _carrier_position(m, e.args))
            params = table.params if table is not None else tuple(
                (f"x{i}", ty) for i, ty in enumerate(arity_copy[fname]))
            m = m.without_symbols([fname] + gamma_copy[fname])
            m = m.without_carriers([a_ty])
            m = m.with_function(fname, FunctionTable(tuple(params), tuple(entries)))
        return m

    return Transform("elim_rec", Problem(new_statements, selectors=p.selectors),
                     decode)


def _carrier_position(m: Model, args: tuple) -> tuple:
    """Sort key: position of each argument in its type's carrier listing."""
    position: dict = {}
    rank = 0
    for _name, values in m.carriers:
        for v in values:
            if v not in position:
                position[v] = rank
                rank += 1
    out = []
    for a in args:
        out.append(position.get(a, rank + _stable_rank(a)))
    return tuple(out)


def _stable_rank(t: Term) -> int:
    from ..terms import IntLit

    if isinstance(t, IntLit):
        return t.value
    return 0


def _restrict_bridge(formula: Term, abstracted: set[str], alpha: dict[str, str],
                     gammas: dict[str, list[str]], supply: NameSupply,
                     wrap_calls) -> Term:
    """A graph-bridge axiom of an abstracted function agrees with it on the
    abstract subset only: forall xs. lhs = f xs becomes
    forall (a : alpha_f). lhs[xs := gamma_i a] = f (gamma_1 a) ... ."""
    binders, body = strip_foralls(formula)
    if isinstance(body, Eq) and isinstance(body.rhs, App) \
            and isinstance(body.rhs.fn, Const) and body.rhs.fn.name in abstracted:
        fname = body.rhs.fn.name
        names = [v for v, _ in binders]
        if list(names) == [a.name for a in body.rhs.args if isinstance(a, Var)] \
                and len(body.rhs.args) == len(names):
            a_var = supply.fresh("a")
            binding = {x: app(Const(g), (Var(a_var),))
                       for x, g in zip(names, gammas[fname])}
            lhs = substitute(body.lhs, binding)
            rhs = substitute(body.rhs, binding)
            return Forall(a_var, Const(alpha[fname]), Eq(lhs, rhs))
    binders2, body2 = strip_foralls(wrap_calls(formula))
    return foralls(binders2, body2)


def _wrap_equation(eqn: Term, wrap_calls) -> Term:
    binders, body = strip_foralls(eqn)
    if isinstance(body, Eq):
        lhs = body.lhs
        if isinstance(lhs, App):
            lhs = App(lhs.fn, tuple(wrap_calls(a) for a in lhs.args), span=lhs.span)
        body = Eq(lhs, wrap_calls(body.rhs), span=body.span)
    return foralls(binders, body)
