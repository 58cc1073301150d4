"""Lowering phases: pattern matches become discriminators and selectors, and
asserting guards are pulled out into the surrounding logical context."""

from __future__ import annotations

from dataclasses import replace

from ..errors import PhaseError
from ..problems import (
    AxiomStmt,
    DataDef,
    GoalStmt,
    Problem,
    RecDef,
    RecOne,
    Statement,
    ValDecl,
)
from ..terms import (
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
    IntOp,
    Ite,
    Match,
    NameSupply,
    Not,
    Or,
    PROP,
    Term,
    Var,
    app,
    arrows,
    conj,
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


# -- elimination of pattern matching -------------------------------------------


def disc_name(ctor: str) -> str:
    return f"is_{ctor}"


def sel_name(ctor: str, index: int) -> str:
    return f"sel_{ctor}_{index + 1}"


def elim_match(p: Problem):
    """Rewrite matches into ite chains over discriminators and selectors."""
    from . import Transform

    supply = NameSupply(p.symbols.keys())
    selectors = dict(p.selectors)
    decl_for: dict[str, list[ValDecl]] = {}
    warnings: list[str] = []
    unreach_vals: list[ValDecl] = []

    def ensure_decls(dt: DataDef):
        if dt.name in decl_for:
            return
        decls = []
        dt_ty: Term = Const(dt.name)
        for c in dt.ctors:
            dn = disc_name(c.name)
            if dn not in selectors:
                selectors[dn] = ("disc", c.name, 0)
                decls.append(ValDecl(dn, Arrow(dt_ty, PROP), origin="elim_match"))
            for i, at in enumerate(c.arg_types):
                sn = sel_name(c.name, i)
                if sn not in selectors:
                    selectors[sn] = ("sel", c.name, i)
                    decls.append(ValDecl(sn, Arrow(dt_ty, at), origin="elim_match"))
        decl_for[dt.name] = decls

    datatypes = p.datatypes()

    def rewrite(t: Term, env: dict[str, Term]) -> Term:
        match t:
            case Match(scrut, branches):
                scrut2 = rewrite(scrut, env)
                sty = sort_of(p, scrut2, env)
                head = sty.fn if isinstance(sty, App) else sty
                if not isinstance(head, Const) or head.name not in datatypes:
                    raise PhaseError("elim_match",
                                     "match scrutinee is not of datatype sort")
                dt = datatypes[head.name]
                ensure_decls(dt)
                by_ctor = {b.ctor: b for b in branches}
                arms: list[tuple[str, Term]] = []
                for b in branches:
                    c = next(c for c in dt.ctors if c.name == b.ctor)
                    binding = {v: app(Const(sel_name(b.ctor, i)), (scrut2,))
                               for i, v in enumerate(b.vars)}
                    env2 = dict(env)
                    env2.update({v: c.arg_types[i] for i, v in enumerate(b.vars)})
                    arms.append((b.ctor, substitute(rewrite(b.rhs, env2), binding)))
                exhaustive = len(by_ctor) == len(dt.ctors)
                if exhaustive:
                    out = arms[-1][1]
                    rest = arms[:-1]
                else:
                    rty = sort_of(p, arms[0][1], env)
                    uname = supply.fresh("unreach")
                    unreach_vals.append(ValDecl(uname, rty, origin="elim_match"))
                    warnings.append(
                        f"non-exhaustive match on {head.name} completed with "
                        f"unconstrained constant {uname}")
                    out = Const(uname)
                    rest = arms
                for ctor, rhs in reversed(rest):
                    out = Ite(app(Const(disc_name(ctor)), (scrut2,)), rhs, out)
                return out
            case Forall(v, ty, b) | Exists(v, ty, b):
                return type(t)(v, ty, rewrite(b, {**env, v: ty} if ty else env),
                               span=t.span)
            case _:
                return map_subterms(t, lambda c: rewrite(c, env))

    new_statements: list[Statement] = []
    for stmt in p.statements:
        match stmt:
            case RecDef(defs):
                new_defs = []
                for d in defs:
                    new_eqs = []
                    for eqn in d.equations:
                        binders, body = strip_foralls(eqn)
                        env = dict(binders)
                        if isinstance(body, Eq):
                            body = Eq(body.lhs, rewrite(body.rhs, env),
                                      span=body.span)
                        new_eqs.append(foralls(binders, body))
                    new_defs.append(RecOne(d.name, d.ty, tuple(new_eqs)))
                new_statements.extend(_take(unreach_vals))
                new_statements.append(RecDef(tuple(new_defs), origin=stmt.origin,
                                             span=stmt.span))
            case AxiomStmt(formula):
                f2 = rewrite(formula, {})
                new_statements.extend(_take(unreach_vals))
                new_statements.append(replace(stmt, formula=f2))
            case GoalStmt(formula):
                f2 = rewrite(formula, {})
                new_statements.extend(_take(unreach_vals))
                new_statements.append(replace(stmt, formula=f2))
            case _:
                new_statements.append(stmt)

    # place selector declarations right after their datatype
    final: list[Statement] = []
    for stmt in new_statements:
        final.append(stmt)
        if isinstance(stmt, DataDef) and stmt.name in decl_for:
            final.extend(decl_for[stmt.name])

    introduced = [d.name for decls in decl_for.values() for d in decls]
    introduced += [v.name for v in unreach_vals]
    introduced_set = set(introduced) | {
        s.name for s in final
        if isinstance(s, ValDecl) and s.origin == "elim_match"}

    def decode(m):
        return m.without_symbols(introduced_set)

    return Transform("elim_match", Problem(final, selectors=selectors),
                     decode, warnings=tuple(warnings))


def _take(acc: list) -> list:
    out = list(acc)
    acc.clear()
    return out


# -- guard propagation and elimination of assertions ------------------------------


def _is_connective(p: Problem, t: Term, env: dict[str, Term]) -> bool:
    match t:
        case And() | Or() | Implies() | Not() | Forall() | Exists():
            return True
        case Eq(a, _):
            try:
                return sort_of(p, a, env) == PROP
            except Exception:
                return False
        case Ite(_, a, _):
            try:
                return sort_of(p, a, env) == PROP
            except Exception:
                return False
        case Asserting():
            return True
    return False


def _extract_guards(p: Problem, t: Term, env: dict[str, Term],
                    conds: tuple[Term, ...], acc: list[tuple[tuple[Term, ...], Term]],
                    aux: "_AuxDefs") -> Term:
    """Remove asserting nodes from a term-sorted region, collecting
    (ite-branch conditions, guard) pairs."""
    match t:
        case Asserting(body, guard):
            g2 = propagate_guards_env(p, guard, POS, env, aux)
            acc.append((conds, g2))
            return _extract_guards(p, body, env, conds, acc, aux)
        case Ite(c, a, b):
            c2 = _extract_guards(p, c, env, conds, acc, aux)
            a2 = _extract_guards(p, a, env, conds + (c2,), acc, aux)
            b2 = _extract_guards(p, b, env, conds + (Not(c2),), acc, aux)
            return Ite(c2, a2, b2, span=t.span)
        case _:
            return map_subterms(
                t, lambda ch: _extract_guards(p, ch, env, conds, acc, aux))


def _conditioned(guards: list[tuple[tuple[Term, ...], Term]]) -> list[Term]:
    out = []
    for conds, g in guards:
        if conds:
            out.append(Implies(conj(conds), g))
        else:
            out.append(g)
    return out


class _AuxDefs:
    """Fresh propositional definitions for guards stuck in unpolarized spots."""

    def __init__(self, p: Problem, supply: NameSupply):
        self.p = p
        self.supply = supply
        self.defs: list[RecDef] = []

    def define(self, formula: Term, env: dict[str, Term]) -> Term:
        fvs = sorted(free_vars(formula))
        fvs = [v for v in fvs if v in env]
        name = self.supply.fresh("guarded")
        params = [(v, env[v]) for v in fvs]
        ty = arrows([ty for _, ty in params], PROP)
        lhs = app(Const(name), tuple(Var(v) for v, _ in params))
        self.defs.append(RecDef(
            (RecOne(name, ty, (foralls(params, Eq(lhs, formula)),)),),
            origin="elim_asserting"))
        return app(Const(name), tuple(Var(v) for v, _ in params))


from . import Polarity  # noqa: E402

POS = Polarity.POSITIVE
NEG = Polarity.NEGATIVE
UNPOL = Polarity.UNPOLARIZED


def propagate_guards_env(p: Problem, t: Term, pol, env: dict[str, Term],
                         aux: _AuxDefs | None = None) -> Term:
    """Pull asserting guards out to the nearest polarized formula position."""
    if aux is None:
        aux = _AuxDefs(p, NameSupply(p.symbols.keys()))
    match t:
        case And(a, b) | Or(a, b):
            return type(t)(propagate_guards_env(p, a, pol, env, aux),
                           propagate_guards_env(p, b, pol, env, aux), span=t.span)
        case Implies(a, b):
            return Implies(propagate_guards_env(p, a, pol.flip(), env, aux),
                           propagate_guards_env(p, b, pol, env, aux), span=t.span)
        case Not(a):
            return Not(propagate_guards_env(p, a, pol.flip(), env, aux), span=t.span)
        case Forall(v, ty, b) | Exists(v, ty, b):
            env2 = {**env, v: ty} if ty is not None else env
            return type(t)(v, ty, propagate_guards_env(p, b, pol, env2, aux),
                           span=t.span)
        case Asserting(body, guard):
            g2 = propagate_guards_env(p, guard, POS, env, aux)
            b2 = propagate_guards_env(p, body, pol, env, aux)
            if pol is POS:
                return And(b2, g2, span=t.span)
            if pol is NEG:
                return Implies(g2, b2, span=t.span)
            return aux.define(And(b2, g2), env)
        case Ite(c, a, b) if _is_connective(p, t, env):
            c2 = propagate_guards_env(p, c, UNPOL, env, aux)
            return Ite(c2, propagate_guards_env(p, a, pol, env, aux),
                       propagate_guards_env(p, b, pol, env, aux), span=t.span)
        case Eq(a, b) if _is_connective(p, t, env):
            return Eq(propagate_guards_env(p, a, UNPOL, env, aux),
                      propagate_guards_env(p, b, UNPOL, env, aux), span=t.span)
        case _:
            # an atom: extract guards from the term region inside
            guards: list[tuple[tuple[Term, ...], Term]] = []
            t2 = _extract_guards(p, t, env, (), guards, aux)
            if not guards:
                return t2
            attached = _conditioned(guards)
            if pol is POS:
                return conj([t2] + attached)
            if pol is NEG:
                return Implies(conj(attached), t2)
            return aux.define(conj([t2] + attached), env)


def propagate_guards(p: Problem, t: Term, pol=None) -> Term:
    """Public entry: propagate guards in a prop-sorted term."""
    return propagate_guards_env(p, t, pol or POS, {})


def _push_negated_implications(t: Term) -> Term:
    """Classical cleanup: ~(g => a) becomes ~a && g (guard attachments at
    negative atoms read like the conjunction form this way)."""
    t = map_subterms(t, _push_negated_implications)
    if isinstance(t, Not) and isinstance(t.body, Implies):
        return And(Not(t.body.rhs), t.body.lhs, span=t.span)
    return t


def elim_asserting(p: Problem):
    """Apply guard propagation to every axiom and the goal (both positive);
    the output contains no asserting anywhere."""
    from . import Transform

    supply = NameSupply(p.symbols.keys())
    aux = _AuxDefs(p, supply)
    new_statements: list[Statement] = []
    for stmt in p.statements:
        match stmt:
            case AxiomStmt(formula):
                f2 = _push_negated_implications(
                    propagate_guards_env(p, formula, POS, {}, aux))
                new_statements.extend(_take(aux.defs))
                new_statements.append(replace(stmt, formula=f2))
            case GoalStmt(formula):
                f2 = _push_negated_implications(
                    propagate_guards_env(p, formula, POS, {}, aux))
                new_statements.extend(_take(aux.defs))
                new_statements.append(replace(stmt, formula=f2))
            case RecDef(defs):
                for d in defs:
                    for eqn in d.equations:
                        if any(isinstance(s, Asserting) for s in subterms(eqn)):
                            raise PhaseError(
                                "elim_asserting",
                                f"asserting guard in plain definition {d.name!r} "
                                "(should have been abstracted)")
                new_statements.append(stmt)
            case _:
                new_statements.append(stmt)

    return Transform("elim_asserting", Problem(new_statements,
                                               selectors=p.selectors), lambda m: m)
