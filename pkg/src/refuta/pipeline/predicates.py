"""Predicate phases: polarization, unrolling, term skolemization, and the
recasting of (co)inductive predicates into recursive equations."""

from __future__ import annotations

from dataclasses import replace

from ..errors import PhaseError
from ..models import FunctionEntry, FunctionTable, Model
from ..problems import (
    AxiomStmt,
    CtorDecl,
    DataDef,
    GoalStmt,
    PredDef,
    PredOne,
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
    Const,
    Eq,
    Exists,
    Forall,
    Implies,
    Ite,
    NameSupply,
    Not,
    Or,
    PROP,
    Term,
    Var,
    app,
    arrows,
    conj,
    disj,
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


# -- polarity analysis ---------------------------------------------------------


def _walk_polarity(problem: Problem, t: Term, pol, env: dict, visit) -> None:
    """Call visit(pred_name, polarity) for every predicate occurrence."""
    from . import Polarity

    match t:
        case Not(b):
            _walk_polarity(problem, b, pol.flip(), env, visit)
        case Implies(a, b):
            _walk_polarity(problem, a, pol.flip(), env, visit)
            _walk_polarity(problem, b, pol, env, visit)
        case And(a, b) | Or(a, b):
            _walk_polarity(problem, a, pol, env, visit)
            _walk_polarity(problem, b, pol, env, visit)
        case Forall(v, ty, b) | Exists(v, ty, b):
            env2 = {**env, v: ty}
            _walk_polarity(problem, b, pol, env2, visit)
        case Eq(a, b):
            try:
                is_prop = sort_of(problem, a, env) == PROP
            except Exception:
                is_prop = False
            sub_pol = Polarity.UNPOLARIZED
            _walk_polarity(problem, a, sub_pol if is_prop else sub_pol, env, visit)
            _walk_polarity(problem, b, sub_pol, env, visit)
        case Ite(c, a, b):
            _walk_polarity(problem, c, Polarity.UNPOLARIZED, env, visit)
            try:
                is_prop = sort_of(problem, a, env) == PROP
            except Exception:
                is_prop = True
            branch_pol = pol if is_prop else Polarity.UNPOLARIZED
            _walk_polarity(problem, a, branch_pol, env, visit)
            _walk_polarity(problem, b, branch_pol, env, visit)
        case Asserting(body, guard):
            _walk_polarity(problem, body, pol, env, visit)
            _walk_polarity(problem, guard, Polarity.POSITIVE, env, visit)
        case App(Const(name, _), args):
            info = problem.symbols.get(name)
            if info is not None and info.kind in ("pred", "copred"):
                visit(name, pol)
            for a in args:
                _walk_polarity(problem, a, Polarity.UNPOLARIZED, env, visit)
        case Const(name, _):
            info = problem.symbols.get(name)
            if info is not None and info.kind in ("pred", "copred"):
                visit(name, pol)
        case _:
            from ..terms import children

            for c in children(t):
                _walk_polarity(problem, c, Polarity.UNPOLARIZED, env, visit)


def _rewrite_polarized(problem: Problem, t: Term, pol, env: dict, rename) -> Term:
    """Rewrite predicate occurrences via rename(name, polarity)."""
    from . import Polarity

    match t:
        case Not(b):
            return Not(_rewrite_polarized(problem, b, pol.flip(), env, rename),
                       span=t.span)
        case Implies(a, b):
            return Implies(_rewrite_polarized(problem, a, pol.flip(), env, rename),
                           _rewrite_polarized(problem, b, pol, env, rename),
                           span=t.span)
        case And(a, b) | Or(a, b):
            return type(t)(_rewrite_polarized(problem, a, pol, env, rename),
                           _rewrite_polarized(problem, b, pol, env, rename),
                           span=t.span)
        case Forall(v, ty, b) | Exists(v, ty, b):
            env2 = {**env, v: ty}
            return type(t)(v, ty, _rewrite_polarized(problem, b, pol, env2, rename),
                           span=t.span)
        case Eq(a, b):
            u = Polarity.UNPOLARIZED
            return Eq(_rewrite_polarized(problem, a, u, env, rename),
                      _rewrite_polarized(problem, b, u, env, rename), span=t.span)
        case Ite(c, a, b):
            u = Polarity.UNPOLARIZED
            try:
                is_prop = sort_of(problem, a, env) == PROP
            except Exception:
                is_prop = True
            bp = pol if is_prop else u
            return Ite(_rewrite_polarized(problem, c, u, env, rename),
                       _rewrite_polarized(problem, a, bp, env, rename),
                       _rewrite_polarized(problem, b, bp, env, rename), span=t.span)
        case Asserting(body, guard):
            return Asserting(
                _rewrite_polarized(problem, body, pol, env, rename),
                _rewrite_polarized(problem, guard, Polarity.POSITIVE, env, rename),
                span=t.span)
        case App(Const(name, targs) as head, args):
            u = Polarity.UNPOLARIZED
            new_args = tuple(_rewrite_polarized(problem, a, u, env, rename)
                             for a in args)
            info = problem.symbols.get(name)
            if info is not None and info.kind in ("pred", "copred"):
                return App(Const(rename(name, pol), targs, span=head.span), new_args,
                           span=t.span)
            return App(head, new_args, span=t.span)
        case Const(name, targs):
            info = problem.symbols.get(name)
            if info is not None and info.kind in ("pred", "copred"):
                return Const(rename(name, pol), targs, span=t.span)
            return t
        case _:
            u = Polarity.UNPOLARIZED
            return map_subterms(t, lambda c: _rewrite_polarized(problem, c, u, env,
                                                                rename))


def polarize(p: Problem):
    """Split predicates used in mixed polarities into positive-use and
    negative-use versions; unpolarized occurrences keep an unsplit copy."""
    from . import Polarity, Transform

    uses: dict[str, set] = {}

    def visit(name, pol):
        uses.setdefault(name, set()).add(pol)

    for stmt in p.statements:
        match stmt:
            case AxiomStmt(formula) | GoalStmt(formula):
                _walk_polarity(p, formula, Polarity.POSITIVE, {}, visit)
            case RecDef(defs):
                for d in defs:
                    for eqn in d.equations:
                        binders, body = strip_foralls(eqn)
                        env = {v: ty for v, ty in binders}
                        if isinstance(body, Eq):
                            _walk_polarity(p, body.rhs, Polarity.UNPOLARIZED, env,
                                           visit)
            case _:
                pass

    split = {name for name, ps in uses.items()
             if Polarity.POSITIVE in ps and Polarity.NEGATIVE in ps}
    if not split:
        return Transform("polarize", p, lambda m: m)

    supply = NameSupply(p.symbols.keys())
    names: dict[tuple[str, str], str] = {}
    keep_unsplit: dict[str, bool] = {}
    for name in split:
        names[(name, "pos")] = supply.fresh(name + "_pos")
        names[(name, "neg")] = supply.fresh(name + "_neg")
        keep_unsplit[name] = Polarity.UNPOLARIZED in uses[name]

    def rename(name: str, pol) -> str:
        if name not in split:
            return name
        if pol is Polarity.POSITIVE:
            return names[(name, "pos")]
        if pol is Polarity.NEGATIVE:
            return names[(name, "neg")]
        return name  # unpolarized keeps the unsplit copy

    def copy_block(stmt: PredDef, suffix: str, pol) -> PredDef:
        new_defs = []
        for d in stmt.defs:
            new_clauses = []
            for clause in d.clauses:
                binders, body = strip_foralls(clause)
                env = {v: ty for v, ty in binders}
                # premises and conclusion recurse at the family's polarity
                def prem_rename(n, _pol, _pol_fixed=pol):
                    return rename(n, _pol_fixed)

                new_clauses.append(
                    _rewrite_polarized(p, clause, pol, {}, prem_rename))
            new_defs.append(PredOne(rename(d.name, pol), d.ty, tuple(new_clauses)))
        return PredDef(tuple(new_defs), co=stmt.co, origin="polarize", span=stmt.span)

    new_statements: list[Statement] = []
    for stmt in p.statements:
        match stmt:
            case PredDef(defs):
                block_names = {d.name for d in stmt.defs}
                if not (block_names & split):
                    new_statements.append(stmt)
                    continue
                new_statements.append(copy_block(stmt, "pos", Polarity.POSITIVE))
                new_statements.append(copy_block(stmt, "neg", Polarity.NEGATIVE))
                if any(keep_unsplit.get(n, False) for n in block_names):
                    new_statements.append(stmt)
            case AxiomStmt(formula):
                new_statements.append(replace(stmt, formula=_rewrite_polarized(
                    p, formula, Polarity.POSITIVE, {}, rename)))
            case GoalStmt(formula):
                new_statements.append(replace(stmt, formula=_rewrite_polarized(
                    p, formula, Polarity.POSITIVE, {}, rename)))
            case _:
                new_statements.append(stmt)

    split_list = sorted(split)

    def decode(m: Model) -> Model:
        for name in split_list:
            pos_t = m.function(names[(name, "pos")])
            neg_t = m.function(names[(name, "neg")])
            merged_entries: list[FunctionEntry] = []
            seen: set = set()
            params = None
            for table in (pos_t, neg_t, m.function(name)):
                if table is None:
                    continue
                params = params or table.params
                for e in table.entries:
                    if e.args not in seen:
                        seen.add(e.args)
                        merged_entries.append(e)
            m = m.without_symbols([names[(name, "pos")], names[(name, "neg")]])
            if params is not None:
                m = m.with_function(name, FunctionTable(tuple(params),
                                                        tuple(merged_entries)))
        return m

    return Transform("polarize", Problem(new_statements, selectors=p.selectors),
                     decode)


# -- unrolling -----------------------------------------------------------------


def _is_strict_subterm(small: Term, big: Term) -> bool:
    return small != big and any(small == s for s in subterms(big))


def _clause_parts(name_set: set[str], clause: Term):
    binders, body = strip_foralls(clause)
    premises = []
    while isinstance(body, Implies):
        premises.append(body.lhs)
        body = body.rhs
    head = body.fn if isinstance(body, App) else body
    concl_args = body.args if isinstance(body, App) else ()
    return binders, premises, head, concl_args


def _well_founded(p: Problem, stmt: PredDef) -> bool:
    """Each recursive premise must have some argument that is a strict
    subterm of the conclusion argument at the same position."""
    from ..terms import children

    names = {d.name for d in stmt.defs}

    def scan(t: Term, concl_args) -> bool:
        if isinstance(t, App) and isinstance(t.fn, Const) and t.fn.name in names:
            ok = any(i < len(concl_args) and _is_strict_subterm(a, concl_args[i])
                     for i, a in enumerate(t.args))
            return ok and all(scan(a, concl_args) for a in t.args)
        if isinstance(t, Const) and t.name in names:
            return False
        return all(scan(c, concl_args) for c in children(t))

    for d in stmt.defs:
        for clause in d.clauses:
            _, premises, _, concl_args = _clause_parts(names, clause)
            for prem in premises:
                if not scan(prem, concl_args):
                    return False
    return True


FUEL_TYPE = "fuel"
FUEL_ZERO = "FZ"
FUEL_SUC = "FS"


def _fuel_value(depth: int) -> Term:
    t: Term = Const(FUEL_ZERO)
    for _ in range(depth):
        t = App(Const(FUEL_SUC), (t,))
    return t


def unroll(p: Problem, enabled: bool = True, depth: int = 8):
    """Add a decreasing fuel argument to possibly ill-founded predicates."""
    from . import Polarity, Transform

    if not enabled:
        return Transform("unroll", p, lambda m: m)

    targets: set[str] = set()
    target_blocks: list[PredDef] = []
    for stmt in p.statements:
        if isinstance(stmt, PredDef) and not stmt.co and not _well_founded(p, stmt):
            target_blocks.append(stmt)
            targets |= {d.name for d in stmt.defs}
    if not targets:
        return Transform("unroll", p, lambda m: m)

    supply = NameSupply(p.symbols.keys())
    fuel_ty_name = FUEL_TYPE if FUEL_TYPE not in p.symbols else supply.fresh(FUEL_TYPE)
    fz = FUEL_ZERO if FUEL_ZERO not in p.symbols else supply.fresh(FUEL_ZERO)
    fs = FUEL_SUC if FUEL_SUC not in p.symbols else supply.fresh(FUEL_SUC)
    fuel_decl = DataDef(fuel_ty_name, (), (CtorDecl(fz, ()),
                                           CtorDecl(fs, (Const(fuel_ty_name),))),
                        origin="unroll")

    def fuel_at(d: int) -> Term:
        t: Term = Const(fz)
        for _ in range(d):
            t = App(Const(fs), (t,))
        return t

    def rewrite_occurrence(t: Term) -> Term:
        t = map_subterms(t, rewrite_occurrence)
        if isinstance(t, App) and isinstance(t.fn, Const) and t.fn.name in targets:
            return App(t.fn, (fuel_at(depth),) + t.args, span=t.span)
        if isinstance(t, Const) and t.name in targets:
            return App(t, (fuel_at(depth),), span=t.span)
        return t

    def unroll_clause(names: set[str], clause: Term, fuel_var: str) -> Term:
        binders, body = strip_foralls(clause)

        def fix(t: Term, conclusion: bool) -> Term:
            match t:
                case Implies(a, b):
                    return Implies(fix(a, False), fix(b, conclusion), span=t.span)
                case App(Const(name, targs) as head, args) if name in names:
                    fuel = App(Const(fs), (Var(fuel_var),)) if conclusion \
                        else Var(fuel_var)
                    return App(head, (fuel,) + tuple(
                        rewrite_occurrence(a) for a in args), span=t.span)
                case _:
                    return rewrite_occurrence(t)

        new_body = fix(body, True)
        return foralls([(fuel_var, Const(fuel_ty_name))] + binders, new_body)

    new_statements: list[Statement] = []
    inserted_fuel = False
    for stmt in p.statements:
        match stmt:
            case PredDef(defs) if {d.name for d in stmt.defs} & targets:
                if not inserted_fuel:
                    new_statements.append(fuel_decl)
                    inserted_fuel = True
                names = {d.name for d in defs}
                new_defs = []
                for d in defs:
                    binders_ty, mono = strip_pis(d.ty)
                    new_mono = Arrow(Const(fuel_ty_name), mono)
                    new_ty = new_mono
                    for v, vt in reversed(binders_ty):
                        from ..terms import Pi

                        new_ty = Pi(v, vt, new_ty)
                    fuel_var = supply.fresh("fuel_n")
                    new_defs.append(PredOne(d.name, new_ty, tuple(
                        unroll_clause(names, c, fuel_var) for c in d.clauses)))
                new_statements.append(PredDef(tuple(new_defs), co=stmt.co,
                                              origin="unroll", span=stmt.span))
            case AxiomStmt(formula):
                new_statements.append(replace(stmt,
                                              formula=rewrite_occurrence(formula)))
            case GoalStmt(formula):
                new_statements.append(replace(stmt,
                                              formula=rewrite_occurrence(formula)))
            case RecDef(defs):
                new_statements.append(RecDef(tuple(
                    RecOne(d.name, d.ty,
                           tuple(rewrite_occurrence(e) for e in d.equations))
                    for d in defs), origin=stmt.origin, span=stmt.span))
            case _:
                new_statements.append(stmt)

    target_list = sorted(targets)
    full_fuel = _fuel_term_repr(fz, fs, depth)

    def decode(m: Model) -> Model:
        for name in target_list:
            table = m.function(name)
            if table is None:
                continue
            entries = tuple(FunctionEntry(e.args[1:], e.value)
                            for e in table.entries if e.args[0] == full_fuel)
            m = m.with_function(name, FunctionTable(tuple(table.params[1:]), entries))
        m = m.without_carriers([fuel_ty_name])
        return m

    return Transform("unroll", Problem(new_statements, selectors=p.selectors), decode)


def _fuel_term_repr(fz: str, fs: str, depth: int) -> Term:
    t: Term = Const(fz)
    for _ in range(depth):
        t = App(Const(fs), (t,))
    return t


# -- term skolemization ----------------------------------------------------------


def skolemize(p: Problem):
    """Introduce Skolem symbols for positive existential term variables."""
    from . import Polarity, Transform

    supply = NameSupply(p.symbols.keys())
    new_vals: list[ValDecl] = []

    def walk(t: Term, pol, prefix: list[tuple[str, Term]]) -> Term:
        match t:
            case Exists(v, ty, body) if pol is Polarity.POSITIVE:
                return _skolem_step(t, v, ty, body, pol, prefix, walk)
            case Forall(v, ty, body) if pol is Polarity.NEGATIVE:
                return _skolem_step(t, v, ty, body, pol, prefix, walk)
            case Forall(v, ty, body) if pol is Polarity.POSITIVE:
                return Forall(v, ty, walk(body, pol, prefix + [(v, ty)]), span=t.span)
            case Exists(v, ty, body) if pol is Polarity.NEGATIVE:
                return Exists(v, ty, walk(body, pol, prefix + [(v, ty)]), span=t.span)
            case Not(b):
                return Not(walk(b, pol.flip(), prefix), span=t.span)
            case Implies(a, b):
                return Implies(walk(a, pol.flip(), prefix), walk(b, pol, prefix),
                               span=t.span)
            case And(a, b) | Or(a, b):
                return type(t)(walk(a, pol, prefix), walk(b, pol, prefix),
                               span=t.span)
            case _:
                return t

    def _skolem_step(t, v, ty, body, pol, prefix, walk_):
        if ty is None:
            raise PhaseError("skolemize", f"binder {v!r} lacks a type")
        deps = [(n, dty) for n, dty in prefix if n in free_vars(body)]
        name = supply.fresh(f"sk_{v}")
        sk_ty = arrows([dty for _, dty in deps], ty)
        new_vals.append(ValDecl(name, sk_ty, origin="skolemize"))
        witness = app(Const(name), tuple(Var(n) for n, _ in deps))
        return walk_(substitute(body, {v: witness}), pol, prefix)

    new_statements: list[Statement] = []
    for stmt in p.statements:
        match stmt:
            case AxiomStmt(formula) | GoalStmt(formula):
                before = len(new_vals)
                f2 = walk(formula, Polarity.POSITIVE, [])
                new_statements.extend(new_vals[before:])
                new_statements.append(replace(stmt, formula=f2))
            case _:
                new_statements.append(stmt)

    return Transform("skolemize", Problem(new_statements, selectors=p.selectors),
                     lambda m: m)


# -- elimination of (co)inductive predicates --------------------------------------


def elim_preds(p: Problem):
    """Recast each (co)inductive predicate as a recursive equation of sort
    prop: p(xs) = disjunction over its clauses."""
    from . import Transform

    supply = NameSupply(p.symbols.keys())
    new_statements: list[Statement] = []
    for stmt in p.statements:
        if not isinstance(stmt, PredDef):
            new_statements.append(stmt)
            continue
        names = {d.name for d in stmt.defs}
        new_defs = []
        for d in stmt.defs:
            doms = strip_arrows(strip_pis(d.ty)[1])[0]
            xs = [(supply.fresh(f"x{i}"), doms[i]) for i in range(len(doms))]
            disjuncts = []
            for clause in d.clauses:
                binders, premises, head, concl_args = _clause_parts(names, clause)
                if not (isinstance(head, Const) and head.name == d.name):
                    raise PhaseError("elim_preds",
                                     f"clause of {d.name!r} is not Horn-shaped")
                if len(concl_args) != len(xs):
                    raise PhaseError("elim_preds",
                                     f"clause of {d.name!r} has wrong arity")
                eqs = [Eq(Var(x), a) for (x, _), a in zip(xs, concl_args)]
                body = conj(eqs + premises)
                disjuncts.append(existss(binders, body))
            eqn = foralls(xs, Eq(app(Const(d.name), tuple(Var(x) for x, _ in xs)),
                                 disj(disjuncts)))
            new_defs.append(RecOne(d.name, d.ty, (eqn,)))
        new_statements.append(RecDef(tuple(new_defs), origin="elim_preds",
                                     span=stmt.span))

    return Transform("elim_preds", Problem(new_statements, selectors=p.selectors),
                     lambda m: m)
