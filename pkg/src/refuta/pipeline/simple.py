"""Early pipeline phases: type skolemization, monomorphization, compilation
of multi-equation definitions, and specialization on static arguments."""

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
    map_statement_terms,
    statement_terms,
)
from ..terms import (
    App,
    Arrow,
    Builtin,
    Const,
    Eq,
    Exists,
    Forall,
    Match,
    MatchBranch,
    NameSupply,
    Not,
    Pi,
    TYPE,
    Term,
    Unknown,
    Var,
    app,
    foralls,
    free_vars,
    map_subterms,
    strip_arrows,
    strip_foralls,
    strip_pis,
    substitute,
    subterms,
)


# -- type skolemization -------------------------------------------------------


def skolemize_types(p: Problem):
    """Replace positive existential type quantifiers by fresh abstract types."""
    from . import Polarity, Transform

    supply = NameSupply(p.symbols.keys())
    fresh_types: list[str] = []

    def walk(t: Term, pol: Polarity) -> Term:
        match t:
            case Exists(v, ty, body) | Forall(v, ty, body) if ty == TYPE:
                is_ex = isinstance(t, Exists)
                ok = (is_ex and pol is Polarity.POSITIVE) or \
                     (not is_ex and pol is Polarity.NEGATIVE)
                if not ok:
                    raise PhaseError(
                        "skolemize_types",
                        f"type quantifier over {v!r} in a "
                        f"{pol.value} position cannot be eliminated", t.span)
                name = supply.fresh(f"tau{len(fresh_types)}")
                fresh_types.append(name)
                return walk(substitute(body, {v: Const(name)}), pol)
            case Not(b):
                return Not(walk(b, pol.flip()), span=t.span)
            case _:
                from ..terms import And, Implies, Or

                if isinstance(t, Implies):
                    return Implies(walk(t.lhs, pol.flip()), walk(t.rhs, pol),
                                   span=t.span)
                if isinstance(t, (And, Or)):
                    return type(t)(walk(t.lhs, pol), walk(t.rhs, pol), span=t.span)
                if isinstance(t, (Forall, Exists)):
                    return type(t)(t.var, t.var_ty, walk(t.body, pol), span=t.span)
                return t

    new_statements: list[Statement] = []
    for stmt in p.statements:
        if isinstance(stmt, (AxiomStmt, GoalStmt)):
            before = len(fresh_types)
            formula = walk(stmt.formula, Polarity.POSITIVE)
            for name in fresh_types[before:]:
                new_statements.append(ValDecl(name, TYPE, origin="skolemize_types"))
            new_statements.append(replace(stmt, formula=formula))
        else:
            new_statements.append(stmt)

    introduced = list(fresh_types)

    def decode(m: Model) -> Model:
        return m.without_carriers(introduced)

    return Transform("skolemize_types", p.with_statements(new_statements), decode)


# -- monomorphization ---------------------------------------------------------


def _mangle_type(t: Term) -> str:
    match t:
        case Builtin(kind):
            return kind
        case Const(name, _):
            return name
        case Var(name):
            return name
        case App(fn, args):
            return "_".join([_mangle_type(fn)] + [_mangle_type(a) for a in args])
        case Arrow(d, c):
            return f"fn_{_mangle_type(d)}_{_mangle_type(c)}"
    return "ty"


def _type_is_ground(t: Term) -> bool:
    return not any(isinstance(s, Var) for s in subterms(t))


class _Mono:
    def __init__(self, p: Problem, limit: int):
        self.p = p
        self.limit = limit
        self.supply = NameSupply(p.symbols.keys())
        # (owner statement index, targs) -> specialized-name map per symbol
        self.instances: dict[tuple[str, tuple[Term, ...]], str] = {}
        self.pending: list[tuple[str, tuple[Term, ...]]] = []
        self.emitted: set[tuple[int, tuple[Term, ...]]] = set()
        self.stmt_instances: dict[int, list[tuple[Term, ...]]] = {}
        self.owner: dict[str, int] = {}
        for idx, stmt in enumerate(p.statements):
            for name in _defined_names(stmt):
                self.owner[name] = idx

    def name_for(self, sym: str, targs: tuple[Term, ...]) -> str:
        if not targs:
            self.need(sym, targs)
            return sym
        key = (sym, targs)
        if key not in self.instances:
            base = sym + "_" + "_".join(_mangle_type(a) for a in targs)
            self.instances[key] = self.supply.fresh(base)
            self.need(sym, targs)
        return self.instances[key]

    def need(self, sym: str, targs: tuple[Term, ...]):
        if sym not in self.owner:
            return
        idx = self.owner[sym]
        stmt = self.p.statements[idx]
        if isinstance(stmt, DataDef):
            # constructor instances are owned by their datatype
            sym = stmt.name
            if targs:
                self.instances.setdefault((sym, targs),
                                          self.supply.fresh(
                                              sym + "_" + "_".join(
                                                  _mangle_type(a) for a in targs)))
        key = (idx, targs)
        if key in self.emitted:
            return
        self.emitted.add(key)
        if len(self.emitted) > self.limit + len(self.p.statements):
            raise PhaseError("monomorphize",
                             f"instantiation closure exceeds {self.limit} "
                             f"instances (at symbol {sym!r})")
        self.stmt_instances.setdefault(idx, []).append(targs)
        self.pending.append((idx, targs))

    def rewrite_term(self, t: Term, mapping: dict[str, Term]) -> Term:
        """Substitute type vars, then specialize symbol occurrences and types."""
        t = _subst_tyvars(t, mapping)
        return self._spec_term(t, {})

    def _is_type_ctor(self, name: str) -> bool:
        info = self.p.symbols.get(name)
        return info is not None and info.kind in ("type", "depdata", "class")

    def ctor_instance_name(self, ctor: str, targs: tuple[Term, ...]) -> str:
        if not targs:
            return ctor
        return self.instances.setdefault(
            (ctor, targs),
            self.supply.fresh(ctor + "_" + "_".join(_mangle_type(a) for a in targs)))

    def _spec_term(self, t: Term, env: dict[str, Term]) -> Term:
        from ..problems import CtorDecl as _C  # noqa: F401
        from ..terms import Exists as Ex, Forall as Fa, Lam as La, Match as Ma

        match t:
            case Const(name, targs):
                if self._is_type_ctor(name):
                    return self._spec_type(t)
                if targs:
                    if not all(_type_is_ground(a) for a in targs):
                        raise PhaseError("monomorphize",
                                         f"non-ground type arguments on {name!r}")
                    new_targs = tuple(self._spec_type(a) for a in targs)
                    return Const(self.name_for(name, new_targs), span=t.span)
                self.need(name, ())
                return t
            case App(Const(name, _), _) if self._is_type_ctor(name):
                return self._spec_type(t)
            case Arrow(d, c):
                return Arrow(self._spec_term(d, env), self._spec_term(c, env),
                             span=t.span)
            case Match(scrut, branches):
                from ..typecheck import sort_of

                sty = sort_of(self.p, scrut, env)
                targs = tuple(sty.args) if isinstance(sty, App) else ()
                head = sty.fn if isinstance(sty, App) else sty
                dt = self.p.datatypes()[head.name]
                param_map = dict(zip(dt.params, targs))
                if targs:
                    self.name_for(head.name, targs)
                new_branches = []
                for b in branches:
                    c = next(c for c in dt.ctors if c.name == b.ctor)
                    env2 = dict(env)
                    for v, at in zip(b.vars, c.arg_types):
                        env2[v] = _subst_tyvars(at, param_map)
                    new_branches.append(MatchBranch(
                        self.ctor_instance_name(b.ctor, targs), b.vars,
                        self._spec_term(b.rhs, env2)))
                return Match(self._spec_term(scrut, env), tuple(new_branches),
                             span=t.span)
            case La(v, ty, body) | Fa(v, ty, body) | Ex(v, ty, body):
                env2 = dict(env)
                if ty is not None:
                    env2[v] = ty
                return type(t)(v, None if ty is None else self._spec_type(ty),
                               self._spec_term(body, env2), span=t.span)
            case _:
                return map_subterms(t, lambda c: self._spec_term(c, env))

    def _spec_type(self, ty: Term) -> Term:
        match ty:
            case App(Const(name, _), args):
                args2 = tuple(self._spec_type(a) for a in args)
                return Const(self.name_for(name, args2), span=ty.span)
            case Arrow(d, c):
                return Arrow(self._spec_type(d), self._spec_type(c), span=ty.span)
            case Const(name, _):
                self.need(name, ())
                return ty
            case _:
                return ty


def _defined_names(stmt: Statement):
    match stmt:
        case DataDef(name, _, ctors):
            yield name
            for c in ctors:
                yield c.name
        case PredDef(defs) | RecDef(defs):
            for d in defs:
                yield d.name
        case ValDecl(name, _):
            yield name
        case _:
            return


def _subst_tyvars(t: Term, mapping: dict[str, Term]) -> Term:
    if not mapping:
        return t
    match t:
        case Var(name):
            return mapping.get(name, t)
        case Const(name, targs):
            if targs:
                return Const(name, tuple(_subst_tyvars(a, mapping) for a in targs),
                             span=t.span)
            return t
        case _:
            t2 = map_subterms(t, lambda c: _subst_tyvars(c, mapping))
            return _map_binder_types(t2, lambda ty: _subst_tyvars(ty, mapping))


def _map_binder_types(t: Term, f) -> Term:
    from ..terms import Exists as Ex, Forall as Fa, Lam as La

    if isinstance(t, (La, Fa, Ex)) and t.var_ty is not None:
        return type(t)(t.var, f(t.var_ty), t.body, span=t.span)
    if isinstance(t, Pi):
        return Pi(t.var, f(t.var_ty), t.body, span=t.span)
    return t


def monomorphize(p: Problem, limit: int = 256):
    """Specialize polymorphic definitions on their ground type arguments,
    reachable from the goal and axioms; drop unused definitions."""
    from . import Transform

    mono = _Mono(p, limit)

    roots: list[tuple[int, Statement]] = []
    for idx, stmt in enumerate(p.statements):
        if isinstance(stmt, (AxiomStmt, GoalStmt)):
            roots.append((idx, stmt))

    new_roots: dict[int, Statement] = {}
    for idx, stmt in roots:
        new_roots[idx] = map_statement_terms(stmt, lambda t: mono.rewrite_term(t, {}))

    # worklist: specialize definitions transitively
    specialized: dict[tuple[int, tuple[Term, ...]], Statement] = {}
    while mono.pending:
        idx, targs = mono.pending.pop(0)
        stmt = p.statements[idx]
        specialized[(idx, targs)] = _specialize_statement(mono, stmt, targs)

    dropped_vals: list[tuple[str, Term]] = []
    new_statements: list[Statement] = []
    for idx, stmt in enumerate(p.statements):
        if idx in new_roots:
            new_statements.append(new_roots[idx])
            continue
        if isinstance(stmt, (AxiomStmt, GoalStmt)):
            new_statements.append(stmt)
            continue
        inst = sorted(mono.stmt_instances.get(idx, []),
                      key=lambda ta: tuple(_mangle_type(a) for a in ta))
        if not inst and isinstance(stmt, ValDecl) and stmt.ty != TYPE:
            dropped_vals.append((stmt.name, stmt.ty))
        for targs in inst:
            new_statements.append(specialized[(idx, targs)])

    renames: dict[str, str] = {}
    by_symbol: dict[str, list[str]] = {}
    for (sym, targs), new_name in mono.instances.items():
        by_symbol.setdefault(sym, []).append(new_name)
    for sym, new_names in by_symbol.items():
        if len(new_names) == 1:
            renames[new_names[0]] = sym
        else:
            for (s2, targs), new_name in mono.instances.items():
                if s2 == sym:
                    from ..evaluator import type_key

                    ann = ",".join(type_key(a) for a in targs)
                    renames[new_name] = f"{sym}[{ann}]"

    def rename_in_term(t: Term) -> Term:
        def go(s: Term) -> Term:
            if isinstance(s, Const) and s.name in renames:
                return Const(renames[s.name], s.targs, span=s.span)
            return map_subterms(s, go)

        return go(t)

    carrier_renames: dict[str, str] = {}
    for (sym, targs), new_name in mono.instances.items():
        info = p.symbols.get(sym)
        if info is not None and info.kind in ("type", "depdata", "class"):
            from ..evaluator import type_key
            from ..terms import App as _App

            carrier_renames[new_name] = type_key(
                _App(Const(sym), targs) if targs else Const(sym))

    def decode(m: Model) -> Model:
        from ..models import FunctionEntry as FE, FunctionTable as FT

        m = m.rename(renames)
        m = Model(
            carriers=tuple((carrier_renames.get(n, n),
                            tuple(rename_in_term(v) for v in vs))
                           for n, vs in m.carriers),
            constants=tuple((n, rename_in_term(v)) for n, v in m.constants),
            functions=tuple(
                (n, FT(tuple((pn, rename_in_term(pt)) for pn, pt in tab.params),
                       tuple(FE(tuple(rename_in_term(a) for a in e.args),
                                rename_in_term(e.value)) for e in tab.entries),
                       tab.default))
                for n, tab in m.functions),
            int_carrier=m.int_carrier)
        for name, _ty in dropped_vals:
            if m.constant(name) is None and m.function(name) is None:
                m = m.with_constant(name, Unknown("?__"))
        return m

    from ..problems import toposort_statements

    ordered = toposort_statements(new_statements)
    return Transform("monomorphize", Problem(ordered, selectors=p.selectors), decode)


def _specialize_statement(mono: _Mono, stmt: Statement, targs: tuple[Term, ...]):
    match stmt:
        case DataDef(name, params, ctors):
            if not targs:
                mapping: dict[str, Term] = {}
                new_name = name
                ctor_name = {c.name: c.name for c in ctors}
            else:
                mapping = dict(zip(params, targs))
                new_name = mono.instances[(name, targs)]
                ctor_name = {c.name: mono.ctor_instance_name(c.name, targs)
                             for c in ctors}
            new_ctors = tuple(
                CtorDecl(ctor_name[c.name],
                         tuple(mono.rewrite_term(at, mapping) for at in c.arg_types))
                for c in ctors)
            return DataDef(new_name, () if targs else params, new_ctors,
                           codata=stmt.codata, origin=stmt.origin, span=stmt.span)
        case ValDecl(name, ty):
            if not targs:
                return replace(stmt, ty=mono.rewrite_term(ty, {}))
            binders, monoty = strip_pis(ty)
            mapping = dict(zip((v for v, _ in binders), targs))
            return ValDecl(mono.instances[(name, targs)],
                           mono.rewrite_term(monoty, mapping),
                           origin=stmt.origin, span=stmt.span)
        case PredDef(defs, co):
            new_defs = []
            for d in defs:
                new_defs.append(PredOne(*_spec_def(mono, d.name, d.ty, d.clauses, targs)))
            return PredDef(tuple(new_defs), co=co, origin=stmt.origin, span=stmt.span)
        case RecDef(defs):
            new_defs = []
            for d in defs:
                new_defs.append(RecOne(*_spec_def(mono, d.name, d.ty, d.equations,
                                                  targs)))
            return RecDef(tuple(new_defs), origin=stmt.origin, span=stmt.span)
    raise PhaseError("monomorphize", f"cannot specialize statement {stmt!r}")


def _spec_def(mono: _Mono, name: str, ty: Term, bodies: tuple[Term, ...],
              targs: tuple[Term, ...]):
    if not targs:
        return name, mono.rewrite_term(ty, {}), tuple(
            mono.rewrite_term(b, {}) for b in bodies)
    binders, monoty = strip_pis(ty)
    mapping = dict(zip((v for v, _ in binders), targs))
    new_name = mono.name_for(name, targs)
    new_bodies = []
    for b in bodies:
        b2 = mono.rewrite_term(b, mapping)
        b2 = _rename_const(b2, name, new_name)
        new_bodies.append(b2)
    return new_name, mono.rewrite_term(monoty, mapping), tuple(new_bodies)


def _rename_const(t: Term, old: str, new: str) -> Term:
    def go(s: Term) -> Term:
        if isinstance(s, Const) and s.name == old:
            return Const(new, span=s.span)
        return map_subterms(s, go)

    return go(t)


# -- elimination of equations -------------------------------------------------


def elim_equations(p: Problem):
    """Compile multi-equation definitions into one equation with matches."""
    from . import Transform
    from ..typecheck import sort_of

    supply = NameSupply(p.symbols.keys())
    new_statements: list[Statement] = []
    for stmt in p.statements:
        if not isinstance(stmt, RecDef):
            new_statements.append(stmt)
            continue
        new_defs = []
        for d in stmt.defs:
            new_defs.append(_compile_equations(p, supply, d))
        new_statements.append(RecDef(tuple(new_defs), origin=stmt.origin,
                                     span=stmt.span))
    return Transform("elim_equations", p.with_statements(new_statements),
                     lambda m: m)


def _is_var_pattern(t: Term) -> bool:
    return isinstance(t, Var)


def _ctor_of_pattern(p: Problem, t: Term) -> str | None:
    head = t.fn if isinstance(t, App) else t
    if isinstance(head, Const):
        info = p.symbols.get(head.name)
        if info is not None and info.kind == "ctor":
            return head.name
    return None


def _compile_equations(p: Problem, supply: NameSupply, d: RecOne) -> RecOne:
    rows = []
    arity = None
    for eqn in d.equations:
        binders, body = strip_foralls(eqn)
        if not isinstance(body, Eq):
            raise PhaseError("elim_equations", f"equation of {d.name!r} is not "
                             "an equality")
        lhs, rhs = body.lhs, body.rhs
        pats = lhs.args if isinstance(lhs, App) else ()
        if arity is None:
            arity = len(pats)
        elif arity != len(pats):
            raise PhaseError("elim_equations",
                             f"equations of {d.name!r} have inconsistent arities")
        rows.append((list(pats), dict(binders), rhs))
    if arity is None:
        raise PhaseError("elim_equations", f"{d.name!r} has no equations")

    if len(rows) == 1 and all(_is_var_pattern(x) for x in rows[0][0]):
        return d

    doms = strip_arrows(strip_pis(d.ty)[1])[0][:arity]
    xs = [(supply.fresh(f"x{i}"), doms[i]) for i in range(arity)]

    def compile_rows(scruts: list[tuple[str, Term]], rows_) -> Term | None:
        if not rows_:
            return None
        pats0, _, rhs0 = rows_[0]
        if all(_is_var_pattern(x) for x in pats0):
            binding = {x.name: Var(s) for x, (s, _) in zip(pats0, scruts)}
            return substitute(rhs0, binding)
        col = next(i for i, x in enumerate(pats0) if not _is_var_pattern(x))
        # some later row may force an earlier column; pick the first column
        # with any constructor pattern to keep the order deterministic
        for i in range(len(scruts)):
            if any(not _is_var_pattern(r[0][i]) for r in rows_):
                col = i
                break
        sname, sty = scruts[col]
        ctor0 = None
        for r in rows_:
            c = _ctor_of_pattern(p, r[0][col])
            if c is not None:
                ctor0 = c
                break
        if ctor0 is None:
            raise PhaseError("elim_equations", "unreachable pattern state")
        dt_name = p.symbols[ctor0].owner
        dt = p.datatypes()[dt_name]
        branches = []
        for c in dt.ctors:
            fresh = [(supply.fresh(f"{sname}_{i}"), c.arg_types[i])
                     for i in range(len(c.arg_types))]
            sub_rows = []
            for pats, binders, rhs in rows_:
                pat = pats[col]
                if _is_var_pattern(pat):
                    new_pats = pats[:col] + [Var(nm) for nm, _ in fresh] \
                        + pats[col + 1:]
                    sub_rows.append((new_pats, binders,
                                     substitute(rhs, {pat.name: Var(sname)})))
                else:
                    pc = _ctor_of_pattern(p, pat)
                    if pc is None:
                        raise PhaseError(
                            "elim_equations",
                            f"non-constructor pattern in {d.name!r}")
                    if pc != c.name:
                        continue
                    sub_pats = list(pat.args) if isinstance(pat, App) else []
                    new_pats = pats[:col] + sub_pats + pats[col + 1:]
                    sub_rows.append((new_pats, binders, rhs))
            sub_scruts = scruts[:col] + fresh + scruts[col + 1:]
            body = compile_rows(sub_scruts, sub_rows)
            if body is None:
                continue
            branches.append(MatchBranch(c.name, tuple(nm for nm, _ in fresh), body))
        return Match(Var(sname), tuple(branches))

    body = compile_rows(xs, rows)
    if body is None:
        raise PhaseError("elim_equations", f"{d.name!r} has no usable equations")
    lhs = app(Const(d.name), tuple(Var(nm) for nm, _ in xs))
    eqn = foralls(xs, Eq(lhs, body))
    return RecOne(d.name, d.ty, (eqn,))


# -- specialization on static arguments ---------------------------------------


def specialize(p: Problem, enabled: bool = False):
    """Instantiate directly recursive functions whose static arguments are
    closed at a call site; disabled by default."""
    from . import Transform

    if not enabled:
        return Transform("specialize", p, lambda m: m)

    supply = NameSupply(p.symbols.keys())
    rec_defs = p.rec_defs()
    static: dict[str, list[int]] = {}
    equations: dict[str, tuple[list[tuple[str, Term]], Term]] = {}
    for name, (block, d) in rec_defs.items():
        if len(block.defs) != 1 or len(d.equations) != 1:
            continue
        binders, body = strip_foralls(d.equations[0])
        if not isinstance(body, Eq) or not isinstance(body.lhs, App):
            continue
        pats = body.lhs.args
        if not all(isinstance(x, Var) for x in pats):
            continue
        calls = [s for s in subterms(body.rhs)
                 if isinstance(s, App) and isinstance(s.fn, Const)
                 and s.fn.name == name]
        if not calls:
            continue
        positions = []
        for i, x in enumerate(pats):
            if all(len(c.args) > i and c.args[i] == x for c in calls):
                positions.append(i)
        if positions:
            static[name] = positions
            equations[name] = (binders, body)

    created: dict[tuple[str, tuple[tuple[int, Term], ...]], str] = {}
    new_defs_stmts: list[RecDef] = []
    spec_info: list[tuple[str, str, tuple[tuple[int, Term], ...], int]] = []

    def rewrite_calls(t: Term) -> Term:
        t = map_subterms(t, rewrite_calls)
        if isinstance(t, App) and isinstance(t.fn, Const) and t.fn.name in static:
            fname = t.fn.name
            positions = [i for i in static[fname]
                         if i < len(t.args) and not free_vars(t.args[i])]
            if not positions:
                return t
            key = (fname, tuple((i, t.args[i]) for i in positions))
            if key not in created:
                created[key] = _make_specialized(p, supply, fname, key[1],
                                                 equations[fname], new_defs_stmts,
                                                 spec_info)
            rest = tuple(a for i, a in enumerate(t.args) if i not in positions)
            return app(Const(created[key]), rest)
        return t

    new_statements: list[Statement] = []
    for stmt in p.statements:
        if isinstance(stmt, RecDef) and any(d.name in static for d in stmt.defs):
            new_statements.append(stmt)
            continue
        new_statements.append(map_statement_terms(stmt, rewrite_calls))

    if not created:
        return Transform("specialize", p, lambda m: m)

    out: list[Statement] = []
    for stmt in new_statements:
        if isinstance(stmt, GoalStmt):
            out.extend(new_defs_stmts)
            out.append(stmt)
        else:
            out.append(stmt)

    def decode(m: Model) -> Model:
        from ..evaluator import Evaluator, value_to_term

        for orig, spec_name, fixed, orig_arity in spec_info:
            table = m.function(spec_name)
            if table is None:
                m = m.without_symbols([spec_name])
                continue
            try:
                ev = Evaluator(p, m)
                fixed_vals = {i: value_to_term(ev.eval(t)) for i, t in fixed}
            except Exception:
                m = m.without_symbols([spec_name])
                continue
            base = m.function(orig)
            entries = list(base.entries) if base else []
            params = list(base.params) if base else [
                (f"x{i}", ty) for i, ty in enumerate(
                    strip_arrows(strip_pis(p.symbols[orig].ty)[1])[0])]
            for e in table.entries:
                full = []
                it = iter(e.args)
                for i in range(orig_arity):
                    full.append(fixed_vals[i] if i in fixed_vals else next(it))
                entries.append(FunctionEntry(tuple(full), e.value))
            m = m.without_symbols([spec_name]).with_function(
                orig, FunctionTable(tuple(params), tuple(entries)))
        return m

    return Transform("specialize", Problem(out, selectors=p.selectors), decode)


def _make_specialized(p: Problem, supply: NameSupply, fname: str,
                      fixed: tuple[tuple[int, Term], ...], eqn, acc, spec_info) -> str:
    binders, body = eqn
    pats = body.lhs.args
    fixed_d = dict(fixed)
    base = fname + "_" + "_".join(
        (_mangle_type(t) if not isinstance(t, (Const, App)) else
         (t.name if isinstance(t, Const) else
          (t.fn.name if isinstance(t.fn, Const) else "t")))
        for _, t in fixed)
    new_name = supply.fresh(base)
    orig_ty = strip_pis(p.symbols[fname].ty)[1]
    doms, ret = strip_arrows(orig_ty)
    new_doms = [d for i, d in enumerate(doms) if i not in fixed_d]
    from ..terms import arrows

    new_ty = arrows(new_doms, ret)
    binding = {pats[i].name: t for i, t in fixed}

    def rewrite_rec(t: Term) -> Term:
        t = map_subterms(t, rewrite_rec)
        if isinstance(t, App) and isinstance(t.fn, Const) and t.fn.name == fname:
            rest = tuple(a for i, a in enumerate(t.args) if i not in fixed_d)
            return app(Const(new_name), rest)
        return t

    new_rhs = rewrite_rec(substitute(body.rhs, binding))
    keep = [(x.name, ty) for i, (x, ty) in enumerate(zip(pats, doms))
            if i not in fixed_d]
    new_lhs = app(Const(new_name), tuple(Var(nm) for nm, _ in keep))
    new_eqn = foralls(keep, Eq(new_lhs, new_rhs))
    acc.append(RecDef((RecOne(new_name, new_ty, (new_eqn,)),), origin="specialize"))
    spec_info.append((fname, new_name, fixed, len(doms)))
    return new_name
