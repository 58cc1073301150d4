"""Backtracking model search over the backend fragment.

A candidate model is an assignment of values to *cells* (one cell per
uninterpreted symbol and argument tuple).  Constraints (axioms and the goal)
are evaluated under the partial assignment; evaluation either produces a
value, or signals the first unassigned cell it needs, together with value
suggestions propagated through invertible contexts (equalities and integer
offsets).  The search branches on that cell, suggestions first, and
backtracks chronologically on falsified constraints.  Every model found must
pass the reference-evaluator check before it is reported.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional

from ..errors import EvalError, SolveError
from ..evaluator import (
    Evaluator,
    _NO_DESTRUCTURE,
    VArr,
    VCtor,
    VDom,
    value_to_term,
)
from ..models import FunctionEntry, FunctionTable, Model
from ..problems import AxiomStmt, GoalStmt, Problem, RecDef, ValDecl
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
    INT,
    Implies,
    IntLit,
    IntOp,
    Ite,
    Lam,
    Match,
    Not,
    Or,
    PROP,
    TYPE,
    Term,
    Unknown,
    Var,
    strip_arrows,
    strip_foralls,
)
from .carriers import CarrierSet, abstract_types, cardinality_points


@dataclass(frozen=True)
class CardinalitySchedule:
    """Search bounds: abstract-type sizes iterate smallest-first up to
    ``max_card``; datatypes unfold to ``depth``; integers live in
    [-int_bound, int_bound]."""

    start: int = 1
    max_card: int = 8
    depth: int = 5
    int_bound: int = 1000
    timeout_ms: Optional[int] = None
    int_branch_window: int = 16
    point_steps: int = 2_000_000


@dataclass
class Verdict:
    kind: str  # "SAT" | "UNSAT_UP_TO" | "UNKNOWN"
    model: Optional[Model] = None
    reason: str = ""
    bounds: str = ""

    @property
    def is_sat(self) -> bool:
        return self.kind == "SAT"


class _OOB:
    """Integer value outside [-B, B]; makes the enclosing atom false."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "OOB"


OOB = _OOB()


class Unassigned(Exception):
    def __init__(self, cell, transform=None, suggestions=()):
        self.cell = cell
        self.transform = transform
        self.suggestions = list(suggestions)
        super().__init__(str(cell))

    def opaque(self) -> "Unassigned":
        return Unassigned(self.cell, None, self.suggestions)


class _Timeout(Exception):
    pass


class _PointBudget(Exception):
    """Per-point search budget exhausted; the point was not fully explored."""


@dataclass(frozen=True)
class VLazyArr:
    """An unassigned array-typed symbol applied to some keys; its points are
    individual cells, materialized only when the value itself is needed."""

    name: str
    args: tuple
    doms_left: int


def array_spine(ty: Term) -> tuple[list[Term], Term]:
    doms = []
    while isinstance(ty, App) and isinstance(ty.fn, Const) and ty.fn.name == "array":
        doms.append(ty.args[0])
        ty = ty.args[1]
    return doms, ty


class PartialEvaluator:
    def __init__(self, p: Problem, carriers: CarrierSet, assignment: dict,
                 int_bound: int, deadline: float | None,
                 step_budget: int | None = None):
        self.p = p
        self.carriers = carriers
        self.assignment = assignment
        self.int_bound = int_bound
        self.deadline = deadline
        self.step_budget = step_budget
        self.steps = 0
        self.reads: set = set()  # cells read by the current evaluation
        self.rec_defs = p.rec_defs()
        # symbol -> (arrow doms + array doms, base result type)
        self.symbol_sig: dict[str, tuple[list[Term], Term]] = {}
        self.full_sig: dict[str, tuple[list[Term], Term]] = {}
        for name, info in p.symbols.items():
            if info.kind in ("val", "rec"):
                doms, ret = strip_arrows(info.ty)
                self.symbol_sig[name] = (doms, ret)
                arr_doms, base = array_spine(ret)
                self.full_sig[name] = (doms + arr_doms, base)

    def force(self, v):
        """Materialize a lazy array value into a concrete VArr."""
        if not isinstance(v, VLazyArr):
            return v
        all_doms, _base = self.full_sig[v.name]
        dom_ty = all_doms[len(v.args)]
        entries = []
        for key in self.carriers.of(dom_ty):
            if v.doms_left > 1:
                sub = self.force(VLazyArr(v.name, v.args + (key,), v.doms_left - 1))
            else:
                sub = self._cell(v.name, v.args + (key,))
            entries.append((key, sub))
        return VArr(tuple(entries))

    def _tick(self):
        self.steps += 1
        if self.step_budget is not None and self.steps > self.step_budget:
            raise _PointBudget()
        if self.deadline is not None and self.steps % 2048 == 0:
            if time.monotonic() > self.deadline:
                raise _Timeout()

    def eval(self, t: Term, env: dict):
        self._tick()
        match t:
            case Builtin("true"):
                return True
            case Builtin("false"):
                return False
            case IntLit(v):
                return v if abs(v) <= self.int_bound else OOB
            case Var(name):
                return env[name]
            case Const(name, _):
                return self._symbol(name, (), t)
            case App(Const(name, _), args):
                argvals = []
                for a in args:
                    try:
                        v = self.eval(a, env)
                    except Unassigned as e:
                        raise e.opaque()
                    argvals.append(v)
                if any(v is OOB for v in argvals):
                    return OOB
                return self._symbol(name, tuple(argvals), t)
            case App(fn, args):
                fv = self.eval(fn, env)
                for a in args:
                    try:
                        av = self.eval(a, env)
                    except Unassigned as e:
                        raise e.opaque()
                    if av is OOB or fv is OOB:
                        return OOB
                    if not isinstance(fv, VArr):
                        raise SolveError("application of a non-array value "
                                         "in the backend")
                    fv = fv.lookup(av)
                return fv
            case And(a, b):
                return self._binary_bool(a, b, env, "and")
            case Or(a, b):
                return self._binary_bool(a, b, env, "or")
            case Implies(a, b):
                return self._binary_bool(a, b, env, "implies")
            case Not(a):
                v = self._as_bool(self.eval(a, env))
                return not v
            case Eq(a, b):
                return self._eq(a, b, env)
            case IntOp(op, a, b):
                return self._intop(op, a, b, env)
            case Ite(c, a, b):
                cv = self.eval(c, env)
                if cv is OOB:
                    return OOB
                return self.eval(a if cv else b, env)
            case Forall(v, ty, body):
                return self._quantifier(v, ty, body, env, True)
            case Exists(v, ty, body):
                return self._quantifier(v, ty, body, env, False)
            case Unknown():
                raise SolveError("?__ placeholder in a backend problem")
            case Asserting() | Match() | Lam():
                raise SolveError(f"fragment violation: {type(t).__name__} "
                                 "in backend problem")
        raise SolveError(f"cannot evaluate backend term {t!r}")

    @staticmethod
    def _as_bool(v):
        if v is OOB:
            return False
        return v

    def _binary_bool(self, a: Term, b: Term, env: dict, op: str):
        try:
            av = self._as_bool(self.eval(a, env))
        except Unassigned as ea:
            try:
                bv = self._as_bool(self.eval(b, env))
            except Unassigned as eb:
                # prefer the side that comes with value suggestions
                if eb.suggestions and not ea.suggestions:
                    raise eb.opaque() from None
                raise ea.opaque() from None
            except _Timeout:
                raise
            if op == "and" and bv is False:
                return False
            if op == "or" and bv is True:
                return True
            if op == "implies" and bv is True:
                return True
            raise ea.opaque() from None
        if op == "and":
            if av is False:
                return False
            return self._as_bool(self.eval(b, env))
        if op == "or":
            if av is True:
                return True
            return self._as_bool(self.eval(b, env))
        if av is False:
            return True
        return self._as_bool(self.eval(b, env))

    def _eq(self, a: Term, b: Term, env: dict):
        try:
            av = self.eval(a, env)
        except Unassigned as ea:
            try:
                bv = self.eval(b, env)
            except Unassigned:
                raise ea.opaque() from None
            if ea.transform is not None and bv is not OOB:
                sugg = ea.transform(bv)
                if sugg is not None:
                    raise Unassigned(ea.cell, None,
                                     ea.suggestions + [sugg]) from None
            raise ea.opaque() from None
        try:
            bv = self.eval(b, env)
        except Unassigned as eb:
            if eb.transform is not None and av is not OOB:
                sugg = eb.transform(av)
                if sugg is not None:
                    raise Unassigned(eb.cell, None,
                                     eb.suggestions + [sugg]) from None
            raise eb.opaque() from None
        if av is OOB or bv is OOB:
            return False
        return self.force(av) == self.force(bv)

    def _intop(self, op: str, a: Term, b: Term, env: dict):
        def compose(e: Unassigned, other: int, left_raised: bool):
            if e.transform is None or op not in ("+", "-"):
                raise e.opaque()
            f = e.transform
            if op == "+":
                g = lambda v: f(v - other) if isinstance(v, int) else None
            elif left_raised:  # (e? - other)
                g = lambda v: f(v + other) if isinstance(v, int) else None
            else:  # (other - e?)
                g = lambda v: f(other - v) if isinstance(v, int) else None
            raise Unassigned(e.cell, g, e.suggestions)

        try:
            av = self.eval(a, env)
        except Unassigned as ea:
            try:
                bv = self.eval(b, env)
            except Unassigned:
                raise ea.opaque() from None
            if isinstance(bv, int):
                compose(ea, bv, True)
            raise ea.opaque() from None
        try:
            bv = self.eval(b, env)
        except Unassigned as eb:
            if isinstance(av, int):
                compose(eb, av, False)
            raise eb.opaque() from None
        if av is OOB or bv is OOB:
            return False if op == "<=" else OOB
        if op == "<=":
            return av <= bv
        r = av + bv if op == "+" else av - bv if op == "-" else av * bv
        return r if abs(r) <= self.int_bound else OOB

    def _quantifier(self, v: str, ty: Term | None, body: Term, env: dict,
                    is_forall: bool):
        if ty is None:
            raise SolveError(f"unannotated quantifier binder {v!r}")
        if ty == INT:
            raise SolveError("quantification over unbounded integers is not "
                             "supported by the built-in backend")
        if ty == TYPE:
            raise SolveError("type quantifier reached the backend")
        if not is_forall:
            r = self._exists_destructure(v, ty, body, env)
            if r is not _NO_DESTRUCTURE:
                return r
        first_unassigned: Unassigned | None = None
        suggested: Unassigned | None = None
        all_defined = True
        for value in self.carriers.of(ty):
            env2 = dict(env)
            env2[v] = value
            try:
                r = self._as_bool(self.eval(body, env2))
            except Unassigned as e:
                if first_unassigned is None:
                    first_unassigned = e.opaque()
                if suggested is None and e.suggestions:
                    suggested = e.opaque()
                all_defined = False
                continue
            if is_forall and r is False:
                return False
            if not is_forall and r is True:
                return True
        if not all_defined:
            raise suggested or first_unassigned
        return is_forall

    def _exists_destructure(self, v, ty, body, env):
        """Bind an existential chain forced by equalities with constructor
        patterns; avoids scanning large carriers (see evaluator counterpart)."""
        from ..evaluator import _flatten_and, _is_value_pattern
        from ..terms import free_vars

        chain = [(v, ty)]
        while isinstance(body, Exists):
            chain.append((body.var, body.var_ty))
            body = body.body
        conjuncts = _flatten_and(body)
        unbound = {name for name, _ in chain}
        bindings: dict = {}
        progress = True
        while progress and unbound:
            progress = False
            for c in conjuncts:
                if not isinstance(c, Eq):
                    continue
                for pat, other in ((c.lhs, c.rhs), (c.rhs, c.lhs)):
                    if not _is_value_pattern(self.p, pat, unbound):
                        continue
                    if free_vars(other) & unbound:
                        continue
                    value = self.eval(other, {**env, **bindings})
                    if value is OOB:
                        continue
                    ok = self._match_pattern_value(pat, value, bindings, unbound)
                    if ok is False:
                        return False
                    if ok:
                        progress = True
        if unbound:
            return _NO_DESTRUCTURE
        return self._as_bool(self.eval(body, {**env, **bindings}))

    def _match_pattern_value(self, pat, value, bindings, unbound):
        match pat:
            case Var(name) if name in unbound:
                bindings[name] = value
                unbound.discard(name)
                return True
            case App(Const(cname, _), args):
                info = self.p.symbols.get(cname)
                if info is None or info.kind != "ctor":
                    return None
                if not isinstance(value, VCtor) or value.name != cname \
                        or len(value.args) != len(args):
                    return False
                out = True
                for sub, sv in zip(args, value.args):
                    r = self._match_pattern_value(sub, sv, bindings, unbound)
                    if r is False:
                        return False
                    out = out and (r is True)
                return out
            case _:
                return None

    def _symbol(self, name: str, argvals: tuple, t: Term):
        if name == "select":
            arr, key = argvals
            if isinstance(arr, VLazyArr):
                if arr.doms_left > 1:
                    return VLazyArr(arr.name, arr.args + (key,), arr.doms_left - 1)
                return self._cell(arr.name, arr.args + (key,))
            if not isinstance(arr, VArr):
                raise SolveError("select on a non-array value")
            out = arr.lookup(key)
            from ..evaluator import UNDEF

            if out is UNDEF:
                raise SolveError("array key outside its carrier")
            return out
        info = self.p.symbols.get(name)
        if info is None:
            raise SolveError(f"unbound symbol {name!r} in backend problem")
        if name in self.p.selectors:
            role, ctor, index = self.p.selectors[name]
            (v,) = argvals
            if not isinstance(v, VCtor):
                raise SolveError(f"selector {name!r} on non-constructor value")
            if role == "disc":
                return v.name == ctor
            if v.name == ctor:
                return v.args[index]
            return self._cell(name, argvals)  # unconstrained selector result
        if info.kind == "ctor":
            return VCtor(name, tuple(self.force(a) for a in argvals))
        if info.kind == "rec":
            return self._unfold_rec(name, argvals)
        if info.kind == "val":
            doms, _ = self.symbol_sig[name]
            if len(argvals) < len(doms):
                raise SolveError(f"partial application of {name!r} in backend")
            all_doms, _base = self.full_sig[name]
            arr_doms_left = len(all_doms) - len(doms)
            if arr_doms_left > 0:
                return VLazyArr(name, argvals, arr_doms_left)
            return self._cell(name, argvals)
        raise SolveError(f"cannot evaluate backend symbol {name!r} "
                         f"(kind {info.kind})")

    def _cell(self, name: str, argvals: tuple):
        cell = (name, argvals)
        self.reads.add(cell)
        if cell in self.assignment:
            return self.assignment[cell]
        raise Unassigned(cell, transform=lambda v: v)

    def _unfold_rec(self, name: str, argvals: tuple):
        _, d = self.rec_defs[name]
        eqn = d.equations[0]
        binders, body = strip_foralls(eqn)
        if not isinstance(body, Eq):
            raise SolveError(f"malformed equation for {name!r}")
        lhs = body.lhs
        pats = lhs.args if isinstance(lhs, App) else ()
        if len(pats) != len(argvals):
            raise SolveError(f"arity mismatch unfolding {name!r}")
        env = {}
        for pat, v in zip(pats, argvals):
            if not isinstance(pat, Var):
                raise SolveError(f"non-variable pattern in backend rec {name!r}")
            env[pat.name] = v
        return self.eval(body.rhs, env)


@dataclass
class SearchStats:
    points: int = 0
    decisions: int = 0
    conflicts: int = 0
    candidates: int = 0


class PointSearch:
    """Exhaustive deterministic search at one cardinality point."""

    def __init__(self, p: Problem, carriers: CarrierSet, sched: CardinalitySchedule,
                 deadline: float | None, stats: SearchStats):
        self.p = p
        self.carriers = carriers
        self.sched = sched
        self.stats = stats
        self.assignment: dict = {}
        self.order: list = []
        self.conflict: set | None = set()
        self.ev = PartialEvaluator(p, carriers, self.assignment,
                                   sched.int_bound, deadline, sched.point_steps)
        # the goal first: its cells drive the search, axioms then propagate
        # derived values through equality suggestions
        self.constraints: list[Term] = [
            s.formula for s in p.statements if isinstance(s, GoalStmt)]
        self.constraints += [
            s.formula for s in p.statements if isinstance(s, AxiomStmt)]

    def domain_of(self, cell, suggestions: list) -> Iterator:
        name, _args = cell
        if name in self.p.selectors:
            role, ctor, index = self.p.selectors[name]
            ret = None
            info = self.p.symbols.get(name)
            if info is not None:
                ret = strip_arrows(info.ty)[1]
        else:
            ret = strip_arrows(self.p.symbols[name].ty)[1]
        seen = set()
        for s in suggestions:
            if isinstance(s, int) and abs(s) > self.sched.int_bound:
                continue
            key = repr(s)
            if key not in seen:
                seen.add(key)
                yield s
        if ret == INT:
            window = min(self.sched.int_bound, self.sched.int_branch_window)
            # nonnegatives first: ascending chains are discovered before the
            # search wades into closed-but-useless negative images
            for v in list(range(0, window + 1)) + list(range(-1, -window - 1, -1)):
                if repr(v) not in seen:
                    seen.add(repr(v))
                    yield v
        else:
            for v in self.carriers.of(ret):
                if repr(v) not in seen:
                    seen.add(repr(v))
                    yield v

    def run(self) -> Iterator[dict]:
        yield from self._search([c for c in self.constraints])

    def _search(self, pending: list[Term]) -> Iterator[dict]:
        """DFS with conflict-directed backjumping.

        After the generator is exhausted, ``self.conflict`` holds the set of
        cells every failure below depended on, or None if a candidate model
        was produced (no jumping past those)."""
        still = []
        branch: Unassigned | None = None
        suggested: Unassigned | None = None
        for c in pending:
            self.ev.reads = set()
            try:
                v = self.ev._as_bool(self.ev.eval(c, {}))
            except Unassigned as e:
                still.append(c)
                if branch is None:
                    branch = e
                if suggested is None and e.suggestions:
                    suggested = e
                continue
            if v is False:
                self.stats.conflicts += 1
                self.conflict = set(self.ev.reads)
                return
            # satisfied constraints stay satisfied under extensions
        branch = suggested or branch
        if branch is None:
            self.stats.candidates += 1
            yield dict(self.assignment)
            self.conflict = None
            return
        cell = branch.cell
        total_conflict: set = set()
        saw_model = False
        for value in self.domain_of(cell, branch.suggestions):
            self.stats.decisions += 1
            self.assignment[cell] = value
            yield from self._search(still)
            del self.assignment[cell]
            sub = self.conflict
            if sub is None:
                saw_model = True
                continue
            total_conflict |= sub
            if cell not in sub and not saw_model:
                # the failures below never read this cell: other values
                # cannot help, so jump straight past this decision
                self.conflict = sub
                return
        if saw_model:
            self.conflict = None
        else:
            total_conflict.discard(cell)
            self.conflict = total_conflict


def _declared_cells(p: Problem) -> list[tuple[str, list[Term], Term]]:
    out = []
    for stmt in p.statements:
        if isinstance(stmt, ValDecl) and stmt.ty != TYPE:
            doms, ret = strip_arrows(stmt.ty)
            out.append((stmt.name, doms, ret))
    return out


def build_model(p: Problem, carriers: CarrierSet, sizes: dict[str, int],
                assignment: dict, sched: CardinalitySchedule) -> Model:
    carrier_entries: list[tuple[str, tuple[Term, ...]]] = []
    for name, size in sizes.items():
        carrier_entries.append((name, tuple(Const(f"${name}_{i}")
                                            for i in range(size))))
    for dname, dt in p.datatypes().items():
        values = carriers.datatype_values(dt, sched.depth)
        carrier_entries.append((dname, tuple(value_to_term(v) for v in values)))

    ints: set[int] = set()
    for (name, args), v in assignment.items():
        for x in list(args) + [v]:
            if isinstance(x, int) and not isinstance(x, bool):
                ints.add(x)

    constants: list[tuple[str, Term]] = []
    functions: list[tuple[str, FunctionTable]] = []
    by_symbol: dict[str, list[tuple[tuple, object]]] = {}
    for (name, args), v in assignment.items():
        by_symbol.setdefault(name, []).append((args, v))

    for name, doms, ret in _declared_cells(p):
        if not doms:
            if (name, ()) in assignment:
                constants.append((name, value_to_term(assignment[(name, ())], ret)))
            else:
                constants.append((name, _default_value_term(carriers, ret, sched)))
            continue
        rows = by_symbol.get(name, [])
        params = tuple((f"x{i}", ty) for i, ty in enumerate(doms))
        entries = tuple(FunctionEntry(
            tuple(value_to_term(a, ty) for a, ty in zip(args, doms)),
            value_to_term(v, ret)) for args, v in rows)
        functions.append((name, FunctionTable(params, entries)))

    return Model(carriers=tuple(carrier_entries), constants=tuple(constants),
                 functions=tuple(functions), int_carrier=tuple(sorted(ints)))


def _default_value_term(carriers: CarrierSet, ty: Term, sched) -> Term:
    if ty == INT:
        return IntLit(0)
    values = carriers.of(ty)
    if not values:
        raise SolveError(f"empty carrier for {ty!r}")
    return value_to_term(values[0], ty)


def check_model(p: Problem, m: Model, fuel: int = 500_000) -> bool:
    """True iff every axiom and the goal evaluate to true under the
    reference evaluator."""
    try:
        ev = Evaluator(p, m, fuel=fuel)
        for stmt in p.statements:
            if isinstance(stmt, (AxiomStmt, GoalStmt)):
                if ev.eval(stmt.formula) is not True:
                    return False
        return True
    except EvalError:
        return False


def solve(p: Problem, sched: CardinalitySchedule | None = None,
          gate: Callable[[Model], bool] | None = None,
          diagnostics: Callable[[str], None] | None = None) -> Verdict:
    """Iterate cardinalities smallest-first; return the first model that
    passes the reference-evaluator check (and the optional gate)."""
    sched = sched or CardinalitySchedule()
    deadline = None
    if sched.timeout_ms is not None:
        deadline = time.monotonic() + sched.timeout_ms / 1000.0
    names = abstract_types(p)
    bounds = (f"|{'|,|'.join(names)}| <= {sched.max_card}, " if names else "") + \
        f"datatype depth {sched.depth}, int bound {sched.int_bound}"
    stats = SearchStats()
    incomplete = 0
    try:
        for sizes in cardinality_points(names, sched.start, sched.max_card):
            stats.points += 1
            if diagnostics:
                label = ", ".join(f"|{n}|={s}" for n, s in sizes.items()) or "(none)"
                diagnostics(f"cardinality point {label}")
            carriers = CarrierSet(p, sizes, sched.depth)
            search = PointSearch(p, carriers, sched, deadline, stats)
            try:
                for assignment in search.run():
                    model = build_model(p, carriers, sizes, assignment, sched)
                    if not check_model(p, model):
                        continue
                    if gate is not None and not gate(model):
                        continue
                    assert check_model(p, model)
                    return Verdict("SAT", model=model, bounds=bounds)
            except _PointBudget:
                incomplete += 1
                if diagnostics:
                    diagnostics("  point search budget exhausted, moving on")
        if incomplete:
            return Verdict(
                "UNKNOWN",
                reason=f"search budget exhausted at {incomplete} cardinality "
                "point(s) without finding a model", bounds=bounds)
        return Verdict("UNSAT_UP_TO", reason="schedule exhausted", bounds=bounds)
    except _Timeout:
        return Verdict("UNKNOWN", reason="timeout", bounds=bounds)
    except SolveError as e:
        return Verdict("UNKNOWN", reason=str(e), bounds=bounds)
