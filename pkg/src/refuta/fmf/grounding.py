"""MACE-style propositional grounding.

Every uninterpreted symbol becomes a table of selector variables (one per
cell and candidate value) under exactly-one constraints; ground formulas are
Tseitin-encoded over those selectors.  Satisfying assignments of the clause
set are in bijection with the finite models of the problem at the given
cardinalities.  Intended for small carriers; the lazy search in
``fmf.search`` is the production path.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import SolveError
from ..evaluator import VCtor, value_to_term
from ..models import FunctionEntry, FunctionTable, Model
from ..problems import AxiomStmt, GoalStmt, Problem, ValDecl
from ..terms import (
    And,
    App,
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
    Not,
    Or,
    PROP,
    TYPE,
    Term,
    Var,
    strip_arrows,
    strip_foralls,
)
from .carriers import CarrierSet
from .dpll import Dpll, enumerate_solutions

TRUE_EXPR = ("const", True)
FALSE_EXPR = ("const", False)


def _and(parts):
    parts = [x for x in parts if x != TRUE_EXPR]
    if any(x == FALSE_EXPR for x in parts):
        return FALSE_EXPR
    if not parts:
        return TRUE_EXPR
    if len(parts) == 1:
        return parts[0]
    return ("and", tuple(parts))


def _or(parts):
    parts = [x for x in parts if x != FALSE_EXPR]
    if any(x == TRUE_EXPR for x in parts):
        return TRUE_EXPR
    if not parts:
        return FALSE_EXPR
    if len(parts) == 1:
        return parts[0]
    return ("or", tuple(parts))


def _not(x):
    if x == TRUE_EXPR:
        return FALSE_EXPR
    if x == FALSE_EXPR:
        return TRUE_EXPR
    if x[0] == "not":
        return x[1]
    return ("not", x)


@dataclass
class GroundProblem:
    num_vars: int
    clauses: list[list[int]]
    cell_vars: dict[tuple, list[tuple[object, int]]]  # cell -> [(value, var)]
    cells: list[tuple]
    sizes: dict[str, int]

    def project_vars(self) -> list[int]:
        return [var for vars_ in self.cell_vars.values() for _, var in vars_]


class Grounder:
    def __init__(self, p: Problem, sizes: dict[str, int], depth: int,
                 int_bound: int):
        self.p = p
        self.sizes = sizes
        self.int_bound = int_bound
        self.carriers = CarrierSet(p, sizes, depth)
        self.num_vars = 0
        self.clauses: list[list[int]] = []
        self.cell_vars: dict[tuple, list[tuple[object, int]]] = {}
        self.cells: list[tuple] = []
        self.rec_defs = p.rec_defs()

    def new_var(self) -> int:
        self.num_vars += 1
        return self.num_vars

    def domain(self, ty: Term) -> list:
        if ty == INT:
            b = self.int_bound
            return list(range(-b, b + 1))
        return self.carriers.of(ty)

    def cell(self, name: str, args: tuple) -> list[tuple[object, int]]:
        key = (name, args)
        if key in self.cell_vars:
            return self.cell_vars[key]
        if name in self.p.selectors:
            ret = strip_arrows(self.p.symbols[name].ty)[1]
        else:
            ret = strip_arrows(self.p.symbols[name].ty)[1]
        values = self.domain(ret)
        vars_ = [(v, self.new_var()) for v in values]
        self.cell_vars[key] = vars_
        self.cells.append(key)
        # exactly-one constraints
        self.clauses.append([var for _, var in vars_])
        for i in range(len(vars_)):
            for j in range(i + 1, len(vars_)):
                self.clauses.append([-vars_[i][1], -vars_[j][1]])
        return vars_

    # -- encoding ---------------------------------------------------------

    def encode_value(self, t: Term, env: dict) -> list[tuple[tuple, object]]:
        """All (condition, value) alternatives of a ground term."""
        match t:
            case IntLit(v):
                return [(TRUE_EXPR, v)] if abs(v) <= self.int_bound else []
            case Builtin("true"):
                return [(TRUE_EXPR, True)]
            case Builtin("false"):
                return [(TRUE_EXPR, False)]
            case Var(name):
                return [(TRUE_EXPR, env[name])]
            case Const(name, _):
                return self._symbol_value(name, [(TRUE_EXPR, ())], t)
            case App(Const(name, _), args):
                combos = [(TRUE_EXPR, ())]
                for a in args:
                    alts = self.encode_value(a, env)
                    combos = [(_and([c, ca]), vs + (va,))
                              for c, vs in combos for ca, va in alts]
                    combos = [x for x in combos if x[0] != FALSE_EXPR]
                return self._symbol_value(name, combos, t)
            case Ite(c, a, b):
                cond = self.encode_formula(c, env)
                out = [(_and([cond, ca]), va) for ca, va in self.encode_value(a, env)]
                out += [(_and([_not(cond), cb]), vb)
                        for cb, vb in self.encode_value(b, env)]
                return [x for x in out if x[0] != FALSE_EXPR]
            case IntOp(op, a, b):
                out = []
                for ca, va in self.encode_value(a, env):
                    for cb, vb in self.encode_value(b, env):
                        if op == "<=":
                            out.append((_and([ca, cb]), va <= vb))
                            continue
                        r = va + vb if op == "+" else va - vb if op == "-" \
                            else va * vb
                        if abs(r) <= self.int_bound:
                            out.append((_and([ca, cb]), r))
                return [x for x in out if x[0] != FALSE_EXPR]
            case Eq() | Not() | And() | Or() | Implies() | Forall() | Exists():
                f = self.encode_formula(t, env)
                return [(f, True), (_not(f), False)]
        raise SolveError(f"cannot ground term {t!r}")

    def _symbol_value(self, name: str, combos, t: Term):
        info = self.p.symbols.get(name)
        if info is None:
            raise SolveError(f"unbound symbol {name!r}")
        if name in self.p.selectors:
            role, ctor, index = self.p.selectors[name]
            out = []
            for c, (v,) in combos:
                if not isinstance(v, VCtor):
                    raise SolveError("selector on non-constructor value")
                if role == "disc":
                    out.append((c, v.name == ctor))
                elif v.name == ctor:
                    out.append((c, v.args[index]))
                else:
                    for val, var in self.cell(name, (v,)):
                        out.append((_and([c, ("lit", var)]), val))
            return out
        if info.kind == "ctor":
            return [(c, VCtor(name, vs)) for c, vs in combos]
        if info.kind == "rec":
            out = []
            for c, vs in combos:
                for cr, vr in self._unfold_rec(name, vs):
                    out.append((_and([c, cr]), vr))
            return [x for x in out if x[0] != FALSE_EXPR]
        if info.kind == "val":
            out = []
            for c, vs in combos:
                for val, var in self.cell(name, vs):
                    e = _and([c, ("lit", var)])
                    if e != FALSE_EXPR:
                        out.append((e, val))
            return out
        raise SolveError(f"cannot ground symbol {name!r} of kind {info.kind}")

    def _unfold_rec(self, name: str, argvals: tuple):
        _, d = self.rec_defs[name]
        binders, body = strip_foralls(d.equations[0])
        if not isinstance(body, Eq):
            raise SolveError(f"malformed equation for {name!r}")
        pats = body.lhs.args if isinstance(body.lhs, App) else ()
        env = {}
        for pat, v in zip(pats, argvals):
            env[pat.name] = v
        return self.encode_value(body.rhs, env)

    def encode_formula(self, t: Term, env: dict):
        match t:
            case Builtin("true"):
                return TRUE_EXPR
            case Builtin("false"):
                return FALSE_EXPR
            case And(a, b):
                return _and([self.encode_formula(a, env),
                             self.encode_formula(b, env)])
            case Or(a, b):
                return _or([self.encode_formula(a, env),
                            self.encode_formula(b, env)])
            case Implies(a, b):
                return _or([_not(self.encode_formula(a, env)),
                            self.encode_formula(b, env)])
            case Not(a):
                return _not(self.encode_formula(a, env))
            case Eq(a, b):
                out = []
                for ca, va in self.encode_value(a, env):
                    for cb, vb in self.encode_value(b, env):
                        if va == vb:
                            out.append(_and([ca, cb]))
                return _or(out)
            case IntOp("<=", _, _):
                return _or([c for c, v in self.encode_value(t, env) if v is True])
            case Forall(v, ty, body) | Exists(v, ty, body):
                if ty is None or ty == TYPE:
                    raise SolveError(f"cannot ground quantifier over {ty!r}")
                parts = []
                for value in self.domain(ty):
                    env2 = dict(env)
                    env2[v] = value
                    parts.append(self.encode_formula(body, env2))
                return _and(parts) if isinstance(t, Forall) else _or(parts)
            case Ite(c, a, b):
                cf = self.encode_formula(c, env)
                return _or([_and([cf, self.encode_formula(a, env)]),
                            _and([_not(cf), self.encode_formula(b, env)])])
            case _:
                # prop-sorted atom: application of a prop-valued symbol
                alts = self.encode_value(t, env)
                return _or([c for c, v in alts if v is True])

    # -- Tseitin -----------------------------------------------------------

    def assert_expr(self, e):
        if e == TRUE_EXPR:
            return
        if e == FALSE_EXPR:
            self.clauses.append([])
            return
        lit = self._tseitin(e)
        self.clauses.append([lit])

    def _tseitin(self, e) -> int:
        kind = e[0]
        if kind == "lit":
            return e[1]
        if kind == "const":
            v = self.new_var()
            self.clauses.append([v] if e[1] else [-v])
            return v
        if kind == "not":
            return -self._tseitin(e[1])
        parts = [self._tseitin(x) for x in e[1]]
        v = self.new_var()
        if kind == "and":
            for lp in parts:
                self.clauses.append([-v, lp])
            self.clauses.append([v] + [-lp for lp in parts])
        else:
            for lp in parts:
                self.clauses.append([-lp, v])
            self.clauses.append([-v] + list(parts))
        return v


def ground(p: Problem, sizes: dict[str, int], depth: int = 3,
           int_bound: int = 2) -> GroundProblem:
    """Ground the backend problem at fixed carrier sizes into a clause set
    whose satisfying assignments correspond to finite models."""
    g = Grounder(p, sizes, depth, int_bound)
    for stmt in p.statements:
        if isinstance(stmt, (AxiomStmt, GoalStmt)):
            g.assert_expr(g.encode_formula(stmt.formula, {}))
    return GroundProblem(g.num_vars, g.clauses, g.cell_vars, g.cells, dict(sizes))


def assignment_to_model(p: Problem, gp: GroundProblem, solution: dict[int, bool],
                        depth: int = 3) -> Model:
    """Interpret a DPLL solution's selector variables as a Model."""
    from .search import CardinalitySchedule, build_model

    assignment = {}
    for cell, vars_ in gp.cell_vars.items():
        chosen = [v for v, var in vars_ if solution.get(var, False)]
        if len(chosen) != 1:
            raise SolveError(f"ill-formed solution for cell {cell!r}")
        assignment[cell] = chosen[0]
    carriers = CarrierSet(p, gp.sizes, depth)
    sched = CardinalitySchedule(depth=depth)
    return build_model(p, carriers, gp.sizes, assignment, sched)


def solve_ground(p: Problem, sizes: dict[str, int], depth: int = 3,
                 int_bound: int = 2) -> Model | None:
    """Ground + DPLL; returns a model or None (test/reference path)."""
    gp = ground(p, sizes, depth, int_bound)
    solution = Dpll(gp.num_vars, gp.clauses).solve()
    if solution is None:
        return None
    return assignment_to_model(p, gp, solution, depth)


def enumerate_ground_models(p: Problem, sizes: dict[str, int], depth: int = 3,
                            int_bound: int = 2, limit: int = 10_000):
    """All models at the point, distinct on selector variables."""
    gp = ground(p, sizes, depth, int_bound)
    sols = enumerate_solutions(gp.num_vars, gp.clauses, gp.project_vars(), limit)
    return [assignment_to_model(p, gp, s, depth) for s in sols]
