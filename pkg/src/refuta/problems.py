"""Top-level statements and problems.

A Problem is an ordered statement list plus a symbol table; symbols must be
declared before use and names are unique.  Problems are immutable: every
pipeline phase builds a new one.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterator, Optional

from .errors import ProblemError, Span
from .terms import (
    App,
    Arrow,
    Const,
    Pi,
    TYPE,
    Term,
    Var,
    arrows,
    subterms,
)


@dataclass(frozen=True)
class CtorDecl:
    name: str
    arg_types: tuple[Term, ...]


@dataclass(frozen=True)
class DataDef:
    """``data``/``codata`` block (single datatype; no mutual blocks needed)."""

    name: str
    params: tuple[str, ...]
    ctors: tuple[CtorDecl, ...]
    codata: bool = False
    origin: Optional[str] = field(default=None, compare=False)
    span: Optional[Span] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class PredOne:
    name: str
    ty: Term
    clauses: tuple[Term, ...]


@dataclass(frozen=True)
class PredDef:
    """Mutual ``pred``/``copred`` block."""

    defs: tuple[PredOne, ...]
    co: bool = False
    origin: Optional[str] = field(default=None, compare=False)
    span: Optional[Span] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class RecOne:
    name: str
    ty: Term
    equations: tuple[Term, ...]


@dataclass(frozen=True)
class RecDef:
    """Mutual ``rec`` block of recursive function definitions."""

    defs: tuple[RecOne, ...]
    origin: Optional[str] = field(default=None, compare=False)
    span: Optional[Span] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class ValDecl:
    """Uninterpreted constant; ``ty == TYPE`` declares an abstract type."""

    name: str
    ty: Term
    origin: Optional[str] = field(default=None, compare=False)
    span: Optional[Span] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class AxiomStmt:
    formula: Term
    origin: Optional[str] = field(default=None, compare=False)
    span: Optional[Span] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class GoalStmt:
    formula: Term
    origin: Optional[str] = field(default=None, compare=False)
    span: Optional[Span] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class TypedVar:
    name: str
    ty: Term


@dataclass(frozen=True)
class DepCtor:
    """Constructor of a dependent datatype.

    ``binders`` name every quantified variable (index ghosts and real
    arguments); ``args`` lists which binders are actual constructor arguments;
    ``ret_indices`` are the term arguments of the return type.
    """

    name: str
    binders: tuple[TypedVar, ...]
    args: tuple[str, ...]
    ret_indices: tuple[Term, ...]


@dataclass(frozen=True)
class DepDataDef:
    name: str
    term_params: tuple[TypedVar, ...]
    type_params: tuple[str, ...]
    ctors: tuple[DepCtor, ...]
    codata: bool = False
    origin: Optional[str] = field(default=None, compare=False)
    span: Optional[Span] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class ClassDef:
    name: str
    type_param: str
    data_fields: tuple[tuple[str, Term], ...]
    axiom_fields: tuple[tuple[str, Term], ...]
    origin: Optional[str] = field(default=None, compare=False)
    span: Optional[Span] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class InstanceDef:
    class_name: str
    ty: Term
    assignments: tuple[tuple[str, Term], ...]
    origin: Optional[str] = field(default=None, compare=False)
    span: Optional[Span] = field(default=None, compare=False, repr=False)


Statement = (
    DataDef | PredDef | RecDef | ValDecl | AxiomStmt | GoalStmt
    | DepDataDef | ClassDef | InstanceDef
)

DEP_STATEMENTS = (DepDataDef, ClassDef, InstanceDef)


@dataclass(frozen=True)
class SymbolInfo:
    """Entry of a problem's symbol table."""

    name: str
    kind: str  # "type" | "ctor" | "val" | "rec" | "pred" | "copred" | "depdata" | "class"
    ty: Term  # type scheme (Pi-prefixed for polymorphic symbols); TYPE for types
    owner: Optional[str] = None  # datatype of a ctor / class of a field
    ctor_index: Optional[int] = None


BUILTIN_TYPE_NAMES = frozenset({"int", "array"})


class Problem:
    """Ordered statements with a derived symbol table (immutable)."""

    __slots__ = ("statements", "symbols", "selectors", "_hash")

    def __init__(self, statements, selectors: dict[str, tuple[str, str, int]] | None = None):
        self.statements: tuple[Statement, ...] = tuple(statements)
        # selector/discriminator registry: name -> (role, ctor, index)
        # role in {"disc", "sel"}; filled by the pattern-match elimination phase.
        self.selectors: dict[str, tuple[str, str, int]] = dict(selectors or {})
        self.symbols: dict[str, SymbolInfo] = {}
        self._hash = None
        self._build_table()

    def _declare(self, info: SymbolInfo, span: Optional[Span]):
        if info.name in self.symbols:
            raise ProblemError(f"duplicate symbol {info.name!r}", span)
        self.symbols[info.name] = info

    def _build_table(self):
        for stmt in self.statements:
            match stmt:
                case DataDef(name, params, ctors):
                    self._declare(SymbolInfo(name, "type", TYPE), stmt.span)
                    head: Term = Const(name)
                    if params:
                        head = App(head, tuple(Var(p) for p in params))
                    for i, c in enumerate(ctors):
                        cty = arrows(c.arg_types, head)
                        for p in reversed(params):
                            cty = Pi(p, TYPE, cty)
                        self._declare(SymbolInfo(c.name, "ctor", cty, owner=name,
                                                 ctor_index=i), stmt.span)
                case PredDef(defs, co):
                    kind = "copred" if co else "pred"
                    for d in defs:
                        self._declare(SymbolInfo(d.name, kind, d.ty), stmt.span)
                case RecDef(defs):
                    for d in defs:
                        self._declare(SymbolInfo(d.name, "rec", d.ty), stmt.span)
                case ValDecl(name, ty):
                    kind = "type" if ty == TYPE else "val"
                    self._declare(SymbolInfo(name, kind, ty), stmt.span)
                case AxiomStmt() | GoalStmt():
                    pass
                case DepDataDef(name, term_params, type_params, ctors):
                    kind_ty = arrows([tv.ty for tv in term_params],
                                     arrows([TYPE] * len(type_params), TYPE))
                    self._declare(SymbolInfo(name, "depdata", kind_ty), stmt.span)
                    for i, c in enumerate(ctors):
                        self._declare(SymbolInfo(c.name, "ctor", self._dep_ctor_type(stmt, c),
                                                 owner=name, ctor_index=i), stmt.span)
                case ClassDef(name, type_param, data_fields, axiom_fields):
                    self._declare(SymbolInfo(name, "class", Arrow(TYPE, TYPE)), stmt.span)
                    head = Const(name, (Var(type_param),))
                    for fname, fty in data_fields:
                        self._declare(SymbolInfo(fname, "val",
                                                 Pi(type_param, TYPE, Arrow(head, fty)),
                                                 owner=name), stmt.span)
                    for fname, _ in axiom_fields:
                        # axiom fields are proof obligations, not symbols
                        pass
                case InstanceDef():
                    pass
                case _:
                    raise ProblemError(f"unknown statement {stmt!r}")

    @staticmethod
    def _dep_ctor_type(d: DepDataDef, c: DepCtor) -> Term:
        binder_tys = {tv.name: tv.ty for tv in c.binders}
        args = [binder_tys[a] for a in c.args]
        ret = Const(d.name)
        from .terms import app as app_

        ret = app_(ret, tuple(c.ret_indices) + tuple(Var(p) for p in d.type_params))
        ty = arrows(args, ret)
        for p in reversed(d.type_params):
            ty = Pi(p, TYPE, ty)
        return ty

    def __eq__(self, other):
        return isinstance(other, Problem) and self.statements == other.statements

    def __hash__(self):
        if self._hash is None:
            object.__setattr__(self, "_hash", hash(self.statements))
        return self._hash

    def __repr__(self):
        return f"Problem({len(self.statements)} statements)"

    def with_statements(self, statements) -> "Problem":
        return Problem(statements, selectors=self.selectors)

    def goal(self) -> GoalStmt:
        goals = [s for s in self.statements if isinstance(s, GoalStmt)]
        if len(goals) != 1:
            raise ProblemError(f"expected exactly one goal, found {len(goals)}")
        return goals[0]

    def axioms(self) -> list[AxiomStmt]:
        return [s for s in self.statements if isinstance(s, AxiomStmt)]

    def datatypes(self) -> dict[str, DataDef]:
        return {s.name: s for s in self.statements if isinstance(s, DataDef)}

    def rec_defs(self) -> dict[str, tuple[RecDef, RecOne]]:
        out = {}
        for s in self.statements:
            if isinstance(s, RecDef):
                for d in s.defs:
                    out[d.name] = (s, d)
        return out

    def pred_defs(self) -> dict[str, tuple[PredDef, PredOne]]:
        out = {}
        for s in self.statements:
            if isinstance(s, PredDef):
                for d in s.defs:
                    out[d.name] = (s, d)
        return out

    def ctor_datatype(self, ctor: str) -> str:
        info = self.symbols[ctor]
        if info.kind != "ctor" or info.owner is None:
            raise ProblemError(f"{ctor!r} is not a constructor")
        return info.owner

    def has_copred(self) -> bool:
        return any(isinstance(s, PredDef) and s.co for s in self.statements)

    def check_declared_before_use(self):
        """Definitions-before-use over the statement list."""
        seen: set[str] = set(BUILTIN_TYPE_NAMES) | {"select"}
        for stmt in self.statements:
            def _check(t: Term, bound: frozenset[str], extra: frozenset[str] = frozenset()):
                for sub in subterms(t):
                    if isinstance(sub, Const) and sub.name not in seen \
                            and sub.name not in extra and not sub.name.startswith("$"):
                        raise ProblemError(f"use of undeclared symbol {sub.name!r}", stmt.span)

            own = frozenset(_declared_names(stmt))
            for t in statement_terms(stmt):
                _check(t, frozenset(), own)
            seen |= own
        return self


def _declared_names(stmt: Statement) -> Iterator[str]:
    match stmt:
        case DataDef(name, _, ctors) | DepDataDef(name, _, _, ctors):
            yield name
            for c in ctors:
                yield c.name
        case PredDef(defs) | RecDef(defs):
            for d in defs:
                yield d.name
        case ValDecl(name, _):
            yield name
        case ClassDef(name, _, data_fields, _):
            yield name
            for fname, _ in data_fields:
                yield fname
        case _:
            return


def statement_terms(stmt: Statement) -> Iterator[Term]:
    """All terms embedded in a statement (types, clauses, equations, ...)."""
    match stmt:
        case DataDef(_, _, ctors):
            for c in ctors:
                yield from c.arg_types
        case PredDef(defs):
            for d in defs:
                yield d.ty
                yield from d.clauses
        case RecDef(defs):
            for d in defs:
                yield d.ty
                yield from d.equations
        case ValDecl(_, ty):
            yield ty
        case AxiomStmt(formula) | GoalStmt(formula):
            yield formula
        case DepDataDef(_, term_params, _, ctors):
            for tv in term_params:
                yield tv.ty
            for c in ctors:
                for tv in c.binders:
                    yield tv.ty
                yield from c.ret_indices
        case ClassDef(_, _, data_fields, axiom_fields):
            for _, t in data_fields:
                yield t
            for _, t in axiom_fields:
                yield t
        case InstanceDef(_, ty, assignments):
            yield ty
            for _, t in assignments:
                yield t


def map_statement_terms(stmt: Statement, f) -> Statement:
    """Rebuild a statement with f applied to every embedded term."""
    match stmt:
        case DataDef(name, params, ctors):
            return replace(stmt, ctors=tuple(
                CtorDecl(c.name, tuple(f(t) for t in c.arg_types)) for c in ctors))
        case PredDef(defs):
            return replace(stmt, defs=tuple(
                PredOne(d.name, f(d.ty), tuple(f(c) for c in d.clauses)) for d in defs))
        case RecDef(defs):
            return replace(stmt, defs=tuple(
                RecOne(d.name, f(d.ty), tuple(f(e) for e in d.equations)) for d in defs))
        case ValDecl(name, ty):
            return replace(stmt, ty=f(ty))
        case AxiomStmt(formula):
            return replace(stmt, formula=f(formula))
        case GoalStmt(formula):
            return replace(stmt, formula=f(formula))
        case DepDataDef(name, term_params, type_params, ctors):
            return replace(stmt, term_params=tuple(
                TypedVar(tv.name, f(tv.ty)) for tv in term_params),
                ctors=tuple(DepCtor(c.name,
                                    tuple(TypedVar(tv.name, f(tv.ty)) for tv in c.binders),
                                    c.args, tuple(f(t) for t in c.ret_indices))
                            for c in ctors))
        case ClassDef():
            return replace(stmt,
                           data_fields=tuple((n, f(t)) for n, t in stmt.data_fields),
                           axiom_fields=tuple((n, f(t)) for n, t in stmt.axiom_fields))
        case InstanceDef():
            return replace(stmt, ty=f(stmt.ty),
                           assignments=tuple((n, f(t)) for n, t in stmt.assignments))
    raise ProblemError(f"unknown statement {stmt!r}")


def toposort_statements(statements) -> list[Statement]:
    """Stable reorder so that every symbol is declared before it is used.

    Keeps the original order wherever possible; only statements that mention
    later-declared symbols are delayed.
    """
    statements = list(statements)
    declared_by: dict[str, int] = {}
    for i, stmt in enumerate(statements):
        for name in _declared_names(stmt):
            declared_by[name] = i

    deps: list[set[int]] = []
    for i, stmt in enumerate(statements):
        need: set[int] = set()
        own = set(_declared_names(stmt))
        for t in statement_terms(stmt):
            for sub in subterms(t):
                if isinstance(sub, Const) and sub.name not in own:
                    j = declared_by.get(sub.name)
                    if j is not None and j != i:
                        need.add(j)
        deps.append(need)

    out: list[Statement] = []
    emitted: set[int] = set()
    visiting: set[int] = set()

    def emit(i: int):
        if i in emitted:
            return
        if i in visiting:
            raise ProblemError("cyclic symbol dependencies between statements")
        visiting.add(i)
        for j in sorted(deps[i]):
            emit(j)
        visiting.discard(i)
        emitted.add(i)
        out.append(statements[i])

    for i in range(len(statements)):
        emit(i)
    return out
