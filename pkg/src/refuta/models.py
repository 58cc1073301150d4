"""Finite models: carriers, constant assignments, and function tables.

A model is the finite fragment of a possibly infinite interpretation: every
function table ends in a ``?__`` default branch, and carriers list the domain
elements (or datatype values) the solver committed to.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

from .terms import Term, Unknown


@dataclass(frozen=True)
class FunctionEntry:
    args: tuple[Term, ...]
    value: Term


@dataclass(frozen=True)
class FunctionTable:
    """Decision tree as an ordered case list with a default branch."""

    params: tuple[tuple[str, Term], ...]  # (name, type) per argument
    entries: tuple[FunctionEntry, ...]
    default: Unknown = Unknown("?__")

    def lookup(self, args: tuple[Term, ...]) -> Optional[Term]:
        for e in self.entries:
            if e.args == args:
                return e.value
        return None


@dataclass(frozen=True)
class Model:
    """Interpretations for the uninterpreted symbols of a problem."""

    carriers: tuple[tuple[str, tuple[Term, ...]], ...] = ()
    constants: tuple[tuple[str, Term], ...] = ()
    functions: tuple[tuple[str, FunctionTable], ...] = ()
    int_carrier: tuple[int, ...] = ()

    def carrier(self, ty_name: str) -> Optional[tuple[Term, ...]]:
        for name, values in self.carriers:
            if name == ty_name:
                return values
        return None

    def constant(self, name: str) -> Optional[Term]:
        for n, v in self.constants:
            if n == name:
                return v
        return None

    def function(self, name: str) -> Optional[FunctionTable]:
        for n, t in self.functions:
            if n == name:
                return t
        return None

    def names(self) -> set[str]:
        return {n for n, _ in self.constants} | {n for n, _ in self.functions}

    def without_symbols(self, names) -> "Model":
        names = set(names)
        return replace(
            self,
            constants=tuple((n, v) for n, v in self.constants if n not in names),
            functions=tuple((n, t) for n, t in self.functions if n not in names),
        )

    def without_carriers(self, ty_names) -> "Model":
        ty_names = set(ty_names)
        return replace(self, carriers=tuple(
            (n, vs) for n, vs in self.carriers if n not in ty_names))

    def with_constant(self, name: str, value: Term) -> "Model":
        rest = tuple((n, v) for n, v in self.constants if n != name)
        return replace(self, constants=rest + ((name, value),))

    def with_function(self, name: str, table: FunctionTable) -> "Model":
        rest = tuple((n, t) for n, t in self.functions if n != name)
        return replace(self, functions=rest + ((name, table),))

    def rename(self, mapping: dict[str, str]) -> "Model":
        return replace(
            self,
            constants=tuple((mapping.get(n, n), v) for n, v in self.constants),
            functions=tuple((mapping.get(n, n), t) for n, t in self.functions),
        )
