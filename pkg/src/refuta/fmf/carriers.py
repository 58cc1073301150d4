"""Carrier construction for the built-in backend: abstract types get fresh
domain elements, datatypes are finitized by depth-bounded unfolding, arrays
enumerate all finite tables."""

from __future__ import annotations

from ..errors import SolveError
from ..evaluator import VArr, VCtor, VDom, type_key
from ..problems import DataDef, Problem, ValDecl
from ..terms import App, Arrow, Builtin, Const, INT, PROP, TYPE, Term


def abstract_types(p: Problem) -> list[str]:
    """Names of uninterpreted types, in declaration order."""
    return [s.name for s in p.statements if isinstance(s, ValDecl) and s.ty == TYPE]


class CarrierSet:
    """Carriers for one cardinality point."""

    def __init__(self, p: Problem, sizes: dict[str, int], depth: int):
        self.p = p
        self.sizes = sizes
        self.depth = depth
        self._cache: dict[str, list] = {}

    def of(self, ty: Term) -> list:
        key = type_key(ty)
        if key in self._cache:
            return self._cache[key]
        values = self._build(ty)
        self._cache[key] = values
        return values

    def _build(self, ty: Term) -> list:
        if ty == PROP:
            return [False, True]
        if ty == INT:
            raise SolveError("integer carriers are not enumerated eagerly")
        match ty:
            case Const(name, _):
                if name in self.sizes:
                    return [VDom(name, i) for i in range(self.sizes[name])]
                dt = self.p.datatypes().get(name)
                if dt is not None:
                    return self.datatype_values(dt, self.depth)
                raise SolveError(f"no carrier for type {name!r}")
            case App(Const("array", _), (k, v)):
                return self._tables(k, v)
            case Arrow(d, c):
                return self._tables(d, c)
        raise SolveError(f"no carrier for type {ty!r}")

    def _tables(self, dom: Term, cod: Term) -> list:
        keys = self.of(dom)
        vals = self.of(cod)
        combos = [[]]
        for _ in keys:
            combos = [c + [v] for c in combos for v in vals]
        return [VArr(tuple(zip(keys, c))) for c in combos]

    def datatype_values(self, dt: DataDef, depth: int) -> list:
        """All constructor terms of height <= depth, ordered by height then
        constructor declaration order."""
        if dt.params:
            raise SolveError(f"polymorphic datatype {dt.name!r} reached the backend")
        datatypes = self.p.datatypes()
        memo: dict[tuple[str, int], list] = {}

        def values(name: str, d: int) -> list:
            if d <= 0:
                return []
            key = (name, d)
            if key in memo:
                return memo[key]
            out = []
            for c in datatypes[name].ctors:
                arg_domains = []
                for at in c.arg_types:
                    head = at.fn if isinstance(at, App) else at
                    if isinstance(head, Const) and head.name in datatypes:
                        arg_domains.append(values(head.name, d - 1))
                    else:
                        arg_domains.append(self.of(at))
                combos = [()]
                for domain in arg_domains:
                    combos = [cb + (v,) for cb in combos for v in domain]
                out.extend(VCtor(c.name, cb) for cb in combos)
            # stable order: by height, then first-generation order
            seen = set()
            ordered = []
            for h in range(1, d + 1):
                for v in out:
                    if _height(v) == h and v not in seen:
                        seen.add(v)
                        ordered.append(v)
            memo[key] = ordered
            return ordered

        return values(dt.name, depth)


def _height(v) -> int:
    if isinstance(v, VCtor):
        return 1 + max((_height(a) for a in v.args), default=0)
    return 1


def cardinality_points(names: list[str], start: int, maximum: int):
    """Yield size assignments smallest-first: by total size, then
    lexicographically in declaration order."""
    if not names:
        yield {}
        return
    n = len(names)
    total_min = start * n
    total_max = maximum * n
    for total in range(total_min, total_max + 1):
        for vec in _vectors(n, total, start, maximum):
            yield dict(zip(names, vec))


def _vectors(n: int, total: int, lo: int, hi: int):
    if n == 1:
        if lo <= total <= hi:
            yield (total,)
        return
    for first in range(lo, hi + 1):
        rest = total - first
        if rest < lo * (n - 1) or rest > hi * (n - 1):
            continue
        for tail in _vectors(n - 1, rest, lo, hi):
            yield (first,) + tail
