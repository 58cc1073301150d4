"""Watched-literal DPLL with chronological backtracking (no clause learning).

Literals are nonzero ints: +v / -v for variable v >= 1, DIMACS style.
"""

from __future__ import annotations


class Dpll:
    def __init__(self, num_vars: int, clauses: list[list[int]]):
        self.n = num_vars
        self.clauses = [list(c) for c in clauses]
        self.assign: dict[int, bool] = {}
        self.trail: list[int] = []
        self.levels: list[int] = []
        self.watch: dict[int, list[int]] = {}
        self.empty_clause = False
        self.units: list[int] = []
        for ci, c in enumerate(self.clauses):
            if not c:
                self.empty_clause = True
            elif len(c) == 1:
                self.units.append(c[0])
            else:
                self._watch(c[0], ci)
                self._watch(c[1], ci)

    def _watch(self, lit: int, ci: int):
        self.watch.setdefault(lit, []).append(ci)

    def value(self, lit: int):
        v = self.assign.get(abs(lit))
        if v is None:
            return None
        return v if lit > 0 else not v

    def _assign(self, lit: int) -> bool:
        """Assign lit true; returns False on conflict during propagation."""
        var , val = abs(lit), lit > 0
        cur = self.assign.get(var)
        if cur is not None:
            return cur == val
        self.assign[var] = val
        self.trail.append(var)
        return self._propagate(-lit)

    def _propagate(self, false_lit: int) -> bool:
        watching = self.watch.get(false_lit, [])
        i = 0
        while i < len(watching):
            ci = watching[i]
            c = self.clauses[ci]
            # ensure false_lit is at position 1
            if c[0] == false_lit:
                c[0], c[1] = c[1], c[0]
            other = c[0]
            ov = self.value(other)
            if ov is True:
                i += 1
                continue
            moved = False
            for j in range(2, len(c)):
                if self.value(c[j]) is not False:
                    c[1], c[j] = c[j], c[1]
                    watching[i] = watching[-1]
                    watching.pop()
                    self._watch(c[1], ci)
                    moved = True
                    break
            if moved:
                continue
            if ov is False:
                return False
            if not self._assign(other):
                return False
            i += 1
        return True

    def _backtrack_to(self, mark: int):
        while len(self.trail) > mark:
            var = self.trail.pop()
            del self.assign[var]

    def solve(self) -> dict[int, bool] | None:
        if self.empty_clause:
            return None
        for u in self.units:
            if not self._assign(u):
                return None
        if self._dpll(1):
            return dict(self.assign)
        return None

    def _dpll(self, var: int) -> bool:
        while var <= self.n and var in self.assign:
            var += 1
        if var > self.n:
            return True
        for val in (False, True):
            mark = len(self.trail)
            if self._assign(var if val else -var) and self._dpll(var + 1):
                return True
            self._backtrack_to(mark)
        return False


def enumerate_solutions(num_vars: int, clauses: list[list[int]],
                        project: list[int], limit: int = 100_000):
    """All satisfying assignments, distinct on the projected variables."""
    clauses = [list(c) for c in clauses]
    out = []
    while len(out) < limit:
        s = Dpll(num_vars, clauses).solve()
        if s is None:
            return out
        out.append(s)
        block = [(-v if s.get(v, False) else v) for v in project]
        if not block:
            return out
        clauses.append(block)
    return out
