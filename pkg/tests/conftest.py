"""Shared fixtures: the paper examples, a brute-force model enumerator used
as an independent oracle, and a seeded random problem generator."""

from __future__ import annotations

import itertools
import random
from pathlib import Path

import pytest

from refuta.evaluator import Evaluator, UNDEF, VCtor, VDom, value_to_term
from refuta.models import FunctionEntry, FunctionTable, Model
from refuta.parser import parse_dep_problem, parse_problem
from refuta.problems import AxiomStmt, GoalStmt, Problem, ValDecl
from refuta.terms import (
    Const,
    INT,
    PROP,
    TYPE,
    App,
    Arrow,
    strip_arrows,
)
from refuta.typecheck import infer

CORPUS_DIR = Path(__file__).parent / "corpus"
GOLDEN_DIR = Path(__file__).parent / "golden"

EVEN_ODD = """\
data nat := Zero | Suc nat;
pred even : nat -> prop :=
  even Zero;
  forall n. odd n => even (Suc n)
and odd : nat -> prop :=
  forall n. even n => odd (Suc n);
val m : nat;
goal even m && ~ (m = Zero);
"""

FACTORIAL = """\
rec fact : int -> int :=
  forall n. fact n = (if n <= 0 then 1 else n * fact (n - 1));
val m : int;
goal fact m > 100;
"""

VEC_DNUN = """\
data nat := Z | S nat;
depdata vec (n : nat) (a : type) :=
    nil : vec Z a
  | forall (m : nat) (x : a) (l : vec m a). cons x l : vec (S m) a;
val u : type;
val v : vec (S (S Z)) u;
goal true;
"""

MONOID_CLASS_DNUN = """\
class monoid a where
  e : a;
  op : a -> a -> a;
  left_neutral : forall x. op e x = x;
  assoc : forall x y z. op (op x y) z = op x (op y z);
val u : type;
goal true;
"""

MONOID_COUNTER = """\
data monoid a := inst_monoid a (a -> a -> a);
rec e : pi a. monoid a -> a :=
  forall (d : monoid a). e d = match d with inst_monoid e1 op1 -> e1 end;
rec op : pi a. monoid a -> a -> a -> a :=
  forall (d : monoid a) (x y : a). op d x y = match d with inst_monoid e1 op1 -> op1 x y end;
pred left_neutral_monoid : pi a. monoid a -> prop :=
  forall (e2 : a) (op2 : a -> a -> a). (forall x. op2 e2 x = x) => left_neutral_monoid (inst_monoid e2 op2);
pred assoc_monoid : pi a. monoid a -> prop :=
  forall (e2 : a) (op2 : a -> a -> a). (forall x y z. op2 (op2 x y) z = op2 x (op2 y z)) => assoc_monoid (inst_monoid e2 op2);
val u : type;
goal exists (d : monoid u) (x : u). left_neutral_monoid d && assoc_monoid d && ~ (op d x (e d) = x);
"""


@pytest.fixture
def even_odd_problem():
    return infer(parse_problem(EVEN_ODD))


@pytest.fixture
def factorial_problem():
    return infer(parse_problem(FACTORIAL))


def load(text: str) -> Problem:
    return infer(parse_problem(text))


def corpus_paths() -> list[Path]:
    return sorted(CORPUS_DIR.glob("*.nun")) + sorted(CORPUS_DIR.glob("*.dnun"))


def load_corpus_problem(path: Path) -> Problem:
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".dnun":
        from refuta.depfront import encode_problem

        return infer(encode_problem(parse_dep_problem(text, str(path))))
    return infer(parse_problem(text, str(path)))


# -- independent brute-force oracle ---------------------------------------------


def nat_values(depth: int, zero="Zero", suc="Suc"):
    out = [VCtor(zero)]
    for _ in range(depth - 1):
        out.append(VCtor(suc, (out[-1],)))
    return out


def brute_force_models(problem: Problem, sizes: dict[str, int], depth: int = 3,
                       int_values=(-1, 0, 1)):
    """Enumerate every interpretation of the uninterpreted symbols over the
    given carriers and keep those making all axioms and the goal true.

    Completely independent of the fmf search: plain itertools products plus
    the reference evaluator.
    """
    from refuta.fmf.carriers import CarrierSet

    carriers = CarrierSet(problem, sizes, depth)

    def domain(ty):
        if ty == INT:
            return list(int_values)
        return carriers.of(ty)

    symbols = []
    for stmt in problem.statements:
        if isinstance(stmt, ValDecl) and stmt.ty != TYPE:
            doms, ret = strip_arrows(stmt.ty)
            symbols.append((stmt.name, doms, ret))

    spaces = []
    for name, doms, ret in symbols:
        arg_tuples = list(itertools.product(*(domain(d) for d in doms)))
        ret_values = domain(ret)
        tables = list(itertools.product(ret_values, repeat=len(arg_tuples)))
        spaces.append([(name, doms, ret, arg_tuples, row) for row in tables])

    carrier_entries = []
    for name, size in sizes.items():
        carrier_entries.append(
            (name, tuple(Const(f"${name}_{i}") for i in range(size))))
    for dname, dt in problem.datatypes().items():
        carrier_entries.append((dname, tuple(
            value_to_term(v) for v in carriers.datatype_values(dt, depth))))

    found = []
    for combo in itertools.product(*spaces):
        constants = []
        functions = []
        for name, doms, ret, arg_tuples, row in combo:
            if not doms:
                constants.append((name, value_to_term(row[0], ret)))
            else:
                entries = tuple(
                    FunctionEntry(tuple(value_to_term(a, d)
                                        for a, d in zip(args, doms)),
                                  value_to_term(v, ret))
                    for args, v in zip(arg_tuples, row))
                functions.append((name, FunctionTable(
                    tuple((f"x{i}", d) for i, d in enumerate(doms)), entries)))
        model = Model(carriers=tuple(carrier_entries), constants=tuple(constants),
                      functions=tuple(functions),
                      int_carrier=tuple(sorted(int_values)))
        ev = Evaluator(problem, model, fuel=200_000)
        ok = True
        for stmt in problem.statements:
            if isinstance(stmt, (AxiomStmt, GoalStmt)):
                try:
                    if ev.eval(stmt.formula) is not True:
                        ok = False
                        break
                except Exception:
                    ok = False
                    break
        if ok:
            found.append(model)
    return found


# -- random problem generator ----------------------------------------------------


GEN_HEADER = """\
data gnat := GZ | GS gnat;
data gpair := GP gnat gnat;
"""


def generate_problem(seed: int) -> str:
    """A small random, well-formed core problem (deterministic per seed)."""
    rng = random.Random(seed)
    lines = [GEN_HEADER]
    consts = []
    n_vals = rng.randint(1, 3)
    for i in range(n_vals):
        ty = rng.choice(["gnat", "gnat", "gpair", "prop"])
        lines.append(f"val c{i} : {ty};")
        consts.append((f"c{i}", ty))

    def nat_term(depth: int, vars_in_scope):
        opts = ["GZ"]
        if vars_in_scope:
            opts += vars_in_scope
        opts += [n for n, t in consts if t == "gnat"]
        base = rng.choice(opts)
        for _ in range(rng.randint(0, depth)):
            base = f"(GS {base})"
        return base

    def formula(depth: int, vars_in_scope):
        if depth <= 0:
            kind = rng.randint(0, 3)
            if kind == 0:
                return f"{nat_term(1, vars_in_scope)} = {nat_term(1, vars_in_scope)}"
            if kind == 1:
                props = [n for n, t in consts if t == "prop"]
                return rng.choice(props) if props else "true"
            if kind == 2:
                return "true"
            return "false"
        kind = rng.randint(0, 5)
        if kind == 0:
            return f"({formula(depth - 1, vars_in_scope)}) && ({formula(depth - 1, vars_in_scope)})"
        if kind == 1:
            return f"({formula(depth - 1, vars_in_scope)}) || ({formula(depth - 1, vars_in_scope)})"
        if kind == 2:
            return f"~ ({formula(depth - 1, vars_in_scope)})"
        if kind == 3:
            return f"({formula(depth - 1, vars_in_scope)}) => ({formula(depth - 1, vars_in_scope)})"
        if kind == 4:
            v = f"q{rng.randint(0, 99)}"
            q = rng.choice(["forall", "exists"])
            return f"{q} ({v} : gnat). ({formula(depth - 1, vars_in_scope + [v])})"
        return f"{nat_term(1, vars_in_scope)} = {nat_term(1, vars_in_scope)}"

    if rng.random() < 0.5:
        lines.append(f"axiom {formula(1, [])};")
    lines.append(f"goal {formula(2, [])};")
    return "\n".join(lines) + "\n"


def generated_corpus(count: int = 35, start_seed: int = 1000) -> list[str]:
    return [generate_problem(start_seed + i) for i in range(count)]
