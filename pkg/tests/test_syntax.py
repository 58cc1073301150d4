"""Concrete syntax: parsing, printing, round trips, model output format."""

import pytest

from refuta.errors import ParseError
from refuta.evaluator import value_to_term
from refuta.models import FunctionEntry, FunctionTable, Model
from refuta.parser import parse_dep_problem, parse_problem
from refuta.printer import print_model, print_problem
from refuta.problems import (
    DataDef,
    DepDataDef,
    ClassDef,
    GoalStmt,
    PredDef,
    RecDef,
    ValDecl,
)
from refuta.terms import App, Const, TRUE, Var, alpha_eq

from conftest import (
    EVEN_ODD,
    FACTORIAL,
    MONOID_CLASS_DNUN,
    VEC_DNUN,
    corpus_paths,
    generated_corpus,
    nat_values,
)


def statements_alpha_eq(p1, p2) -> bool:
    if len(p1.statements) != len(p2.statements):
        return False
    from refuta.problems import statement_terms

    for s1, s2 in zip(p1.statements, p2.statements):
        if type(s1) is not type(s2):
            return False
        ts1, ts2 = list(statement_terms(s1)), list(statement_terms(s2))
        if len(ts1) != len(ts2):
            return False
        if not all(alpha_eq(a, b) for a, b in zip(ts1, ts2)):
            return False
    return True


def test_parse_even_odd_shape():
    p = parse_problem(EVEN_ODD)
    kinds = [type(s).__name__ for s in p.statements]
    assert kinds == ["DataDef", "PredDef", "ValDecl", "GoalStmt"]
    pred = p.statements[1]
    assert isinstance(pred, PredDef) and not pred.co
    assert [d.name for d in pred.defs] == ["even", "odd"]
    assert len(pred.defs[0].clauses) == 2
    assert len(pred.defs[1].clauses) == 1
    assert sum(len(d.clauses) for d in pred.defs) == 3


def test_parse_goal_true():
    p = parse_problem("goal true;")
    assert len(p.statements) == 1
    assert isinstance(p.statements[0], GoalStmt)
    assert p.statements[0].formula == TRUE


def test_parse_factorial_shape():
    p = parse_problem(FACTORIAL)
    kinds = [type(s).__name__ for s in p.statements]
    assert kinds == ["RecDef", "ValDecl", "GoalStmt"]
    rec = p.statements[0]
    assert isinstance(rec, RecDef)
    assert rec.defs[0].name == "fact"
    assert len(rec.defs[0].equations) == 1


def test_parse_vec_depdata():
    p = parse_dep_problem(VEC_DNUN)
    dep = next(s for s in p.statements if isinstance(s, DepDataDef))
    assert dep.name == "vec"
    assert [(tv.name, tv.ty) for tv in dep.term_params] == [("n", Const("nat"))]
    assert dep.type_params == ("a",)
    nil, cons = dep.ctors
    assert nil.name == "nil" and nil.ret_indices == (Const("Z"),)
    assert cons.name == "cons"
    assert cons.args == ("x", "l")
    assert cons.ret_indices == (App(Const("S"), (Var("m"),)),)


def test_parse_monoid_class():
    p = parse_dep_problem(MONOID_CLASS_DNUN)
    cls = next(s for s in p.statements if isinstance(s, ClassDef))
    assert cls.name == "monoid" and cls.type_param == "a"
    assert [n for n, _ in cls.data_fields] == ["e", "op"]
    assert [n for n, _ in cls.axiom_fields] == ["left_neutral", "assoc"]


def test_reject_nonuniform_type_parameter():
    bad = """
data nat := Z | S nat;
depdata t (n : nat) (a : type) :=
    mk : t Z nat;
goal true;
"""
    with pytest.raises(ParseError):
        parse_dep_problem(bad)


def test_reject_dependent_statement_in_core():
    with pytest.raises(ParseError):
        parse_problem(VEC_DNUN)


def test_round_trip_paper_problems():
    for text in (EVEN_ODD, FACTORIAL):
        p = parse_problem(text)
        again = parse_problem(print_problem(p))
        assert statements_alpha_eq(p, again)
    for text in (VEC_DNUN, MONOID_CLASS_DNUN):
        p = parse_dep_problem(text)
        again = parse_dep_problem(print_problem(p))
        assert statements_alpha_eq(p, again)


def test_round_trip_corpus():
    for path in corpus_paths():
        text = path.read_text(encoding="utf-8")
        parse = parse_dep_problem if path.suffix == ".dnun" else parse_problem
        p = parse(text)
        again = parse(print_problem(p))
        assert statements_alpha_eq(p, again), path.name


def test_round_trip_generated_problems():
    texts = generated_corpus(100, start_seed=5000)
    for i, text in enumerate(texts):
        p = parse_problem(text)
        again = parse_problem(print_problem(p))
        assert statements_alpha_eq(p, again), f"seed {5000 + i}"


def test_parse_errors_have_spans():
    try:
        parse_problem("goal nosuch;")
    except ParseError as e:
        assert e.span is not None
        assert e.span.line == 1
    else:
        pytest.fail("expected a parse error")


def test_duplicate_symbol_rejected():
    with pytest.raises(ParseError):
        parse_problem("val x : int; val x : int; goal true;")


def test_use_before_declaration_rejected():
    with pytest.raises(ParseError):
        parse_problem("goal even Zero;")


def test_unicode_identifier_rejected():
    with pytest.raises(ParseError):
        parse_problem("goal trué;")


def test_placeholder_not_parseable():
    with pytest.raises(ParseError):
        parse_problem("val x : int; goal x = ?__;")


def _nat(n, zero="Zero", suc="Suc"):
    t = Const(zero)
    for _ in range(n):
        t = App(Const(suc), (t,))
    return t


def test_print_model_paper_format():
    # the three val lines of the paper's even/odd model, up to whitespace
    even = FunctionTable((("n", Const("nat")),),
                         (FunctionEntry((_nat(0),), TRUE),
                          FunctionEntry((_nat(2),), TRUE)))
    odd = FunctionTable((("n", Const("nat")),),
                        (FunctionEntry((_nat(1),), TRUE),))
    m = Model(constants=(("m", _nat(2)),),
              functions=(("even", even), ("odd", odd)))
    out = print_model(m, order=["even", "odd", "m"])
    lines = out.splitlines()
    assert lines[0] == ("val even := fun (n : nat). if n = Zero || "
                        "n = Suc (Suc Zero) then true else ?__ n.")
    assert lines[1] == ("val odd := fun (n : nat). if n = Suc Zero "
                        "then true else ?__ n.")
    assert lines[2] == "val m := Suc (Suc Zero)."


def test_print_model_empty():
    assert print_model(Model()) == ""


def test_print_model_single_constant():
    m = Model(constants=(("m", _nat(1)),))
    assert print_model(m) == "val m := Suc Zero.\n"


def test_greater_than_prints_and_reparses():
    p = parse_problem(FACTORIAL)
    text = print_problem(p)
    assert "fact m > 100" in text
    assert statements_alpha_eq(p, parse_problem(text))
