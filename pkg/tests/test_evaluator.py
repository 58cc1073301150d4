"""Reference-evaluator semantics: the model-checking oracle."""

import pytest

from refuta.errors import EvalError
from refuta.evaluator import Evaluator, UNDEF, VCtor, evaluate, value_to_term
from refuta.models import FunctionEntry, FunctionTable, Model
from refuta.parser import parse_problem
from refuta.terms import (
    And,
    App,
    Asserting,
    Const,
    Eq,
    Exists,
    FALSE,
    Forall,
    IntLit,
    IntOp,
    Ite,
    Not,
    Or,
    TRUE,
    Unknown,
    Var,
)
from refuta.typecheck import infer

from conftest import EVEN_ODD, FACTORIAL, load, nat_values


def nat_term(n, zero="Zero", suc="Suc"):
    t = Const(zero)
    for _ in range(n):
        t = App(Const(suc), (t,))
    return t


def paper_even_odd_model(depth=5) -> Model:
    nat_carrier = tuple(value_to_term(v) for v in nat_values(depth))
    even = FunctionTable(
        (("n", Const("nat")),),
        (FunctionEntry((nat_term(0),), TRUE), FunctionEntry((nat_term(2),), TRUE)))
    odd = FunctionTable(
        (("n", Const("nat")),),
        (FunctionEntry((nat_term(1),), TRUE),))
    return Model(carriers=(("nat", nat_carrier),),
                 constants=(("m", nat_term(2)),),
                 functions=(("even", even), ("odd", odd)))


def test_goal_true_under_paper_model():
    # the paper's model: m = Suc (Suc Zero), even true at Zero and Suc^2 Zero
    p = load(EVEN_ODD)
    model = paper_even_odd_model()
    assert evaluate(p, model, p.goal().formula) is True


def test_goal_false_when_m_is_zero():
    p = load(EVEN_ODD)
    model = paper_even_odd_model().with_constant("m", nat_term(0))
    assert evaluate(p, model, p.goal().formula) is False


def test_asserting_false_guard_is_undefined():
    p = load("goal true;")
    assert evaluate(p, Model(), Asserting(IntLit(1), FALSE)) is UNDEF


def test_asserting_true_guard_passes_through():
    p = load("goal true;")
    assert evaluate(p, Model(), Asserting(IntLit(1), TRUE)) == 1


def test_factorial_definitional_evaluation():
    # independent oracle: plain Python factorial
    def pyfact(n):
        return 1 if n <= 0 else n * pyfact(n - 1)

    assert pyfact(5) == 120  # frozen expected value
    p = load(FACTORIAL)
    model = Model(constants=(("m", IntLit(5)),))
    goal = p.goal().formula  # fact m > 100
    assert evaluate(p, model, goal) is True
    fact5 = evaluate(p, model, App(Const("fact"), (IntLit(5),)))
    assert fact5 == pyfact(5)
    for n in range(0, 8):
        assert evaluate(p, model, App(Const("fact"), (IntLit(n),))) == pyfact(n)


def test_undefined_propagation_rules():
    p = load("goal true;")
    undef = Unknown("?__")
    ev = Evaluator(p, Model())
    # short-circuit: the determined operand decides
    assert ev.eval(And(FALSE, undef)) is False
    assert ev.eval(And(undef, FALSE)) is False
    assert ev.eval(Or(TRUE, undef)) is True
    assert ev.eval(Or(undef, TRUE)) is True
    assert ev.eval(And(TRUE, undef)) is UNDEF
    assert ev.eval(Or(FALSE, undef)) is UNDEF
    assert ev.eval(Not(undef)) is UNDEF
    # untaken ite branch does not matter
    assert ev.eval(Ite(TRUE, IntLit(1), undef)) == 1
    assert ev.eval(Ite(FALSE, undef, IntLit(2))) == 2
    assert ev.eval(Ite(undef, IntLit(1), IntLit(2))) is UNDEF


def test_undefined_equals_undefined_is_undefined():
    # open question resolution: undefined = undefined -> undefined
    p = load("goal true;")
    ev = Evaluator(p, Model())
    assert ev.eval(Eq(Unknown("?__"), Unknown("?__"))) is UNDEF


def test_quantifier_without_carrier_errors():
    p = load("val u : type; goal true;")
    ev = Evaluator(p, Model())
    with pytest.raises(EvalError):
        ev.eval(Forall("x", Const("u"), TRUE))


def test_quantifier_semantics_with_undef():
    p = load("data nat := Zero | Suc nat; goal true;")
    model = Model(carriers=(("nat", tuple(value_to_term(v)
                                          for v in nat_values(3))),))
    ev = Evaluator(p, model)
    # forall with one false instance is false even if others are undefined
    body = Ite(Eq(Var("x"), nat_term(0)), FALSE, Unknown("?__"))
    assert ev.eval(Forall("x", Const("nat"), body)) is False
    body2 = Ite(Eq(Var("x"), nat_term(0)), TRUE, Unknown("?__"))
    assert ev.eval(Forall("x", Const("nat"), body2)) is UNDEF
    assert ev.eval(Exists("x", Const("nat"), body2)) is True


def test_inductive_predicate_least_fixpoint():
    p = load(EVEN_ODD)
    model = Model(carriers=(("nat", tuple(value_to_term(v)
                                          for v in nat_values(7))),))
    ev = Evaluator(p, model)
    for n in range(0, 7):
        expected = (n % 2 == 0)
        got = ev.eval(App(Const("even"), (nat_term(n),)))
        assert got is expected, n


def test_coinductive_predicate_greatest_fixpoint():
    # gfp of (forever n <= forever n) is everything; the lfp is empty
    text = """
data nat := Zero | Suc nat;
{kw} forever : nat -> prop :=
  forall n. forever n => forever n;
goal true;
"""
    co = load(text.format(kw="copred"))
    ind = load(text.format(kw="pred"))
    arg = (VCtor("Zero"),)
    assert Evaluator(co, Model())._prove("forever", arg, frozenset()) is True
    assert Evaluator(ind, Model())._prove("forever", arg, frozenset()) is False


def test_unbound_symbol_errors():
    p = load("goal true;")
    ev = Evaluator(p, Model())
    with pytest.raises(EvalError):
        ev.eval(Const("nosuch"))


def test_model_table_default_is_undefined():
    p = load(EVEN_ODD)
    model = paper_even_odd_model()
    ev = Evaluator(p, model)
    # table wins over the definitional reading; outside the fragment -> UNDEF
    assert ev.eval(App(Const("even"), (nat_term(4),))) is UNDEF


def test_int_ops():
    p = load("goal true;")
    ev = Evaluator(p, Model())
    assert ev.eval(IntOp("+", IntLit(2), IntLit(3))) == 5
    assert ev.eval(IntOp("-", IntLit(2), IntLit(3))) == -1
    assert ev.eval(IntOp("*", IntLit(2), IntLit(3))) == 6
    assert ev.eval(IntOp("<=", IntLit(2), IntLit(3))) is True
    assert ev.eval(IntOp("<=", IntLit(4), IntLit(3))) is False
