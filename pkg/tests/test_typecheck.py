"""Type inference and well-formedness checks."""

import pytest

from refuta.errors import ProblemError, TypecheckError
from refuta.parser import parse_problem
from refuta.printer import print_problem
from refuta.problems import GoalStmt, PredDef
from refuta.terms import (
    App,
    Const,
    Exists,
    Forall,
    Lam,
    PROP,
    Pi,
    Var,
    alpha_eq,
    map_subterms,
    rewrite,
)
from refuta.typecheck import infer, sort_of

from conftest import EVEN_ODD, FACTORIAL, corpus_paths, load, load_corpus_problem


def test_even_odd_inference():
    p = load(EVEN_ODD)
    pred = next(s for s in p.statements if isinstance(s, PredDef))
    for d in pred.defs:
        for clause in d.clauses:
            assert sort_of(p, clause) == PROP
    assert p.symbols["m"].ty == Const("nat")
    goal = p.goal().formula
    assert sort_of(p, goal) == PROP
    # binders annotated after inference
    clause = pred.defs[0].clauses[1]
    assert isinstance(clause, Forall) and clause.var_ty == Const("nat")


def test_goal_true_typechecks():
    assert load("goal true;") is not None


def test_unbound_symbol_is_rejected_at_parse():
    from refuta.errors import ParseError

    with pytest.raises(ParseError):
        parse_problem("goal even Zero;")


def test_missing_goal_rejected():
    with pytest.raises(ProblemError):
        infer(parse_problem("val x : int;"))


def test_duplicate_goal_rejected():
    with pytest.raises(ProblemError):
        infer(parse_problem("goal true; goal false;"))


def test_idempotence():
    for text in (EVEN_ODD, FACTORIAL):
        p = load(text)
        assert infer(p).statements == p.statements


def test_idempotence_on_corpus():
    for path in corpus_paths():
        p = load_corpus_problem(path)
        assert infer(p).statements == p.statements, path.name


def _strip_annotations(t):
    def strip(node):
        if isinstance(node, (Forall, Exists, Lam)):
            return type(node)(node.var, None, node.body)
        if isinstance(node, Const):
            return Const(node.name)
        return node

    return rewrite(t, strip)


def test_erase_and_reinfer_alpha_equivalent():
    from refuta.problems import map_statement_terms

    p = load(EVEN_ODD)
    stripped = p.with_statements([
        map_statement_terms(s, _strip_annotations) if not hasattr(s, "ty") else s
        for s in p.statements])
    again = infer(stripped)
    from refuta.problems import statement_terms

    for s1, s2 in zip(p.statements, again.statements):
        for a, b in zip(statement_terms(s1), statement_terms(s2)):
            assert alpha_eq(a, b)


def test_ill_sorted_application_rejected():
    with pytest.raises(TypecheckError):
        load("""
data nat := Zero | Suc nat;
goal Suc = Zero;
""")
    with pytest.raises(TypecheckError):
        load("""
data nat := Zero | Suc nat;
goal Suc Zero Zero = Zero;
""")


def test_pred_clause_must_conclude_with_predicate():
    with pytest.raises(TypecheckError):
        load("""
data nat := Zero | Suc nat;
pred p : nat -> prop :=
  forall n. p n => n = Zero;
goal true;
""")


def test_rec_equation_must_define_symbol():
    with pytest.raises(TypecheckError):
        load("""
data nat := Zero | Suc nat;
rec f : nat -> nat :=
  forall n. Suc n = f n;
goal true;
""")


def test_goal_must_be_prop():
    with pytest.raises(TypecheckError):
        load("""
data nat := Zero | Suc nat;
goal Suc Zero;
""")


def test_polymorphic_instantiation_fills_targs():
    p = load("""
data list a := Nil | Cons a (list a);
val xs : list int;
goal xs = Cons 1 Nil;
""")
    goal = p.goal().formula
    found = {}
    from refuta.terms import subterms

    for t in subterms(goal):
        if isinstance(t, Const) and t.targs:
            found[t.name] = t.targs
    assert found["Cons"] == (Const("int") if False else found["Cons"])
    from refuta.terms import INT

    assert found["Cons"] == (INT,)
    assert found["Nil"] == (INT,)


def test_type_annotation_mismatch():
    with pytest.raises(TypecheckError):
        load("""
data nat := Zero | Suc nat;
goal forall (n : prop). n = Zero;
""")


def test_ambiguous_type_rejected():
    with pytest.raises(TypecheckError):
        load("goal forall x. x = x;")


def test_sort_of_factorial_pieces():
    from refuta.terms import INT, Arrow

    p = load(FACTORIAL)
    assert sort_of(p, Const("fact")) == Arrow(INT, INT)
    assert sort_of(p, App(Const("fact"), (Const("m"),))) == INT
