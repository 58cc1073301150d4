"""refuta: a counterexample generator for higher-order logic with
(co)datatypes, (co)inductive predicates, and recursive functions, plus a
frontend for dependent (co)datatypes and type classes.

Problems are translated through a staged pipeline to a finite-model-finding
fragment solved by a built-in backend (or exported to SMT-LIB 2 for an
external solver); any model found is decoded back into the surface language
and re-checked by a reference evaluator.
"""

from .depfront import encode_problem
from .errors import RefutaError
from .evaluator import Evaluator, UNDEF, evaluate, holds
from .fmf import CardinalitySchedule, Verdict, check_model, solve
from .models import FunctionEntry, FunctionTable, Model
from .parser import parse_dep_problem, parse_problem
from .pipeline import PipelineConfig, decode_chain, run_pipeline
from .printer import print_model, print_problem, print_term
from .problems import Problem
from .terms import Term, alpha_eq, free_vars, substitute
from .typecheck import infer, sort_of

__all__ = [
    "CardinalitySchedule",
    "Evaluator",
    "FunctionEntry",
    "FunctionTable",
    "Model",
    "PipelineConfig",
    "Problem",
    "RefutaError",
    "Term",
    "UNDEF",
    "Verdict",
    "alpha_eq",
    "check_model",
    "decode_chain",
    "encode_problem",
    "evaluate",
    "free_vars",
    "holds",
    "infer",
    "parse_dep_problem",
    "parse_problem",
    "print_model",
    "print_problem",
    "print_term",
    "run_pipeline",
    "solve",
    "sort_of",
    "substitute",
]

__version__ = "0.1.0"
