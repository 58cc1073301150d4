"""Built-in finite model finding: cardinality-scheduled search over the
backend fragment, with an explicit propositional grounding path for small
instances and cross-checking."""

from .carriers import CarrierSet, abstract_types, cardinality_points
from .dpll import Dpll, enumerate_solutions
from .grounding import (
    GroundProblem,
    assignment_to_model,
    enumerate_ground_models,
    ground,
    solve_ground,
)
from .search import (
    CardinalitySchedule,
    Verdict,
    build_model,
    check_model,
    solve,
)

__all__ = [
    "CardinalitySchedule",
    "CarrierSet",
    "Dpll",
    "GroundProblem",
    "Verdict",
    "abstract_types",
    "assignment_to_model",
    "build_model",
    "cardinality_points",
    "check_model",
    "enumerate_ground_models",
    "enumerate_solutions",
    "ground",
    "solve",
    "solve_ground",
]
