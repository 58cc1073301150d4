"""The transformation chain from typechecked core problems to the
finite-model-finding fragment.

Each phase is a pure function Problem -> Transform; a Transform carries the
forward-encoded problem plus a model decoder mapping backend models one stage
backward.  Phases compose in a fixed order; models travel back through
``decode_chain``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

from ..errors import PhaseError
from ..models import Model
from ..problems import PredDef, Problem, RecDef, Statement
from ..terms import Asserting, Lam, Match, Pi, Term, Var, subterms
from ..typecheck import infer


class Polarity(Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    UNPOLARIZED = "unpolarized"

    def flip(self) -> "Polarity":
        if self is Polarity.POSITIVE:
            return Polarity.NEGATIVE
        if self is Polarity.NEGATIVE:
            return Polarity.POSITIVE
        return Polarity.UNPOLARIZED


@dataclass
class Transform:
    """A pipeline stage's residue: output problem plus model decoder."""

    name: str
    output: Problem
    decode: Callable[[Model], Model]
    warnings: tuple[str, ...] = ()


@dataclass(frozen=True)
class PipelineConfig:
    specialize: bool = False
    unroll: bool = True
    unroll_depth: int = 8
    mono_instance_limit: int = 256


def identity_decode(m: Model) -> Model:
    return m


# -- fragment postconditions (checkable predicates on problems) -------------

def problem_terms(p: Problem):
    from ..problems import statement_terms

    for stmt in p.statements:
        for t in statement_terms(stmt):
            yield t


def no_type_vars(p: Problem) -> bool:
    for t in problem_terms(p):
        for s in subterms(t):
            if isinstance(s, Pi):
                return False
    for info in p.symbols.values():
        if isinstance(info.ty, Pi):
            return False
    return True


def no_lambdas(p: Problem) -> bool:
    return not any(isinstance(s, Lam) for t in problem_terms(p) for s in subterms(t))


def no_match(p: Problem) -> bool:
    return not any(isinstance(s, Match) for t in problem_terms(p) for s in subterms(t))


def no_asserting(p: Problem) -> bool:
    return not any(isinstance(s, Asserting) for t in problem_terms(p)
                   for s in subterms(t))


def no_predicates(p: Problem) -> bool:
    return not any(isinstance(s, PredDef) for s in p.statements)


def recs_nonrecursive(p: Problem) -> bool:
    from ..terms import Const

    for stmt in p.statements:
        if isinstance(stmt, RecDef):
            names = {d.name for d in stmt.defs}
            for d in stmt.defs:
                for eqn in d.equations:
                    from ..terms import strip_foralls, Eq

                    body = strip_foralls(eqn)[1]
                    rhs = body.rhs if isinstance(body, Eq) else body
                    for s in subterms(rhs):
                        if isinstance(s, Const) and s.name in names:
                            return False
    return True


def backend_fragment_violations(p: Problem) -> list[str]:
    out = []
    if not no_type_vars(p):
        out.append("type variables remain")
    if not no_lambdas(p):
        out.append("lambdas remain")
    if not no_match(p):
        out.append("pattern matches remain")
    if not no_asserting(p):
        out.append("asserting guards remain")
    if not no_predicates(p):
        out.append("(co)inductive predicates remain")
    if not recs_nonrecursive(p):
        out.append("recursive rec definitions remain")
    return out


from .simple import (  # noqa: E402
    elim_equations,
    monomorphize,
    skolemize_types,
    specialize,
)
from .predicates import elim_preds, polarize, skolemize, unroll  # noqa: E402
from .functional import elim_ho, elim_rec, lambda_lift  # noqa: E402
from .lowering import elim_asserting, elim_match, propagate_guards  # noqa: E402

PHASES: tuple[tuple[str, Callable], ...] = (
    ("skolemize_types", lambda p, cfg: skolemize_types(p)),
    ("monomorphize", lambda p, cfg: monomorphize(p, cfg.mono_instance_limit)),
    ("elim_equations", lambda p, cfg: elim_equations(p)),
    ("specialize", lambda p, cfg: specialize(p, enabled=cfg.specialize)),
    ("polarize", lambda p, cfg: polarize(p)),
    ("unroll", lambda p, cfg: unroll(p, enabled=cfg.unroll, depth=cfg.unroll_depth)),
    ("skolemize", lambda p, cfg: skolemize(p)),
    ("elim_preds", lambda p, cfg: elim_preds(p)),
    ("lambda_lift", lambda p, cfg: lambda_lift(p)),
    ("elim_ho", lambda p, cfg: elim_ho(p)),
    ("elim_rec", lambda p, cfg: elim_rec(p)),
    ("elim_match", lambda p, cfg: elim_match(p)),
    ("elim_asserting", lambda p, cfg: elim_asserting(p)),
)


def run_pipeline(p: Problem, cfg: PipelineConfig | None = None,
                 dump: Callable[[int, str, Problem], None] | None = None,
                 check: bool = True) -> tuple[Problem, list[Transform]]:
    """Apply all phases in order; returns the backend problem and the
    Transform list whose decoders map backend models to surface models."""
    cfg = cfg or PipelineConfig()
    transforms: list[Transform] = []
    current = p
    for i, (name, phase) in enumerate(PHASES, start=1):
        try:
            t = phase(current, cfg)
        except PhaseError:
            raise
        except Exception as e:  # annotate with the phase name
            raise PhaseError(name, str(e)) from e
        if check:
            try:
                t.output = infer(t.output)
            except Exception as e:
                raise PhaseError(name, f"output does not re-typecheck: {e}") from e
        transforms.append(t)
        current = t.output
        if dump is not None:
            dump(i, name, current)
    violations = backend_fragment_violations(current)
    if violations:
        raise PhaseError("pipeline", "; ".join(violations))
    return current, transforms


def decode_chain(transforms: list[Transform], m: Model) -> Model:
    """Fold decoders right-to-left: backend model -> surface model."""
    for t in reversed(transforms):
        m = t.decode(m)
    return m
