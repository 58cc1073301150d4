"""Exception hierarchy shared by all refuta modules."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Span:
    """Source location of a token, term, or statement."""

    file: str
    line: int
    col: int
    end_line: int
    end_col: int

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.col}"


class RefutaError(Exception):
    """Base class for all errors raised by this package."""

    def __init__(self, message: str, span: Span | None = None):
        self.message = message
        self.span = span
        super().__init__(str(self))

    def __str__(self) -> str:
        if self.span is not None:
            return f"{self.span}: {self.message}"
        return self.message


class ParseError(RefutaError):
    pass


class ProblemError(RefutaError):
    """Malformed problem: duplicate symbols, use before declaration, ..."""


class TypecheckError(RefutaError):
    pass


class SortMismatchError(TypecheckError):
    """A substitution replaced a variable by a term of a different sort."""


class EncodeError(RefutaError):
    """Dependent-frontend construct outside the supported fragment."""


class PhaseError(RefutaError):
    """A pipeline phase failed; carries the phase name."""

    def __init__(self, phase: str, message: str, span: Span | None = None):
        self.phase = phase
        super().__init__(f"[{phase}] {message}", span)


class EvalError(RefutaError):
    """Unbound symbol, missing carrier, or other evaluation failure."""


class SolveError(RefutaError):
    pass


class SmtError(RefutaError):
    pass
