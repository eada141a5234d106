"""Exceptions and warning categories raised by monotone_rep."""
from typing import Any, Optional


class MonotoneRepError(Exception):
    """Base class for every library error."""


class DimensionError(MonotoneRepError, ValueError):
    """Vectors or objects of incompatible dimensions were combined."""


class ExtendedRealError(MonotoneRepError, ArithmeticError):
    """An undefined extended-real operation such as inf - inf."""


class ConvexityError(MonotoneRepError, ValueError):
    """A construction input is not convex (or not monotone)."""


class PreconditionError(MonotoneRepError):
    """
    A documented precondition failed.

    Args:
        message: human readable diagnostic
        measured: the measured quantity that violated the precondition
        witness: a point exhibiting the violation, if any
    """

    def __init__(self, message: str, measured: Optional[float] = None, witness: Any = None):
        super().__init__(message)
        self.measured = measured
        self.witness = witness


class QualificationError(PreconditionError):
    """The constraint qualification of the Fenchel duality formula is not met."""


class SolverError(MonotoneRepError):
    """An inner numeric solve did not reach its target."""

    def __init__(self, message: str, best_value: Optional[float] = None):
        super().__init__(message)
        self.best_value = best_value


class ScenarioSyntaxError(MonotoneRepError):
    """Malformed scenario text."""

    def __init__(self, message: str, line: int, column: int = 1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class ScenarioSemanticError(MonotoneRepError):
    """A well-formed scenario that refers to something inconsistent."""

    def __init__(self, message: str, name: Optional[str] = None):
        super().__init__(message)
        self.name = name


class BoundaryTouchWarning(UserWarning):
    """A grid conjugate was evaluated at a slope whose maximizer sits on the sampling box."""


class LowerBoundWarning(UserWarning):
    """A value computed from a finite graph sample only bounds the true value from below."""
