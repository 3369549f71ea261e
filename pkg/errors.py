#!/usr/bin/env python3
"""Level-Set Solver Errors.

Exception hierarchy shared by the root finders, oracles, inner solvers
and problem assemblies.
"""

from typing import Any, Optional


class LevelSetError(Exception):
    """Base class for every error raised by the toolkit."""


class DomainError(LevelSetError, ValueError):
    """An argument lies outside the domain an operation accepts."""


class BadShiftError(DomainError):
    """The shifted cost c - A^T y_hat is not strictly positive."""


class NotStrictlyFeasibleError(DomainError):
    """The anchor point of a radial projection is not strictly feasible."""


class ParseError(LevelSetError, ValueError):
    """A dense CSV file could not be parsed."""


class NonNegativeSlopeError(LevelSetError):
    """A root-finding step was requested with a slope that is not negative."""

    def __init__(self, slope: float, tau: float, trace: Optional[Any] = None):
        super().__init__(f"Non-negative slope {slope!r} at tau={tau!r}")
        self.slope = slope
        self.tau = tau
        self.trace = trace


class OracleError(LevelSetError):
    """An oracle could not produce a conforming evaluation."""


class InnerBudgetExceeded(OracleError):
    """The inner solver ran out of iterations before the bounds were accurate."""

    def __init__(self, message: str, best: Optional[Any] = None):
        super().__init__(message)
        self.best = best


class ZeroDualError(OracleError):
    """The dual certificate vanished, so it cannot be normalized."""


class MinorantViolation(OracleError):
    """An emitted affine minorant lies above a certified upper bound."""


class InfeasibleError(OracleError):
    """The value function never reaches the target level."""


class DomainViolationError(OracleError):
    """The linear predictor left the domain of the loss."""
