"""Exception types shared across the package."""

from __future__ import annotations


class QtoaError(Exception):
    """Base class for all package-specific errors."""


class DegenerateInputError(QtoaError, ValueError):
    """Inputs are formally valid but make the requested quantity undefined.

    Raised e.g. for a packet centred on the arrival point (q0 = 0) when a
    result is normalised by the classical arrival time.
    """


class InvalidPhaseError(QtoaError, ValueError):
    """A phase specification violates a precondition of the operation."""


class NumericalConvergenceError(QtoaError, RuntimeError):
    """A quadrature or solver did not reach the requested tolerance.

    Carries the best available estimate so callers can decide whether the
    partial result is still usable.
    """

    def __init__(self, message: str, *, best_estimate=None, error_estimate=None):
        super().__init__(message)
        self.best_estimate = best_estimate
        self.error_estimate = error_estimate


class SeriesDivergenceError(NumericalConvergenceError):
    """The correction series grows from its very first term.

    The expansion parameter is too small for the asymptotic route; the exact
    double-quadrature evaluation should be used instead.
    """


class GridTooNarrowError(QtoaError, ValueError):
    """A sampling grid does not bracket the feature being measured."""


class PhaseSolveInfeasible(QtoaError, RuntimeError):
    """No real phase coefficients satisfy the requested conditions.

    ``best_residuals`` holds the residual vector of the best candidate seen.
    """

    def __init__(self, message: str, *, best_residuals=None, best_coefficients=None):
        super().__init__(message)
        self.best_residuals = best_residuals
        self.best_coefficients = best_coefficients
