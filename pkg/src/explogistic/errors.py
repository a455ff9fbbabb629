"""Exception types raised across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the function."""


class QuadratureError(ArithmeticError):
    """Adaptive quadrature failed to reach the requested tolerance.

    Attributes
    ----------
    estimate, error : float
        Best integral estimate and its error bound at the point of failure.
        Informational only; callers must not treat them as a result.
    """

    def __init__(self, message, estimate=float("nan"), error=float("inf")):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class SamplingError(RuntimeError):
    """Rejection sampler exhausted its attempt budget."""


class ConvergenceError(RuntimeError):
    """An optimizer stopped before meeting its convergence criterion."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class DataError(ValueError):
    """Malformed or invalid input data."""
