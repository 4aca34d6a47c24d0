"""Exception hierarchy.

Numerical failures and input-validation failures are kept apart so that the
command line front end can map them onto distinct exit codes.
"""


class DQLabError(Exception):
    """Base class for all package errors."""


class ValidationError(DQLabError, ValueError):
    """Input violates a documented precondition."""

    def __init__(self, message, path=None):
        self.path = path
        if path:
            message = f"{path}: {message}"
        super().__init__(message)


class GridMismatchError(ValidationError):
    pass


class NumericalError(DQLabError, ArithmeticError):
    """A computation could not be completed to the promised accuracy."""


class IllConditionedError(NumericalError):
    def __init__(self, rcond, threshold):
        self.rcond = rcond
        self.threshold = threshold
        super().__init__(
            f"kernel matrix is singular or ill-conditioned: reciprocal condition "
            f"estimate {rcond:.3e} < {threshold:.1e}"
        )


class NotToeplitzError(NumericalError):
    def __init__(self, deviation, tolerance):
        self.deviation = deviation
        self.tolerance = tolerance
        super().__init__(
            f"kernel is not Toeplitz: diagonal deviation {deviation:.3e} "
            f"exceeds {tolerance:.3e}"
        )


class NegativeVarianceError(NumericalError):
    pass


class SNRDivergence(NumericalError):
    """Total filtered noise variance is zero; the SNR is unbounded."""


class CrossCheckError(NumericalError):
    """Two independent evaluation routes disagree (a construction bug)."""


class InfeasibleBudgetError(NumericalError):
    pass


class BoundaryWarning(UserWarning):
    """A filter or signal is not negligible near the edges of the window."""


class SlowEnvelopeWarning(UserWarning):
    """Quadrature envelopes vary too fast relative to the carrier."""
