"""Exception hierarchy shared by all qbath modules."""


class QBathError(Exception):
    """Base class for every error raised by qbath."""


class DomainError(QBathError, ValueError):
    """An argument lies outside the domain of the operation."""


class ConvergenceError(QBathError, ArithmeticError):
    """Adaptive quadrature or an iterative refinement did not converge.

    ``estimate`` carries the last achieved error estimate.
    """

    def __init__(self, message, estimate=float("nan")):
        super().__init__(message)
        self.estimate = estimate


class InconsistencyError(QBathError):
    """A computed object contradicts a structural precondition."""


class UncertaintyViolation(QBathError, ArithmeticError):
    """Moments violate q2*p2 >= hbar**2/4 beyond numerical slack."""


class ModelInconsistencyError(QBathError):
    """Coupling matrix is not positive definite."""


class ResonanceSingularError(QBathError, ArithmeticError):
    """The scattering system is singular at this energy."""


class TruncationError(QBathError):
    """Channel sums did not converge within the allowed number of channels."""

    def __init__(self, message, tail=float("nan")):
        super().__init__(message)
        self.tail = tail


class OverflowGuardError(QBathError, OverflowError):
    """Requested oscillator index is beyond the supported range."""
