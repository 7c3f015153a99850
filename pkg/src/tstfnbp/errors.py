"""Exception hierarchy shared by all modules."""


class TstfnbpError(Exception):
    """Base class for every error raised by this package."""


class DomainError(TstfnbpError, ValueError):
    """An argument lies outside the domain of the requested operation."""


class PoleError(DomainError):
    """A gamma function argument hit a non-positive integer."""


class ConstraintError(DomainError):
    """A parameter-family constraint (e.g. lambda1 > mu**alpha) is violated."""


class NumericalError(TstfnbpError, ArithmeticError):
    """A numerical procedure did not deliver the requested accuracy."""


class TruncationError(NumericalError):
    """A series did not converge within the allowed number of terms."""


class DivergenceError(NumericalError):
    """A series is known to diverge for the given arguments."""


class CancellationError(NumericalError):
    """Alternating-series cancellation exceeds the precision budget."""


class QuadratureError(NumericalError):
    """Adaptive quadrature failed to reach its tolerance."""


class RejectionBudgetError(NumericalError):
    """A rejection sampler exhausted its proposal budget."""
