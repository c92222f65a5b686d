"""Exception hierarchy shared by all modules."""


class SchattenLabError(Exception):
    """Base class for library errors."""


class DomainError(SchattenLabError, ValueError):
    """Argument outside the domain where the quantity is defined."""


class SingularityError(DomainError):
    """Input hits a singular point of the formula (e.g. rank deficiency)."""


class UnsupportedError(SchattenLabError, NotImplementedError):
    """Quantity exists in principle but is not available in closed form here."""


class ConvergenceError(SchattenLabError, RuntimeError):
    """Iterative method stopped without meeting its tolerance."""

    def __init__(self, message, residual=float("nan"), iterations=0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
