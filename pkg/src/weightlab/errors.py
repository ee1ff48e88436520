"""Exception types raised across the package."""


class WeightLabError(Exception):
    """Base class for every error raised by weightlab."""


class InvalidInputError(WeightLabError, ValueError):
    pass


class SingularPointError(WeightLabError, ValueError):
    """A weight evaluated to +inf (negative exponent on a zero coordinate)."""


class NonIntegrableError(WeightLabError, ValueError):
    pass


class QuadratureError(WeightLabError, RuntimeError):
    """Quadrature budget exhausted before the requested tolerance.

    Carries the best estimate and its error bound.
    """

    def __init__(self, message, estimate=float("nan"), error=float("inf")):
        super().__init__(f"{message} (estimate={estimate!r}, error={error!r})")
        self.estimate = estimate
        self.error = error


class SupercriticalError(WeightLabError, ValueError):
    """p >= D: the critical exponent is undefined."""


class StiffFailureError(WeightLabError, RuntimeError):
    def __init__(self, message, profile=None):
        super().__init__(message)
        self.profile = profile


class InsufficientDataError(WeightLabError, ValueError):
    pass


class NotConvergedError(WeightLabError, RuntimeError):
    """Solver hit its sweep budget; ``result`` holds the last iterate."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class UnderResolvedError(WeightLabError, RuntimeError):
    pass


class InconsistentExponentsError(WeightLabError, ValueError):
    def __init__(self, message, lhs=None, rhs=None):
        super().__init__(message)
        self.lhs = lhs
        self.rhs = rhs


class BelowCriticalRangeError(WeightLabError, ValueError):
    pass


class HarnackPreconditionError(WeightLabError, ValueError):
    pass
