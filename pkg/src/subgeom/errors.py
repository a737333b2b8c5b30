"""Typed errors raised across the package."""


class SubgeomError(Exception):
    pass


class DomainError(SubgeomError, ValueError):
    """Argument outside the domain of a function."""


class RangeError(SubgeomError, ValueError):
    """Target value outside the range reachable by an inversion."""


class DegeneracyError(SubgeomError, ValueError):
    """A function declared strictly monotone is flat where it matters."""


class AccuracyError(SubgeomError, ArithmeticError):
    """A quadrature or inversion did not reach its tolerance."""

    def __init__(self, msg, achieved=None):
        super().__init__(msg)
        self.achieved = achieved


class AssumptionError(SubgeomError, ValueError):
    """Model or function parameters violate a structural inequality."""


class ConfigError(SubgeomError, ValueError):
    pass


class PrecisionError(SubgeomError, ValueError):
    """Too few samples for a meaningful estimate."""


class EvaluationError(SubgeomError, ArithmeticError):
    """Non-finite values met while evaluating a test function."""


class OutOfRangeError(SubgeomError, ValueError):
    """Point inside the region where an asymptotic formula does not apply."""


class BlowUpError(SubgeomError, OverflowError):
    def __init__(self, msg, time=None, seed=None):
        super().__init__(msg)
        self.time = time
        self.seed = seed
