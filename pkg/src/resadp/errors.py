"""Exception hierarchy shared by every module.

Each class carries the process exit code the CLI maps it to.
"""


class ResadpError(Exception):
    exit_code = 3


class ValidationError(ResadpError, ValueError):
    exit_code = 2


class DimensionError(ValidationError):
    pass


class ConfigurationError(ValidationError):
    pass


class AssumptionViolation(ValidationError):
    """A plant or schedule fails one of the standing assumptions."""

    def __init__(self, message, assumption=None):
        super().__init__(message)
        self.assumption = assumption


class NumericalError(ResadpError, ArithmeticError):
    exit_code = 3


class StabilityError(NumericalError):
    pass


class ConvergenceError(NumericalError):
    pass


class DivergenceError(NumericalError):
    def __init__(self, message, instant=None):
        super().__init__(message)
        self.instant = instant


class IndefinitenessError(NumericalError):
    pass


class DegenerateDecayError(NumericalError):
    pass


class RankError(ResadpError, ArithmeticError):
    exit_code = 4

    def __init__(self, message, rank=None, required=None):
        super().__init__(message)
        self.rank = rank
        self.required = required


class ExcitationError(RankError):
    """Data are not rich enough to identify the unknowns."""


class EmptyLogError(ExcitationError):
    pass
