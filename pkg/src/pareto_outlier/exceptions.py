"""Exception hierarchy.

Each class carries the CLI exit status of its failure class.
"""


class ParetoOutlierError(Exception):
    exit_code = 1


class ConfigError(ParetoOutlierError, ValueError):
    exit_code = 2

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class UnknownKey(ConfigError):
    pass


class MissingRequired(ConfigError):
    pass


class ConfigTypeError(ConfigError):
    pass


class DataError(ParetoOutlierError, ValueError):
    exit_code = 3


class EmptySample(DataError):
    pass


class NonPositiveClaim(DataError):
    def __init__(self, index, value):
        super().__init__(f"claim at index {index} is not a positive finite number: {value!r}")
        self.index = index
        self.value = value


class LengthMismatch(DataError):
    pass


class InfeasibleData(DataError):
    pass


class ParseError(DataError):
    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class BudgetExceeded(DataError):
    pass


class NumericalError(ParetoOutlierError, ArithmeticError):
    exit_code = 4


class InvalidParameter(NumericalError, ValueError):
    pass


class EmptyTruncationMass(NumericalError):
    pass


class ConvergenceFailure(NumericalError):
    pass


class QuadratureFailure(NumericalError):
    pass


class TooFewDraws(NumericalError, ValueError):
    pass


class IoError(ParetoOutlierError, OSError):
    exit_code = 5
