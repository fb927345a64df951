"""Exception hierarchy.

Every error carries an ``exit_code`` so the command-line front end can map
failures to distinct process exit statuses without a lookup table.
"""


class ExclusiveCoxError(ValueError):
    exit_code = 1


# data construction / validation
class EmptyData(ExclusiveCoxError):
    exit_code = 10


class RaggedCovariates(ExclusiveCoxError):
    exit_code = 11


class NonFiniteValue(ExclusiveCoxError):
    exit_code = 12


class AllCensored(ExclusiveCoxError):
    exit_code = 13


class DimensionMismatch(ExclusiveCoxError):
    exit_code = 14


class IndexOutOfRange(ExclusiveCoxError, IndexError):
    exit_code = 15


class LengthMismatch(ExclusiveCoxError):
    exit_code = 16


class InvalidGroups(ExclusiveCoxError):
    exit_code = 17


class InvalidConfig(ExclusiveCoxError):
    exit_code = 2


# fitting / selection
class NonFiniteObjective(ExclusiveCoxError, ArithmeticError):
    exit_code = 20


class TooFewEvents(ExclusiveCoxError):
    exit_code = 21


class AllZeroStepOne(ExclusiveCoxError):
    exit_code = 22


# simulation
class UnknownScenario(ExclusiveCoxError):
    exit_code = 30


class CovarianceNotPD(ExclusiveCoxError):
    exit_code = 31


# metrics
class ZeroCensorWeight(ExclusiveCoxError, ZeroDivisionError):
    exit_code = 40


# io
class ParseError(ExclusiveCoxError):
    exit_code = 3

    def __init__(self, message, row=None, column=None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.row = row
        self.column = column


class SchemaError(ExclusiveCoxError):
    exit_code = 4
