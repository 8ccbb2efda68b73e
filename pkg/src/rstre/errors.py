"""Exception types shared across the package.

Each class carries the CLI exit code it maps to.
"""


class RstreError(Exception):
    exit_code = 1


class InvalidParameter(RstreError, ValueError):
    exit_code = 2


class BudgetExceeded(RstreError):
    """A sampler ran out of its step budget.

    `diagnostics` holds whatever partial counters the sampler had.
    """

    exit_code = 3

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class SizeCapError(RstreError):
    exit_code = 3


class NumericRangeError(RstreError, ArithmeticError):
    exit_code = 3


class InternalInvariantViolation(RstreError, AssertionError):
    exit_code = 1
