"""
Exception hierarchy. Each class carries the exit code the command line reports for it:
0 success, 1 generic failure, 2 validation failure, 3 inconclusive limits, 4 usage error
"""


class BubblelineError(Exception):
    exit_code = 1


# Expression language

class ExpressionError(BubblelineError):

    def __init__(self, message, offset=None):
        if offset is not None:
            message = message + " (at byte " + str(offset) + ")"
        super().__init__(message)
        self.offset = offset


class ExpressionSyntaxError(ExpressionError):
    pass


class UnknownIdentifierError(ExpressionError):
    pass


class DomainError(ExpressionError):
    """Raised for log of a non-positive number, sqrt of a negative one, and similar."""

    def __init__(self, message, subexpression=None, offset=None):
        if subexpression is not None:
            message = message + " in " + subexpression
        super().__init__(message, offset)
        self.subexpression = subexpression


class ExpressionOverflowError(DomainError):
    pass


class NonSmoothError(ExpressionError):
    """One-sided derivatives disagree at a kink, so the density is not C1 there."""

    def __init__(self, message, left=None, right=None):
        super().__init__(message)
        self.left = left
        self.right = right


# Density model

class QuadratureError(BubblelineError):

    def __init__(self, message, estimate=None):
        if estimate is not None:
            message = message + " (achieved error estimate " + repr(estimate) + ")"
        super().__init__(message)
        self.estimate = estimate


class UnboundedInverseError(BubblelineError):
    pass


class InverseConvergenceError(BubblelineError):
    pass


class IndeterminateFormError(BubblelineError):
    pass


class ModelViolationError(BubblelineError):
    """The density broke a standing hypothesis somewhere a solver relies on it."""


class UndefinedQuantityError(BubblelineError):
    pass


class ValidationFailedError(BubblelineError):
    exit_code = 2

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class InconclusiveLimitError(BubblelineError):
    exit_code = 3


# Bubbles and oracle

class NoTieError(BubblelineError):
    pass


class TieBracketError(BubblelineError):
    pass


class OracleStagnationError(BubblelineError):

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


# Inputs

class UsageError(BubblelineError):
    exit_code = 4


class InvalidVolumesError(UsageError):
    pass


class ConfigError(UsageError):
    pass


class DensityFileError(UsageError):
    pass
