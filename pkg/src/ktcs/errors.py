"""Exception hierarchy.

Two families: :class:`ValidationError` for bad inputs (the CLI maps these to
exit code 2) and :class:`ConvergenceError` for numerical failures (exit code 3).
"""


class KtcsError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(KtcsError, ValueError):
    """Input parameters violate a precondition."""


class ConvergenceError(KtcsError, ArithmeticError):
    """A numerical procedure did not reach its tolerance."""


class InvalidParameter(ValidationError):
    pass


class NonNormalizable(ValidationError):
    """The normalization series vanishes (z = 0 with j > 0)."""


class TruncationTooSmall(ValidationError):
    pass


class IndexOutOfRange(ValidationError):
    pass


class ConstraintViolated(ValidationError):
    pass


class DomainError(ValidationError):
    pass


class DegenerateMean(ConvergenceError):
    """A mean occupation is too small to divide by."""


class NoSignChange(ConvergenceError):
    pass


class QuadratureNotConverged(ConvergenceError):
    pass


class MomentMismatch(ConvergenceError):
    pass


class StepTooLarge(ConvergenceError):
    pass
