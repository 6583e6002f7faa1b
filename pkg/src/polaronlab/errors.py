"""Exception types shared across the package.

The CLI maps these onto exit codes: ValidationError -> 1,
NumericError -> 2, InequalityViolation -> 3.
"""


class PolaronError(Exception):
    """Base class for package errors."""


class ValidationError(PolaronError):
    """Bad input: config, domain, or precondition failure."""


class NumericError(PolaronError):
    """A numerical routine failed to converge or became unstable."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class TuningError(NumericError):
    """Sampler diagnostics indicate the chain cannot move."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class InequalityViolation(PolaronError):
    """A checked inequality failed beyond its statistical allowance."""
