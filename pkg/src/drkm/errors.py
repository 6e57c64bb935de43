"""Exception types shared across the package.

All library errors derive from DrkmError so callers can catch one base
class.  The CLI maps subclasses onto process exit codes.
"""


class DrkmError(Exception):
    """Base class for all errors raised by this package."""


class InvalidMatrix(DrkmError):
    """A matrix argument violates a structural requirement (shape, symmetry)."""


class InvalidArgument(DrkmError):
    """A scalar or array argument is out of its documented range."""


class InfeasibleConstraint(DrkmError):
    """The requested latent sizes cannot satisfy the orthogonality constraint."""


class DivergenceError(DrkmError):
    """Training produced a non-finite objective or gradient.

    Attributes:
        round_index: outer round in which the divergence was detected,
            or None when raised outside the outer loop.
    """

    def __init__(self, message, round_index=None):
        super().__init__(message)
        self.round_index = round_index


class PreimageCollapse(DrkmError):
    """The denoising fixed-point quotient collapsed to a ~0 denominator."""


class ParseError(DrkmError):
    """A data file could not be parsed.

    Attributes:
        line_number: 1-based line of the offending record, or None.
    """

    def __init__(self, message, line_number=None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class DegenerateSplit(DrkmError):
    """Every attempted train/test split left some class unseen in training."""


class ConfigError(DrkmError):
    """An experiment configuration is malformed or inconsistent."""
