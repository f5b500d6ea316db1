"""Exception types raised across the package.

The CLI maps these onto exit codes: configuration problems exit with 2,
data problems with 3 and model/dimension problems with 4.
"""


class RankSimError(Exception):
    """Base class for every error raised by ranksim."""


class InvalidInputError(RankSimError, ValueError):
    """Input data violates an operation's preconditions."""


class DimensionMismatchError(InvalidInputError):
    """Feature counts of data and model do not agree."""


class ConfigError(RankSimError, ValueError):
    """A training or prediction parameter is out of range."""


class DegenerateFilterError(InvalidInputError):
    """A vector that must be L1-normalized sums to zero."""


class UndefinedPointError(InvalidInputError):
    """Both densities vanish at the evaluation point."""


class IntegrationError(RankSimError, ArithmeticError):
    """Numerical integration failed to reach a stable value."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class DataFormatError(RankSimError, ValueError):
    """A data file is malformed; the loader refuses to return partial data."""


class ModelFormatError(RankSimError, ValueError):
    """A model file failed magic, version, CRC or invariant checks."""
