"""Exception types raised by permfit."""
from typing import Optional


class PermfitError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatch(PermfitError, ValueError):
    """Array shapes that must agree do not."""


class NonFinite(PermfitError, ValueError):
    """An input array contains NaN or infinite entries."""


class TooSmall(PermfitError, ValueError):
    """Too few observations for the requested operation."""


class TooLarge(PermfitError, ValueError):
    """Exhaustive enumeration requested for a sample that is too big."""


class DegenerateResponse(PermfitError, ValueError):
    """Responses are all identical, so R² is undefined."""


class DegenerateInput(PermfitError, ValueError):
    """A rank statistic was asked for a constant vector."""


class DivergedTraining(PermfitError, ArithmeticError):
    """Gradient descent produced a non-finite loss."""


class TooFewSamples(PermfitError, ValueError):
    """A series is too short for the requested number of harmonics."""


class InvalidPoints(PermfitError, ValueError):
    """Accuracy points outside the serve point set."""


class UnknownScenario(PermfitError, KeyError):
    """No data-generating process is registered under this name."""


class InvalidParams(PermfitError, ValueError):
    """Parameters outside a scenario's signature or range."""


class MissingColumn(PermfitError, KeyError):
    """A required CSV column is absent."""


class ConfigError(PermfitError, ValueError):
    """Configuration file holds an invalid value."""


class ReportError(PermfitError, OSError):
    """A report could not be written or read."""


class ParseError(PermfitError, ValueError):
    """Malformed CSV content. `row` is the 1-based file line (header is line 1)."""

    def __init__(self, message: str, row: Optional[int] = None, column: Optional[str] = None):
        super().__init__(message)
        self.row = row
        self.column = column
