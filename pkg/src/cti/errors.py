"""Exception types shared across the package.

Plain ``ValueError`` is used for invalid arguments; the subclasses below
distinguish failures callers may want to handle separately (bad data vs.
bad file layout vs. numerical breakdown).
"""


class DataError(ValueError):
    """Input values are unusable (NaNs, zero variance, empty data)."""


class FormatError(ValueError):
    """A file does not match its documented layout."""


class FitError(RuntimeError):
    """Model fitting cannot proceed with the given data/configuration."""


class NumericError(RuntimeError):
    """A numerical procedure failed to converge or lost resolution."""
