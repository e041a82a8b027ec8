class DriftBoostError(Exception):
    """Base class for package errors."""


class DataError(DriftBoostError, ValueError):
    """Input files or batches that do not conform to the expected layout."""


class ModelFileError(DataError):
    """Unreadable, truncated, or wrong-version model file."""


class BudgetExhausted(DriftBoostError):
    """Raised only where a caller asked for hard budget enforcement."""
