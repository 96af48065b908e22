"""Exception types shared across the package."""


class OxyError(Exception):
    """Base class for oxyforest errors."""


class UsageError(OxyError):
    """Bad arguments or a violated call contract (CLI exit code 1)."""


class DataError(OxyError):
    """Unreadable or malformed input data (CLI exit code 2)."""


class NumericError(OxyError):
    """Numerical failure: non-convergence or a singular system."""


class UndefinedMetricError(OxyError):
    """Raised when a ranking metric is undefined (single-class labels)."""
