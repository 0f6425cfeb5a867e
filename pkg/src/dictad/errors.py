"""Exception hierarchy shared across the toolkit."""


class DictadError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(DictadError):
    """Invalid configuration or parameter combination."""


class DataError(DictadError):
    """Unreadable, malformed or inconsistent input data."""


class NumericalError(DictadError):
    """Numerical failure (singular systems, non-convergence, corrupted state)."""


class CodingError(NumericalError):
    """Sparse coding failed (dimension mismatch, singular support sub-matrix)."""
