"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes, so each class corresponds to one kind of
failure a caller can act on.
"""


class TwoStageError(Exception):
    """Base class for all package errors."""


class DomainError(TwoStageError, ValueError):
    """Argument outside the mathematical domain of a function."""


class UsageError(TwoStageError, ValueError):
    """Invalid configuration or call (bad flag, zero replications, ...)."""


class DataError(TwoStageError, ValueError):
    """Input data cannot be analysed."""


class InsufficientDataError(DataError):
    """Too few observations for the requested statistic."""


class DegenerateDataError(DataError):
    """Data with no spread (all values equal, zero pooled variance)."""


class UnsupportedSizeError(DataError):
    """Sample size outside the range an algorithm supports."""


class CorpusLoadError(UsageError):
    """Manifest or corpus file could not be loaded."""
