"""Two-sample location tests with and without a preliminary normality check."""

from .errors import (
    DataError,
    DegenerateDataError,
    DomainError,
    InsufficientDataError,
    TwoStageError,
    UnsupportedSizeError,
    UsageError,
)
from .stattests import (
    TestOutcome,
    advise,
    combined_test,
    pooled_residuals,
    shapiro_wilk,
    t_test_two_sample,
    wilcoxon_rank_sum,
)

__version__ = "0.1.0"
