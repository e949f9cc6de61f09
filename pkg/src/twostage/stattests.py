"""Two-sample tests, the Shapiro-Wilk normality test and the test advisor.

Each test has a row-wise core (``*_rows``) that works on 2-D arrays, one
replicate per row, and a scalar wrapper that validates a single pair of
samples and returns a :class:`TestOutcome`.  The wrappers run the cores on a
one-row array, so a scalar call and the corresponding row of a batch call go
through identical arithmetic.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.stats import rankdata

from .errors import DegenerateDataError, InsufficientDataError, UnsupportedSizeError, UsageError
from .special import std_normal_cdf, std_normal_quantile, student_t_cdf

EXACT_LIMIT = 50
SW_MIN_N = 3
SW_MAX_N = 5000


class Method(str, enum.Enum):
    TTEST = "TTest"
    WILCOXON = "Wilcoxon"
    SHAPIRO_WILK = "ShapiroWilk"
    COMBINED = "Combined"


@dataclass(frozen=True)
class TestOutcome:
    method: Method
    statistic: float
    p_value: float
    n1: int
    n2: int = 0
    exact: bool = False
    branch_taken: Optional[Method] = None
    df: Optional[float] = None
    # normality gate result; only set on Combined outcomes
    gate: Optional["TestOutcome"] = field(default=None, compare=False)

    __test__ = False  # not a pytest class

    def to_dict(self) -> dict:
        d = asdict(self)
        d["method"] = self.method.value
        d["branch_taken"] = self.branch_taken.value if self.branch_taken else None
        d["gate"] = self.gate.to_dict() if self.gate else None
        return d


def as_sample(values, name: str = "sample") -> np.ndarray:
    x = np.asarray(values, dtype=float).ravel()
    if x.size == 0:
        raise InsufficientDataError(f"{name} is empty")
    if not np.all(np.isfinite(x)):
        raise UsageError(f"{name} contains non-finite values")
    return x


# ---------------------------------------------------------------- descriptives

def mean_sd(x) -> tuple[float, float]:
    """Arithmetic mean and standard deviation with denominator n - 1."""
    x = as_sample(x)
    if x.size < 2:
        raise InsufficientDataError("standard deviation needs at least 2 observations")
    return float(np.mean(x)), float(np.std(x, ddof=1))


def _central_moment(x: np.ndarray, k: int) -> float:
    d = x - x.mean()
    return float(np.mean(d ** k))


def skewness(x) -> float:
    """Fisher-Pearson coefficient g1 = m3 / m2**1.5 (population moments)."""
    x = as_sample(x)
    if x.size < 3:
        raise InsufficientDataError("skewness needs at least 3 observations")
    m2 = _central_moment(x, 2)
    if m2 == 0:
        raise DegenerateDataError("skewness of a constant sample is undefined")
    return _central_moment(x, 3) / m2 ** 1.5


def excess_kurtosis(x) -> float:
    """g2 = m4 / m2**2 - 3 (population moments)."""
    x = as_sample(x)
    if x.size < 4:
        raise InsufficientDataError("kurtosis needs at least 4 observations")
    m2 = _central_moment(x, 2)
    if m2 == 0:
        raise DegenerateDataError("kurtosis of a constant sample is undefined")
    return _central_moment(x, 4) / m2 ** 2 - 3.0


def outlier_count(x, k: float = 3.0) -> int:
    """Observations further than ``k`` IQRs outside the quartiles."""
    x = as_sample(x)
    q1, q3 = np.percentile(x, [25, 75])
    iqr = q3 - q1
    return int(np.sum((x < q1 - k * iqr) | (x > q3 + k * iqr)))


def pooled_residuals(x, y) -> np.ndarray:
    x = as_sample(x, "x")
    y = as_sample(y, "y")
    return np.concatenate([x - x.mean(), y - y.mean()])


# ---------------------------------------------------------------------- t-test

def ttest_rows(x: np.ndarray, y: np.ndarray):
    """Pooled-variance t statistic, df and two-sided p for each row."""
    n1, n2 = x.shape[1], y.shape[1]
    mx = x.mean(axis=1)
    my = y.mean(axis=1)
    ss = ((x - mx[:, None]) ** 2).sum(axis=1) + ((y - my[:, None]) ** 2).sum(axis=1)
    df = n1 + n2 - 2
    var = ss / df
    if np.any(var <= 0):
        raise DegenerateDataError("t-test: pooled variance is zero")
    t = (mx - my) / np.sqrt(var * (1.0 / n1 + 1.0 / n2))
    p = np.minimum(1.0, 2.0 * student_t_cdf(-np.abs(t), df))
    return t, float(df), p


def t_test_two_sample(x, y) -> TestOutcome:
    """Student's t-test assuming equal variances."""
    x = as_sample(x, "x")
    y = as_sample(y, "y")
    if x.size < 2 or y.size < 2:
        raise InsufficientDataError("t-test needs at least 2 observations per group")
    t, df, p = ttest_rows(x[None, :], y[None, :])
    return TestOutcome(Method.TTEST, float(t[0]), float(p[0]), x.size, y.size, False, None, df)


# -------------------------------------------------------------------- Wilcoxon

@lru_cache(maxsize=None)
def _u_counts(m: int, n: int) -> tuple[int, ...]:
    """Number of group assignments giving each U = 0 .. m*n.

    Coefficients of the Gaussian binomial [m+n choose m]_q, built as
    prod_{i=1..m} (1 - q^(n+i)) / (1 - q^i) with exact integers.
    """
    size = m * n + 1
    poly = [0] * size
    poly[0] = 1
    for i in range(1, m + 1):
        shift = n + i
        for k in range(size - 1, shift - 1, -1):
            poly[k] -= poly[k - shift]
        for k in range(i, size):
            poly[k] += poly[k - i]
    return tuple(poly)


@lru_cache(maxsize=None)
def exact_p_table(m: int, n: int) -> np.ndarray:
    """Two-sided exact p-value for every attainable U with group sizes m, n.

    ``p[u] = min(1, 2 * min(P(U <= u), P(U >= u)))``.
    """
    counts = _u_counts(m, n)
    total = math.comb(m + n, m)
    cum = []
    run = 0
    for c in counts:
        run += c
        cum.append(run)
    out = np.empty(len(counts))
    for u in range(len(counts)):
        le = cum[u]
        ge = total - (cum[u - 1] if u else 0)
        out[u] = min(1.0, 2 * min(le, ge) / total)
    out.setflags(write=False)
    return out


def _tie_term(row: np.ndarray) -> float:
    _, counts = np.unique(row, return_counts=True)
    return float(np.sum(counts.astype(float) ** 3 - counts))


def wilcoxon_rows(x: np.ndarray, y: np.ndarray, exact_limit: int = EXACT_LIMIT):
    """Mann-Whitney U of the first sample, two-sided p and exactness per row."""
    n1, n2 = x.shape[1], y.shape[1]
    z = np.concatenate([x, y], axis=1)
    ranks = rankdata(z, axis=1)
    u = ranks[:, :n1].sum(axis=1) - n1 * (n1 + 1) / 2.0
    zs = np.sort(z, axis=1)
    tied = np.any(zs[:, 1:] == zs[:, :-1], axis=1)
    exact = ~tied & (n1 <= exact_limit) & (n2 <= exact_limit)
    p = np.empty(u.shape)
    if exact.any():
        p[exact] = exact_p_table(n1, n2)[np.rint(u[exact]).astype(np.int64)]
    approx = ~exact
    if approx.any():
        big_n = n1 + n2
        ties = np.zeros(u.shape)
        for i in np.flatnonzero(approx & tied):
            ties[i] = _tie_term(zs[i])
        var = n1 * n2 / 12.0 * ((big_n + 1) - ties[approx] / (big_n * (big_n - 1)))
        if np.any(var <= 0):
            raise DegenerateDataError("Wilcoxon test: all observations are tied")
        dev = np.maximum(np.abs(u[approx] - n1 * n2 / 2.0) - 0.5, 0.0)
        p[approx] = np.minimum(1.0, 2.0 * std_normal_cdf(-dev / np.sqrt(var)))
    return u, p, exact


def wilcoxon_rank_sum(x, y, exact_limit: int = EXACT_LIMIT) -> TestOutcome:
    """Wilcoxon rank-sum (Mann-Whitney) test.

    The exact null distribution is used when both groups have at most
    ``exact_limit`` observations and there are no ties; otherwise the normal
    approximation with tie-corrected variance and continuity correction.
    """
    x = as_sample(x, "x")
    y = as_sample(y, "y")
    if x.size + y.size < 3:
        raise InsufficientDataError("Wilcoxon test needs at least 3 observations in total")
    if np.all(np.concatenate([x, y]) == x[0]):
        raise DegenerateDataError("Wilcoxon test: all observations are tied")
    u, p, exact = wilcoxon_rows(x[None, :], y[None, :], exact_limit)
    return TestOutcome(Method.WILCOXON, float(u[0]), float(p[0]), x.size, y.size, bool(exact[0]))


# --------------------------------------------------------------- Shapiro-Wilk

# Polynomial coefficients of Royston's algorithm, constant term first.
_C1 = (0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056)
_C2 = (0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633)
_C3 = (0.5440, -0.39978, 0.025054, -6.714e-4)
_C4 = (1.3822, -0.77857, 0.062767, -0.0020322)
_C5 = (-1.5861, -0.31082, -0.083751, 0.0038915)
_C6 = (-0.4803, -0.082676, 0.0030302)
_G = (-2.273, 0.459)
_SW_TINY_P = 1e-19


def _polyval(coefs, x):
    acc = 0.0
    for c in reversed(coefs):
        acc = acc * x + c
    return acc


@lru_cache(maxsize=None)
def sw_coefficients(n: int) -> np.ndarray:
    """Antisymmetric weights applied to the sorted sample to form W."""
    if n < SW_MIN_N or n > SW_MAX_N:
        raise UnsupportedSizeError(f"Shapiro-Wilk supports 3 <= n <= 5000, got n = {n}")
    half = n // 2
    if n == 3:
        a = np.array([math.sqrt(0.5)])
    else:
        m = np.array([std_normal_quantile((i - 0.375) / (n + 0.25)) for i in range(1, half + 1)])
        summ2 = 2.0 * float(np.sum(m * m))
        ssumm2 = math.sqrt(summ2)
        rsn = 1.0 / math.sqrt(n)
        a1 = _polyval(_C1, rsn) - m[0] / ssumm2
        a = -m.copy()
        if n > 5:
            a2 = -m[1] / ssumm2 + _polyval(_C2, rsn)
            fac = math.sqrt((summ2 - 2 * m[0] ** 2 - 2 * m[1] ** 2) / (1 - 2 * a1 ** 2 - 2 * a2 ** 2))
            a[2:] = a[2:] / fac
            a[1] = a2
        else:
            fac = math.sqrt((summ2 - 2 * m[0] ** 2) / (1 - 2 * a1 ** 2))
            a[1:] = a[1:] / fac
        a[0] = a1
    full = np.zeros(n)
    full[:half] = -a
    full[n - half:] = a[::-1]
    full.setflags(write=False)
    return full


def _sw_pvalue(w: np.ndarray, n: int) -> np.ndarray:
    if n == 3:
        p = (6.0 / math.pi) * (np.arcsin(np.sqrt(w)) - math.asin(math.sqrt(0.75)))
        return np.clip(p, 0.0, 1.0)
    with np.errstate(divide="ignore"):
        y = np.log1p(-w)
    if n <= 11:
        gamma = _polyval(_G, n)
        too_small = y >= gamma
        with np.errstate(divide="ignore", invalid="ignore"):
            y = -np.log(np.where(too_small, np.nan, gamma - y))
        mu = _polyval(_C3, n)
        sigma = math.exp(_polyval(_C4, n))
    else:
        ln_n = math.log(n)
        too_small = np.zeros(w.shape, dtype=bool)
        mu = _polyval(_C5, ln_n)
        sigma = math.exp(_polyval(_C6, ln_n))
    p = np.asarray(std_normal_cdf(-(y - mu) / sigma), dtype=float)
    p = np.where(too_small, _SW_TINY_P, p)
    return np.clip(p, 0.0, 1.0)


def shapiro_rows(z: np.ndarray):
    """W and p-value for each row of ``z``."""
    n = z.shape[1]
    a = sw_coefficients(n)
    zs = np.sort(z, axis=1)
    centered = zs - zs.mean(axis=1, keepdims=True)
    ss = np.sum(centered * centered, axis=1)
    rng = zs[:, -1] - zs[:, 0]
    if np.any(rng <= 0) or np.any(ss <= 0):
        raise DegenerateDataError("Shapiro-Wilk: all observations are equal")
    w = np.minimum(1.0, (centered @ a) ** 2 / ss)
    return w, _sw_pvalue(w, n)


def shapiro_wilk(x) -> TestOutcome:
    """Shapiro-Wilk W test of normality (Royston's approximation)."""
    x = as_sample(x)
    if x.size < SW_MIN_N or x.size > SW_MAX_N:
        raise UnsupportedSizeError(f"Shapiro-Wilk supports 3 <= n <= 5000, got n = {x.size}")
    w, p = shapiro_rows(x[None, :])
    return TestOutcome(Method.SHAPIRO_WILK, float(w[0]), float(p[0]), x.size, 0, x.size == 3)


# ------------------------------------------------------------------ C-test

def combined_test(x, y, normality_alpha: float = 0.05) -> TestOutcome:
    """Shapiro-Wilk on pooled residuals, then Wilcoxon if normality is
    rejected (p < ``normality_alpha``) and the t-test otherwise."""
    gate = shapiro_wilk(pooled_residuals(x, y))
    if gate.p_value < normality_alpha:
        branch = wilcoxon_rank_sum(x, y)
    else:
        branch = t_test_two_sample(x, y)
    return TestOutcome(
        Method.COMBINED, branch.statistic, branch.p_value, branch.n1, branch.n2,
        branch.exact, branch.method, branch.df, gate,
    )


# ------------------------------------------------------------------- advisor

class Recommendation(str, enum.Enum):
    PARAMETRIC = "Parametric"
    NONPARAMETRIC = "Nonparametric"
    TOO_FEW = "TooFewObservations"


class AdviceMode(str, enum.Enum):
    GUIDELINES = "guidelines"
    FOOTNOTE8 = "footnote8"


@dataclass(frozen=True)
class AdviceThresholds:
    """Numeric stand-ins for "sufficiently symmetric", "short tails" and
    "no outliers".  These are choices of this package, not published values."""

    symmetric: float = 0.5
    tail: float = 1.0
    outlier_k: float = 3.0
    small_n: int = 10
    too_few_n: int = 5


@dataclass(frozen=True)
class AdviceReport:
    n_min: int
    skewness_per_group: tuple[Optional[float], ...]
    outlier_count: int
    recommendation: Recommendation
    rule_fired: str
    mode: AdviceMode
    kurtosis_per_group: tuple[Optional[float], ...] = ()
    pooled_skewness: Optional[float] = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["recommendation"] = self.recommendation.value
        d["mode"] = self.mode.value
        return d


def _maybe(fn, x):
    try:
        return fn(x)
    except InsufficientDataError:
        return None


def advise(x, y, mode: AdviceMode | str = AdviceMode.GUIDELINES,
           thresholds: AdviceThresholds = AdviceThresholds()) -> AdviceReport:
    """Recommend a parametric or nonparametric two-sample test.

    ``guidelines`` prefers the nonparametric test unless n is very small or
    every group looks symmetric, short-tailed and outlier-free.
    ``footnote8`` applies the skewness cut-off 4.8/sqrt(n) (or n <= 12) to
    the pooled residuals; that rule is an illustrative heuristic only.
    """
    mode = AdviceMode(mode)
    x = as_sample(x, "x")
    y = as_sample(y, "y")
    for name, s in (("x", x), ("y", y)):
        if s.size < 2:
            raise InsufficientDataError(f"advisor needs at least 2 observations in {name}")
        if np.all(s == s[0]):
            raise DegenerateDataError(f"advisor: all observations in {name} are equal")
    n_min = min(x.size, y.size)
    skews = (_maybe(skewness, x), _maybe(skewness, y))
    kurts = (_maybe(excess_kurtosis, x), _maybe(excess_kurtosis, y))
    outliers = outlier_count(x, thresholds.outlier_k) + outlier_count(y, thresholds.outlier_k)

    def report(rec, rule, pooled=None):
        return AdviceReport(n_min, skews, outliers, rec, rule, mode, kurts, pooled)

    if mode is AdviceMode.FOOTNOTE8:
        n = x.size + y.size
        g1 = skewness(pooled_residuals(x, y))
        limit = 4.8 / math.sqrt(n)
        if n <= 12:
            return report(Recommendation.PARAMETRIC, "n <= 12", g1)
        if abs(g1) < limit:
            return report(Recommendation.PARAMETRIC, f"|skewness| < 4.8/sqrt(n) = {limit:.4g}", g1)
        return report(Recommendation.NONPARAMETRIC, f"|skewness| >= 4.8/sqrt(n) = {limit:.4g}", g1)

    if n_min < thresholds.too_few_n:
        return report(Recommendation.TOO_FEW, f"fewer than {thresholds.too_few_n} observations per group")
    if n_min < thresholds.small_n:
        return report(Recommendation.PARAMETRIC, "n extremely small")
    if any(abs(s) > thresholds.symmetric for s in skews):
        return report(Recommendation.NONPARAMETRIC, "data not sufficiently symmetric")
    if any(k > thresholds.tail for k in kurts):
        return report(Recommendation.NONPARAMETRIC, "tails not short")
    if outliers:
        return report(Recommendation.NONPARAMETRIC, "outliers present")
    return report(Recommendation.PARAMETRIC, "symmetric, short tails, no outliers")


def run_all(x, y, normality_alpha: float = 0.05) -> dict[str, TestOutcome]:
    """Every test on one pair of samples; ``shapiro`` is the C-test gate."""
    return {
        "t": t_test_two_sample(x, y),
        "wilcoxon": wilcoxon_rank_sum(x, y),
        "combined": combined_test(x, y, normality_alpha),
        "shapiro": shapiro_wilk(pooled_residuals(x, y)),
    }

