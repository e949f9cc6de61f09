import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twostage.errors import DomainError
from twostage.special import (
    ln_gamma,
    reg_inc_beta,
    std_normal_cdf,
    std_normal_quantile,
    student_t_cdf,
)

mpmath.mp.dps = 40


def inc_beta_integer_oracle(a: int, b: int, x: Fraction) -> Fraction:
    """I_x(a, b) for integer a, b as a binomial tail sum, in exact arithmetic."""
    m = a + b - 1
    return sum(math.comb(m, j) * x ** j * (1 - x) ** (m - j) for j in range(a, m + 1))


def bisect_quantile(p: float) -> float:
    cdf = lambda z: 0.5 * math.erfc(-z / math.sqrt(2.0))  # noqa: E731
    lo, hi = -40.0, 40.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if cdf(mid) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ----------------------------------------------------------------- ln_gamma

@pytest.mark.parametrize(
    ("x", "expected"),
    [(1.0, 0.0), (2.0, 0.0), (0.5, 0.5 * math.log(math.pi)), (3.0, math.log(2.0)), (10.0, math.log(362880.0))],
)
def test_ln_gamma_known_values(x, expected):
    assert ln_gamma(x) == pytest.approx(expected, abs=1e-12)


def test_ln_gamma_half_matches_spec_example():
    assert ln_gamma(0.5) == pytest.approx(0.5723649429, abs=1e-10)


@pytest.mark.parametrize("x", [0.5, 0.75, 1.5, 2.5, 7.3, 33.3, 100.0, 171.5])
def test_ln_gamma_absolute_error_moderate_range(x):
    assert abs(ln_gamma(x) - float(mpmath.loggamma(x))) <= 1e-12


@pytest.mark.parametrize("x", [1e3, 1234.5, 1e5, 1e6])
def test_ln_gamma_large_arguments_within_few_ulp(x):
    # 1e-12 absolute is below one ulp of ln Gamma(x) here; a few ulp is the
    # best any double result can do.
    exact = float(mpmath.loggamma(x))
    assert abs(ln_gamma(x) - exact) <= max(1e-12, 8 * math.ulp(exact))


def test_ln_gamma_recurrence():
    xs = np.linspace(0.5, 100.0, 2001)
    assert np.max(np.abs(ln_gamma(xs + 1) - ln_gamma(xs) - np.log(xs))) <= 1e-10


def test_ln_gamma_below_half_uses_reflection():
    assert ln_gamma(0.1) == pytest.approx(float(mpmath.loggamma(0.1)), abs=1e-13)


@pytest.mark.parametrize("bad", [0.0, -1.0, math.inf, math.nan])
def test_ln_gamma_domain(bad):
    with pytest.raises(DomainError):
        ln_gamma(bad)


# -------------------------------------------------------------- reg_inc_beta

def test_reg_inc_beta_trivial():
    assert reg_inc_beta(2.0, 5.0, 0.0) == 0.0
    assert reg_inc_beta(2.0, 5.0, 1.0) == 1.0
    assert reg_inc_beta(1.0, 1.0, 0.3) == pytest.approx(0.3, rel=1e-12)


def test_reg_inc_beta_integer_polynomial_oracle():
    assert inc_beta_integer_oracle(2, 3, Fraction(1, 2)) == Fraction(11, 16)
    assert reg_inc_beta(2, 3, 0.5) == pytest.approx(0.6875, rel=1e-12)


@pytest.mark.parametrize("a,b", [(1, 1), (2, 3), (5, 2), (7, 9), (20, 3)])
@pytest.mark.parametrize("x", [Fraction(1, 10), Fraction(1, 3), Fraction(7, 10), Fraction(19, 20)])
def test_reg_inc_beta_matches_binomial_sum(a, b, x):
    exact = float(inc_beta_integer_oracle(a, b, x))
    assert reg_inc_beta(a, b, float(x)) == pytest.approx(exact, rel=1e-10)


def test_reg_inc_beta_matches_mpmath_random():
    rng = np.random.default_rng(11)
    a = rng.uniform(0.1, 60, 300)
    b = rng.uniform(0.1, 60, 300)
    x = rng.uniform(0, 1, 300)
    got = reg_inc_beta(a, b, x)
    for ai, bi, xi, gi in zip(a, b, x, got):
        exact = float(mpmath.betainc(ai, bi, 0, xi, regularized=True))
        if exact > 1e-280:
            assert abs(gi - exact) <= 1e-10 * exact


@settings(max_examples=200, deadline=None)
@given(st.floats(0.05, 80), st.floats(0.05, 80), st.integers(0, 2 ** 30))
def test_reg_inc_beta_symmetry(a, b, k):
    # dyadic x keeps 1 - x exact
    x = k / 2 ** 30
    assert reg_inc_beta(a, b, x) + reg_inc_beta(b, a, 1 - x) == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("args", [(0, 1, 0.5), (1, -1, 0.5), (1, 1, 1.5), (1, 1, -0.1)])
def test_reg_inc_beta_domain(args):
    with pytest.raises(DomainError):
        reg_inc_beta(*args)


# ------------------------------------------------------------------- normal

def test_std_normal_cdf_examples():
    assert std_normal_cdf(0.0) == 0.5
    assert std_normal_cdf(1.959964) == pytest.approx(0.975, abs=1e-8)
    assert std_normal_cdf(-1.959964) == pytest.approx(0.025, abs=1e-8)


@pytest.mark.parametrize("x", [-8, -5.5, -2, -0.3, 0.7, 1.5, 3, 6.2, 8])
def test_std_normal_cdf_accuracy(x):
    assert abs(std_normal_cdf(x) - float(mpmath.ncdf(x))) <= 1e-12


def test_std_normal_cdf_symmetry():
    xs = np.linspace(-8, 8, 1601)
    assert np.max(np.abs(std_normal_cdf(xs) + std_normal_cdf(-xs) - 1.0)) <= 1e-12


def test_std_normal_quantile_examples():
    assert std_normal_quantile(0.5) == 0.0
    assert std_normal_quantile(0.975) == pytest.approx(bisect_quantile(0.975), abs=1e-9)
    assert std_normal_quantile(0.975) == pytest.approx(1.959964, abs=1e-6)


@pytest.mark.parametrize("p", [1e-300, 1e-20, 1e-5, 0.02, 0.3, 0.6, 0.99])
def test_std_normal_quantile_against_bisection(p):
    assert std_normal_quantile(p) == pytest.approx(bisect_quantile(p), rel=1e-9, abs=1e-9)


@pytest.mark.parametrize("p", [1e-12, 1e-6, 1 - 1e-6, 1 - 1e-12])
def test_std_normal_quantile_residual(p):
    assert abs(std_normal_cdf(std_normal_quantile(p)) - p) <= 1e-9


def test_std_normal_quantile_round_trip():
    for k in range(1, 100):
        p = k / 100
        assert abs(std_normal_cdf(std_normal_quantile(p)) - p) <= 1e-9


@pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.1])
def test_std_normal_quantile_domain(p):
    with pytest.raises(DomainError):
        std_normal_quantile(p)


# ---------------------------------------------------------------- student t

def t_cdf_by_quadrature(t: float, df: float) -> float:
    dens = lambda u: mpmath.gamma((df + 1) / 2) / (mpmath.sqrt(df * mpmath.pi) * mpmath.gamma(df / 2)) \
        * (1 + u * u / df) ** (-(df + 1) / 2)  # noqa: E731
    return float(mpmath.quad(dens, [-mpmath.inf, 0, t]) if t > 0 else mpmath.quad(dens, [-mpmath.inf, t]))


def test_student_t_cdf_examples():
    assert student_t_cdf(0.0, 3.0) == 0.5
    assert student_t_cdf(1.0, 1.0) == pytest.approx(0.5 + math.atan(1.0) / math.pi, abs=1e-13)
    assert student_t_cdf(-1.0, 8.0) == pytest.approx(0.1733, abs=5e-5)


@pytest.mark.parametrize("t,df", [(-1.0, 8), (2.3, 4), (-0.4, 17.5), (5.0, 2), (-3.1, 98)])
def test_student_t_cdf_against_quadrature(t, df):
    assert student_t_cdf(t, df) == pytest.approx(t_cdf_by_quadrature(t, df), abs=1e-11)


def test_student_t_converges_to_normal():
    ts = np.linspace(-4, 4, 81)
    assert np.max(np.abs(student_t_cdf(ts, 1e6) - std_normal_cdf(ts))) <= 1e-3


def test_student_t_domain():
    with pytest.raises(DomainError):
        student_t_cdf(1.0, 0.0)


def test_vectorized_and_scalar_agree_bitwise():
    ts = np.array([-3.0, -1.0, 0.2, 2.5])
    vec = student_t_cdf(ts, 8.0)
    assert [student_t_cdf(t, 8.0) for t in ts] == list(vec)
