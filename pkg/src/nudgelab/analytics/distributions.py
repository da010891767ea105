"""Tail probabilities for the Student-t and F distributions.

Both tails reduce to the regularized incomplete beta function I_x(a, b),
evaluated here with the modified-Lentz continued fraction. Relative
accuracy is around 1e-14 over the parameter ranges this package uses
(integer df from small-sample group comparisons), comfortably inside the
1e-10 budget the test suite checks against a quadrature oracle.
"""

from __future__ import annotations

import math

from ..errors import ValidationFailure

_MAX_ITER = 400
_FPMIN = 1e-300
_EPS = 1e-16


def log_beta(a: float, b: float) -> float:
    return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)


def _beta_continued_fraction(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITER + 1):
        m2 = 2 * m
        # even step
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        # odd step
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError(f"incomplete beta did not converge for a={a}, b={b}, x={x}")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) for a, b > 0 and x in [0, 1]."""
    if a <= 0 or b <= 0:
        raise ValidationFailure("incomplete beta requires a > 0 and b > 0")
    if not 0.0 <= x <= 1.0:
        raise ValidationFailure("incomplete beta requires x in [0, 1]")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    front = math.exp(
        a * math.log(x) + b * math.log1p(-x) - log_beta(a, b)
    )
    # The continued fraction converges fast only below the distribution
    # mean; use the symmetry I_x(a,b) = 1 - I_{1-x}(b,a) elsewhere.
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_continued_fraction(a, b, x) / a
    return 1.0 - front * _beta_continued_fraction(b, a, 1.0 - x) / b


def student_t_sf(t: float, df: int) -> float:
    """One-sided upper tail P(T > t) for T ~ Student-t with df degrees."""
    if df < 1:
        raise ValidationFailure("Student-t requires df >= 1")
    if math.isinf(t):
        return 0.0 if t > 0 else 1.0
    x = df / (df + t * t)
    tail_pair = regularized_incomplete_beta(df / 2.0, 0.5, x)  # P(|T| > |t|)
    if t >= 0:
        return 0.5 * tail_pair
    return 1.0 - 0.5 * tail_pair


def student_t_cdf(t: float, df: int) -> float:
    return 1.0 - student_t_sf(t, df)


def student_t_two_tailed_p(t: float, df: int) -> float:
    """Two-tailed p-value: P(|T| >= |t|)."""
    if df < 1:
        raise ValidationFailure("Student-t requires df >= 1")
    if math.isinf(t):
        return 0.0
    x = df / (df + t * t)
    return regularized_incomplete_beta(df / 2.0, 0.5, x)


def student_t_ppf(p: float, df: int) -> float:
    """Quantile t with CDF(t) = p, by bisection on the analytic CDF.

    Bisection over an exponentially widened bracket; 200 halvings put the
    result far below 1e-12 absolute error, and each CDF call is cheap.
    """
    if not 0.0 < p < 1.0:
        raise ValidationFailure("quantile requires 0 < p < 1")
    if p == 0.5:
        return 0.0
    lo, hi = -1.0, 1.0
    while student_t_cdf(lo, df) > p:
        lo *= 2.0
    while student_t_cdf(hi, df) < p:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if student_t_cdf(mid, df) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def f_sf(f: float, df1: int, df2: int) -> float:
    """Upper tail P(F > f) for the F distribution."""
    if df1 < 1 or df2 < 1:
        raise ValidationFailure("F distribution requires df1, df2 >= 1")
    if f <= 0.0:
        return 1.0
    if math.isinf(f):
        return 0.0
    x = df2 / (df2 + df1 * f)
    return regularized_incomplete_beta(df2 / 2.0, df1 / 2.0, x)
