"""Independent brute-force oracles, deliberately sharing no code with the
package: textbook two-pass formulas plus mpmath quadrature of the plain
densities for tail probabilities."""

from __future__ import annotations

import math
from datetime import datetime, timedelta
from functools import lru_cache

import mpmath

mpmath.mp.dps = 30


# -- distribution tails by quadrature of the density -------------------------


def _t_pdf(x, df):
    df = mpmath.mpf(df)
    coeff = mpmath.gamma((df + 1) / 2) / (mpmath.sqrt(df * mpmath.pi) * mpmath.gamma(df / 2))
    return coeff * (1 + x * x / df) ** (-(df + 1) / 2)


def t_two_tailed_p(t: float, df: int) -> float:
    tail = mpmath.quad(lambda x: _t_pdf(x, df), [abs(t), mpmath.inf])
    return float(2 * tail)


@lru_cache(maxsize=None)
def t_critical(q: float, df: int) -> float:
    """Quantile via bisection on the quadrature CDF."""
    target = mpmath.mpf(q)

    def cdf(t):
        return 1 - mpmath.quad(lambda x: _t_pdf(x, df), [t, mpmath.inf])

    lo, hi = mpmath.mpf(0), mpmath.mpf(1)
    while cdf(hi) < target:
        hi *= 2
    for _ in range(80):
        mid = (lo + hi) / 2
        if cdf(mid) < target:
            lo = mid
        else:
            hi = mid
    return float((lo + hi) / 2)


def _f_pdf(x, d1, d2):
    d1 = mpmath.mpf(d1)
    d2 = mpmath.mpf(d2)
    num = (d1 / d2) ** (d1 / 2) * x ** (d1 / 2 - 1)
    den = (1 + d1 * x / d2) ** ((d1 + d2) / 2) * mpmath.beta(d1 / 2, d2 / 2)
    return num / den


def f_upper_tail(f: float, d1: int, d2: int) -> float:
    return float(mpmath.quad(lambda x: _f_pdf(x, d1, d2), [f, mpmath.inf]))


# -- two-pass summaries and the pooled t-test from raw values ----------------


def two_pass_summary(values):
    n = len(values)
    mean = sum(values) / n
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    return n, mean, math.sqrt(var)


def pooled_t_from_raw(g1, g2, alpha=0.05):
    n1, m1, s1 = two_pass_summary(g1)
    n2, m2, s2 = two_pass_summary(g2)
    df = n1 + n2 - 2
    sp = math.sqrt(((n1 - 1) * s1 * s1 + (n2 - 1) * s2 * s2) / df)
    se_dm = sp * math.sqrt(1 / n1 + 1 / n2)
    diff = m1 - m2
    t = diff / se_dm
    p = t_two_tailed_p(t, df)
    crit = t_critical(1 - alpha / 2, df)
    return {
        "t": t,
        "df": df,
        "p": p,
        "mean_diff": diff,
        "se_dm": se_dm,
        "ci": (diff - crit * se_dm, diff + crit * se_dm),
        "d": diff / sp,
    }


def levene_from_raw(groups):
    """One-way ANOVA on absolute deviations from group means, from scratch."""
    z = []
    for g in groups:
        mean = sum(g) / len(g)
        z.append([abs(v - mean) for v in g])
    all_z = [v for grp in z for v in grp]
    grand = sum(all_z) / len(all_z)
    k = len(groups)
    n = len(all_z)
    ssb = sum(len(grp) * (sum(grp) / len(grp) - grand) ** 2 for grp in z)
    ssw = sum(
        sum((v - sum(grp) / len(grp)) ** 2 for v in grp)
        for grp in z
    )
    w = (ssb / (k - 1)) / (ssw / (n - k))
    return w, f_upper_tail(w, k - 1, n - k)


def alpha_from_covariance(matrix):
    """Cronbach's alpha from the sample covariance matrix:
    k/(k-1) * (1 - trace(S) / sum(S))."""
    n = len(matrix)
    k = len(matrix[0])
    means = [sum(row[j] for row in matrix) / n for j in range(k)]
    cov = [
        [
            sum((row[i] - means[i]) * (row[j] - means[j]) for row in matrix) / (n - 1)
            for j in range(k)
        ]
        for i in range(k)
    ]
    trace = sum(cov[i][i] for i in range(k))
    total = sum(cov[i][j] for i in range(k) for j in range(k))
    return (k / (k - 1)) * (1 - trace / total)


# -- policy replay ------------------------------------------------------------


def replay_policy(attempts, max_per_day=5, min_gap_minutes=60):
    """Brute-force replay of the budget/gap rule over UTC calendar days.

    attempts: ascending aware datetimes of one user's share attempts.
    Returns the list of booleans: True where the rule grants a pop-up.
    """
    issued: list[datetime] = []
    decisions = []
    for at in attempts:
        same_day = [t for t in issued if t.date() == at.date()]
        gap_ok = all(at - t >= timedelta(minutes=min_gap_minutes) for t in issued)
        grant = len(same_day) < max_per_day and gap_ok
        decisions.append(grant)
        if grant:
            issued.append(at)
    return decisions
