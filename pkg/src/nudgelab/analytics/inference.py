"""Two-sample inferential statistics for between-group comparisons.

Implements the descriptive summaries and the equal-variance (pooled)
independent-samples t-test used for the group comparison tables, plus the
mean-centered Levene check that justifies pooling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from ..errors import DegenerateInputError, ValidationFailure
from .distributions import f_sf, student_t_ppf, student_t_two_tailed_p


@dataclass(frozen=True)
class GroupSummary:
    """N, mean, and sample SD (n-1 denominator) for one group; SE derived."""

    n: int
    mean: float
    sd: float

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ValidationFailure("a group summary needs n >= 2")
        if self.sd < 0:
            raise ValidationFailure("sd must be >= 0")

    @property
    def se(self) -> float:
        return self.sd / math.sqrt(self.n)


@dataclass(frozen=True)
class GroupComparison:
    """Full pooled t-test result, one table row per dependent variable."""

    t: float
    df: int
    p_two_tailed: float
    mean_diff: float
    se_dm: float
    ci95: tuple[float, float]
    cohens_d: float

    @property
    def significant(self) -> bool:
        return self.p_two_tailed < 0.05


@dataclass(frozen=True)
class LeveneResult:
    w: float
    p: float


def summarize(values: Sequence[float]) -> GroupSummary:
    """Mean and sample SD (n-1); rejects n < 2 where the SD is undefined."""
    n = len(values)
    if n < 2:
        raise ValidationFailure(f"need at least 2 observations, got {n}")
    mean = math.fsum(values) / n
    ss = math.fsum((v - mean) ** 2 for v in values)
    return GroupSummary(n=n, mean=mean, sd=math.sqrt(ss / (n - 1)))


def pooled_t_test(g1: GroupSummary, g2: GroupSummary, alpha: float = 0.05) -> GroupComparison:
    """Equal-variance two-sample t-test from group summaries.

    Pools the variance with df weights, so the test is computable straight
    from published (N, mean, SD) rows without raw observations. Cohen's d
    divides the mean difference by the pooled SD.
    """
    if not 0.0 < alpha < 1.0:
        raise ValidationFailure("alpha must be in (0, 1)")
    n1, n2 = g1.n, g2.n
    df = n1 + n2 - 2
    mean_diff = g1.mean - g2.mean
    pooled_var = ((n1 - 1) * g1.sd**2 + (n2 - 1) * g2.sd**2) / df
    if pooled_var == 0.0:
        if mean_diff != 0.0:
            raise DegenerateInputError(
                "zero pooled variance with unequal means: t is unbounded"
            )
        return GroupComparison(
            t=0.0, df=df, p_two_tailed=1.0, mean_diff=0.0, se_dm=0.0,
            ci95=(0.0, 0.0), cohens_d=0.0,
        )
    sp = math.sqrt(pooled_var)
    se_dm = sp * math.sqrt(1.0 / n1 + 1.0 / n2)
    t = mean_diff / se_dm
    p = student_t_two_tailed_p(t, df)
    t_crit = student_t_ppf(1.0 - alpha / 2.0, df)
    half_width = t_crit * se_dm
    return GroupComparison(
        t=t,
        df=df,
        p_two_tailed=p,
        mean_diff=mean_diff,
        se_dm=se_dm,
        ci95=(mean_diff - half_width, mean_diff + half_width),
        cohens_d=mean_diff / sp,
    )


def levene_test(groups: Sequence[Sequence[float]]) -> LeveneResult:
    """Classical mean-centered Levene test for equality of variances.

    One-way ANOVA F statistic on z_ij = |x_ij - mean_i| with
    df = (k - 1, N - k). W = 0 is returned when the deviations carry no
    spread at all (e.g. groups that are exact location shifts of each
    other).
    """
    if len(groups) < 2:
        raise ValidationFailure("Levene test needs at least 2 groups")
    for g in groups:
        if len(g) < 2:
            raise ValidationFailure("every group needs at least 2 observations")
    k = len(groups)
    n_total = sum(len(g) for g in groups)
    z_groups = []
    for g in groups:
        center = math.fsum(g) / len(g)
        z_groups.append([abs(v - center) for v in g])
    z_means = [math.fsum(z) / len(z) for z in z_groups]
    grand = math.fsum(math.fsum(z) for z in z_groups) / n_total
    ss_between = math.fsum(len(z) * (zm - grand) ** 2 for z, zm in zip(z_groups, z_means))
    ss_within = math.fsum(
        math.fsum((v - zm) ** 2 for v in z)
        for z, zm in zip(z_groups, z_means)
    )
    df1 = k - 1
    df2 = n_total - k
    if ss_between == 0.0:
        return LeveneResult(w=0.0, p=1.0)
    if ss_within == 0.0:
        return LeveneResult(w=math.inf, p=0.0)
    w = (ss_between / df1) / (ss_within / df2)
    return LeveneResult(w=w, p=f_sf(w, df1, df2))
