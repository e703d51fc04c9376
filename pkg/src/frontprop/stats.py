"""Small statistics toolkit for the Monte Carlo experiments.

Heavy use of small-probability estimation: binomial confidence by Wilson
intervals, zero counts by the rule of three (never silent -inf), log
probabilities by the delta method.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps

Z95 = 1.959963984540054


def wilson_interval(k: int, n: int, z: float = Z95) -> tuple[float, float]:
    """Score interval for a binomial proportion."""
    if n <= 0:
        raise ValueError("need n > 0")
    phat = k / n
    denom = 1.0 + z * z / n
    center = (phat + z * z / (2 * n)) / denom
    half = (z / denom) * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n))
    return max(0.0, center - half), min(1.0, center + half)


def rule_of_three(n: int) -> float:
    """95% upper bound on p after n straight misses."""
    return 3.0 / n


@dataclass(frozen=True)
class ProbEstimate:
    """Probability estimate that is explicit about zero counts."""

    hits: int
    n: int
    censored: bool          # True when hits == 0: only an upper bound is known
    p: float                # point estimate (upper bound when censored)
    lo: float
    hi: float

    @property
    def log_p(self) -> float:
        return math.log(self.p) if self.p > 0 else -math.inf

    def log_interval(self) -> tuple[float, float]:
        lo = math.log(self.lo) if self.lo > 0 else -math.inf
        return lo, math.log(self.hi)


def prob_estimate(hits: int, n: int) -> ProbEstimate:
    if hits == 0:
        ub = rule_of_three(n)
        return ProbEstimate(0, n, True, ub, 0.0, ub)
    lo, hi = wilson_interval(hits, n)
    return ProbEstimate(hits, n, False, hits / n, lo, hi)


def mean_ci(xs, z: float = Z95) -> tuple[float, float, float]:
    """(mean, lo, hi) with a normal-approximation interval."""
    arr = np.asarray(list(xs), dtype=float)
    m = float(arr.mean())
    if len(arr) < 2:
        return m, m, m
    half = z * float(arr.std(ddof=1)) / math.sqrt(len(arr))
    return m, m - half, m + half


def intervals_overlap(a: tuple[float, float], b: tuple[float, float]) -> bool:
    return a[0] <= b[1] and b[0] <= a[1]


@dataclass(frozen=True)
class LineFit:
    slope: float
    intercept: float
    r_squared: float
    slope_stderr: float
    residuals: tuple


def line_fit(xs, ys) -> LineFit:
    xs = np.asarray(list(xs), dtype=float)
    ys = np.asarray(list(ys), dtype=float)
    res = sps.linregress(xs, ys)
    resid = tuple(float(v) for v in ys - (res.intercept + res.slope * xs))
    return LineFit(float(res.slope), float(res.intercept),
                   float(res.rvalue) ** 2, float(res.stderr), resid)


def aic_of_fit(ys, resid) -> float:
    """AIC of a two-parameter least-squares line on the given residuals."""
    n = len(resid)
    rss = sum(r * r for r in resid)
    if rss <= 0:
        return -math.inf
    return n * math.log(rss / n) + 4.0


def ks_uniform(xs) -> float:
    """Kolmogorov-Smirnov statistic of a sample against U(0,1)."""
    return float(sps.kstest(np.asarray(list(xs)), "uniform").statistic)


def ks_two_sample(a, b) -> tuple[float, float]:
    res = sps.ks_2samp(np.asarray(list(a)), np.asarray(list(b)))
    return float(res.statistic), float(res.pvalue)


def lag1_autocorr(xs) -> tuple[float, float]:
    """(lag-1 autocorrelation, its null standard error 1/sqrt(n))."""
    arr = np.asarray(list(xs), dtype=float)
    n = len(arr)
    if n < 3:
        raise ValueError("need at least 3 points")
    x0 = arr[:-1] - arr[:-1].mean()
    x1 = arr[1:] - arr[1:].mean()
    denom = math.sqrt(float((x0 * x0).sum()) * float((x1 * x1).sum()))
    r = float((x0 * x1).sum()) / denom if denom > 0 else 0.0
    return r, 1.0 / math.sqrt(n - 1)


def chi2_independence(table) -> float:
    """p-value of the chi-squared independence test on a 2x2 count table."""
    arr = np.asarray(table, dtype=float)
    if arr.min() == 0:
        arr = arr + 0.5  # continuity guard for sparse cells
    _, p, _, _ = sps.chi2_contingency(arr)
    return float(p)


def correlation_z(a, b) -> tuple[float, float]:
    """(sample correlation, its null standard error 1/sqrt(n))."""
    a = np.asarray(list(a), dtype=float)
    b = np.asarray(list(b), dtype=float)
    r = float(np.corrcoef(a, b)[0, 1])
    return r, 1.0 / math.sqrt(len(a))


def ratio_ci(nums, dens, z: float = Z95) -> tuple[float, float, float]:
    """Delta-method interval for mean(nums)/mean(dens) on paired samples."""
    nums = np.asarray(list(nums), dtype=float)
    dens = np.asarray(list(dens), dtype=float)
    n = len(nums)
    md = float(dens.mean())
    ratio = float(nums.mean()) / md
    resid = nums - ratio * dens
    se = math.sqrt(float((resid * resid).sum()) / (n - 1) / n) / md
    return ratio, ratio - z * se, ratio + z * se
