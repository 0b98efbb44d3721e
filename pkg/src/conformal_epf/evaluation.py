"""Forecast evaluation: coverage, interval and point scores, DM tests.

Conventions used throughout:

* PICP counts hits inside the closed interval [lower, upper].
* The unconditional-coverage likelihood-ratio statistic for n1 hits and
  n0 violations at nominal miscoverage alpha is

      -2 ln [ alpha^n0 (1-alpha)^n1 / ((1-pi)^n0 pi^n1) ],   pi = n1/(n0+n1)

  with the 0*ln(0) = 0 convention, compared against the chi-square(1)
  0.95 critical value 3.841459.
* The interval score at miscoverage alpha for [l, u] and realization y
  is (u - l) plus 2/alpha times the distance to the nearest bound when
  y falls outside.
* The forecast-comparison test statistic for a daily loss differential
  series d_t = L_a,t - L_b,t is sqrt(N) * mean(d) / std(d) with the
  population (1/N) standard deviation; one-sided p-values are reported
  in both directions. Point losses aggregate hourly errors as
  (sum_h |err|^norm)^(1/norm); probabilistic losses are daily sums of
  nonnegative hourly scores.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .special import chi2_sf_1, norm_cdf

__all__ = [
    "CHI2_CRITICAL_95",
    "picp",
    "kupiec_test",
    "winkler_score",
    "mean_winkler",
    "mae",
    "pinball",
    "dm_test",
    "daily_point_loss",
    "KupiecResult",
    "DmResult",
]

CHI2_CRITICAL_95 = 3.841459


def picp(lower, upper, realized) -> float:
    """Empirical coverage of closed intervals; inputs broadcast."""
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    realized = np.asarray(realized, dtype=float)
    if np.any(upper < lower):
        raise ValueError("interval upper bounds must not undercut lower bounds")
    hits = (realized >= lower) & (realized <= upper)
    if hits.size == 0:
        raise ValueError("cannot compute coverage of an empty sample")
    return float(np.mean(hits))


@dataclass(frozen=True)
class KupiecResult:
    statistic: float
    p_value: float
    reject: bool
    n_hits: int
    n_violations: int


def _xlogy(x: float, y: float) -> float:
    if x == 0.0:
        return 0.0
    return x * math.log(y)


def kupiec_test(n_hits: int, n_violations: int, alpha: float) -> KupiecResult:
    """Unconditional-coverage likelihood ratio test at miscoverage ``alpha``."""
    if n_hits < 0 or n_violations < 0 or n_hits + n_violations == 0:
        raise ValueError("need nonnegative counts with a positive total")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    n = n_hits + n_violations
    pi = n_hits / n
    log_null = _xlogy(n_violations, alpha) + _xlogy(n_hits, 1.0 - alpha)
    log_alt = _xlogy(n_violations, 1.0 - pi) + _xlogy(n_hits, pi)
    stat = -2.0 * (log_null - log_alt)
    if stat < 0.0:  # guard tiny negative round-off
        stat = 0.0
    p = chi2_sf_1(stat)
    return KupiecResult(
        statistic=float(stat),
        p_value=float(p),
        reject=bool(stat > CHI2_CRITICAL_95),
        n_hits=n_hits,
        n_violations=n_violations,
    )


def winkler_score(lower: float, upper: float, realized: float, alpha: float) -> float:
    """Interval score of one central (1 - alpha) interval."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if upper < lower:
        raise ValueError("upper bound undercuts lower bound")
    delta = upper - lower
    if realized < lower:
        return delta + 2.0 / alpha * (lower - realized)
    if realized > upper:
        return delta + 2.0 / alpha * (realized - upper)
    return delta


def mean_winkler(lower, upper, realized, alpha: float) -> float:
    lower = np.asarray(lower, dtype=float).reshape(-1)
    upper = np.asarray(upper, dtype=float).reshape(-1)
    realized = np.asarray(realized, dtype=float).reshape(-1)
    if not len(lower) == len(upper) == len(realized):
        raise ValueError("mismatched interval arrays")
    return float(np.mean([
        winkler_score(l, u, y, alpha) for l, u, y in zip(lower, upper, realized)
    ]))


def mae(pred, realized) -> float:
    pred = np.asarray(pred, dtype=float)
    realized = np.asarray(realized, dtype=float)
    return float(np.mean(np.abs(realized - pred)))


def pinball(pred, realized, levels) -> float:
    """Mean pinball loss; ``pred`` shaped (..., hours, levels)."""
    pred = np.asarray(pred, dtype=float)
    realized = np.asarray(realized, dtype=float)
    lv = np.asarray(levels, dtype=float)
    diff = realized[..., None] - pred
    return float(np.mean(np.where(diff > 0, lv * diff, (lv - 1.0) * diff)))


def daily_point_loss(errors: np.ndarray, norm: int = 1) -> np.ndarray:
    """Aggregate hourly errors to one daily loss: (sum |err|^norm)^(1/norm)."""
    errors = np.atleast_2d(np.asarray(errors, dtype=float))
    if norm < 1:
        raise ValueError("norm must be >= 1")
    return np.sum(np.abs(errors) ** norm, axis=1) ** (1.0 / norm)


@dataclass(frozen=True)
class DmResult:
    statistic: float
    p_left: float  # P(better under H1: a's losses smaller)
    p_right: float

    def significant(self, level: float = 0.05) -> bool:
        return min(self.p_left, self.p_right) < level


def dm_test(loss_a: np.ndarray, loss_b: np.ndarray) -> DmResult:
    """Equal-predictive-accuracy test on two daily loss series.

    ``p_left`` is the one-sided p-value for "a beats b" (negative mean
    differential), ``p_right`` for the reverse. A differential with zero
    variance is degenerate and raises ``ValueError``.
    """
    a = np.asarray(loss_a, dtype=float).reshape(-1)
    b = np.asarray(loss_b, dtype=float).reshape(-1)
    if a.shape != b.shape or len(a) < 2:
        raise ValueError("loss series must share length >= 2")
    d = a - b
    sd = float(np.std(d))  # population
    if sd == 0.0:
        raise ValueError("degenerate loss differential: zero variance")
    stat = math.sqrt(len(d)) * float(np.mean(d)) / sd
    return DmResult(
        statistic=stat,
        p_left=float(norm_cdf(stat)),
        p_right=float(1.0 - norm_cdf(stat)),
    )
