"""Quantile grids, member aggregation and quantile extraction.

Ensembling is horizontal (probability averaging): each member's sorted
quantile vector is averaged entrywise across members, then re-sorted.
Sorting a crossed quantile row never increases pinball loss at any
level, which the test suite checks as a property.

Distributional members are reduced to the grid either analytically
(closed-form quantile maps) or by Monte Carlo: empirical quantiles of
``mc_samples`` joint draws, linear interpolation between order
statistics.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass

import numpy as np

from . import distributions as dists
from .dataset import HOURS_PER_DAY

__all__ = [
    "DECILES",
    "QuantileGrid",
    "QuantileForecast",
    "sort_quantiles",
    "vincentize",
    "dist_to_quantiles",
    "point_to_quantiles",
]

DECILES = tuple(np.round(np.arange(1, 10) * 0.1, 10))


@dataclass(frozen=True)
class QuantileGrid:
    """Symmetric grid of quantile levels around the median."""

    levels: tuple[float, ...] = DECILES

    def __post_init__(self):
        lv = tuple(float(v) for v in self.levels)
        if any(not 0.0 < v < 1.0 for v in lv):
            raise ValueError("levels must lie strictly inside (0, 1)")
        if sorted(lv) != list(lv) or len(set(lv)) != len(lv):
            raise ValueError("levels must be strictly increasing")
        if 0.5 not in lv:
            raise ValueError("grid must contain the median level 0.5")
        for v in lv:
            if v < 0.5 and round(1.0 - v, 10) not in [round(u, 10) for u in lv]:
                raise ValueError(f"level {v} lacks its symmetric partner {1.0 - v}")
        object.__setattr__(self, "levels", lv)

    def __len__(self) -> int:
        return len(self.levels)

    @property
    def median_index(self) -> int:
        return self.levels.index(0.5)

    def alphas(self) -> tuple[float, ...]:
        """Central-interval miscoverage rates, one per symmetric pair."""
        return tuple(round(2.0 * v, 10) for v in self.levels if v < 0.5)

    def pair_indices(self, alpha: float) -> tuple[int, int]:
        """Column indices of the lower/upper bounds of the 1 - alpha interval."""
        lo = round(alpha / 2.0, 10)
        hi = round(1.0 - alpha / 2.0, 10)
        rounded = [round(v, 10) for v in self.levels]
        if lo not in rounded or hi not in rounded:
            raise ValueError(f"grid has no symmetric pair for alpha={alpha}")
        return rounded.index(lo), rounded.index(hi)


@dataclass
class QuantileForecast:
    """Per-hour quantile matrix for one delivery day."""

    delivery_date: dt.date
    q: np.ndarray  # (hours, n_levels)
    levels: tuple[float, ...] = DECILES

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        if self.q.ndim != 2 or self.q.shape[1] != len(self.levels):
            raise ValueError("quantile matrix shape does not match the level grid")

    @property
    def is_monotone(self) -> bool:
        return bool(np.all(np.diff(self.q, axis=1) >= 0))


def sort_quantiles(q: np.ndarray) -> np.ndarray:
    """Ascending sort along the level axis; fixes quantile crossings."""
    return np.sort(np.asarray(q, dtype=float), axis=-1)


def vincentize(member_quantiles) -> np.ndarray:
    """Entrywise mean of per-member quantile matrices (probability averaging).

    Members must share one shape; the mean of row-sorted inputs can
    still cross after averaging only when inputs are unsorted, so
    callers re-sort the result.
    """
    stack = np.stack([np.asarray(m, dtype=float) for m in member_quantiles])
    if len(stack) == 0:
        raise ValueError("need at least one member")
    return stack.mean(axis=0)


def dist_to_quantiles(
    params: dists.DistParams,
    grid: QuantileGrid,
    extraction: str = "analytic",
    mc_samples: int = 10000,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Reduce per-hour distribution parameters to a (hours, levels) matrix.

    "analytic" evaluates the closed-form quantile map; "monte_carlo"
    draws ``mc_samples`` joint samples and takes empirical quantiles
    (linear interpolation).
    """
    if extraction == "analytic":
        return dists.quantile_matrix(params, grid.levels)
    if extraction == "monte_carlo":
        if rng is None:
            raise ValueError("monte_carlo extraction needs a random generator")
        if mc_samples < 2:
            raise ValueError("mc_samples must be >= 2")
        draws = dists.sample(params, mc_samples, rng)  # (n, hours)
        return np.quantile(draws, grid.levels, axis=0, method="linear").T
    raise ValueError(f"unknown extraction mode {extraction!r}")


def point_to_quantiles(point: np.ndarray, grid: QuantileGrid) -> np.ndarray:
    """Degenerate (hours, levels) matrix that repeats a point forecast."""
    point = np.asarray(point, dtype=float)
    if point.shape != (HOURS_PER_DAY,):
        raise ValueError(f"expected {HOURS_PER_DAY} hourly values, got shape {point.shape}")
    return np.repeat(point[:, None], len(grid), axis=1)
