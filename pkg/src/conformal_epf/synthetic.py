"""Synthetic hourly price generator with an exact conditional-quantile oracle.

The generated price decomposes as

    y[d, h] = profile[h] + level[d] + scale[d, h] * eps[d, h]

with a fixed double-peaked daily profile, an AR(1) day-level component
and iid unit-variance-ish noise whose scale varies by hour (mild
heteroskedasticity), optionally

* skewed noise: a two-piece normal with left/right spreads (1, skew_ratio),
* a regime shift: from ``shift_day`` on, the noise scale is multiplied
  by ``shift_scale`` (sqrt(2) doubles the noise variance).

The oracle conditions on the latent path (profile, level, scale), so its
quantiles are exact for any noise family here; with zero noise they
collapse onto the deterministic path. Everything is driven by one
``numpy`` Generator seeded from the config, so equal configs give
byte-identical series.
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass

import numpy as np

from .dataset import HOURS_PER_DAY, RawSeries
from .special import norm_quantile

__all__ = ["SyntheticConfig", "QuantileOracle", "generate_synthetic", "TWO_PIECE", "GAUSSIAN"]

GAUSSIAN = "gaussian"
TWO_PIECE = "two_piece"


@dataclass(frozen=True)
class SyntheticConfig:
    n_days: int = 365
    seed: int = 0
    start: str = "2015-01-01"
    base_level: float = 50.0
    profile_amplitude: float = 10.0
    ar_coeff: float = 0.7
    ar_scale: float = 2.0
    noise_scale: float = 1.0
    skew_ratio: float = 1.0  # right/left spread of the two-piece noise; 1 = Gaussian
    shift_scale: float = 1.0  # noise scale multiplier from shift_day onwards
    shift_day: int | None = None  # default n_days // 2 when shift_scale != 1

    def __post_init__(self):
        if self.n_days < 1:
            raise ValueError("n_days must be >= 1")
        if not 0.0 <= self.ar_coeff < 1.0:
            raise ValueError("ar_coeff must lie in [0, 1)")
        if self.noise_scale < 0 or self.ar_scale < 0:
            raise ValueError("scales must be nonnegative")
        if self.skew_ratio <= 0:
            raise ValueError("skew_ratio must be positive")
        if self.shift_scale <= 0:
            raise ValueError("shift_scale must be positive")


def _daily_profile(cfg: SyntheticConfig) -> np.ndarray:
    h = np.arange(HOURS_PER_DAY)
    shape = -np.cos(2.0 * np.pi * h / HOURS_PER_DAY) + 0.4 * np.sin(4.0 * np.pi * h / HOURS_PER_DAY)
    return cfg.base_level + cfg.profile_amplitude * shape


def _hour_scale(cfg: SyntheticConfig) -> np.ndarray:
    h = np.arange(HOURS_PER_DAY)
    return cfg.noise_scale * (1.0 + 0.5 * np.sin(2.0 * np.pi * (h - 5.0) / HOURS_PER_DAY))


def _two_piece_quantile(p, sigma_l: float, sigma_r: float):
    """Quantile of the two-piece normal with spreads (sigma_l, sigma_r), mode 0."""
    p = np.asarray(p, dtype=float)
    w = sigma_l / (sigma_l + sigma_r)
    out = np.empty_like(p)
    lo = p <= w
    flat = p.reshape(-1)
    res = out.reshape(-1)
    for i, pi in enumerate(flat):
        if not 0.0 < pi < 1.0:
            raise ValueError(f"quantile level must lie in (0, 1), got {pi}")
        if pi <= w:
            res[i] = sigma_l * norm_quantile(pi / (2.0 * w))
        else:
            res[i] = sigma_r * norm_quantile(0.5 + (pi - w) / (2.0 * (1.0 - w)))
    return out if p.ndim else float(res[0])


def _two_piece_sample(rng: np.random.Generator, size, sigma_l: float, sigma_r: float) -> np.ndarray:
    w = sigma_l / (sigma_l + sigma_r)
    side = rng.random(size) < w
    mag = np.abs(rng.standard_normal(size))
    return np.where(side, -sigma_l * mag, sigma_r * mag)


@dataclass
class QuantileOracle:
    """Exact conditional quantiles of the generated series, given the latent path."""

    profile: np.ndarray  # (24,)
    level: np.ndarray  # (n_days,)
    scale: np.ndarray  # (n_days, 24)
    kind: str = GAUSSIAN
    sigma_l: float = 1.0
    sigma_r: float = 1.0

    def noise_quantile(self, p):
        if self.kind == GAUSSIAN:
            p_arr = np.asarray(p, dtype=float)
            if p_arr.ndim == 0:
                return norm_quantile(float(p))
            return np.array([norm_quantile(v) for v in p_arr.reshape(-1)]).reshape(p_arr.shape)
        return _two_piece_quantile(p, self.sigma_l, self.sigma_r)

    def quantile(self, day: int, hour: int, p):
        """Conditional quantile(s) of y[day, hour] at level(s) ``p``."""
        base = self.profile[hour] + self.level[day]
        return base + self.scale[day, hour] * self.noise_quantile(p)

    def quantile_day(self, day: int, levels) -> np.ndarray:
        """(24, len(levels)) conditional quantile matrix for one day."""
        zq = np.array([self.noise_quantile(float(p)) for p in levels])
        return (self.profile + self.level[day])[:, None] + self.scale[day][:, None] * zq[None, :]

    def sample(self, day: int, hour: int, n: int, rng: np.random.Generator) -> np.ndarray:
        """Fresh draws of y[day, hour] conditional on the latent path."""
        if self.kind == GAUSSIAN:
            eps = rng.standard_normal(n)
        else:
            eps = _two_piece_sample(rng, n, self.sigma_l, self.sigma_r)
        return self.profile[hour] + self.level[day] + self.scale[day, hour] * eps


def generate_synthetic(cfg: SyntheticConfig) -> tuple[RawSeries, QuantileOracle]:
    """Simulate ``cfg.n_days`` of hourly prices plus the matching oracle."""
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    profile = _daily_profile(cfg)
    hour_scale = _hour_scale(cfg)

    level = np.empty(cfg.n_days)
    innov = rng.standard_normal(cfg.n_days) * cfg.ar_scale
    prev = 0.0
    for d in range(cfg.n_days):
        prev = cfg.ar_coeff * prev + innov[d]
        level[d] = prev

    scale = np.tile(hour_scale, (cfg.n_days, 1))
    shift_day = cfg.shift_day
    if shift_day is None and cfg.shift_scale != 1.0:
        shift_day = cfg.n_days // 2
    if shift_day is not None:
        if not 0 <= shift_day <= cfg.n_days:
            raise ValueError(f"shift_day must lie in 0..{cfg.n_days}, got {shift_day}")
        scale[shift_day:] *= cfg.shift_scale

    if cfg.skew_ratio == 1.0:
        kind = GAUSSIAN
        eps = rng.standard_normal((cfg.n_days, HOURS_PER_DAY))
    else:
        kind = TWO_PIECE
        eps = _two_piece_sample(rng, (cfg.n_days, HOURS_PER_DAY), 1.0, cfg.skew_ratio)

    prices = profile[None, :] + level[:, None] + scale * eps

    start = dt.date.fromisoformat(cfg.start)
    t0 = np.datetime64(start.isoformat(), "h")
    timestamps = t0 + np.arange(cfg.n_days * HOURS_PER_DAY, dtype=np.int64)
    raw = RawSeries(
        timestamps=timestamps,
        price=prices.reshape(-1),
        exog=np.zeros((cfg.n_days * HOURS_PER_DAY, 0)),
        exog_names=(),
    )
    oracle = QuantileOracle(
        profile=profile,
        level=level,
        scale=scale,
        kind=kind,
        sigma_l=1.0,
        sigma_r=cfg.skew_ratio if kind == TWO_PIECE else 1.0,
    )
    return raw, oracle
