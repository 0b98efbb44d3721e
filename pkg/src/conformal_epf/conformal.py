"""Conformal calibration layers: split CP, asymmetric interval
corrections, and on-line quantile tracking with integral feedback.

Split conformal width at miscoverage ``alpha`` over ``n`` scores is the
ceil((n+1)(1-alpha))-th smallest score; when that rank exceeds ``n``
the exact guarantee needs an infinite band, so callers fall back to the
widest observed score and flag the event.

Interval corrections calibrate each bound of a central interval
separately: lower scores ``q_lo - y`` and upper scores ``y - q_hi``
both use rank ceil((n+1)(1-alpha/2)). Negative corrections are legal
and tighten an over-wide band.

The on-line tracker maintains a slow subgradient-tracked ``center`` and
emits a threshold that adds a saturating integral offset recomputed from
the accumulated coverage error at every step (proportional action
compounds; integral action does not, so one error epoch cannot wind the
threshold up indefinitely):

    center    <- center + step_size * grad
    threshold  = center + integral_gain * tan(clamp(arg))
    grad       = (1 - alpha/2) if s > threshold_prev else -alpha/2
    arg        = miscoverage_sum * ln(t) / (t * saturation)

with the clamp at +-(pi/2 - 1e-3). The accumulator has two forms:
"corrected" (default) adds ``1{s > theta} - alpha/2`` so its increments
are mean-zero exactly when the bound covers at rate 1 - alpha/2;
"paper" adds ``1{theta >= s} - alpha/2``, whose mean at calibration is
1 - alpha instead of 0, kept available behind the config switch. The
saturation constant is

    saturation_constant(horizon, margin)
        = (2/pi) * (ceil(ln(horizon) * margin) - 1/ln(horizon))

All ceilings use an epsilon guard so float representations of integer
arguments do not bump the rank.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .dataset import HOURS_PER_DAY
from .ensembles import QuantileForecast, QuantileGrid, sort_quantiles
from .errors import StateError

__all__ = [
    "ScoreBuffer",
    "conformal_rank",
    "split_cp_width",
    "empirical_correction",
    "cqr_corrections",
    "saturation_constant",
    "DEFAULT_SATURATION",
    "TrackerSettings",
    "QuantileTracker",
    "tracker_update",
    "ConformalState",
    "conformalize_forecast",
    "state_to_dict",
    "state_from_dict",
    "METHODS",
]

METHODS = ("absolute", "cqr", "ocq")

_CEIL_GUARD = 1e-9


def _robust_ceil(x: float) -> int:
    return int(math.ceil(x - _CEIL_GUARD))


class ScoreBuffer:
    """Chronological ring buffer of calibration scores."""

    def __init__(self, capacity: int, values=()):
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self._values: deque[float] = deque((float(v) for v in values), maxlen=capacity)

    def push(self, score: float) -> None:
        self._values.append(float(score))

    def values(self) -> list[float]:
        return list(self._values)

    def __len__(self) -> int:
        return len(self._values)

    def __repr__(self) -> str:
        return f"ScoreBuffer(capacity={self.capacity}, n={len(self)})"


def conformal_rank(n: int, level: float) -> int:
    """1-based order statistic index ceil((n+1) * level); may exceed n."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must lie in (0, 1), got {level}")
    return _robust_ceil((n + 1) * level)


def empirical_correction(buffer: ScoreBuffer, level: float) -> float:
    """The conformal order statistic of the buffer, +inf when out of range."""
    scores = buffer.values()
    n = len(scores)
    if n == 0:
        raise StateError("score buffer is empty; calibrate before querying")
    k = conformal_rank(n, level)
    if k > n:
        return math.inf
    return sorted(scores)[k - 1]


def split_cp_width(buffer: ScoreBuffer, alpha: float) -> float:
    """Symmetric split-conformal band half-width at miscoverage ``alpha``."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return empirical_correction(buffer, 1.0 - alpha)

def cqr_corrections(lower: ScoreBuffer, upper: ScoreBuffer, alpha: float) -> tuple[float, float]:
    """Per-bound corrections (l, u) at rank ceil((n+1)(1-alpha/2)).

    Negative values tighten the interval; +inf signals that the buffer
    is too short for the exact guarantee.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    level = 1.0 - alpha / 2.0
    return empirical_correction(lower, level), empirical_correction(upper, level)


def saturation_constant(horizon: float, margin: float) -> float:
    """Saturation scale for the integral feedback term.

    ``horizon`` is the anticipated number of on-line steps, ``margin``
    the tolerated long-run miscoverage slack.
    """
    if horizon <= 1.0:
        raise ValueError("horizon must exceed 1")
    if margin <= 0.0:
        raise ValueError("margin must be positive")
    log_t = math.log(horizon)
    return (2.0 / math.pi) * (_robust_ceil(log_t * margin) - 1.0 / log_t)


DEFAULT_SATURATION = saturation_constant(1e9, 0.05)

_CLAMP = math.pi / 2.0 - 1e-3


@dataclass(frozen=True)
class TrackerSettings:
    """Shared hyper-parameters of the on-line quantile trackers."""

    step_size: float = 1e-2
    integral_gain: float = 10.0
    saturation: float = DEFAULT_SATURATION
    burn_in: int = 7
    integrator: str = "corrected"  # or "paper"

    def __post_init__(self):
        if self.step_size < 0 or self.integral_gain < 0:
            raise ValueError("step_size and integral_gain must be >= 0")
        if self.saturation <= 0:
            raise ValueError("saturation must be positive")
        if self.burn_in < 0:
            raise ValueError("burn_in must be >= 0")
        if self.integrator not in ("corrected", "paper"):
            raise ValueError(f"integrator must be 'corrected' or 'paper', got {self.integrator!r}")


@dataclass
class QuantileTracker:
    """On-line estimate of one bound's conformal correction.

    ``threshold`` is the emitted correction: the subgradient-tracked
    ``center`` plus the integral offset recomputed at the last update
    (``center`` defaults to the initial threshold). ``step`` counts
    updates 1-based so the very first integral term vanishes (ln 1 = 0).
    """

    alpha: float
    threshold: float
    settings: TrackerSettings = field(default_factory=TrackerSettings)
    miscoverage_sum: float = 0.0
    step: int = 1
    center: float | None = None

    def __post_init__(self):
        if self.center is None:
            self.center = float(self.threshold)

    def ready(self) -> bool:
        """Past burn-in: enough updates absorbed to trust the threshold."""
        return self.step > self.settings.burn_in


def tracker_update(tracker: QuantileTracker, score: float) -> QuantileTracker:
    """Absorb one conformity score; mutates and returns the tracker."""
    s = float(score)
    cfg = tracker.settings
    half = tracker.alpha / 2.0
    exceeded = s > tracker.threshold
    if cfg.integrator == "paper":
        tracker.miscoverage_sum += (1.0 if tracker.threshold >= s else 0.0) - half
    else:
        tracker.miscoverage_sum += (1.0 if exceeded else 0.0) - half
    grad = (1.0 - half) if exceeded else -half
    t = tracker.step
    tracker.center += cfg.step_size * grad
    arg = tracker.miscoverage_sum * math.log(t) / (t * cfg.saturation)
    arg = max(-_CLAMP, min(_CLAMP, arg))
    tracker.threshold = tracker.center + cfg.integral_gain * math.tan(arg)
    tracker.step = t + 1
    return tracker


class ConformalState:
    """Rolling calibration state for one backtest.

    Keeps, per delivery hour: an absolute-score buffer (point models)
    and per central interval one (lower, upper) buffer pair plus, when
    on-line tracking is enabled, one tracker per bound.
    """

    def __init__(self, alphas, n_cal: int = 182, hours: int = HOURS_PER_DAY,
                 tracker_settings: TrackerSettings | None = None):
        if n_cal < 1:
            raise ValueError("n_cal must be >= 1")
        self.alphas = tuple(float(a) for a in alphas)
        if any(not 0.0 < a < 1.0 for a in self.alphas):
            raise ValueError("alphas must lie in (0, 1)")
        self.n_cal = n_cal
        self.hours = hours
        self.settings = tracker_settings or TrackerSettings()
        self.abs_buffers = [ScoreBuffer(n_cal) for _ in range(hours)]
        self.lower_buffers = [[ScoreBuffer(n_cal) for _ in self.alphas] for _ in range(hours)]
        self.upper_buffers = [[ScoreBuffer(n_cal) for _ in self.alphas] for _ in range(hours)]
        self.lower_trackers: list[list[QuantileTracker]] | None = None
        self.upper_trackers: list[list[QuantileTracker]] | None = None

    # -- score intake -------------------------------------------------

    def push_absolute(self, point: np.ndarray, realized: np.ndarray) -> None:
        """Absorb |y - point| scores for one day."""
        point = np.asarray(point, dtype=float)
        realized = np.asarray(realized, dtype=float)
        for h in range(self.hours):
            self.abs_buffers[h].push(abs(realized[h] - point[h]))

    def interval_scores(self, forecast: QuantileForecast, realized: np.ndarray):
        """(lower, upper) score arrays of shape (hours, n_alphas)."""
        grid = QuantileGrid(forecast.levels)
        y = np.asarray(realized, dtype=float)
        lo = np.empty((self.hours, len(self.alphas)))
        hi = np.empty((self.hours, len(self.alphas)))
        for j, alpha in enumerate(self.alphas):
            i_lo, i_hi = grid.pair_indices(alpha)
            lo[:, j] = forecast.q[:, i_lo] - y
            hi[:, j] = y - forecast.q[:, i_hi]
        return lo, hi

    def push_interval(self, forecast: QuantileForecast, realized: np.ndarray) -> None:
        """Absorb per-bound scores of one day's uncalibrated forecast."""
        lo, hi = self.interval_scores(forecast, realized)
        for h in range(self.hours):
            for j in range(len(self.alphas)):
                self.lower_buffers[h][j].push(lo[h, j])
                self.upper_buffers[h][j].push(hi[h, j])

    # -- tracker lifecycle --------------------------------------------

    def trackers_initialized(self) -> bool:
        return self.lower_trackers is not None

    def init_trackers(self) -> None:
        """Seed each tracker at the current buffer correction (finite fallback)."""
        lower, upper = [], []
        for h in range(self.hours):
            lo_row, hi_row = [], []
            for j, alpha in enumerate(self.alphas):
                lo_row.append(QuantileTracker(
                    alpha=alpha,
                    threshold=self._finite_correction(self.lower_buffers[h][j], alpha)[0],
                    settings=self.settings,
                ))
                hi_row.append(QuantileTracker(
                    alpha=alpha,
                    threshold=self._finite_correction(self.upper_buffers[h][j], alpha)[0],
                    settings=self.settings,
                ))
            lower.append(lo_row)
            upper.append(hi_row)
        self.lower_trackers = lower
        self.upper_trackers = upper

    def reanchor_trackers(self) -> None:
        """Re-seed every tracker at the current buffer correction.

        Called once at the warm-up/test boundary: the center snaps to the
        full-buffer conformal correction, the integral accumulator clears,
        and the emitted threshold coincides with the static correction.
        The step count is kept, so the integral gain stays at its matured
        (~log t / t) level instead of re-entering the hot early-step
        regime.
        """
        if not self.trackers_initialized():
            raise StateError("trackers not initialized; call init_trackers first")
        for trackers, buffers in ((self.lower_trackers, self.lower_buffers),
                                  (self.upper_trackers, self.upper_buffers)):
            for h in range(self.hours):
                for j, alpha in enumerate(self.alphas):
                    tr = trackers[h][j]
                    tr.center = self._finite_correction(buffers[h][j], alpha)[0]
                    tr.threshold = tr.center
                    tr.miscoverage_sum = 0.0

    def update_trackers(self, forecast: QuantileForecast, realized: np.ndarray) -> None:
        if not self.trackers_initialized():
            raise StateError("trackers not initialized; call init_trackers first")
        lo, hi = self.interval_scores(forecast, realized)
        for h in range(self.hours):
            for j in range(len(self.alphas)):
                tracker_update(self.lower_trackers[h][j], lo[h, j])
                tracker_update(self.upper_trackers[h][j], hi[h, j])

    # -- correction queries -------------------------------------------

    @staticmethod
    def _finite_correction(buffer: ScoreBuffer, alpha: float) -> tuple[float, bool]:
        """Correction with the widest-score fallback; returns (value, fell_back)."""
        value = empirical_correction(buffer, 1.0 - alpha / 2.0)
        if math.isinf(value):
            return max(buffer.values()), True
        return value, False


def conformalize_forecast(
    forecast: QuantileForecast,
    state: ConformalState,
    method: str,
) -> tuple[QuantileForecast, list[str]]:
    """Apply a calibration method to one day's quantile forecast.

    Returns the calibrated forecast (rows re-sorted) and a list of flag
    strings naming every (hour, alpha, bound) where the exact conformal
    rank exceeded the buffer and the widest observed score was used
    instead. "ocq" falls back to buffer corrections until its trackers
    are initialized and past burn-in.
    """
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}, got {method!r}")
    grid = QuantileGrid(forecast.levels)
    q = forecast.q.copy()
    flags: list[str] = []

    if method == "absolute":
        point = forecast.q[:, grid.median_index].copy()
        q[:, :] = point[:, None]
        for j, alpha in enumerate(state.alphas):
            i_lo, i_hi = grid.pair_indices(alpha)
            for h in range(state.hours):
                buffer = state.abs_buffers[h]
                if len(buffer) == 0:
                    raise StateError("absolute-score buffer is empty; warm up before forecasting")
                width = split_cp_width(buffer, alpha)
                if math.isinf(width):
                    width = max(buffer.values())
                    flags.append(f"h{h:02d}:alpha={alpha:g}:both:fallback")
                q[h, i_lo] = point[h] - width
                q[h, i_hi] = point[h] + width
    else:
        use_trackers = method == "ocq" and state.trackers_initialized()
        for j, alpha in enumerate(state.alphas):
            i_lo, i_hi = grid.pair_indices(alpha)
            for h in range(state.hours):
                lo_buf = state.lower_buffers[h][j]
                hi_buf = state.upper_buffers[h][j]
                if len(lo_buf) == 0 or len(hi_buf) == 0:
                    raise StateError("interval score buffers are empty; warm up before forecasting")
                if use_trackers and state.lower_trackers[h][j].ready():
                    l_corr = state.lower_trackers[h][j].threshold
                    u_corr = state.upper_trackers[h][j].threshold
                else:
                    l_corr, fell_lo = state._finite_correction(lo_buf, alpha)
                    u_corr, fell_hi = state._finite_correction(hi_buf, alpha)
                    if fell_lo:
                        flags.append(f"h{h:02d}:alpha={alpha:g}:lower:fallback")
                    if fell_hi:
                        flags.append(f"h{h:02d}:alpha={alpha:g}:upper:fallback")
                q[h, i_lo] = forecast.q[h, i_lo] - l_corr
                q[h, i_hi] = forecast.q[h, i_hi] + u_corr

    return QuantileForecast(
        delivery_date=forecast.delivery_date,
        q=sort_quantiles(q),
        levels=forecast.levels,
    ), flags


# ---------------------------------------------------------------------------
# serialization


def _tracker_to_dict(t: QuantileTracker) -> dict:
    return {
        "alpha": t.alpha,
        "threshold": t.threshold,
        "center": t.center,
        "miscoverage_sum": t.miscoverage_sum,
        "step": t.step,
    }


def state_to_dict(state: ConformalState) -> dict:
    doc = {
        "format": "conformal-state",
        "version": 1,
        "alphas": list(state.alphas),
        "n_cal": state.n_cal,
        "hours": state.hours,
        "settings": {
            "step_size": state.settings.step_size,
            "integral_gain": state.settings.integral_gain,
            "saturation": state.settings.saturation,
            "burn_in": state.settings.burn_in,
            "integrator": state.settings.integrator,
        },
        "abs": [b.values() for b in state.abs_buffers],
        "lower": [[b.values() for b in row] for row in state.lower_buffers],
        "upper": [[b.values() for b in row] for row in state.upper_buffers],
        "lower_trackers": None,
        "upper_trackers": None,
    }
    if state.trackers_initialized():
        doc["lower_trackers"] = [[_tracker_to_dict(t) for t in row] for row in state.lower_trackers]
        doc["upper_trackers"] = [[_tracker_to_dict(t) for t in row] for row in state.upper_trackers]
    return doc


def state_from_dict(doc: dict) -> ConformalState:
    if doc.get("format") != "conformal-state":
        raise ValueError("not a serialized calibration state")
    if doc.get("version") != 1:
        raise ValueError(f"unsupported state version {doc.get('version')!r}")
    settings = TrackerSettings(**doc["settings"])
    state = ConformalState(
        alphas=doc["alphas"], n_cal=doc["n_cal"], hours=doc["hours"],
        tracker_settings=settings,
    )
    for h, values in enumerate(doc["abs"]):
        state.abs_buffers[h] = ScoreBuffer(state.n_cal, values)
    for h, row in enumerate(doc["lower"]):
        for j, values in enumerate(row):
            state.lower_buffers[h][j] = ScoreBuffer(state.n_cal, values)
    for h, row in enumerate(doc["upper"]):
        for j, values in enumerate(row):
            state.upper_buffers[h][j] = ScoreBuffer(state.n_cal, values)
    if doc.get("lower_trackers") is not None:
        def revive(spec):
            return QuantileTracker(
                alpha=spec["alpha"], threshold=spec["threshold"], settings=settings,
                miscoverage_sum=spec["miscoverage_sum"], step=spec["step"],
                center=spec["center"],
            )
        state.lower_trackers = [[revive(s) for s in row] for row in doc["lower_trackers"]]
        state.upper_trackers = [[revive(s) for s in row] for row in doc["upper_trackers"]]
    return state
