"""Hourly market data handling: CSV parsing, feature assembly, scaling.

A raw series is a strictly increasing hourly grid of prices plus zero or
more exogenous columns. Delivery-day samples stack, per day ``t``:

* hourly price lags (offsets in hours before day ``t`` hour 0),
  oldest first;
* exogenous blocks, one per selector, either the 24 hourly values of
  day ``t - o`` or the last value of day ``t - o``; ``o = 0`` selects
  the delivery day itself and is only sound for columns published in
  advance (forecasts), so those columns carry a ``day_ahead`` flag;
* a smooth two-component weekday encoding.

Feature provenance is recorded per column so tests can assert that no
feature peeks past the day-ahead information boundary.

Scaling is plain standardization fit on a chronological prefix of the
training window (population variance, degenerate columns fall back to
unit scale) and applied to features and per-hour targets alike.
"""

from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ContinuityError, CoverageError, ParseError, SchemaError

__all__ = [
    "HOURS_PER_DAY",
    "CsvSchema",
    "RawSeries",
    "ExogSelector",
    "FeatureSpec",
    "FeatureColumn",
    "SampleSet",
    "ScalerState",
    "parse_market_csv",
    "write_market_csv",
    "encode_weekday",
    "build_sample_matrix",
    "fit_scaler",
    "apply_scaler",
    "invert_scaler",
]

HOURS_PER_DAY = 24

_EPOCH_WEEKDAY_SHIFT = 3  # 1970-01-01 was a Thursday; Monday-based index


@dataclass(frozen=True)
class CsvSchema:
    timestamp_column: str = "timestamp"
    price_column: str = "price"
    exog_columns: tuple[str, ...] = ()


@dataclass
class RawSeries:
    """Gap-free hourly grid of prices and exogenous columns."""

    timestamps: np.ndarray  # datetime64[h], strictly increasing, 1h step
    price: np.ndarray  # (n,) float64
    exog: np.ndarray  # (n, k) float64
    exog_names: tuple[str, ...] = ()

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype="datetime64[h]")
        self.price = np.asarray(self.price, dtype=float)
        self.exog = np.asarray(self.exog, dtype=float)
        if self.exog.size == 0:
            self.exog = np.zeros((len(self.price), 0))
        elif self.exog.ndim == 1:
            self.exog = self.exog.reshape(-1, 1)
        n = len(self.timestamps)
        if len(self.price) != n or len(self.exog) != n:
            raise ValueError("timestamps, price and exog must have equal length")
        if self.exog.shape[1] != len(self.exog_names):
            raise ValueError(
                f"exog has {self.exog.shape[1]} columns but {len(self.exog_names)} names"
            )
        if n >= 2:
            steps = np.diff(self.timestamps.astype(np.int64))
            if np.any(steps == 0):
                at = self.timestamps[1:][steps == 0][0]
                raise ContinuityError(f"duplicated instant {at}")
            if np.any(steps != 1):
                at = self.timestamps[:-1][steps > 1]
                if len(at):
                    missing = at[0] + np.timedelta64(1, "h")
                    raise ContinuityError(f"missing instant {missing}: hourly grid has a gap")
                raise ContinuityError("timestamps are not sorted in increasing order")
        if not np.all(np.isfinite(self.price)):
            raise ParseError("price column contains non-finite values")
        if self.exog.size and not np.all(np.isfinite(self.exog)):
            raise ParseError("exogenous columns contain non-finite values")

    def __len__(self) -> int:
        return len(self.timestamps)


def _parse_timestamp(token: str, row: int) -> dt.datetime:
    try:
        stamp = dt.datetime.fromisoformat(token.strip())
    except ValueError as exc:
        raise ParseError(f"row {row}: cannot parse timestamp {token!r}") from exc
    if stamp.tzinfo is not None:
        raise ParseError(f"row {row}: timestamp {token!r} must be timezone-naive")
    if stamp.minute or stamp.second or stamp.microsecond:
        raise ParseError(f"row {row}: timestamp {token!r} is not on the hourly grid")
    return stamp


def parse_market_csv(path, schema: CsvSchema = CsvSchema()) -> RawSeries:
    """Read an hourly market CSV into a validated :class:`RawSeries`.

    Rows may arrive unsorted; they are ordered by timestamp before the
    continuity check. Gaps and duplicates raise :class:`ContinuityError`
    naming the offending instant, malformed cells raise
    :class:`ParseError`, missing columns raise :class:`SchemaError`.
    """
    with open(path, newline="") as handle:
        reader = csv.DictReader(handle)
        header = reader.fieldnames
        if header is None:
            raise SchemaError(f"{path}: empty file, no header row")
        needed = [schema.timestamp_column, schema.price_column, *schema.exog_columns]
        missing = [c for c in needed if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing columns {missing}")
        stamps: list[dt.datetime] = []
        prices: list[float] = []
        exog_rows: list[list[float]] = []
        for i, row in enumerate(reader, start=2):  # header is line 1
            stamp = _parse_timestamp(row[schema.timestamp_column], i)
            stamps.append(stamp)
            try:
                prices.append(float(row[schema.price_column]))
                exog_rows.append([float(row[c]) for c in schema.exog_columns])
            except (TypeError, ValueError) as exc:
                raise ParseError(f"row {i} ({stamp.isoformat()}): non-numeric cell") from exc
    if not stamps:
        raise SchemaError(f"{path}: no data rows")
    order = np.argsort(np.array([s.isoformat() for s in stamps]))
    ts = np.array([stamps[i].isoformat() for i in order], dtype="datetime64[h]")
    price = np.array([prices[i] for i in order], dtype=float)
    if schema.exog_columns:
        exog = np.array([exog_rows[i] for i in order], dtype=float)
    else:
        exog = np.zeros((len(price), 0))
    return RawSeries(timestamps=ts, price=price, exog=exog, exog_names=tuple(schema.exog_columns))


def write_market_csv(path, raw: RawSeries, schema: CsvSchema | None = None) -> None:
    """Inverse of :func:`parse_market_csv`; floats keep full precision."""
    if schema is None:
        schema = CsvSchema(exog_columns=raw.exog_names)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow([schema.timestamp_column, schema.price_column, *schema.exog_columns])
        iso = np.datetime_as_string(raw.timestamps, unit="m")
        for i in range(len(raw)):
            writer.writerow([iso[i], repr(float(raw.price[i])), *(repr(float(v)) for v in raw.exog[i])])


def encode_weekday(day_of_week: int, period: int = 6) -> np.ndarray:
    """Two-component smooth encoding of the weekday index (Monday = 0)."""
    if not 0 <= day_of_week <= 6:
        raise ValueError(f"day_of_week must lie in 0..6, got {day_of_week}")
    if period <= 0:
        raise ValueError(f"period must be positive, got {period}")
    angle = 2.0 * math.pi * day_of_week / period
    return np.array([math.sin(angle), math.cos(angle)])


@dataclass(frozen=True)
class ExogSelector:
    """One exogenous feature block.

    ``day_offset`` counts days before the delivery day; 0 means the
    delivery day itself and is only valid for columns known in advance.
    ``mode`` is "hourly" (24 values) or "last" (closing value only).
    """

    column: str
    day_offset: int = 0
    mode: str = "hourly"

    def __post_init__(self):
        if self.day_offset < 0:
            raise ValueError(f"day_offset must be >= 0, got {self.day_offset}")
        if self.mode not in ("hourly", "last"):
            raise ValueError(f"mode must be 'hourly' or 'last', got {self.mode!r}")


@dataclass(frozen=True)
class FeatureSpec:
    """Layout of one delivery-day input vector."""

    price_lags: tuple[int, ...] = tuple(range(1, 2 * HOURS_PER_DAY + 1))
    exog: tuple[ExogSelector, ...] = ()
    weekday: bool = True
    weekday_period: int = 6

    def __post_init__(self):
        lags = tuple(int(k) for k in self.price_lags)
        if len(set(lags)) != len(lags):
            raise ValueError("price_lags contains duplicates")
        if any(k < 1 for k in lags):
            raise ValueError("price lags must be >= 1 hour in the past")
        object.__setattr__(self, "price_lags", lags)
        object.__setattr__(self, "exog", tuple(self.exog))
        if self.weekday_period <= 0:
            raise ValueError("weekday_period must be positive")

    @property
    def n_features(self) -> int:
        n = len(self.price_lags)
        for sel in self.exog:
            n += HOURS_PER_DAY if sel.mode == "hourly" else 1
        if self.weekday:
            n += 2
        return n


@dataclass(frozen=True)
class FeatureColumn:
    """Provenance of one feature column, for leakage audits."""

    name: str
    kind: str  # "price_lag" | "exog" | "weekday"
    hour_offset: int | None  # hours relative to delivery-day hour 0; negative = past
    day_ahead: bool = False


@dataclass
class SampleSet:
    """One row per delivery day: features, 24 hourly targets, provenance."""

    features: np.ndarray  # (n_days, n_x)
    targets: np.ndarray  # (n_days, 24)
    dates: tuple[dt.date, ...]
    columns: tuple[FeatureColumn, ...]

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.targets = np.asarray(self.targets, dtype=float)
        if self.features.ndim != 2 or self.targets.shape != (len(self.features), HOURS_PER_DAY):
            raise ValueError("inconsistent sample matrix shapes")
        if len(self.dates) != len(self.features):
            raise ValueError("dates do not match sample rows")
        if len(self.columns) != self.features.shape[1]:
            raise ValueError("provenance does not match feature columns")

    def __len__(self) -> int:
        return len(self.features)


def _weekday_of(date: dt.date) -> int:
    return date.weekday()


def build_sample_matrix(
    raw: RawSeries,
    spec: FeatureSpec,
    start: dt.date | str | None = None,
    end: dt.date | str | None = None,
) -> SampleSet:
    """Assemble the delivery-day design matrix described by ``spec``.

    Without ``start``/``end`` every delivery day whose features are fully
    covered by the raw history is included. An explicit range raises
    :class:`CoverageError` naming the first uncovered requested day.
    """
    for sel in spec.exog:
        if sel.column not in raw.exog_names:
            raise SchemaError(f"exogenous column {sel.column!r} not present in the raw series")
    col_index = {name: i for i, name in enumerate(raw.exog_names)}

    hours = raw.timestamps.astype(np.int64)
    n = len(hours)
    # anchor positions: index of hour 0 of each fully contained day
    first_midnight = int((-hours[0]) % HOURS_PER_DAY)
    anchors = list(range(first_midnight, n - HOURS_PER_DAY + 1, HOURS_PER_DAY))

    max_back = max(spec.price_lags, default=0)
    for sel in spec.exog:
        back = HOURS_PER_DAY * sel.day_offset
        if sel.mode == "hourly":
            max_back = max(max_back, back)
        else:
            max_back = max(max_back, back - (HOURS_PER_DAY - 1))
    # an anchor a is usable iff a - max_back >= 0
    usable = [a for a in anchors if a - max_back >= 0]

    def anchor_date(a: int) -> dt.date:
        return raw.timestamps[a].astype("datetime64[D]").item()

    if start is not None or end is not None:
        lo = dt.date.fromisoformat(start) if isinstance(start, str) else start
        hi = dt.date.fromisoformat(end) if isinstance(end, str) else end
        available = {anchor_date(a): a for a in usable}
        all_days = {anchor_date(a) for a in anchors}
        if lo is None:
            lo = min(available, default=None)
        if hi is None:
            hi = max(available, default=None)
        if lo is None or hi is None:
            raise CoverageError("raw series contains no usable delivery day")
        wanted = [lo + dt.timedelta(days=i) for i in range((hi - lo).days + 1)]
        for day in wanted:
            if day not in available:
                reason = "history too short for its features" if day in all_days else "not present in the raw series"
                raise CoverageError(f"delivery day {day.isoformat()} cannot be built: {reason}")
        usable = [available[day] for day in wanted]

    if not usable:
        raise CoverageError("no delivery day has enough history for the requested features")

    lag_order = sorted(spec.price_lags, reverse=True)  # oldest first
    columns: list[FeatureColumn] = []
    for k in lag_order:
        columns.append(FeatureColumn(name=f"price_lag_{k}h", kind="price_lag", hour_offset=-k))
    for sel in spec.exog:
        base = -HOURS_PER_DAY * sel.day_offset
        if sel.mode == "hourly":
            for h in range(HOURS_PER_DAY):
                columns.append(FeatureColumn(
                    name=f"{sel.column}_d{sel.day_offset}_h{h:02d}",
                    kind="exog",
                    hour_offset=base + h,
                    day_ahead=sel.day_offset == 0,
                ))
        else:
            columns.append(FeatureColumn(
                name=f"{sel.column}_d{sel.day_offset}_last",
                kind="exog",
                hour_offset=base + HOURS_PER_DAY - 1,
                day_ahead=sel.day_offset == 0,
            ))
    if spec.weekday:
        columns.append(FeatureColumn(name="weekday_sin", kind="weekday", hour_offset=None))
        columns.append(FeatureColumn(name="weekday_cos", kind="weekday", hour_offset=None))

    n_days = len(usable)
    features = np.empty((n_days, spec.n_features))
    targets = np.empty((n_days, HOURS_PER_DAY))
    dates = []
    for r, a in enumerate(usable):
        parts = [raw.price[[a - k for k in lag_order]]] if lag_order else []
        for sel in spec.exog:
            c = col_index[sel.column]
            base = a - HOURS_PER_DAY * sel.day_offset
            if sel.mode == "hourly":
                parts.append(raw.exog[base:base + HOURS_PER_DAY, c])
            else:
                parts.append(raw.exog[base + HOURS_PER_DAY - 1:base + HOURS_PER_DAY, c])
        day = anchor_date(a)
        if spec.weekday:
            parts.append(encode_weekday(_weekday_of(day), spec.weekday_period))
        features[r] = np.concatenate(parts) if parts else np.empty(0)
        targets[r] = raw.price[a:a + HOURS_PER_DAY]
        dates.append(day)
    return SampleSet(features=features, targets=targets, dates=tuple(dates), columns=tuple(columns))


@dataclass
class ScalerState:
    """Per-column standardization statistics for features and targets."""

    feature_mean: np.ndarray
    feature_std: np.ndarray
    target_mean: np.ndarray
    target_std: np.ndarray

    def transform_features(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.feature_mean) / self.feature_std

    def transform_targets(self, y: np.ndarray) -> np.ndarray:
        return (np.asarray(y, dtype=float) - self.target_mean) / self.target_std

    def invert_targets(self, y_std: np.ndarray) -> np.ndarray:
        """Inverse transform, last axis = hour."""
        return np.asarray(y_std, dtype=float) * self.target_std + self.target_mean

    def invert_quantiles(self, q_std: np.ndarray) -> np.ndarray:
        """Inverse transform of an (hours, levels) matrix, first axis = hour."""
        q_std = np.asarray(q_std, dtype=float)
        return q_std * self.target_std[:, None] + self.target_mean[:, None]


_DEGENERATE_STD = 1e-12


def fit_scaler(samples: SampleSet, fit_rows: int) -> ScalerState:
    """Fit standardization statistics on the first ``fit_rows`` days only.

    Population (1/n) variance; columns with vanishing spread keep unit
    scale so constant features pass through unchanged.
    """
    if not 1 <= fit_rows <= len(samples):
        raise ValueError(f"fit_rows must lie in 1..{len(samples)}, got {fit_rows}")
    fx = samples.features[:fit_rows]
    fy = samples.targets[:fit_rows]

    def stats(m):
        mean = m.mean(axis=0)
        std = m.std(axis=0)  # population
        std = np.where(std < _DEGENERATE_STD, 1.0, std)
        return mean, std

    fmean, fstd = stats(fx)
    tmean, tstd = stats(fy)
    return ScalerState(feature_mean=fmean, feature_std=fstd, target_mean=tmean, target_std=tstd)


def apply_scaler(scaler: ScalerState, samples: SampleSet) -> SampleSet:
    """Standardized copy of ``samples``."""
    return replace(
        samples,
        features=scaler.transform_features(samples.features),
        targets=scaler.transform_targets(samples.targets),
    )


def invert_scaler(scaler: ScalerState, samples: SampleSet) -> SampleSet:
    """Undo :func:`apply_scaler`."""
    return replace(
        samples,
        features=samples.features * scaler.feature_std + scaler.feature_mean,
        targets=scaler.invert_targets(samples.targets),
    )
