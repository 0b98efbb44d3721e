"""Dataset layer tests: CSV ingestion, feature assembly, scaling.

The feature-matrix oracle is hand assembly with explicit indexing on tiny
series where every value is chosen to be identifiable (price = day*100 +
hour), so any misalignment of lags or exogenous blocks shows up as an
exact-value mismatch.
"""
from __future__ import annotations

import datetime as dt
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conformal_epf.dataset import (
    HOURS_PER_DAY,
    CsvSchema,
    ExogSelector,
    FeatureSpec,
    RawSeries,
    ScalerState,
    apply_scaler,
    build_sample_matrix,
    encode_weekday,
    fit_scaler,
    invert_scaler,
    parse_market_csv,
    write_market_csv,
)
from conformal_epf.errors import (
    ContinuityError,
    CoverageError,
    ParseError,
    SchemaError,
)


def hourly_stamps(start: str, n: int) -> np.ndarray:
    return np.datetime64(start, "h") + np.arange(n)


def coded_series(n_days: int, start="2020-01-06") -> RawSeries:
    """price[day, hour] = 100*day + hour — every cell self-identifies."""
    n = n_days * HOURS_PER_DAY
    prices = np.array([100 * (i // 24) + (i % 24) for i in range(n)], dtype=float)
    return RawSeries(timestamps=hourly_stamps(start + "T00", n), price=prices, exog=np.zeros((n, 0)))


# ----------------------------------------------------------- RawSeries


def test_raw_series_detects_gap_naming_instant():
    ts = np.concatenate([hourly_stamps("2020-01-01T00", 5), hourly_stamps("2020-01-01T06", 3)])
    with pytest.raises(ContinuityError, match="2020-01-01T05"):
        RawSeries(timestamps=ts, price=np.zeros(8), exog=np.zeros((8, 0)))


def test_raw_series_detects_duplicate_naming_instant():
    ts = np.array(["2020-01-01T00", "2020-01-01T01", "2020-01-01T01"], dtype="datetime64[h]")
    with pytest.raises(ContinuityError, match="duplicated instant 2020-01-01T01"):
        RawSeries(timestamps=ts, price=np.zeros(3), exog=np.zeros((3, 0)))


def test_raw_series_rejects_non_finite_price():
    ts = hourly_stamps("2020-01-01T00", 3)
    with pytest.raises(ParseError, match="non-finite"):
        RawSeries(timestamps=ts, price=np.array([1.0, np.nan, 2.0]), exog=np.zeros((3, 0)))


def test_raw_series_rejects_mismatched_exog_names():
    ts = hourly_stamps("2020-01-01T00", 2)
    with pytest.raises(ValueError, match="exog has 1 columns but 0 names"):
        RawSeries(timestamps=ts, price=np.zeros(2), exog=np.zeros((2, 1)))


# ------------------------------------------------------------ CSV layer


def test_csv_roundtrip_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    n = 72
    raw = RawSeries(
        timestamps=hourly_stamps("2021-03-01T00", n),
        price=rng.normal(size=n) * 17.3,
        exog=rng.normal(size=(n, 2)),
        exog_names=("load", "wind"),
    )
    path = tmp_path / "series.csv"
    write_market_csv(path, raw)
    back = parse_market_csv(path, CsvSchema(exog_columns=("load", "wind")))
    assert np.array_equal(back.timestamps, raw.timestamps)
    assert np.array_equal(back.price, raw.price)  # repr() round-trips floats
    assert np.array_equal(back.exog, raw.exog)
    assert back.exog_names == ("load", "wind")


def test_parse_sorts_unsorted_rows(tmp_path):
    path = tmp_path / "shuffled.csv"
    path.write_text(
        "timestamp,price\n"
        "2020-01-01T02:00,3.0\n"
        "2020-01-01T00:00,1.0\n"
        "2020-01-01T01:00,2.0\n"
    )
    raw = parse_market_csv(path)
    assert np.array_equal(raw.price, [1.0, 2.0, 3.0])


def test_parse_missing_columns_lists_them(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("time,cost\n2020-01-01T00:00,1.0\n")
    with pytest.raises(SchemaError) as err:
        parse_market_csv(path)
    assert "timestamp" in str(err.value) and "price" in str(err.value)


def test_parse_bad_timestamp_names_row(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("timestamp,price\n2020-01-01T00:00,1.0\nnot-a-date,2.0\n")
    with pytest.raises(ParseError, match="row 3"):
        parse_market_csv(path)


def test_parse_non_numeric_price_names_row(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("timestamp,price\n2020-01-01T00:00,1.0\n2020-01-01T01:00,oops\n")
    with pytest.raises(ParseError, match="row 3"):
        parse_market_csv(path)


def test_parse_rejects_sub_hourly_and_tz_aware(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("timestamp,price\n2020-01-01T00:30,1.0\n")
    with pytest.raises(ParseError, match="hourly grid"):
        parse_market_csv(path)
    path.write_text("timestamp,price\n2020-01-01T00:00+01:00,1.0\n")
    with pytest.raises(ParseError, match="timezone-naive"):
        parse_market_csv(path)


def test_parse_gap_detected_after_sorting(tmp_path):
    path = tmp_path / "gap.csv"
    path.write_text(
        "timestamp,price\n2020-01-01T00:00,1.0\n2020-01-01T02:00,2.0\n"
    )
    with pytest.raises(ContinuityError, match="2020-01-01T01"):
        parse_market_csv(path)


def test_parse_empty_and_headerless(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("")
    with pytest.raises(SchemaError, match="empty file"):
        parse_market_csv(path)
    path.write_text("timestamp,price\n")
    with pytest.raises(SchemaError, match="no data rows"):
        parse_market_csv(path)


# ------------------------------------------------------- weekday encoding


def test_encode_weekday_monday_period6():
    assert np.allclose(encode_weekday(0), [0.0, 1.0], atol=1e-15)


def test_encode_weekday_d3_period6_hand_value():
    # angle = pi: sin = 0, cos = -1
    out = encode_weekday(3, period=6)
    assert out[0] == pytest.approx(0.0, abs=1e-12)
    assert out[1] == pytest.approx(-1.0, abs=1e-15)


def test_encode_weekday_period6_aliases_sunday_to_monday():
    # period-6 encoding folds day 6 onto day 0 (weekend similarity)
    assert np.allclose(encode_weekday(6, period=6), encode_weekday(0, period=6), atol=1e-12)


def test_encode_weekday_period7_all_distinct():
    codes = [tuple(encode_weekday(d, period=7)) for d in range(7)]
    assert len(set(codes)) == 7
    for d, (s, c) in enumerate(codes):
        assert s == pytest.approx(math.sin(2 * math.pi * d / 7), abs=1e-15)
        assert c == pytest.approx(math.cos(2 * math.pi * d / 7), abs=1e-15)


def test_encode_weekday_domain_errors():
    with pytest.raises(ValueError):
        encode_weekday(7)
    with pytest.raises(ValueError):
        encode_weekday(-1)
    with pytest.raises(ValueError):
        encode_weekday(0, period=0)


# ------------------------------------------------------------ FeatureSpec


def test_feature_spec_default_is_48_lags_plus_weekday():
    spec = FeatureSpec()
    assert spec.price_lags == tuple(range(1, 49))
    assert spec.n_features == 48 + 2


def test_feature_spec_rich_exog_arithmetic():
    # 48 lags + 3 hourly blocks + 1 closing value + 2 weekday = 123
    spec = FeatureSpec(
        price_lags=tuple(range(1, 49)),
        exog=(
            ExogSelector("load_forecast", day_offset=0, mode="hourly"),
            ExogSelector("res_forecast", day_offset=0, mode="hourly"),
            ExogSelector("res_forecast", day_offset=1, mode="hourly"),
            ExogSelector("gas_price", day_offset=2, mode="last"),
        ),
    )
    assert spec.n_features == 123


def test_feature_spec_rejects_bad_lags():
    with pytest.raises(ValueError, match="duplicates"):
        FeatureSpec(price_lags=(1, 2, 2))
    with pytest.raises(ValueError, match=">= 1"):
        FeatureSpec(price_lags=(0, 1))


def test_exog_selector_validation():
    with pytest.raises(ValueError):
        ExogSelector("x", day_offset=-1)
    with pytest.raises(ValueError):
        ExogSelector("x", mode="weekly")


# ----------------------------------------------------- build_sample_matrix


def test_sample_matrix_lag_alignment_hand_check():
    raw = coded_series(4)  # days 0..3, price = 100*d + h
    spec = FeatureSpec(price_lags=(1, 24, 25), weekday=False)
    samples = build_sample_matrix(raw, spec)
    # max lag 25h: day 0 (no history) and day 1 (25h before hour 0 is
    # day -1 hour 23) are unusable -> wait: day1 anchor=24, 24-25 < 0.
    assert [d.isoformat() for d in samples.dates] == ["2020-01-08", "2020-01-09"]
    # columns oldest-first: lag 25, lag 24, lag 1
    assert [c.name for c in samples.columns] == ["price_lag_25h", "price_lag_24h", "price_lag_1h"]
    # delivery day 2 (anchor 48): lag25 -> idx 23 (=d0 h23 = 23),
    # lag24 -> idx 24 (=d1 h0 = 100), lag1 -> idx 47 (=d1 h23 = 123)
    assert np.array_equal(samples.features[0], [23.0, 100.0, 123.0])
    assert np.array_equal(samples.targets[0], 200.0 + np.arange(24.0))
    assert np.array_equal(samples.features[1], [123.0, 200.0, 223.0])


def test_sample_matrix_exog_day_offsets_hand_check():
    n_days = 5
    n = n_days * 24
    # exog columns: load[i] = 1000 + i, gas[i] = 5000 + i
    raw = RawSeries(
        timestamps=hourly_stamps("2020-01-06T00", n),
        price=np.arange(n, dtype=float),
        exog=np.stack([1000.0 + np.arange(n), 5000.0 + np.arange(n)], axis=1),
        exog_names=("load", "gas"),
    )
    spec = FeatureSpec(
        price_lags=(1,),
        exog=(
            ExogSelector("load", day_offset=0, mode="hourly"),   # delivery-day forecast
            ExogSelector("load", day_offset=1, mode="hourly"),   # previous day
            ExogSelector("gas", day_offset=2, mode="last"),      # close two days back
        ),
        weekday=False,
    )
    samples = build_sample_matrix(raw, spec)
    # first usable day needs 2 full days back (gas d2 last -> index a-48+23)
    assert samples.dates[0].isoformat() == "2020-01-08"
    a = 48  # anchor of first usable day
    row = samples.features[0]
    assert row[0] == a - 1  # price lag 1
    assert np.array_equal(row[1:25], 1000.0 + np.arange(a, a + 24))      # load d0
    assert np.array_equal(row[25:49], 1000.0 + np.arange(a - 24, a))     # load d1
    assert row[49] == 5000.0 + (a - 48 + 23)                              # gas d2 close
    # provenance flags: only day-ahead block may reach into the delivery day
    for col in samples.columns:
        if not col.day_ahead and col.kind != "weekday":
            assert col.hour_offset is not None and col.hour_offset < 0


def test_sample_matrix_weekday_column():
    raw = coded_series(4, start="2020-01-06")  # a Monday
    spec = FeatureSpec(price_lags=(1,), weekday=True, weekday_period=6)
    samples = build_sample_matrix(raw, spec)
    # first usable day = day 1 (lag 1 only) = Tuesday (weekday index 1)
    assert samples.dates[0].weekday() == 1
    expect = encode_weekday(1, 6)
    assert np.allclose(samples.features[0][-2:], expect, atol=1e-15)


def test_sample_matrix_explicit_range_and_coverage_error():
    raw = coded_series(6)
    spec = FeatureSpec(price_lags=(1, 48), weekday=False)
    usable = build_sample_matrix(raw, spec)
    assert usable.dates[0].isoformat() == "2020-01-08"  # needs 2 days of history

    subset = build_sample_matrix(raw, spec, start="2020-01-09", end="2020-01-10")
    assert [d.isoformat() for d in subset.dates] == ["2020-01-09", "2020-01-10"]

    with pytest.raises(CoverageError, match="2020-01-07"):
        build_sample_matrix(raw, spec, start="2020-01-07")
    # requesting past the series end names the first uncovered day
    with pytest.raises(CoverageError, match="2020-01-12"):
        build_sample_matrix(raw, spec, start="2020-01-09", end="2020-02-01")


def test_sample_matrix_rejects_unknown_exog():
    raw = coded_series(4)
    spec = FeatureSpec(price_lags=(1,), exog=(ExogSelector("wind"),), weekday=False)
    with pytest.raises(SchemaError, match="wind"):
        build_sample_matrix(raw, spec)


def test_sample_matrix_partial_leading_day():
    # series starting at 13:00 — first anchor is the next midnight
    n = 11 + 48
    raw = RawSeries(timestamps=hourly_stamps("2020-01-01T13", n), price=np.arange(n, dtype=float), exog=np.zeros((n, 0)))
    spec = FeatureSpec(price_lags=(1,), weekday=False)
    samples = build_sample_matrix(raw, spec)
    assert samples.dates[0].isoformat() == "2020-01-02"
    assert samples.targets[0][0] == 11.0  # price at 2020-01-02T00


# ----------------------------------------------------------------- scaler


def test_fit_scaler_population_std_hand_value():
    features = np.array([[1.0], [3.0], [99.0], [99.0]])
    targets = np.tile(np.array([[1.0], [3.0], [99.0], [99.0]]), (1, 24))
    samples = _as_samples(features, targets)
    scaler = fit_scaler(samples, fit_rows=2)  # only {1, 3}
    assert scaler.feature_mean[0] == 2.0
    assert scaler.feature_std[0] == 1.0  # population: sqrt(((1)^2+(1)^2)/2)
    assert scaler.target_mean[0] == 2.0 and scaler.target_std[0] == 1.0


def test_fit_scaler_degenerate_column_keeps_unit_scale():
    features = np.full((5, 2), 7.0)
    features[:, 1] = np.arange(5.0)
    samples = _as_samples(features, np.random.default_rng(0).normal(size=(5, 24)))
    scaler = fit_scaler(samples, fit_rows=5)
    assert scaler.feature_std[0] == 1.0
    z = scaler.transform_features(features)
    assert np.all(np.isfinite(z))
    assert np.allclose(z[:, 0], 0.0)


def test_scaler_roundtrip():
    rng = np.random.default_rng(3)
    samples = _as_samples(rng.normal(size=(10, 4)) * 9 + 2, rng.normal(size=(10, 24)) * 5 - 1)
    scaler = fit_scaler(samples, fit_rows=7)
    back = invert_scaler(scaler, apply_scaler(scaler, samples))
    assert np.allclose(back.features, samples.features, atol=1e-12)
    assert np.allclose(back.targets, samples.targets, atol=1e-12)


def test_invert_quantiles_matrix_semantics():
    scaler = ScalerState(
        feature_mean=np.zeros(1), feature_std=np.ones(1),
        target_mean=np.arange(24.0), target_std=np.full(24, 2.0),
    )
    q_std = np.zeros((24, 9))
    q_std[:, 0] = -1.0
    q = scaler.invert_quantiles(q_std)
    assert q.shape == (24, 9)
    assert np.array_equal(q[:, 0], np.arange(24.0) - 2.0)
    assert np.array_equal(q[:, 5], np.arange(24.0))


def test_fit_scaler_rejects_bad_fit_rows():
    samples = _as_samples(np.zeros((3, 2)), np.zeros((3, 24)))
    with pytest.raises(ValueError):
        fit_scaler(samples, 0)
    with pytest.raises(ValueError):
        fit_scaler(samples, 4)


def _as_samples(features: np.ndarray, targets: np.ndarray):
    from conformal_epf.dataset import FeatureColumn, SampleSet

    n, k = features.shape
    return SampleSet(
        features=features,
        targets=targets,
        dates=tuple(dt.date(2020, 1, 1) + dt.timedelta(days=i) for i in range(n)),
        columns=tuple(FeatureColumn(f"f{i}", "price_lag", -1) for i in range(k)),
    )


# ------------------------------------------------------------- properties


@given(
    n_days=st.integers(min_value=3, max_value=8),
    max_lag=st.sampled_from([1, 24, 48]),
    weekday=st.booleans(),
)
@settings(max_examples=40, deadline=None)
def test_sample_matrix_shape_property(n_days, max_lag, weekday):
    raw = coded_series(n_days)
    spec = FeatureSpec(price_lags=tuple(range(1, max_lag + 1)), weekday=weekday)
    back_days = (max_lag + HOURS_PER_DAY - 1) // HOURS_PER_DAY
    expect_rows = n_days - back_days
    samples = build_sample_matrix(raw, spec)
    assert samples.features.shape == (expect_rows, spec.n_features)
    assert samples.targets.shape == (expect_rows, HOURS_PER_DAY)
    assert len(samples.columns) == spec.n_features
    assert np.all(np.isfinite(samples.features))
    # chronological, consecutive delivery dates
    for a, b in zip(samples.dates, samples.dates[1:]):
        assert (b - a).days == 1


@given(
    rows=st.integers(min_value=2, max_value=12),
    cols=st.integers(min_value=1, max_value=6),
    seed=st.integers(min_value=0, max_value=999),
)
@settings(max_examples=40, deadline=None)
def test_scaler_roundtrip_property(rows, cols, seed):
    rng = np.random.default_rng(seed)
    samples = _as_samples(rng.normal(size=(rows, cols)) * 13, rng.normal(size=(rows, 24)))
    scaler = fit_scaler(samples, fit_rows=rows)
    back = invert_scaler(scaler, apply_scaler(scaler, samples))
    assert np.allclose(back.features, samples.features, atol=1e-9)
    assert np.allclose(back.targets, samples.targets, atol=1e-9)
    # standardized training block has zero mean (population)
    z = apply_scaler(scaler, samples)
    assert np.allclose(z.features.mean(axis=0), 0.0, atol=1e-9)
