"""Ensemble aggregation tests: grids, sorting, averaging, quantile extraction.

Key property (checked by brute force and by hypothesis): re-sorting a
crossed quantile row never increases pinball loss at any level, for any
realization — so the crossing fix is statistically safe.
"""
from __future__ import annotations

import datetime as dt

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conformal_epf import distributions as dists
from conformal_epf.ensembles import (
    DECILES,
    QuantileForecast,
    QuantileGrid,
    dist_to_quantiles,
    point_to_quantiles,
    sort_quantiles,
    vincentize,
)
from conformal_epf.network import pinball_loss


# ------------------------------------------------------------ QuantileGrid


def test_deciles_constant():
    assert DECILES == (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)


def test_grid_alphas_and_pairs():
    grid = QuantileGrid(DECILES)
    assert grid.alphas() == (0.2, 0.4, 0.6, 0.8)
    assert grid.median_index == 4
    assert grid.pair_indices(0.2) == (0, 8)  # q10 / q90
    assert grid.pair_indices(0.8) == (3, 5)  # q40 / q60
    with pytest.raises(ValueError):
        grid.pair_indices(0.5)


def test_grid_validation():
    with pytest.raises(ValueError, match="median"):
        QuantileGrid((0.1, 0.9))
    with pytest.raises(ValueError, match="symmetric partner"):
        QuantileGrid((0.1, 0.5, 0.8))
    with pytest.raises(ValueError, match="increasing"):
        QuantileGrid((0.5, 0.1, 0.9))
    with pytest.raises(ValueError, match="inside"):
        QuantileGrid((0.0, 0.5, 1.0))
    # minimal valid grid
    assert len(QuantileGrid((0.5,))) == 1


# ---------------------------------------------------------- sort_quantiles


def test_sort_fixes_crossing_and_keeps_multiset():
    q = np.array([[3.0, 1.0, 2.0], [1.0, 2.0, 3.0]])
    s = sort_quantiles(q)
    assert np.array_equal(s[0], [1.0, 2.0, 3.0])
    assert np.array_equal(s[1], [1.0, 2.0, 3.0])  # already sorted: unchanged
    assert sorted(q[0]) == list(s[0])  # multiset preserved per row


def test_sort_idempotent():
    rng = np.random.default_rng(0)
    q = rng.normal(size=(24, 9))
    once = sort_quantiles(q)
    assert np.array_equal(once, sort_quantiles(once))


def test_sort_never_increases_pinball_loss_bruteforce():
    # 1000 random crossed rows x several realizations: sorted loss <= raw loss
    rng = np.random.default_rng(42)
    levels = np.array(DECILES)
    for _ in range(1000):
        row = rng.normal(size=9) * 3.0
        y = float(rng.normal() * 3.0)
        raw = pinball_loss(row[None, :], np.array([y]), levels)
        srt = pinball_loss(np.sort(row)[None, :], np.array([y]), levels)
        assert srt <= raw + 1e-12


@given(
    seed=st.integers(min_value=0, max_value=10_000),
    y=st.floats(min_value=-50, max_value=50),
)
@settings(max_examples=150, deadline=None)
def test_sort_never_increases_pinball_loss_property(seed, y):
    rng = np.random.default_rng(seed)
    row = rng.normal(size=9) * 10.0
    levels = np.array(DECILES)
    raw = pinball_loss(row[None, :], np.array([y]), levels)
    srt = pinball_loss(np.sort(row)[None, :], np.array([y]), levels)
    assert srt <= raw + 1e-12


# -------------------------------------------------------------- vincentize


def test_vincentize_is_entrywise_mean():
    a = np.full((24, 9), 1.0)
    b = np.full((24, 9), 3.0)
    assert np.array_equal(vincentize([a, b]), np.full((24, 9), 2.0))


def test_vincentize_single_member_identity():
    rng = np.random.default_rng(1)
    a = rng.normal(size=(24, 9))
    assert np.array_equal(vincentize([a]), a)


def test_vincentize_normal_members_closed_form():
    # two Normal members with equal sigma: probability averaging of
    # quantiles = Normal quantiles of the mean location
    grid = QuantileGrid(DECILES)
    qa = dists.quantile_matrix(dists.NormalParams(mu=np.zeros(24), sigma=np.ones(24)), grid.levels)
    qb = dists.quantile_matrix(dists.NormalParams(mu=np.full(24, 4.0), sigma=np.ones(24)), grid.levels)
    avg = vincentize([qa, qb])
    expect = dists.quantile_matrix(dists.NormalParams(mu=np.full(24, 2.0), sigma=np.ones(24)), grid.levels)
    assert np.allclose(avg, expect, atol=1e-12)


def test_vincentize_rejects_empty():
    with pytest.raises(ValueError):
        vincentize([])


@given(
    n_members=st.integers(min_value=1, max_value=6),
    seed=st.integers(min_value=0, max_value=9999),
)
@settings(max_examples=60, deadline=None)
def test_vincentize_sorted_members_stay_sorted(n_members, seed):
    # mean of row-monotone matrices is row-monotone
    rng = np.random.default_rng(seed)
    members = [np.sort(rng.normal(size=(4, 9)), axis=-1) for _ in range(n_members)]
    avg = vincentize(members)
    assert np.all(np.diff(avg, axis=-1) >= -1e-15)


def test_vincentize_bounds_between_member_extremes():
    rng = np.random.default_rng(7)
    members = [rng.normal(size=(24, 9)) for _ in range(4)]
    avg = vincentize(members)
    stack = np.stack(members)
    assert np.all(avg <= stack.max(axis=0) + 1e-15)
    assert np.all(avg >= stack.min(axis=0) - 1e-15)


# --------------------------------------------------------- dist_to_quantiles


def test_analytic_extraction_normal_deciles():
    grid = QuantileGrid(DECILES)
    params = dists.NormalParams(mu=np.zeros(24), sigma=np.ones(24))
    q = dist_to_quantiles(params, grid, extraction="analytic")
    assert q.shape == (24, 9)
    expect = [-1.2815515655446004, -0.8416212335729143, -0.5244005127080407,
              -0.2533471031357997, 0.0, 0.2533471031357997,
              0.5244005127080407, 0.8416212335729143, 1.2815515655446004]
    assert np.allclose(q[0], expect, atol=1e-9)
    assert np.allclose(q[23], expect, atol=1e-9)


def test_monte_carlo_close_to_analytic():
    grid = QuantileGrid(DECILES)
    params = dists.JsuParams(loc=np.full(24, 2.0), scale=np.full(24, 1.5),
                             tail=np.full(24, 2.0), skew=np.full(24, 0.6))
    ana = dist_to_quantiles(params, grid, extraction="analytic")
    mc = dist_to_quantiles(params, grid, extraction="monte_carlo",
                           mc_samples=200_000, rng=np.random.default_rng(3))
    assert np.max(np.abs(mc - ana)) < 0.05


def test_monte_carlo_deterministic_under_seed():
    grid = QuantileGrid(DECILES)
    params = dists.NormalParams(mu=np.zeros(24), sigma=np.ones(24))
    a = dist_to_quantiles(params, grid, "monte_carlo", 500, np.random.default_rng(9))
    b = dist_to_quantiles(params, grid, "monte_carlo", 500, np.random.default_rng(9))
    assert np.array_equal(a, b)


def test_monte_carlo_requires_rng_and_enough_samples():
    grid = QuantileGrid(DECILES)
    params = dists.NormalParams(mu=np.zeros(24), sigma=np.ones(24))
    with pytest.raises(ValueError, match="random generator"):
        dist_to_quantiles(params, grid, "monte_carlo")
    with pytest.raises(ValueError, match="mc_samples"):
        dist_to_quantiles(params, grid, "monte_carlo", 1, np.random.default_rng(0))
    with pytest.raises(ValueError, match="unknown extraction"):
        dist_to_quantiles(params, grid, "exact")


# ---------------------------------------------------------- point forecast


def test_point_to_quantiles_repeats_columns():
    grid = QuantileGrid(DECILES)
    point = np.arange(24.0)
    q = point_to_quantiles(point, grid)
    assert q.shape == (24, 9)
    assert np.all(q == point[:, None])
    with pytest.raises(ValueError):
        point_to_quantiles(np.arange(23.0), grid)


# -------------------------------------------------------- QuantileForecast


def test_quantile_forecast_monotone_flag():
    date = dt.date(2020, 1, 1)
    good = QuantileForecast(date, np.tile(np.arange(9.0), (24, 1)))
    assert good.is_monotone
    bad_q = np.tile(np.arange(9.0), (24, 1))
    bad_q[3, [0, 1]] = [5.0, -1.0]
    bad = QuantileForecast(date, bad_q)
    assert not bad.is_monotone


def test_quantile_forecast_shape_validation():
    with pytest.raises(ValueError):
        QuantileForecast(dt.date(2020, 1, 1), np.zeros((24, 8)))
