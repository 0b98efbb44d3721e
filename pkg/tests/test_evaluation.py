"""Evaluation metric tests against hand-derived and scipy oracles."""
from __future__ import annotations

import math

import numpy as np
import pytest
import scipy.stats as sst
from hypothesis import given, settings
from hypothesis import strategies as st

from conformal_epf.evaluation import (
    CHI2_CRITICAL_95,
    DmResult,
    KupiecResult,
    daily_point_loss,
    dm_test,
    kupiec_test,
    mae,
    mean_winkler,
    picp,
    pinball,
    winkler_score,
)


# -------------------------------------------------------------------- picp


def test_picp_hand_values():
    lower = np.zeros(4)
    upper = np.ones(4)
    y = np.array([0.5, 1.0, 0.0, 2.0])  # closed interval: 3 of 4 inside
    assert picp(lower, upper, y) == pytest.approx(0.75)


def test_picp_closed_interval_boundary_counts():
    assert picp([0.0], [1.0], [1.0]) == 1.0
    assert picp([0.0], [1.0], [0.0]) == 1.0
    assert picp([0.0], [1.0], [1.0000001]) == 0.0


def test_picp_validation():
    with pytest.raises(ValueError, match="undercut"):
        picp([1.0], [0.0], [0.5])
    with pytest.raises(ValueError, match="empty"):
        picp([], [], [])


# ------------------------------------------------------------------ kupiec


def test_kupiec_zero_statistic_at_exact_coverage():
    # empirical rate == nominal rate -> LR = 0, no rejection
    res = kupiec_test(n_hits=80, n_violations=20, alpha=0.2)
    assert res.statistic == pytest.approx(0.0, abs=1e-12)
    assert not res.reject
    assert res.p_value == pytest.approx(1.0, abs=1e-9)


def test_kupiec_hand_value_seventy_thirty():
    # 70 hits / 30 violations at alpha = 0.2
    res = kupiec_test(70, 30, 0.2)
    expect = -2.0 * (30 * math.log(0.2) + 70 * math.log(0.8)
                     - 30 * math.log(0.3) - 70 * math.log(0.7))
    assert res.statistic == pytest.approx(expect, abs=1e-12)
    assert res.statistic == pytest.approx(5.633511519056668, abs=1e-3)
    assert res.reject  # 5.63 > 3.841459


def test_kupiec_all_hits_hand_value():
    # n1=100, n0=0 at alpha=0.2: statistic = -2 * 100 * ln(0.8)
    res = kupiec_test(100, 0, 0.2)
    expect = -2.0 * 100.0 * math.log(0.8)
    assert res.statistic == pytest.approx(expect, abs=1e-12)
    assert res.statistic == pytest.approx(44.628710262841945, abs=1e-9)
    assert res.reject


def test_kupiec_scipy_chi2_pvalue():
    res = kupiec_test(90, 10, 0.2)
    assert res.p_value == pytest.approx(float(sst.chi2.sf(res.statistic, df=1)), rel=1e-10)


def test_kupiec_rejection_threshold():
    assert CHI2_CRITICAL_95 == 3.841459
    # find a boundary case: statistic just beyond the critical value rejects
    res = kupiec_test(88, 12, 0.2)
    if res.statistic > CHI2_CRITICAL_95:
        assert res.reject
    else:
        assert not res.reject


def test_kupiec_symmetric_in_direction():
    over = kupiec_test(90, 10, 0.2)   # overcoverage
    under = kupiec_test(70, 30, 0.2)  # undercoverage
    assert over.statistic > 0 and under.statistic > 0


def test_kupiec_validation():
    with pytest.raises(ValueError):
        kupiec_test(0, 0, 0.2)
    with pytest.raises(ValueError):
        kupiec_test(-1, 5, 0.2)
    with pytest.raises(ValueError):
        kupiec_test(5, 5, 0.0)


@given(
    n=st.integers(min_value=20, max_value=400),
    rate=st.floats(min_value=0.02, max_value=0.98),
    alpha=st.sampled_from([0.2, 0.4, 0.6, 0.8]),
)
@settings(max_examples=100, deadline=None)
def test_kupiec_statistic_nonnegative_and_zero_iff_exact(n, rate, alpha):
    n1 = int(round(n * rate))
    n0 = n - n1
    if n1 + n0 == 0:
        return
    res = kupiec_test(n1, n0, alpha)
    assert res.statistic >= 0.0
    if abs(n1 / n - (1 - alpha)) < 1e-12:
        assert res.statistic == pytest.approx(0.0, abs=1e-9)


# ----------------------------------------------------------------- winkler


def test_winkler_inside_is_width():
    assert winkler_score(1.0, 3.0, 2.0, 0.2) == pytest.approx(2.0)
    assert winkler_score(1.0, 3.0, 1.0, 0.2) == pytest.approx(2.0)  # boundary


def test_winkler_outside_penalty_hand_values():
    # below: width 2 + (2/0.2) * 0.5 = 7
    assert winkler_score(1.0, 3.0, 0.5, 0.2) == pytest.approx(7.0)
    # above: width 2 + 10 * 1.5 = 17
    assert winkler_score(1.0, 3.0, 4.5, 0.2) == pytest.approx(17.0)
    # narrower nominal (alpha=0.5): width 2 + 4 * 0.5 = 4
    assert winkler_score(1.0, 3.0, 0.5, 0.5) == pytest.approx(4.0)


def test_winkler_validation():
    with pytest.raises(ValueError):
        winkler_score(3.0, 1.0, 2.0, 0.2)
    with pytest.raises(ValueError):
        winkler_score(1.0, 3.0, 2.0, 1.0)


def test_mean_winkler_averages():
    lower = [1.0, 1.0]
    upper = [3.0, 3.0]
    y = [2.0, 0.5]  # scores 2 and 7
    assert mean_winkler(lower, upper, y, 0.2) == pytest.approx(4.5)
    with pytest.raises(ValueError):
        mean_winkler([1.0], [3.0, 4.0], [2.0], 0.2)


@given(
    width=st.floats(min_value=0.0, max_value=10.0),
    offset=st.floats(min_value=-10.0, max_value=10.0),
    alpha=st.sampled_from([0.2, 0.4, 0.8]),
)
@settings(max_examples=100, deadline=None)
def test_winkler_minimized_inside_interval(width, offset, alpha):
    lower, upper = -width / 2, width / 2
    inside = winkler_score(lower, upper, 0.0, alpha)
    outside = winkler_score(lower, upper, upper + abs(offset) + 1e-6, alpha)
    assert inside == pytest.approx(width)
    assert outside > inside


# --------------------------------------------------------- point/prob losses


def test_mae_hand_value():
    assert mae([1.0, 2.0], [2.0, 0.0]) == pytest.approx(1.5)


def test_pinball_matches_training_loss_convention():
    # q=2, y=1, level .25: diff=-1 -> (0.25-1)(-1) = 0.75
    assert pinball(np.array([[2.0]]), np.array([1.0]), [0.25]) == pytest.approx(0.75)
    # q=0, y=1, level .25: diff=1 -> 0.25
    assert pinball(np.array([[0.0]]), np.array([1.0]), [0.25]) == pytest.approx(0.25)


def test_daily_point_loss_norms():
    errors = np.array([[3.0, -4.0], [1.0, 1.0]])
    l1 = daily_point_loss(errors, norm=1)
    assert np.allclose(l1, [7.0, 2.0])
    l2 = daily_point_loss(errors, norm=2)
    assert np.allclose(l2, [5.0, math.sqrt(2.0)])
    with pytest.raises(ValueError):
        daily_point_loss(errors, norm=0)


# ---------------------------------------------------------------- DM test


def test_dm_statistic_hand_value():
    # d = [1, 1, 1, -3]: mean -0 ... compute directly
    a = np.array([2.0, 2.0, 2.0, 0.0])
    b = np.array([1.0, 1.0, 1.0, 3.0])
    d = a - b
    expect = math.sqrt(4) * d.mean() / d.std()
    res = dm_test(a, b)
    assert res.statistic == pytest.approx(expect, abs=1e-12)
    assert res.p_left == pytest.approx(float(sst.norm.cdf(expect)), abs=1e-12)
    assert res.p_right == pytest.approx(float(sst.norm.sf(expect)), abs=1e-12)


def test_dm_antisymmetry():
    rng = np.random.default_rng(0)
    a = rng.normal(size=50) ** 2
    b = rng.normal(size=50) ** 2
    ab = dm_test(a, b)
    ba = dm_test(b, a)
    assert ab.statistic == pytest.approx(-ba.statistic, abs=1e-12)
    assert ab.p_left == pytest.approx(ba.p_right, abs=1e-12)
    assert ab.p_right == pytest.approx(ba.p_left, abs=1e-12)


def test_dm_detects_dominated_forecaster():
    rng = np.random.default_rng(1)
    base = rng.normal(size=300) ** 2 + 1.0
    worse = base + 0.5 + rng.normal(size=300) * 0.1
    res = dm_test(base, worse)
    assert res.statistic < -5.0
    assert res.p_left < 1e-6  # "base beats worse" overwhelmingly
    assert res.significant()


def test_dm_zero_mean_differential_pvalues_are_uniformish():
    # 200 independent null streams: mean one-sided p-value ~ 0.5
    rng = np.random.default_rng(7)
    p_lefts = []
    for _ in range(200):
        a = rng.normal(size=80)
        b = rng.normal(size=80)
        p_lefts.append(dm_test(a, b).p_left)
    assert np.mean(p_lefts) == pytest.approx(0.5, abs=0.05)


def test_dm_degenerate_differential_raises():
    a = np.ones(10)
    with pytest.raises(ValueError, match="degenerate"):
        dm_test(a, a.copy())
    with pytest.raises(ValueError, match="degenerate"):
        dm_test(a, a + 3.0)  # constant nonzero differential: still zero variance


def test_dm_length_validation():
    with pytest.raises(ValueError):
        dm_test([1.0], [2.0])
    with pytest.raises(ValueError):
        dm_test([1.0, 2.0], [1.0, 2.0, 3.0])


def test_dm_population_std_convention():
    # explicit: uses 1/N, not 1/(N-1)
    a = np.array([1.0, 2.0, 3.0])
    b = np.zeros(3)
    d = a - b
    pop = math.sqrt(3) * d.mean() / np.std(d)
    sample = math.sqrt(3) * d.mean() / np.std(d, ddof=1)
    res = dm_test(a, b)
    assert res.statistic == pytest.approx(pop, abs=1e-12)
    assert abs(res.statistic - sample) > 1e-3


def test_result_types():
    assert isinstance(kupiec_test(10, 2, 0.2), KupiecResult)
    assert isinstance(dm_test([1.0, 2.0], [2.0, 1.0]), DmResult)
