"""Shared fixtures: tiny synthetic datasets and fast backtest configs.

Everything here is sized for test speed; the acceptance suite runs the
larger, statistically meaningful configurations.
"""
from __future__ import annotations

import numpy as np
import pytest

from conformal_epf.dataset import FeatureSpec, build_sample_matrix
from conformal_epf.network import HeadKind, TrainConfig
from conformal_epf.pipeline import BacktestConfig
from conformal_epf.synthetic import SyntheticConfig, generate_synthetic


@pytest.fixture(scope="session")
def tiny_series():
    """140 days of synthetic prices plus the generating oracle."""
    return generate_synthetic(SyntheticConfig(n_days=140, seed=11))


@pytest.fixture(scope="session")
def tiny_samples(tiny_series):
    raw, _ = tiny_series
    spec = FeatureSpec(price_lags=tuple(range(1, 25)))
    return build_sample_matrix(raw, spec)


def fast_backtest_config(**overrides) -> BacktestConfig:
    """A backtest config small enough for unit tests (seconds, not minutes)."""
    defaults = dict(
        head=HeadKind.QUANTILE,
        ensemble_size=2,
        warmup_days=15,
        test_days=10,
        window_days=70,
        n_cal=30,
        methods=("cqr", "ocq"),
        seed=7,
        train=TrainConfig(hidden_units=16, max_epochs=20, patience=4,
                          batch_size=32),
    )
    defaults.update(overrides)
    return BacktestConfig(**defaults)


def rng(seed: int = 0) -> np.random.Generator:
    return np.random.default_rng(seed)
