"""Probabilistic day-ahead electricity price forecasting with
conformalized neural network ensembles.

Ensembles of small feed-forward nets (point, quantile-grid or
distributional heads) are retrained daily in a rolling backtest; their
central prediction intervals are calibrated per hour and per bound by
split conformal layers, either in rolling-window form or as on-line
quantile trackers with integral feedback. Evaluation covers coverage
(PICP, unconditional-coverage LR), sharpness (interval score, pinball)
and pairwise predictive-accuracy tests.
"""

from .conformal import (
    ConformalState,
    QuantileTracker,
    ScoreBuffer,
    TrackerSettings,
    conformalize_forecast,
    cqr_corrections,
    saturation_constant,
    split_cp_width,
    tracker_update,
)
from .dataset import (
    CsvSchema,
    ExogSelector,
    FeatureSpec,
    RawSeries,
    SampleSet,
    ScalerState,
    build_sample_matrix,
    encode_weekday,
    fit_scaler,
    parse_market_csv,
    write_market_csv,
)
from .ensembles import (
    DECILES,
    QuantileForecast,
    QuantileGrid,
    dist_to_quantiles,
    sort_quantiles,
    vincentize,
)
from .errors import (
    ConfigError,
    ContinuityError,
    CoverageError,
    DataError,
    ParseError,
    SchemaError,
    StateError,
)
from .evaluation import dm_test, kupiec_test, mae, picp, pinball, winkler_score
from .network import (
    HeadKind,
    MlpParams,
    TrainConfig,
    TrainResult,
    loss_gradient,
    mlp_forward,
    train_member,
)
from .pipeline import (
    BacktestConfig,
    BacktestOutput,
    generate_report,
    run_backtest,
    write_outputs,
)
from .synthetic import QuantileOracle, SyntheticConfig, generate_synthetic

__version__ = "0.1.0"
