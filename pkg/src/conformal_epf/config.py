"""Run configuration: strict file parsing and a canonical echo.

Configs are TOML or JSON with the same nesting. Every key is optional
except the data source when a run actually needs one; unknown keys are
rejected with their dotted path so typos cannot silently fall back to
defaults. ``config_to_dict`` emits the fully resolved settings
(round-trips through ``parse_config``), which the run writes next to
its outputs as provenance.

Sections:

* ``[data]``       CSV path and column names
* ``[features]``   price lags, exogenous selectors, weekday encoding
* ``[backtest]``   head, ensemble size, protocol windows, methods, seed
* ``[train]``      optimizer and architecture settings
* ``[tracker]``    on-line calibration hyper-parameters
* ``[output]``     artifact directory
* ``[evaluation]`` comparison-test norm
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .conformal import TrackerSettings, saturation_constant
from .dataset import CsvSchema, ExogSelector, FeatureSpec
from .errors import ConfigError
from .network import HeadKind, TrainConfig
from .pipeline import BacktestConfig

try:  # py3.11+
    import tomllib as _toml
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as _toml

__all__ = ["RunConfig", "parse_config", "parse_config_file", "config_to_dict"]


@dataclass(frozen=True)
class DataConfig:
    csv: str | None = None
    timestamp_column: str = "timestamp"
    price_column: str = "price"
    exog_columns: tuple[str, ...] = ()

    @property
    def schema(self) -> CsvSchema:
        return CsvSchema(
            timestamp_column=self.timestamp_column,
            price_column=self.price_column,
            exog_columns=tuple(self.exog_columns),
        )


@dataclass(frozen=True)
class RunConfig:
    data: DataConfig = field(default_factory=DataConfig)
    features: FeatureSpec = field(default_factory=FeatureSpec)
    backtest: BacktestConfig = field(default_factory=BacktestConfig)
    out_dir: str | None = None
    dm_norm: int = 1


class _Section:
    """Dict view that tracks consumption and rejects leftovers."""

    def __init__(self, raw: dict, path: str):
        if not isinstance(raw, dict):
            raise ConfigError(f"section {path or '<root>'} must be a table/object")
        self.raw = dict(raw)
        self.path = path

    def _label(self, key: str) -> str:
        return f"{self.path}.{key}" if self.path else key

    def take(self, key: str, default=None):
        return self.raw.pop(key, default)

    def take_typed(self, key: str, kinds, default=None, convert=None):
        if key not in self.raw:
            return default
        value = self.raw.pop(key)
        if not isinstance(value, kinds) or isinstance(value, bool) and bool not in (
            kinds if isinstance(kinds, tuple) else (kinds,)
        ):
            raise ConfigError(f"{self._label(key)} has the wrong type ({type(value).__name__})")
        return convert(value) if convert else value

    def subsection(self, key: str) -> "_Section | None":
        if key not in self.raw:
            return None
        return _Section(self.raw.pop(key), self._label(key))

    def finish(self):
        if self.raw:
            stray = sorted(self._label(k) for k in self.raw)
            raise ConfigError(f"unknown configuration keys: {', '.join(stray)}")


def _string_tuple(value, label: str) -> tuple[str, ...]:
    if not isinstance(value, (list, tuple)) or not all(isinstance(v, str) for v in value):
        raise ConfigError(f"{label} must be a list of strings")
    return tuple(value)


def _number_tuple(value, label: str) -> tuple[float, ...]:
    if not isinstance(value, (list, tuple)) or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
    ):
        raise ConfigError(f"{label} must be a list of numbers")
    return tuple(float(v) for v in value)


def _parse_features(section: _Section | None) -> FeatureSpec:
    if section is None:
        return FeatureSpec()
    lags_raw = section.take("price_lags", 48)
    if isinstance(lags_raw, bool) or not isinstance(lags_raw, (int, list, tuple)):
        raise ConfigError(f"{section.path}.price_lags must be an int or a list of ints")
    if isinstance(lags_raw, int):
        if lags_raw < 0:
            raise ConfigError(f"{section.path}.price_lags must be >= 0")
        lags = tuple(range(1, lags_raw + 1))
    else:
        if not all(isinstance(v, int) and not isinstance(v, bool) for v in lags_raw):
            raise ConfigError(f"{section.path}.price_lags entries must be ints")
        lags = tuple(lags_raw)
    weekday = section.take_typed("weekday", bool, True)
    period = section.take_typed("weekday_period", int, 6)
    exog_raw = section.take("exog", [])
    if not isinstance(exog_raw, list):
        raise ConfigError(f"{section.path}.exog must be an array of tables")
    selectors = []
    for i, entry in enumerate(exog_raw):
        sub = _Section(entry, f"{section.path}.exog[{i}]")
        column = sub.take_typed("column", str)
        if not column:
            raise ConfigError(f"{sub.path}.column is required")
        day_offset = sub.take_typed("day_offset", int, 0)
        mode = sub.take_typed("mode", str, "hourly")
        sub.finish()
        try:
            selectors.append(ExogSelector(column=column, day_offset=day_offset, mode=mode))
        except ValueError as exc:
            raise ConfigError(f"{sub.path}: {exc}") from exc
    section.finish()
    try:
        return FeatureSpec(price_lags=lags, exog=tuple(selectors),
                           weekday=weekday, weekday_period=period)
    except ValueError as exc:
        raise ConfigError(f"{section.path}: {exc}") from exc


def _parse_train(section: _Section | None) -> TrainConfig:
    if section is None:
        return TrainConfig()
    kwargs = {}
    num = (int, float)
    for key, kinds, conv in (
        ("hidden_units", int, int),
        ("learning_rate", num, float),
        ("batch_size", int, int),
        ("max_epochs", int, int),
        ("patience", int, int),
        ("validation_fraction", num, float),
        ("batch_norm", bool, bool),
        ("bn_momentum", num, float),
    ):
        if key in section.raw:
            kwargs[key] = section.take_typed(key, kinds, convert=conv)
    section.finish()
    try:
        return TrainConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"{section.path}: {exc}") from exc


def _parse_tracker(section: _Section | None) -> TrackerSettings:
    if section is None:
        return TrackerSettings()
    kwargs = {}
    num = (int, float)
    horizon = section.take_typed("saturation_horizon", num, None, float)
    margin = section.take_typed("saturation_margin", num, None, float)
    if (horizon is None) != (margin is None):
        raise ConfigError(f"{section.path}: saturation_horizon and saturation_margin go together")
    for key, kinds, conv in (
        ("step_size", num, float),
        ("integral_gain", num, float),
        ("saturation", num, float),
        ("burn_in", int, int),
        ("integrator", str, str),
    ):
        if key in section.raw:
            kwargs[key] = section.take_typed(key, kinds, convert=conv)
    if horizon is not None:
        if "saturation" in kwargs:
            raise ConfigError(f"{section.path}: give either saturation or the horizon/margin pair")
        try:
            kwargs["saturation"] = saturation_constant(horizon, margin)
        except ValueError as exc:
            raise ConfigError(f"{section.path}: {exc}") from exc
    section.finish()
    try:
        return TrackerSettings(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"{section.path}: {exc}") from exc


def parse_config(doc: dict) -> RunConfig:
    """Validate a nested mapping into a fully resolved :class:`RunConfig`."""
    root = _Section(doc, "")

    data_sec = root.subsection("data")
    if data_sec is None:
        data = DataConfig()
    else:
        data = DataConfig(
            csv=data_sec.take_typed("csv", str),
            timestamp_column=data_sec.take_typed("timestamp_column", str, "timestamp"),
            price_column=data_sec.take_typed("price_column", str, "price"),
            exog_columns=_string_tuple(data_sec.take("exog_columns", []),
                                       "data.exog_columns"),
        )
        data_sec.finish()

    features = _parse_features(root.subsection("features"))
    train = _parse_train(root.subsection("train"))
    tracker = _parse_tracker(root.subsection("tracker"))

    bt_sec = root.subsection("backtest")
    bt_kwargs = {"train": train, "tracker": tracker}
    if bt_sec is not None:
        num = (int, float)
        if "head" in bt_sec.raw:
            head = bt_sec.take_typed("head", str)
            try:
                bt_kwargs["head"] = HeadKind(head)
            except ValueError:
                valid = ", ".join(k.value for k in HeadKind)
                raise ConfigError(f"backtest.head must be one of: {valid}; got {head!r}")
        for key, kinds, conv in (
            ("ensemble_size", int, int),
            ("warmup_days", int, int),
            ("test_days", int, int),
            ("window_days", int, int),
            ("n_cal", int, int),
            ("extraction", str, str),
            ("mc_samples", int, int),
            ("seed", int, int),
            ("warm_start", bool, bool),
        ):
            if key in bt_sec.raw:
                bt_kwargs[key] = bt_sec.take_typed(key, kinds, convert=conv)
        if "methods" in bt_sec.raw:
            bt_kwargs["methods"] = _string_tuple(bt_sec.take("methods"), "backtest.methods")
        if "levels" in bt_sec.raw:
            bt_kwargs["levels"] = _number_tuple(bt_sec.take("levels"), "backtest.levels")
        bt_sec.finish()
    try:
        backtest = BacktestConfig(**bt_kwargs)
    except (ConfigError, ValueError) as exc:
        raise ConfigError(f"backtest: {exc}") from exc

    out_sec = root.subsection("output")
    out_dir = None
    if out_sec is not None:
        out_dir = out_sec.take_typed("out_dir", str)
        out_sec.finish()

    eval_sec = root.subsection("evaluation")
    dm_norm = 1
    if eval_sec is not None:
        dm_norm = eval_sec.take_typed("dm_norm", int, 1)
        if dm_norm < 1:
            raise ConfigError("evaluation.dm_norm must be >= 1")
        eval_sec.finish()

    root.finish()
    return RunConfig(data=data, features=features, backtest=backtest,
                     out_dir=out_dir, dm_norm=dm_norm)


def parse_config_file(path) -> RunConfig:
    """Load a TOML (.toml) or JSON (.json) run configuration."""
    text_path = str(path)
    if text_path.endswith(".toml"):
        with open(path, "rb") as handle:
            try:
                doc = _toml.load(handle)
            except _toml.TOMLDecodeError as exc:
                raise ConfigError(f"{path}: invalid TOML: {exc}") from exc
    elif text_path.endswith(".json"):
        with open(path) as handle:
            try:
                doc = json.load(handle)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    else:
        raise ConfigError(f"{path}: config files must end in .toml or .json")
    return parse_config(doc)


def config_to_dict(cfg: RunConfig) -> dict:
    """Fully resolved settings; ``parse_config`` round-trips this."""
    bt = cfg.backtest
    doc = {
        "data": {
            "timestamp_column": cfg.data.timestamp_column,
            "price_column": cfg.data.price_column,
            "exog_columns": list(cfg.data.exog_columns),
        },
        "features": {
            "price_lags": list(cfg.features.price_lags),
            "weekday": cfg.features.weekday,
            "weekday_period": cfg.features.weekday_period,
            "exog": [
                {"column": s.column, "day_offset": s.day_offset, "mode": s.mode}
                for s in cfg.features.exog
            ],
        },
        "backtest": {
            "head": bt.head.value,
            "ensemble_size": bt.ensemble_size,
            "warmup_days": bt.warmup_days,
            "n_cal": bt.n_cal,
            "methods": list(bt.methods),
            "levels": list(bt.levels),
            "extraction": bt.extraction,
            "mc_samples": bt.mc_samples,
            "seed": bt.seed,
            "warm_start": bt.warm_start,
        },
        "train": {
            "hidden_units": bt.train.hidden_units,
            "learning_rate": bt.train.learning_rate,
            "batch_size": bt.train.batch_size,
            "max_epochs": bt.train.max_epochs,
            "patience": bt.train.patience,
            "validation_fraction": bt.train.validation_fraction,
            "batch_norm": bt.train.batch_norm,
            "bn_momentum": bt.train.bn_momentum,
        },
        "tracker": {
            "step_size": bt.tracker.step_size,
            "integral_gain": bt.tracker.integral_gain,
            "saturation": bt.tracker.saturation,
            "burn_in": bt.tracker.burn_in,
            "integrator": bt.tracker.integrator,
        },
        "evaluation": {"dm_norm": cfg.dm_norm},
    }
    if cfg.data.csv is not None:
        doc["data"]["csv"] = cfg.data.csv
    if bt.test_days is not None:
        doc["backtest"]["test_days"] = bt.test_days
    if bt.window_days is not None:
        doc["backtest"]["window_days"] = bt.window_days
    if cfg.out_dir is not None:
        doc["output"] = {"out_dir": cfg.out_dir}
    return doc
