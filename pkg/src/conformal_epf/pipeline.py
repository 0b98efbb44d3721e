"""Rolling day-ahead backtest with daily recalibration.

For each processed day ``t`` (warm-up, then test):

1. slide the training window up to (not including) ``t``; the window
   length is fixed at either ``window_days`` or the history available
   at the first processed day;
2. fit the standardizer on the window's chronological training prefix
   (the part early stopping never validates on), standardize, train
   ``ensemble_size`` members with per-(day, member) derived seeds;
3. forecast day ``t``: per-member quantile matrices (closed form or
   Monte Carlo), inverse-transform, sort, average entrywise across
   members, sort again -> the uncalibrated "base" forecast;
4. on test days, emit the base forecast plus every configured
   calibration method using only state accumulated before ``t``;
5. observe day ``t``, push its conformity scores into the rolling
   buffers, and update the on-line trackers.

Calibration state is seeded during warm-up: buffers fill with genuine
one-day-ahead scores, and the on-line trackers are born after the first
warm-up day (seeded at that day's buffer correction) and update on every
subsequent day. Running the trackers through warm-up lets their
integral-action gain (~log t / t) decay before the first emission, so
test-window output is past the hot early-step transient. Forecasts are
always genuine one-day-ahead quantities: no statistic computed from day
``t`` influences the forecast of day ``t``.

Artifacts are deterministic given the config: forecasts.csv,
conformal_state.json, metrics and report files are byte-stable across
re-runs; wall-clock metadata lives in a separate run_info.json.
"""

from __future__ import annotations

import dataclasses
import datetime as dt
import hashlib
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import distributions as dists
from .conformal import (
    ConformalState,
    TrackerSettings,
    conformalize_forecast,
    state_from_dict,
    state_to_dict,
)
from .dataset import HOURS_PER_DAY, SampleSet, ScalerState, fit_scaler
from .ensembles import (
    DECILES,
    QuantileForecast,
    QuantileGrid,
    dist_to_quantiles,
    point_to_quantiles,
    sort_quantiles,
    vincentize,
)
from .errors import ConfigError, DataError
from .evaluation import (
    DmResult,
    KupiecResult,
    daily_point_loss,
    dm_test,
    kupiec_test,
    mae,
    mean_winkler,
    picp,
    pinball,
)
from .network import HeadKind, MlpParams, TrainConfig, mlp_forward, train_member

__all__ = [
    "BacktestConfig",
    "DayRecord",
    "BacktestOutput",
    "derive_member_seed",
    "run_backtest",
    "generate_report",
    "MethodMetrics",
    "DmEntry",
    "Report",
    "render_report",
    "write_outputs",
    "write_forecast_file",
    "write_metrics_files",
    "write_dm_file",
    "write_plotdata_files",
    "read_forecasts",
    "FORECAST_FILE",
    "STATE_FILE",
    "CHECKPOINT_FILE",
]

FORECAST_FILE = "forecasts.csv"
STATE_FILE = "conformal_state.json"
CHECKPOINT_FILE = "checkpoint.json"

BASE_METHOD = "base"


@dataclass(frozen=True)
class BacktestConfig:
    """Protocol settings for one rolling backtest."""

    head: HeadKind = HeadKind.JSU
    ensemble_size: int = 4
    warmup_days: int = 182
    test_days: int | None = None
    window_days: int | None = None
    n_cal: int = 182
    methods: tuple[str, ...] = ("cqr", "ocq")
    levels: tuple[float, ...] = DECILES
    extraction: str = "analytic"
    mc_samples: int = 10000
    seed: int = 0
    warm_start: bool = False
    train: TrainConfig = field(default_factory=TrainConfig)
    tracker: TrackerSettings = field(default_factory=TrackerSettings)

    def __post_init__(self):
        object.__setattr__(self, "head", HeadKind(self.head))
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "levels", tuple(float(v) for v in self.levels))
        QuantileGrid(self.levels)  # validates the grid
        if self.ensemble_size < 1:
            raise ConfigError("ensemble_size must be >= 1")
        if self.warmup_days < 1:
            raise ConfigError("warmup_days must be >= 1 so calibration state warms up")
        if self.n_cal < 1:
            raise ConfigError("n_cal must be >= 1")
        if self.test_days is not None and self.test_days < 1:
            raise ConfigError("test_days must be >= 1 when given")
        if self.window_days is not None and self.window_days < 2:
            raise ConfigError("window_days must be >= 2 when given")
        if self.extraction not in ("analytic", "monte_carlo"):
            raise ConfigError(f"extraction must be 'analytic' or 'monte_carlo', got {self.extraction!r}")
        if self.mc_samples < 2:
            raise ConfigError("mc_samples must be >= 2")
        allowed = ("absolute",) if self.head == HeadKind.POINT else ("cqr", "ocq")
        for m in self.methods:
            if m not in allowed:
                raise ConfigError(
                    f"method {m!r} is not valid for head {self.head.value!r}; allowed: {allowed}"
                )
        if len(set(self.methods)) != len(self.methods):
            raise ConfigError("methods list contains duplicates")


@dataclass
class DayRecord:
    """Everything emitted for one test day."""

    date: dt.date
    realized: np.ndarray  # (24,)
    forecasts: dict[str, np.ndarray]  # method -> (24, n_levels)
    flags: dict[str, list[str]] = field(default_factory=dict)


@dataclass
class BacktestOutput:
    head: HeadKind
    levels: tuple[float, ...]
    methods: tuple[str, ...]  # emission order, "base" first
    records: list[DayRecord]
    state: ConformalState
    meta: dict = field(default_factory=dict)


def derive_member_seed(base_seed: int, day_index: int, member: int) -> int:
    """Deterministic per-(day, member) seed."""
    ss = np.random.SeedSequence([int(base_seed), int(day_index), int(member)])
    return int(ss.generate_state(1, np.uint64)[0])


def _config_digest(cfg: BacktestConfig) -> str:
    doc = dataclasses.asdict(cfg)
    doc["head"] = cfg.head.value
    blob = json.dumps(doc, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def _member_quantiles(params: MlpParams, x_row: np.ndarray, head: HeadKind,
                      grid: QuantileGrid, scaler: ScalerState,
                      extraction: str, mc_samples: int,
                      rng: np.random.Generator | None) -> np.ndarray:
    """One member's sorted (hours, levels) matrix in price units."""
    out = mlp_forward(params, x_row)
    if head == HeadKind.POINT:
        point = scaler.invert_targets(out)
        return point_to_quantiles(point, grid)
    if head == HeadKind.QUANTILE:
        q_std = out.reshape(HOURS_PER_DAY, len(grid))
    else:
        dist = dists.transform_head_outputs(out, head.value)
        q_std = dist_to_quantiles(dist, grid, extraction=extraction,
                                  mc_samples=mc_samples, rng=rng)
    return sort_quantiles(scaler.invert_quantiles(q_std))


def _train_one(args):
    x, y, head, cfg, levels, initial = args
    return train_member(x, y, head, cfg, levels=levels, initial=initial)


_ARRAY_KEYS = ("w1", "b1", "w2", "b2", "w3", "b3", "bn_mean", "bn_var")


def _params_to_doc(params: MlpParams) -> dict:
    doc = {}
    for k in _ARRAY_KEYS:
        a = getattr(params, k)
        doc[k] = None if a is None else {"shape": list(a.shape), "data": a.reshape(-1).tolist()}
    return doc


def _params_from_doc(doc: dict) -> MlpParams:
    kw = {}
    for k in _ARRAY_KEYS:
        spec = doc[k]
        kw[k] = None if spec is None else np.array(spec["data"], dtype=float).reshape(spec["shape"])
    return MlpParams(**kw)


def run_backtest(
    samples: SampleSet,
    cfg: BacktestConfig,
    threads: int = 1,
    out_dir: str | None = None,
    resume: bool = False,
    stop_after: int | None = None,
    progress=None,
) -> BacktestOutput:
    """Run the rolling protocol over ``samples``.

    ``threads`` caps concurrent member training. With ``out_dir`` set, a
    checkpoint is written after every processed day; ``resume=True``
    picks up from it (the config must match). ``stop_after`` limits how
    many days this call processes (the checkpoint then allows resuming);
    ``progress`` is an optional callable fed one status line per day.
    """
    n = len(samples)
    grid = QuantileGrid(cfg.levels)
    if cfg.window_days is not None:
        first = cfg.window_days
        window = cfg.window_days
        test_days = cfg.test_days if cfg.test_days is not None else n - first - cfg.warmup_days
    else:
        if cfg.test_days is None:
            raise ConfigError("set test_days, window_days, or both")
        test_days = cfg.test_days
        first = n - test_days - cfg.warmup_days
        window = first
    if test_days < 1:
        raise ConfigError("no test days left; shrink warm-up or window")
    if first < window or first + cfg.warmup_days + test_days > n or window < 2:
        raise ConfigError(
            f"{n} sample days cannot host window={window}, "
            f"warmup={cfg.warmup_days}, test={test_days}"
        )

    total = cfg.warmup_days + test_days
    start_offset = 0
    records: list[DayRecord] = []
    state = ConformalState(alphas=grid.alphas(), n_cal=cfg.n_cal,
                           tracker_settings=cfg.tracker)
    prev_params: list[MlpParams] | None = None
    digest = _config_digest(cfg)

    checkpoint_path = os.path.join(out_dir, CHECKPOINT_FILE) if out_dir else None
    if resume:
        if checkpoint_path is None or not os.path.exists(checkpoint_path):
            raise DataError("resume requested but no checkpoint found")
        with open(checkpoint_path) as handle:
            chk = json.load(handle)
        if chk.get("format") != "backtest-checkpoint" or chk.get("version") != 1:
            raise DataError("unrecognized checkpoint file")
        if chk["config_digest"] != digest:
            raise ConfigError("checkpoint belongs to a different configuration")
        start_offset = chk["next_offset"]
        state = state_from_dict(chk["state"])
        records = [
            DayRecord(
                date=dt.date.fromisoformat(r["date"]),
                realized=np.array(r["realized"]),
                forecasts={m: np.array(q) for m, q in r["forecasts"].items()},
                flags={m: list(f) for m, f in r["flags"].items()},
            )
            for r in chk["records"]
        ]
        if chk.get("warm_params") is not None:
            prev_params = [_params_from_doc(d) for d in chk["warm_params"]]

    if out_dir:
        os.makedirs(out_dir, exist_ok=True)

    emitted_methods = (BASE_METHOD, *cfg.methods)
    started = time.monotonic()
    processed = 0

    for offset in range(start_offset, total):
        if stop_after is not None and processed >= stop_after:
            break
        t = first + offset
        is_test = offset >= cfg.warmup_days

        lo = t - window
        n_fit = window - max(1, int(cfg.train.validation_fraction * window))
        scaler = fit_scaler(
            SampleSet(samples.features[lo:t], samples.targets[lo:t],
                      samples.dates[lo:t], samples.columns),
            n_fit,
        )
        x_win = scaler.transform_features(samples.features[lo:t])
        y_win = scaler.transform_targets(samples.targets[lo:t])

        jobs = []
        for j in range(cfg.ensemble_size):
            member_cfg = replace(cfg.train, seed=derive_member_seed(cfg.seed, t, j))
            initial = prev_params[j] if (cfg.warm_start and prev_params) else None
            jobs.append((x_win, y_win, cfg.head, member_cfg, cfg.levels, initial))
        if threads > 1 and cfg.ensemble_size > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(_train_one, jobs))
        else:
            results = [_train_one(job) for job in jobs]

        x_day = scaler.transform_features(samples.features[t])
        member_mats = []
        for j, res in enumerate(results):
            rng = None
            if cfg.extraction == "monte_carlo":
                # distinct stream from the training seeds (extra key)
                rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, t, j, 991]))
            member_mats.append(_member_quantiles(
                res.params, x_day, cfg.head, grid, scaler,
                cfg.extraction, cfg.mc_samples, rng))
        base_q = sort_quantiles(vincentize(member_mats))
        date = samples.dates[t]
        base_fc = QuantileForecast(delivery_date=date, q=base_q, levels=cfg.levels)

        if offset == cfg.warmup_days and "ocq" in cfg.methods:
            # warm-up/test boundary: snap tracker centers to the static
            # buffer corrections and clear the accumulators, keeping the
            # matured step counts (first OCQ emission == CQR correction)
            if state.trackers_initialized():
                state.reanchor_trackers()
            else:
                state.init_trackers()
        if is_test:
            forecasts = {BASE_METHOD: base_q.copy()}
            flags: dict[str, list[str]] = {BASE_METHOD: []}
            for m in cfg.methods:
                calibrated, day_flags = conformalize_forecast(base_fc, state, m)
                forecasts[m] = calibrated.q
                flags[m] = day_flags
            records.append(DayRecord(date=date, realized=samples.targets[t].copy(),
                                     forecasts=forecasts, flags=flags))

        y_day = samples.targets[t]
        if cfg.head == HeadKind.POINT:
            state.push_absolute(base_q[:, grid.median_index], y_day)
        else:
            if "ocq" in cfg.methods:
                # Trackers run through warm-up so the integral gain
                # (~log t / t) has decayed by the first test day; they are
                # born once the buffers hold the first day's scores.
                if not state.trackers_initialized():
                    if offset >= 1:
                        state.init_trackers()
                        state.update_trackers(base_fc, y_day)
                else:
                    state.update_trackers(base_fc, y_day)
            state.push_interval(base_fc, y_day)

        prev_params = [res.params for res in results] if cfg.warm_start else None
        processed += 1
        if progress is not None:
            phase = "test" if is_test else "warmup"
            progress(f"day {offset + 1}/{total} ({phase}) {date.isoformat()}")

        if checkpoint_path:
            _write_checkpoint(checkpoint_path, digest, offset + 1, state, records,
                              prev_params if cfg.warm_start else None)

    complete = (start_offset + processed) >= total or (
        stop_after is None and start_offset >= total)
    meta = {
        "complete": complete,
        "processed_days": start_offset + processed,
        "total_days": total,
        "first_day_index": first,
        "window_days": window,
        "wall_clock_s": time.monotonic() - started,
        "config_digest": digest,
    }
    return BacktestOutput(
        head=cfg.head,
        levels=cfg.levels,
        methods=emitted_methods,
        records=records,
        state=state,
        meta=meta,
    )


def _write_checkpoint(path, digest, next_offset, state, records, warm_params):
    doc = {
        "format": "backtest-checkpoint",
        "version": 1,
        "config_digest": digest,
        "next_offset": next_offset,
        "state": state_to_dict(state),
        "records": [
            {
                "date": r.date.isoformat(),
                "realized": r.realized.tolist(),
                "forecasts": {m: q.tolist() for m, q in r.forecasts.items()},
                "flags": r.flags,
            }
            for r in records
        ],
        "warm_params": None if warm_params is None else [_params_to_doc(p) for p in warm_params],
    }
    tmp = path + ".tmp"
    with open(tmp, "w") as handle:
        json.dump(doc, handle)
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# evaluation over a finished backtest


@dataclass
class MethodMetrics:
    method: str
    mae: float
    pinball: float
    picp: dict[float, float]
    picp_hourly: dict[float, list[float]]
    kupiec: dict[float, KupiecResult]
    kupiec_hourly: dict[float, list[KupiecResult]]
    winkler: dict[float, float]


@dataclass
class DmEntry:
    score: str
    method_a: str
    method_b: str
    result: DmResult | None
    error: str | None = None


@dataclass
class Report:
    levels: tuple[float, ...]
    methods: tuple[str, ...]
    n_days: int
    metrics: list[MethodMetrics]
    dm: list[DmEntry]


def _stack_method(records: list[DayRecord], method: str) -> tuple[np.ndarray, np.ndarray]:
    q = np.stack([r.forecasts[method] for r in records])  # (days, 24, levels)
    y = np.stack([r.realized for r in records])  # (days, 24)
    return q, y


def generate_report(output: BacktestOutput, dm_norm: int = 1) -> Report:
    """Coverage, score and pairwise-comparison summary of a backtest."""
    if not output.records:
        raise DataError("backtest produced no test-day records to evaluate")
    grid = QuantileGrid(output.levels)
    alphas = grid.alphas()
    metrics = []
    daily_losses: dict[str, dict[str, np.ndarray]] = {}
    for method in output.methods:
        q, y = _stack_method(output.records, method)
        med = q[:, :, grid.median_index]
        m = MethodMetrics(
            method=method,
            mae=mae(med, y),
            pinball=pinball(q, y, output.levels),
            picp={}, picp_hourly={}, kupiec={}, kupiec_hourly={}, winkler={},
        )
        losses = {
            "point": daily_point_loss(y - med, norm=dm_norm),
            "pinball": _daily_pinball(q, y, output.levels),
        }
        for alpha in alphas:
            i_lo, i_hi = grid.pair_indices(alpha)
            lo, hi = q[:, :, i_lo], q[:, :, i_hi]
            inside = (y >= lo) & (y <= hi)
            m.picp[alpha] = float(inside.mean())
            m.picp_hourly[alpha] = [float(inside[:, h].mean()) for h in range(y.shape[1])]
            n_hits = int(inside.sum())
            m.kupiec[alpha] = kupiec_test(n_hits, inside.size - n_hits, alpha)
            m.kupiec_hourly[alpha] = [
                kupiec_test(int(inside[:, h].sum()), int((~inside[:, h]).sum()), alpha)
                for h in range(y.shape[1])
            ]
            m.winkler[alpha] = mean_winkler(lo.reshape(-1), hi.reshape(-1), y.reshape(-1), alpha)
            losses[f"winkler_{alpha:g}"] = _daily_winkler(lo, hi, y, alpha)
        metrics.append(m)
        daily_losses[method] = losses

    entries: list[DmEntry] = []
    score_kinds = ["point", "pinball"] + [f"winkler_{a:g}" for a in alphas]
    for score in score_kinds:
        for a in output.methods:
            for b in output.methods:
                if a == b:
                    continue
                try:
                    res = dm_test(daily_losses[a][score], daily_losses[b][score])
                    entries.append(DmEntry(score=score, method_a=a, method_b=b, result=res))
                except ValueError as exc:
                    entries.append(DmEntry(score=score, method_a=a, method_b=b,
                                           result=None, error=str(exc)))
    return Report(
        levels=output.levels,
        methods=output.methods,
        n_days=len(output.records),
        metrics=metrics,
        dm=entries,
    )


def _daily_pinball(q: np.ndarray, y: np.ndarray, levels) -> np.ndarray:
    lv = np.asarray(levels, dtype=float)
    diff = y[..., None] - q
    loss = np.where(diff > 0, lv * diff, (lv - 1.0) * diff)
    return loss.mean(axis=2).sum(axis=1)


def _daily_winkler(lo: np.ndarray, hi: np.ndarray, y: np.ndarray, alpha: float) -> np.ndarray:
    delta = hi - lo
    below = np.clip(lo - y, 0.0, None)
    above = np.clip(y - hi, 0.0, None)
    return (delta + 2.0 / alpha * (below + above)).sum(axis=1)


# ---------------------------------------------------------------------------
# artifact writing / reading


def _level_label(level: float) -> str:
    pct = level * 100.0
    if abs(pct - round(pct)) < 1e-9:
        return f"q{int(round(pct)):03d}"
    return "q" + f"{level:.6f}".rstrip("0").replace(".", "p")


def write_forecast_file(output: BacktestOutput, out_dir: str) -> None:
    labels = [_level_label(v) for v in output.levels]
    with open(os.path.join(out_dir, FORECAST_FILE), "w") as handle:
        handle.write(",".join(["date", "hour", "method", *labels, "realized", "flag"]) + "\n")
        for rec in output.records:
            for method in output.methods:
                q = rec.forecasts[method]
                method_flags = rec.flags.get(method, [])
                for h in range(q.shape[0]):
                    row_flags = ";".join(f for f in method_flags if f.startswith(f"h{h:02d}:"))
                    cells = [rec.date.isoformat(), str(h), method]
                    cells += [repr(float(v)) for v in q[h]]
                    cells += [repr(float(rec.realized[h])), row_flags]
                    handle.write(",".join(cells) + "\n")


def write_metrics_files(report: Report, out_dir: str) -> None:
    for m in report.metrics:
        path = os.path.join(out_dir, f"metrics_{m.method}.json")
        with open(path, "w") as handle:
            json.dump(_metrics_to_dict(m), handle, indent=1, sort_keys=True)


def write_dm_file(report: Report, out_dir: str) -> None:
    with open(os.path.join(out_dir, "dm_tests.csv"), "w") as handle:
        handle.write("score,method_a,method_b,statistic,p_left,p_right,error\n")
        for e in report.dm:
            if e.result is None:
                handle.write(f"{e.score},{e.method_a},{e.method_b},,,,{e.error}\n")
            else:
                handle.write(
                    f"{e.score},{e.method_a},{e.method_b},"
                    f"{e.result.statistic!r},{e.result.p_left!r},{e.result.p_right!r},\n"
                )


def write_plotdata_files(output: BacktestOutput, out_dir: str) -> None:
    labels = [_level_label(v) for v in output.levels]
    for method in output.methods:
        path = os.path.join(out_dir, f"plotdata_{method}.csv")
        with open(path, "w") as handle:
            handle.write(",".join(["time", "realized", *labels]) + "\n")
            for rec in output.records:
                q = rec.forecasts[method]
                for h in range(q.shape[0]):
                    stamp = f"{rec.date.isoformat()}T{h:02d}:00"
                    cells = [stamp, repr(float(rec.realized[h]))]
                    cells += [repr(float(v)) for v in q[h]]
                    handle.write(",".join(cells) + "\n")


def write_outputs(output: BacktestOutput, out_dir: str,
                  effective_config: dict | None = None,
                  dm_norm: int = 1) -> Report:
    """Write all run artifacts; returns the computed report.

    Deterministic files: forecasts.csv, conformal_state.json, metrics,
    report.txt, dm_tests.csv, plotdata CSVs, config_echo.json. Volatile
    timing metadata goes to run_info.json only.
    """
    os.makedirs(out_dir, exist_ok=True)
    write_forecast_file(output, out_dir)

    with open(os.path.join(out_dir, STATE_FILE), "w") as handle:
        json.dump(state_to_dict(output.state), handle)

    report = generate_report(output, dm_norm=dm_norm)
    write_metrics_files(report, out_dir)
    write_dm_file(report, out_dir)
    write_plotdata_files(output, out_dir)

    with open(os.path.join(out_dir, "report.txt"), "w") as handle:
        handle.write(render_report(report))

    if effective_config is not None:
        with open(os.path.join(out_dir, "config_echo.json"), "w") as handle:
            json.dump(effective_config, handle, indent=1, sort_keys=True)

    info = {k: v for k, v in output.meta.items() if k != "config_digest"}
    with open(os.path.join(out_dir, "run_info.json"), "w") as handle:
        json.dump(info, handle, indent=1)
    return report


def _metrics_to_dict(m: MethodMetrics) -> dict:
    return {
        "method": m.method,
        "mae": m.mae,
        "pinball": m.pinball,
        "picp": {f"{a:g}": v for a, v in m.picp.items()},
        "picp_hourly": {f"{a:g}": v for a, v in m.picp_hourly.items()},
        "kupiec": {
            f"{a:g}": {
                "statistic": r.statistic, "p_value": r.p_value, "reject": r.reject,
                "n_hits": r.n_hits, "n_violations": r.n_violations,
            }
            for a, r in m.kupiec.items()
        },
        "kupiec_hourly_rejections": {
            f"{a:g}": sum(1 for r in rs if r.reject) for a, rs in m.kupiec_hourly.items()
        },
        "winkler": {f"{a:g}": v for a, v in m.winkler.items()},
    }


def render_report(report: Report) -> str:
    """Human-readable summary table."""
    lines = [f"test days: {report.n_days}    levels: {', '.join(f'{v:g}' for v in report.levels)}", ""]
    grid = QuantileGrid(report.levels)
    alphas = grid.alphas()
    for m in report.metrics:
        lines.append(f"method {m.method}")
        lines.append(f"  MAE {m.mae:.4f}    pinball {m.pinball:.4f}")
        header = f"  {'alpha':>6} {'nominal':>8} {'picp':>8} {'kupiec':>9} {'reject':>7} {'winkler':>10}"
        lines.append(header)
        for a in alphas:
            k = m.kupiec[a]
            lines.append(
                f"  {a:>6g} {1 - a:>8.3f} {m.picp[a]:>8.4f} {k.statistic:>9.3f}"
                f" {str(k.reject):>7} {m.winkler[a]:>10.4f}"
            )
        lines.append("")
    if report.dm:
        lines.append("pairwise comparisons (negative statistic: method_a ahead)")
        lines.append(f"  {'score':>14} {'a':>10} {'b':>10} {'stat':>9} {'p_left':>8} {'p_right':>8}")
        for e in report.dm:
            if e.result is None:
                lines.append(f"  {e.score:>14} {e.method_a:>10} {e.method_b:>10} {'degenerate':>27}")
            else:
                lines.append(
                    f"  {e.score:>14} {e.method_a:>10} {e.method_b:>10} "
                    f"{e.result.statistic:>9.3f} {e.result.p_left:>8.4f} {e.result.p_right:>8.4f}"
                )
        lines.append("")
    return "\n".join(lines)


def read_forecasts(path) -> BacktestOutput:
    """Rebuild a minimal BacktestOutput from a forecasts.csv file."""
    import csv as _csv

    if not os.path.exists(path):
        raise DataError(f"no forecast file at {path}")
    with open(path, newline="") as handle:
        reader = _csv.reader(handle)
        header = next(reader, None)
        if not header or header[:3] != ["date", "hour", "method"] or header[-2:] != ["realized", "flag"]:
            raise DataError(f"{path} is not a forecast artifact")
        labels = header[3:-2]
        levels = []
        for lab in labels:
            if lab.startswith("q") and lab[1:].isdigit():
                levels.append(int(lab[1:]) / 100.0)
            else:
                levels.append(float(lab[1:].replace("p", ".")))
        levels = tuple(np.round(levels, 10))
        by_day: dict[str, dict] = {}
        methods: list[str] = []
        for row in reader:
            date_s, hour_s, method = row[0], row[1], row[2]
            qs = [float(v) for v in row[3:3 + len(levels)]]
            realized = float(row[3 + len(levels)])
            flag = row[4 + len(levels)]
            slot = by_day.setdefault(date_s, {"forecasts": {}, "flags": {}, "realized": np.zeros(HOURS_PER_DAY)})
            mat = slot["forecasts"].setdefault(method, np.zeros((HOURS_PER_DAY, len(levels))))
            h = int(hour_s)
            mat[h] = qs
            slot["realized"][h] = realized
            if flag:
                slot["flags"].setdefault(method, []).extend(flag.split(";"))
            if method not in methods:
                methods.append(method)
    records = [
        DayRecord(
            date=dt.date.fromisoformat(day),
            realized=slot["realized"],
            forecasts=slot["forecasts"],
            flags=slot["flags"],
        )
        for day, slot in sorted(by_day.items())
    ]
    if not records:
        raise DataError(f"{path} contains no forecast rows")
    return BacktestOutput(
        head=HeadKind.QUANTILE,  # unknown from the file; callers only need records
        levels=levels,
        methods=tuple(methods),
        records=records,
        state=ConformalState(alphas=QuantileGrid(levels).alphas()),
        meta={"source": str(path)},
    )
