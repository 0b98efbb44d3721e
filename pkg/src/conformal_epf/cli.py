"""Command line entry points.

Subcommands:

* ``simulate``  write a synthetic hourly price CSV
* ``run``       execute the rolling backtest described by a config file
* ``evaluate``  recompute metrics from a stored forecasts.csv
* ``report``    render the text report and plot-data CSVs from stored outputs

Exit codes: 0 success, 1 usage error, 2 bad input (files, schemas,
configs), 3 unexpected failure.
"""

from __future__ import annotations

import argparse
import os
import sys
import traceback

from .config import config_to_dict, parse_config_file
from .dataset import build_sample_matrix, parse_market_csv, write_market_csv
from .errors import DataError
from .pipeline import (
    FORECAST_FILE,
    generate_report,
    read_forecasts,
    render_report,
    run_backtest,
    write_dm_file,
    write_metrics_files,
    write_outputs,
    write_plotdata_files,
)
from .synthetic import SyntheticConfig, generate_synthetic

__all__ = ["main", "entrypoint", "build_parser"]


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would sys.exit(2); we map usage to 1
        raise _UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="conformal-epf",
                     description="Probabilistic day-ahead price forecasting backtests")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", parents=[], help="write a synthetic price CSV",
                         add_help=True)
    sim.error = parser.error  # type: ignore[method-assign]
    sim.add_argument("--days", type=int, default=365)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--start", default="2015-01-01")
    sim.add_argument("--base-level", type=float, default=50.0)
    sim.add_argument("--amplitude", type=float, default=10.0)
    sim.add_argument("--ar-coeff", type=float, default=0.7)
    sim.add_argument("--ar-scale", type=float, default=2.0)
    sim.add_argument("--noise-scale", type=float, default=1.0)
    sim.add_argument("--skew-ratio", type=float, default=1.0)
    sim.add_argument("--shift-scale", type=float, default=1.0)
    sim.add_argument("--shift-day", type=int, default=None)
    sim.add_argument("-o", "--out", required=True, help="destination CSV path")

    run = sub.add_parser("run", help="run the configured backtest")
    run.error = parser.error  # type: ignore[method-assign]
    run.add_argument("-c", "--config", required=True, help="TOML or JSON run config")
    run.add_argument("-o", "--out", default=None, help="override the output directory")
    run.add_argument("--threads", type=int, default=1,
                     help="max concurrently trained ensemble members")
    run.add_argument("--resume", action="store_true",
                     help="continue from the checkpoint in the output directory")
    run.add_argument("--stop-after", type=int, default=None,
                     help="process at most this many days, then checkpoint and exit")
    run.add_argument("-q", "--quiet", action="store_true")

    ev = sub.add_parser("evaluate", help="recompute metrics from stored forecasts")
    ev.error = parser.error  # type: ignore[method-assign]
    ev.add_argument("-d", "--dir", required=True, help="run output directory")
    ev.add_argument("--dm-norm", type=int, default=1)

    rep = sub.add_parser("report", help="render report tables and plot data")
    rep.error = parser.error  # type: ignore[method-assign]
    rep.add_argument("-d", "--dir", required=True, help="run output directory")
    rep.add_argument("--dm-norm", type=int, default=1)

    return parser


def _cmd_simulate(args) -> int:
    cfg = SyntheticConfig(
        n_days=args.days,
        seed=args.seed,
        start=args.start,
        base_level=args.base_level,
        profile_amplitude=args.amplitude,
        ar_coeff=args.ar_coeff,
        ar_scale=args.ar_scale,
        noise_scale=args.noise_scale,
        skew_ratio=args.skew_ratio,
        shift_scale=args.shift_scale,
        shift_day=args.shift_day,
    )
    raw, _ = generate_synthetic(cfg)
    write_market_csv(args.out, raw)
    print(f"wrote {len(raw)} hourly rows ({args.days} days) to {args.out}")
    return 0


def _cmd_run(args) -> int:
    cfg = parse_config_file(args.config)
    out_dir = args.out or cfg.out_dir
    if out_dir is None:
        raise DataError("no output directory: set [output].out_dir or pass --out")
    if cfg.data.csv is None:
        raise DataError("no data source: set [data].csv in the config")
    csv_path = cfg.data.csv
    if not os.path.isabs(csv_path):
        csv_path = os.path.join(os.path.dirname(os.path.abspath(args.config)), csv_path)
    raw = parse_market_csv(csv_path, cfg.data.schema)
    samples = build_sample_matrix(raw, cfg.features)
    progress = None if args.quiet else lambda line: print(line, flush=True)
    output = run_backtest(
        samples,
        cfg.backtest,
        threads=max(1, args.threads),
        out_dir=out_dir,
        resume=args.resume,
        stop_after=args.stop_after,
        progress=progress,
    )
    if not output.meta["complete"]:
        print(f"stopped after {output.meta['processed_days']}/{output.meta['total_days']} days; "
              f"resume with: conformal-epf run -c {args.config} --resume")
        return 0
    report = write_outputs(output, out_dir, effective_config=config_to_dict(cfg),
                           dm_norm=cfg.dm_norm)
    if not args.quiet:
        print(render_report(report))
    print(f"artifacts written to {out_dir}")
    return 0


def _cmd_evaluate(args) -> int:
    output = read_forecasts(os.path.join(args.dir, FORECAST_FILE))
    report = generate_report(output, dm_norm=args.dm_norm)
    write_metrics_files(report, args.dir)
    write_dm_file(report, args.dir)
    print(render_report(report))
    return 0


def _cmd_report(args) -> int:
    output = read_forecasts(os.path.join(args.dir, FORECAST_FILE))
    report = generate_report(output, dm_norm=args.dm_norm)
    write_plotdata_files(output, args.dir)
    text = render_report(report)
    with open(os.path.join(args.dir, "report.txt"), "w") as handle:
        handle.write(text)
    print(text)
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "run": _cmd_run,
    "evaluate": _cmd_evaluate,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except (DataError, FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception:
        traceback.print_exc()
        return 3


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
