"""Command-line front end.

    zocubic recover-bench --config bench.cfg --out results/ --seeds 0..49
    zocubic compare --config iris.cfg --out results/
    zocubic optimize --config run.cfg --scheme gaussian

Exit status is 0 on success, 1 for configuration errors and 2 for failures
during a run.  ``ZOCUBIC_LOG`` sets the log level (default ``WARNING``).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from ..errors import ConfigError
from . import experiments as ex
from .config import parse_config, parse_config_text

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def _parser():
    p = argparse.ArgumentParser(prog="zocubic", description="Zeroth-order cubic Newton experiments.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("recover-bench", "optimize", "compare"):
        s = sub.add_parser(name)
        s.add_argument("--config", type=Path, help="key = value configuration file")
        s.add_argument("--out", type=Path, help="output directory (overrides the config)")
        s.add_argument("--seeds", help="seed range a..b or comma list (overrides the config)")
        s.add_argument("--scheme", choices=("spherical", "gaussian"), help="Hessian probe scheme")
    return p


def _overrides(args):
    over = {"experiment": args.command}
    if args.out is not None:
        over["out"] = str(args.out)
    if args.seeds is not None:
        over["seeds"] = args.seeds
    if args.scheme is not None:
        key = "bench.scheme" if args.command == "recover-bench" else "cubic.scheme"
        over[key] = args.scheme
    return over


def _load(args):
    over = _overrides(args)
    if args.config is None:
        return parse_config_text("", over)
    cfg = parse_config(args.config, {k: v for k, v in over.items() if k != "experiment"}
                       | ({} if _names_experiment(args.config) else {"experiment": args.command}))
    if cfg.experiment != args.command:
        raise ConfigError(f"experiment: config is for {cfg.experiment!r}, not {args.command!r}")
    return cfg


def _names_experiment(path):
    try:
        text = Path(path).read_text()
    except OSError:
        return False
    return any(line.split("#", 1)[0].partition("=")[0].strip() == "experiment"
               for line in text.splitlines())


def run(cfg) -> list[Path]:
    out = cfg.out
    if cfg.experiment == "recover-bench":
        trials, summary = ex.run_recover_bench(cfg)
        return [ex.write_csv(out / "trials.csv", ex.TRIAL_COLUMNS, trials),
                ex.write_csv(out / "summary.csv", ex.SUMMARY_COLUMNS, summary)]
    if cfg.experiment == "optimize":
        res = ex.run_optimize(cfg)
        return [ex.write_csv(out / "traces.csv", ex.TRACE_COLUMNS, res["traces"]),
                ex.write_csv(out / "runs.csv", ex.RUN_COLUMNS, res["runs"])]
    res = ex.run_compare(cfg)
    return [ex.write_csv(out / "traces.csv", ex.TRACE_COLUMNS, res["traces"]),
            ex.write_csv(out / "runs.csv", ex.RUN_COLUMNS, res["runs"]),
            ex.write_csv(out / "summary.csv", ex.CHECKPOINT_COLUMNS, res["summary"]),
            ex.write_csv(out / "plot_data.csv", ex.PLOT_COLUMNS, res["plot"])]


def main(argv=None) -> int:
    level = os.environ.get("ZOCUBIC_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors; those are configuration errors here
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        cfg = _load(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        for path in run(cfg):
            print(path)
    except Exception as exc:  # noqa: BLE001 - any failure mid-run maps to exit 2
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
