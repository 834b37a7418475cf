"""Command line entry point: ``randinfo run`` and ``randinfo fit``."""

from __future__ import annotations

import argparse
import json
import sys

from .errors import ConfigError, DegenerateInput
from .experiments import ExperimentConfig, rate_fit, read_csv_columns, run, write_outputs

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CHECK = 3


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="randinfo", description="Seeded sweeps and rate fits.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config", help="JSON experiment config")
    p_run.add_argument("--out", help="output directory (overrides the config's directory)")
    p_run.add_argument("--seed", type=int, help="base seed (overrides seeds.base)")
    p_run.add_argument("--replications", type=int, help="replication count (overrides seeds.replications)")
    p_run.add_argument("--jobs", type=int, default=1, help="worker processes")
    p_run.add_argument("--check", action="store_true", help="exit 3 when the config's check block fails")

    p_fit = sub.add_parser("fit", help="least-squares rate fit of two CSV columns")
    p_fit.add_argument("csv", help="CSV file with a header row")
    p_fit.add_argument("--x", required=True, help="x column")
    p_fit.add_argument("--y", required=True, help="y column")
    p_fit.add_argument("--log-log", action="store_true", help="fit in log-log coordinates")
    return parser


def _load_config(args) -> ExperimentConfig:
    try:
        with open(args.config) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError("", f"cannot read config: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"invalid JSON: {exc}") from None
    if isinstance(data, dict) and isinstance(data.get("seeds", {}), dict):
        seeds = dict(data.get("seeds", {}))
        if args.seed is not None:
            seeds["base"] = args.seed
        if args.replications is not None:
            seeds["replications"] = args.replications
        data = {**data, "seeds": seeds}
    return ExperimentConfig.from_dict(data)


def _cmd_run(args) -> int:
    if args.jobs < 1:
        raise ConfigError("jobs", "must be at least 1")
    config = _load_config(args)
    result = run(config, jobs=args.jobs)
    csv_path, summary_path = write_outputs(result, config, args.out)
    check = result.summary["check"]
    print(f"wrote {csv_path} ({len(result.records)} rows) and {summary_path}")
    fit = result.summary.get("fit")
    if fit:
        print(f"slope {fit['slope']:.4f}  r^2 {fit['r_squared']:.4f}  points {fit['point_count']}")
    if result.summary["failed_rows"]:
        print(f"{result.summary['failed_rows']} rows recorded errors", file=sys.stderr)
    if args.check:
        print("check: " + ("PASS" if check["passed"] else "FAIL " + "; ".join(check["failures"])))
        if not check["passed"]:
            return EXIT_CHECK
    return EXIT_OK


def _cmd_fit(args) -> int:
    try:
        with open(args.csv) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError("csv", f"cannot read: {exc}") from None
    pairs = read_csv_columns(text, args.x, args.y)
    fit = rate_fit(pairs, args.log_log, args.log_log)
    print(json.dumps(fit._asdict()))
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return _cmd_run(args) if args.command == "run" else _cmd_fit(args)
    except (ConfigError, DegenerateInput) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
