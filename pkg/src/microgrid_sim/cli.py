"""Command-line entry point: ``simulate``, ``metrics`` and ``compare``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys

from .config import PRESETS, Mode, ParseError, ScenarioConfig, ValidationError, load_config, with_scenario
from .metrics import TABLE_ROWS
from .runner import compare, metrics_from_logs, run_experiment


def _config(args) -> ScenarioConfig:
    cfg = load_config(args.config) if args.config else ScenarioConfig()
    changes = {}
    if getattr(args, "mode", None):
        changes["mode"] = Mode(args.mode.upper())
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "ticks", None) is not None:
        changes["ticks"] = args.ticks
    cfg = cfg.replace(**changes) if changes else cfg
    if getattr(args, "scenario", None):
        cfg = with_scenario(cfg, args.scenario)
    return cfg


def _print_report(report, stream=sys.stdout) -> None:
    for key, label in TABLE_ROWS:
        stream.write(f"{label}: {getattr(report, key):.4f}\n")


def cmd_simulate(args) -> int:
    cfg = _config(args)
    result = run_experiment(cfg, args.out)
    _print_report(result.metrics)
    return 0


def cmd_metrics(args) -> int:
    _print_report(metrics_from_logs(args.log))
    return 0


def cmd_compare(args) -> int:
    cfg = _config(args)
    reports = compare(cfg, out_dir=args.out)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(("metric", "baseline", "predictive"))
    for key, label in TABLE_ROWS:
        w.writerow((label, f"{getattr(reports['BASELINE'], key):.6f}", f"{getattr(reports['PREDICTIVE'], key):.6f}"))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="microgrid-sim", description="Agent-based campus microgrid simulator")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run one experiment and write its logs")
    s.add_argument("--config")
    s.add_argument("--mode", choices=("baseline", "predictive"))
    s.add_argument("--seed", type=int)
    s.add_argument("--ticks", type=int)
    s.add_argument("--scenario", choices=sorted(PRESETS))
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate)

    m = sub.add_parser("metrics", help="recompute the metrics summary from a log directory")
    m.add_argument("--log", required=True)
    m.set_defaults(func=cmd_metrics)

    c = sub.add_parser("compare", help="run both controllers and print a comparison table as CSV")
    c.add_argument("--config")
    c.add_argument("--seed", type=int)
    c.add_argument("--ticks", type=int)
    c.add_argument("--scenario", choices=sorted(PRESETS))
    c.add_argument("--out")
    c.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ParseError, ValidationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (AssertionError, RuntimeError, ValueError) as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
