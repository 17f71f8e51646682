"""Command line runner.

    motionwalk <experiment> --config PATH [--seed N] [--walkers M] [--steps N] [--out DIR]

Exit codes: 0 all verdicts pass, 2 a verdict failed, 1 config or runtime error.
"""
from __future__ import annotations

import argparse
import logging
import sys

from .config import EXPERIMENTS, ConfigError, ExperimentConfig, apply_overrides, load_raw, preset_names, resolve
from .experiments import ReportEnvelope, emit_plot_data, run_experiment, write_report

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "ReportEnvelope",
    "emit_plot_data",
    "main",
    "resolve",
    "run_experiment",
    "write_report",
]

EXIT_OK, EXIT_ERROR, EXIT_VERDICT = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="motionwalk", description="Dynamic random walks on motion groups.")
    p.add_argument("experiment", nargs="?", choices=EXPERIMENTS)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--config", help="JSON experiment config")
    src.add_argument("--preset", help="name of a shipped preset config")
    p.add_argument("--seed", type=int)
    p.add_argument("--walkers", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--workers", type=int, help="worker processes (does not change results)")
    p.add_argument("--list-presets", action="store_true")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.list_presets:
        print("\n".join(preset_names()))
        return EXIT_OK
    if args.config is None and args.preset is None:
        print("error: one of --config or --preset is required", file=sys.stderr)
        return EXIT_ERROR
    try:
        raw = load_raw(args.config, args.preset)
        raw = apply_overrides(raw, args.experiment, args.seed, args.walkers, args.steps, args.out, args.workers)
        cfg = resolve(raw)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    try:
        env = run_experiment(cfg)
    except (ValueError, MemoryError, OSError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    for name, v in env.verdicts.items():
        print(f"{'PASS' if v.passed else 'FAIL'} {name}: value={v.value!r} threshold={v.threshold!r}")
    if not env.passed:
        print("verdict failure: " + "; ".join(env.failures()), file=sys.stderr)
        return EXIT_VERDICT
    return EXIT_OK
