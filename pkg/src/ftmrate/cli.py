"""Command line entry point.

    ftmrate run <preset|config.toml> [--seed-range A:B] [--out-dir DIR] [--parallel N]
    ftmrate presets [--show NAME]
    ftmrate fit-success-model [--samples N] [--seed S] [--output PATH]
    ftmrate compare <result dirs or runs.csv...> [--metric M] [--alpha A] [--output CSV]

Exit codes: 0 success, 1 invalid input, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys

from .channel import FitError, fit_reference_model
from .config import PRESETS, ConfigError, load_config, preset
from .experiment import ComparisonError, ExperimentError, compare_report, plan_runs, run_experiment

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


def _seed_range(text: str) -> tuple[int, ...]:
    """``A:B`` (half-open), ``A-B`` (inclusive) or a single seed."""
    try:
        if ":" in text:
            a, b = text.split(":")
            seeds = tuple(range(int(a), int(b)))
        elif "-" in text[1:]:
            a, b = text.split("-", 1)
            seeds = tuple(range(int(a), int(b) + 1))
        else:
            seeds = (int(text),)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed range {text!r}; use A:B, A-B or N") from None
    if not seeds or min(seeds) < 0:
        raise argparse.ArgumentTypeError(f"seed range {text!r} is empty or negative")
    return seeds


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ftmrate", description="FTM-driven rate selection experiments")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a preset or a TOML scenario file")
    run.add_argument("config", help="preset name (see `presets`) or path to a TOML file")
    run.add_argument("--seed-range", type=_seed_range, help="override seeds: A:B, A-B or N")
    run.add_argument("--out-dir", help="output directory (default: the config's out_dir)")
    run.add_argument("--parallel", type=int, default=1, metavar="N", help="worker processes")
    run.add_argument("--quiet", action="store_true", help="no per-run progress")

    pre = sub.add_parser("presets", help="list built-in presets")
    pre.add_argument("--show", metavar="NAME", help="print the fully resolved config of one preset")

    fit = sub.add_parser("fit-success-model", help="fit success curves to the reference PHY")
    fit.add_argument("--samples", type=int, default=100_000, help="samples per MCS")
    fit.add_argument("--seed", type=int, default=0)
    fit.add_argument("--output", default="success_model.json")

    cmp_ = sub.add_parser("compare", help="Welch t-tests between controllers")
    cmp_.add_argument("results", nargs="+", help="result directories, runs.csv or summary.csv files")
    cmp_.add_argument("--metric", default="aggregate_throughput_mbps")
    cmp_.add_argument("--alpha", type=float, default=0.05)
    cmp_.add_argument("--output", help="also write the pairwise table as CSV")
    return p


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.seed_range:
        cfg = dataclasses.replace(cfg, seeds=args.seed_range)
    if args.parallel < 1:
        raise ConfigError("--parallel must be >= 1")
    total = len(plan_runs(cfg))
    done = []

    def progress(spec):
        done.append(spec)
        if not args.quiet:
            print(f"[{len(done)}/{total}] {spec.run_id}", file=sys.stderr, flush=True)

    out = run_experiment(cfg, args.out_dir, parallel=args.parallel, progress=progress)
    print(out)
    return EXIT_OK


def _cmd_presets(args) -> int:
    if args.show:
        print(json.dumps(preset(args.show).to_dict(), indent=2, sort_keys=True))
        return EXIT_OK
    for name in PRESETS:
        cfg = preset(name)
        n = ",".join(map(str, cfg.n_stations)) if len(cfg.n_stations) <= 5 else \
            f"{cfg.n_stations[0]}..{cfg.n_stations[-1]}"
        dur = f"{cfg.duration:g} s" if cfg.duration else "table default"
        print(f"{name:<34} {cfg.scenario:<14} n={n:<8} duration={dur:<14} seeds={len(cfg.seeds)}")
    return EXIT_OK


def _cmd_fit(args) -> int:
    if args.samples < 1000:
        raise ConfigError("--samples must be at least 1000")
    params = fit_reference_model(seed=args.seed, n_per_mcs=args.samples)
    params.save(args.output)
    worst = max(params.metadata["residual"])
    print(f"wrote {args.output} (worst binned residual {worst:.4f})")
    return EXIT_OK


def _cmd_compare(args) -> int:
    report = compare_report(args.results, metric=args.metric)
    print(report.format(alpha=args.alpha), end="")
    if args.output:
        with open(args.output, "w", newline="", encoding="utf-8") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["n_stations", "controller_a", "controller_b", "mean_a", "mean_b", "p_value"])
            w.writerows(report.rows())
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    handler = {"run": _cmd_run, "presets": _cmd_presets, "fit-success-model": _cmd_fit,
               "compare": _cmd_compare}[args.command]
    try:
        return handler(args)
    except (ConfigError, ComparisonError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except (ExperimentError, FitError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
