"""Seed sweeps, CSV output, confidence intervals and controller comparisons."""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import stats

from . import __version__
from .config import ScenarioConfig
from .ftm import burst_airtime
from .sim import run_scenario

SCHEMA_VERSION = 1
INTERVAL_COLUMNS = ("run_id", "seed", "controller", "time_s", "station_id", "mcs_mode", "attempted",
                    "successes", "collisions", "channel_losses", "throughput_mbps", "n_stations", "ftm_probes")
RUN_COLUMNS = ("run_id", "seed", "controller", "n_stations", "duration_s", "aggregate_throughput_mbps",
               "attempted", "successes", "collisions", "channel_losses", "collision_rate",
               "channel_loss_rate", "ftm_probes", "ftm_airtime_fraction")
SUMMARY_COLUMNS = ("controller", "n_stations", "metric", "n_seeds", "mean", "sd", "ci99_half_width")
SUMMARY_METRICS = ("aggregate_throughput_mbps", "collision_rate", "channel_loss_rate", "ftm_airtime_fraction")


class ExperimentError(RuntimeError):
    pass


def _fmt(x: float) -> str:
    return "nan" if math.isnan(x) else f"{x:.6f}"


@dataclass(frozen=True)
class RunSpec:
    run_id: str
    controller: str
    n_stations: int
    seed: int


def plan_runs(cfg: ScenarioConfig) -> list[RunSpec]:
    """Every (n_stations, controller, seed) combination, in output order."""
    return [RunSpec(f"{c}_n{n}_s{s}", c, n, s)
            for n, c, s in itertools.product(cfg.n_stations, cfg.controllers, cfg.seeds)]


def execute_run(cfg: ScenarioConfig, spec: RunSpec, success_model=None) -> tuple[list[list[str]], list[str]]:
    """Simulate one run; return its interval rows and its run-summary row as strings."""
    setup = cfg.run_setup(spec.controller, spec.n_stations, success_model)
    rows, totals = [], np.zeros(5, dtype=np.int64)  # attempted, successes, collisions, losses, probes
    bits = 0
    for rec in run_scenario(setup, spec.seed):
        for i, st in enumerate(rec.stations):
            rows.append([spec.run_id, str(spec.seed), spec.controller, _fmt(rec.start), str(i), str(st.mcs_mode),
                         str(st.attempted), str(st.successes), str(st.collisions), str(st.channel_losses),
                         _fmt(rec.throughput(i)), str(spec.n_stations), str(st.ftm_probes)])
            totals += (st.attempted, st.successes, st.collisions, st.channel_losses, st.ftm_probes)
            bits += st.delivered_bits
    att, ok, coll, loss, probes = (int(x) for x in totals)
    duration = setup.duration
    run_row = [spec.run_id, str(spec.seed), spec.controller, str(spec.n_stations), _fmt(duration),
               _fmt(bits / duration / 1e6), str(att), str(ok), str(coll), str(loss),
               _fmt(coll / att if att else 0.0), _fmt(loss / att if att else 0.0), str(probes),
               _fmt(probes * burst_airtime() * 1e-6 / duration)]
    return rows, run_row


def _execute_packed(args):
    return execute_run(*args)


def t_interval(values, level: float = 0.99) -> tuple[float, float, float]:
    """(mean, sd, half-width) of the Student-t confidence interval for the mean."""
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise ValueError("no values")
    mean = float(x.mean())
    if x.size < 2:
        return mean, math.nan, math.nan
    sd = float(x.std(ddof=1))
    return mean, sd, float(stats.t.ppf(0.5 + level / 2, x.size - 1) * sd / math.sqrt(x.size))


def summarize(run_rows: list[dict]) -> list[list[str]]:
    groups: dict[tuple, list[dict]] = {}
    for r in run_rows:
        groups.setdefault((r["controller"], int(r["n_stations"])), []).append(r)
    out = []
    for (ctrl, n), rows in groups.items():
        for metric in SUMMARY_METRICS:
            mean, sd, half = t_interval([float(r[metric]) for r in rows])
            out.append([ctrl, str(n), metric, str(len(rows)), _fmt(mean), _fmt(sd), _fmt(half)])
    return out


def _write_csv(path: Path, header, rows, mode="w"):
    try:
        with open(path, mode, newline="", encoding="utf-8") as f:
            w = csv.writer(f, lineterminator="\n")
            if header is not None:
                w.writerow(header)
            w.writerows(rows)
    except OSError as e:
        raise ExperimentError(f"cannot write {path}: {e.strerror}") from None


def run_experiment(cfg: ScenarioConfig, out_dir: str | os.PathLike | None = None, parallel: int = 1,
                   progress=None) -> Path:
    """Run every (n_stations, controller, seed) combination and write the result files.

    Files: ``intervals.csv`` (per interval and station), ``runs.csv`` (per run),
    ``summary.csv`` (per controller and station count) and ``manifest.json``.
    Rows are written in plan order after each run completes, so output is
    identical for any ``parallel``.
    """
    out = Path(out_dir or cfg.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ExperimentError(f"cannot create {out}: {e.strerror}") from None
    model = cfg.load_success_model()
    plan = plan_runs(cfg)
    manifest = {
        "format": "ftmrate-run-manifest",
        "schema_version": SCHEMA_VERSION,
        "package_version": __version__,
        "config_hash": cfg.config_hash(),
        "seeds": list(cfg.seeds),
        "runs": [s.run_id for s in plan],
        "success_model": model.metadata,
        "config": cfg.to_dict(),
    }
    _write_csv(out / "intervals.csv", INTERVAL_COLUMNS, [])
    _write_csv(out / "runs.csv", RUN_COLUMNS, [])
    run_rows = []
    jobs = [(cfg, spec, model) for spec in plan]
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            results = pool.map(_execute_packed, jobs)
            for spec, (rows, run_row) in zip(plan, results):
                run_rows.append(_flush(out, rows, run_row, spec, progress))
    else:
        for spec, job in zip(plan, jobs):
            rows, run_row = _execute_packed(job)
            run_rows.append(_flush(out, rows, run_row, spec, progress))
    _write_csv(out / "summary.csv", SUMMARY_COLUMNS, summarize(run_rows))
    try:
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    except OSError as e:
        raise ExperimentError(f"cannot write {out / 'manifest.json'}: {e.strerror}") from None
    return out


def _flush(out: Path, rows, run_row, spec, progress) -> dict:
    _write_csv(out / "intervals.csv", None, rows, mode="a")
    _write_csv(out / "runs.csv", None, [run_row], mode="a")
    if progress is not None:
        progress(spec)
    return dict(zip(RUN_COLUMNS, run_row))


# Comparison ------------------------------------------------------------------

class ComparisonError(ValueError):
    pass


def welch_pvalue(a, b) -> float:
    """Two-sided Welch t-test p-value, with the zero-variance cases made explicit."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if min(a.size, b.size) < 2:
        raise ComparisonError("need at least two seeds per controller for a variance estimate")
    if a.std() == 0 and b.std() == 0:
        return 1.0 if a.mean() == b.mean() else 0.0
    return float(stats.ttest_ind(a, b, equal_var=False).pvalue)


@dataclass(frozen=True)
class PairResult:
    n_stations: int
    a: str
    b: str
    mean_a: float
    mean_b: float
    p_value: float


@dataclass(frozen=True)
class ComparisonReport:
    metric: str
    samples: dict  # (controller, n_stations) -> per-seed values
    pairs: tuple

    def ranking(self, n_stations: int) -> list[tuple[str, float]]:
        means = [(c, float(np.mean(v))) for (c, n), v in self.samples.items() if n == n_stations]
        return sorted(means, key=lambda cm: (-cm[1], cm[0]))

    def pair(self, a: str, b: str, n_stations: int | None = None) -> PairResult:
        for p in self.pairs:
            if {p.a, p.b} == {a, b} and (n_stations is None or p.n_stations == n_stations):
                return p
        raise KeyError((a, b, n_stations))

    def format(self, alpha: float = 0.05) -> str:
        buf = io.StringIO()
        for n in sorted({n for _, n in self.samples}):
            buf.write(f"n_stations = {n}: {self.metric}\n")
            for rank, (c, m) in enumerate(self.ranking(n), 1):
                _, _, half = t_interval(self.samples[(c, n)])
                buf.write(f"  {rank}. {c:<18} {m:10.3f} +/- {half:.3f} (99% CI, {len(self.samples[(c, n)])} seeds)\n")
            for p in (p for p in self.pairs if p.n_stations == n):
                mark = "significant" if p.p_value < alpha else "not significant"
                buf.write(f"  {p.a} vs {p.b}: p = {p.p_value:.4g} ({mark} at alpha = {alpha})\n")
        return buf.getvalue()

    def rows(self) -> list[list[str]]:
        return [[str(p.n_stations), p.a, p.b, _fmt(p.mean_a), _fmt(p.mean_b), f"{p.p_value:.6g}"]
                for p in self.pairs]


def _runs_file(path) -> Path:
    p = Path(path)
    if p.is_dir():
        p = p / "runs.csv"
    elif p.name == "summary.csv":  # per-seed values live next to the summary
        p = p.with_name("runs.csv")
    if not p.is_file():
        raise ComparisonError(f"{path}: no runs.csv found")
    return p


def compare_report(paths, metric: str = "aggregate_throughput_mbps") -> ComparisonReport:
    """Pairwise Welch t-tests between controllers on per-seed run metrics."""
    samples: dict[tuple, list[float]] = {}
    for path in paths:
        with open(_runs_file(path), newline="", encoding="utf-8") as f:
            for row in csv.DictReader(f):
                if metric not in row:
                    raise ComparisonError(f"{path}: no column {metric!r}")
                samples.setdefault((row["controller"], int(row["n_stations"])), []).append(float(row[metric]))
    controllers = {c for c, _ in samples}
    if len(controllers) < 2:
        raise ComparisonError("need at least two controllers to compare")
    for key, v in samples.items():
        if len(v) < 2:
            raise ComparisonError(f"{key[0]} (n_stations={key[1]}) has {len(v)} seed; need at least two")
    pairs = []
    for n in sorted({n for _, n in samples}):
        present = sorted(c for c, m in samples if m == n)
        for a, b in itertools.combinations(present, 2):
            pairs.append(PairResult(n, a, b, float(np.mean(samples[(a, n)])), float(np.mean(samples[(b, n)])),
                                    welch_pvalue(samples[(a, n)], samples[(b, n)])))
    return ComparisonReport(metric, samples, tuple(pairs))
