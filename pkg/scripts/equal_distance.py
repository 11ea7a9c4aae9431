"""Aggregate throughput vs. number of stations, all stations at one fixed distance.

    python scripts/equal_distance.py                 # 20 m, N in {1, 5, 10}, 60 s, 10 seeds
    python scripts/equal_distance.py --distance 0
    python scripts/equal_distance.py --full          # N = 1..30, long runs (hours)
"""

import argparse
import csv
import sys
from pathlib import Path

from ftmrate.config import preset
from ftmrate.experiment import compare_report, run_experiment


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--distance", type=int, choices=(0, 20), default=20)
    ap.add_argument("--full", action="store_true", help="full station sweep instead of the desk-scale one")
    ap.add_argument("--out-dir", default=None)
    ap.add_argument("--parallel", type=int, default=1)
    args = ap.parse_args(argv)

    name = f"paper/equal-distance-{args.distance}m" + ("" if args.full else "-desk")
    cfg = preset(name)
    out = run_experiment(cfg, args.out_dir, parallel=args.parallel,
                         progress=lambda s: print(s.run_id, file=sys.stderr, flush=True))

    rows = list(csv.DictReader(open(Path(out) / "summary.csv")))
    thr = [r for r in rows if r["metric"] == "aggregate_throughput_mbps"]
    ctrls = list(cfg.controllers)
    print(f"{'N':>3} " + " ".join(f"{c:>18}" for c in ctrls))
    for n in cfg.n_stations:
        cell = {r["controller"]: r for r in thr if int(r["n_stations"]) == n}
        print(f"{n:>3} " + " ".join(f"{float(cell[c]['mean']):>9.2f} +/-{float(cell[c]['ci99_half_width']):>6.2f}"
                                    for c in ctrls))
    if len(cfg.seeds) > 1:
        print()
        print(compare_report([out]).format(), end="")


if __name__ == "__main__":
    main()
