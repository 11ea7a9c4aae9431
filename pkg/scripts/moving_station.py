"""One station walking away from the AP: per-second MCS and throughput, FTMRate vs. the oracle.

    python scripts/moving_station.py --velocity 2 --seed 0
    python scripts/moving_station.py --velocity 1 --csv trace.csv
"""

import argparse
import csv
import sys

from ftmrate.config import preset
from ftmrate.sim import run_scenario

CONTROLLERS = ("Oracle", "FtmRateKF", "FtmRatePF", "FtmRateES", "ThompsonSampling", "MinstrelLike")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--velocity", type=int, choices=(1, 2), default=2)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--csv", help="write the per-second trace here")
    args = ap.parse_args(argv)

    cfg = preset(f"paper/moving-station-{args.velocity}mps")
    model = cfg.load_success_model()
    traces = {c: list(run_scenario(cfg.run_setup(c, 1, model), args.seed)) for c in CONTROLLERS}

    header = ["time_s", "distance_m"] + [f"{c}_{k}" for c in CONTROLLERS for k in ("mcs", "mbps")]
    rows = []
    for i, rec in enumerate(traces["Oracle"]):
        row = [f"{rec.start:g}", f"{args.velocity * (rec.start + rec.length / 2):.1f}"]
        for c in CONTROLLERS:
            r = traces[c][i]
            row += [str(r.stations[0].mcs_mode), f"{r.aggregate_throughput:.2f}"]
        rows.append(row)

    if args.csv:
        with open(args.csv, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
    w = csv.writer(sys.stdout, delimiter="\t", lineterminator="\n")
    w.writerow(["t", "d"] + [f"{c[:8]}.{k}" for c in CONTROLLERS for k in ("mcs", "mbps")])
    w.writerows(rows)


if __name__ == "__main__":
    main()
