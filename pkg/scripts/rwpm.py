"""Ten stations under random-waypoint mobility in a 40 m x 40 m field, plus Welch tests.

    python scripts/rwpm.py                 # 100 s, 20 seeds
    python scripts/rwpm.py --static        # stations placed at random and never move
    python scripts/rwpm.py --full          # 1000 s, 40 seeds
"""

import argparse
import sys

from ftmrate.config import preset
from ftmrate.experiment import compare_report, run_experiment


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--static", action="store_true")
    ap.add_argument("--full", action="store_true")
    ap.add_argument("--out-dir", default=None)
    ap.add_argument("--parallel", type=int, default=1)
    ap.add_argument("--alpha", type=float, default=0.05)
    args = ap.parse_args(argv)

    name = "paper/rwpm" + ("-static" if args.static else "") + ("" if args.full else "-desk")
    out = run_experiment(preset(name), args.out_dir, parallel=args.parallel,
                         progress=lambda s: print(s.run_id, file=sys.stderr, flush=True))
    print(compare_report([out]).format(alpha=args.alpha), end="")


if __name__ == "__main__":
    main()
