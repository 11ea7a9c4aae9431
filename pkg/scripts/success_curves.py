"""Tabulate the fitted per-MCS success curves and the MCS picked at each distance.

    python scripts/success_curves.py
    python scripts/success_curves.py --model my_model.json
"""

import argparse

import numpy as np

from ftmrate.channel import ChannelParams, SuccessModelParams, default_success_model, snr_from_distance, success_matrix
from ftmrate.core import PhyConfig
from ftmrate.rate_control import ftmrate_select_mcs


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--model", help="fitted model JSON (default: the shipped one)")
    args = ap.parse_args(argv)
    model = SuccessModelParams.load(args.model) if args.model else default_success_model()
    rates, ch = PhyConfig().rates, ChannelParams()

    print("distance  snr_dB  best  " + " ".join(f"p{m:<5d}" for m in range(12)))
    for d in (0.0, 1, 2, 5, 8, 10, 12, 15, 20, 25, 30, 40, 50, 60, 80, 100, 120, 150):
        snr = float(snr_from_distance(d, ch))
        p = success_matrix(np.array([snr]), model)[:, 0]
        best = ftmrate_select_mcs([d], ch, model, rates)
        print(f"{d:8.1f} {snr:7.2f} {best:5d}  " + " ".join(f"{x:.3f}" for x in p))


if __name__ == "__main__":
    main()
