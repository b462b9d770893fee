"""Classify one series over a grid of window lengths and families.

    python3 scripts/delta_sweep.py --input events.csv --delta 10 15 30 60
    python3 scripts/delta_sweep.py --simulate 3286       # synthetic two-state input
"""
import argparse

import numpy as np

from activity_hmm import hmm
from activity_hmm.series import load_series
from activity_hmm.simulate import simulate_hmm, two_state_model


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--input")
    p.add_argument("--simulate", type=int, default=3286, help="days of synthetic data when no input is given")
    p.add_argument("--delta", type=int, nargs="+", default=[10, 15, 30, 60])
    p.add_argument("--family", nargs="+", default=["geom", "hgeom"])
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()
    if args.input:
        series = load_series(args.input)
    else:
        series, _ = simulate_hmm(two_state_model(), args.simulate, np.random.default_rng(args.seed))
    print(f"{'family':7s} {'delta':>5s} {'gamma0':>8s} {'gamma1':>8s} {'p0':>7s} {'q0':>7s} "
          f"{'N':>5s} {'N_spurt':>7s} {'f':>7s}")
    for fam in args.family:
        for delta in args.delta:
            s = hmm.classify(series, delta, fam).summary
            P = s["transition"]
            g0, g1 = (e["gamma"] for e in s["params"])
            print(f"{fam:7s} {delta:5d} {g0:8.4f} {g1:8.4f} {P[0][1]:7.4f} {P[1][0]:7.4f} "
                  f"{s['n_windows']:5d} {s['n_spurt']:7d} {s['f']:7.4f}")


if __name__ == "__main__":
    main()
