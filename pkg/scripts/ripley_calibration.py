"""Coverage of 2h by the bootstrap band of the corrected Ripley curve under complete randomness."""
import argparse

import numpy as np

from activity_hmm import ppstats
from activity_hmm.series import EventSeries, interarrivals


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--points", type=int, default=500)
    p.add_argument("--days", type=int, default=5000)
    p.add_argument("--resamples", type=int, default=1000)
    p.add_argument("--replicates", type=int, default=10)
    args = p.parse_args()
    h = np.arange(5, 51, dtype=float)
    shares = []
    for rep in range(args.replicates):
        rng = np.random.default_rng(rep)
        counts = np.zeros(args.days, dtype=int)
        counts[rng.choice(args.days, args.points, replace=False)] = 1
        ia = interarrivals(EventSeries("2000-01-01", counts))
        curve = ppstats.bootstrap_band(
            lambda t, span: ppstats.ripley_corrected(t, span, h, len(t) / span),
            ia, args.days, args.resamples, 0.95, rep)
        share = float(((curve.ci_lo <= 2 * h) & (2 * h <= curve.ci_hi)).mean())
        shares.append(share)
        print(f"replicate {rep:2d}: 2h inside band on {share:.1%} of h in [5, 50]")
    print(f"mean coverage {np.mean(shares):.1%}")


if __name__ == "__main__":
    main()
