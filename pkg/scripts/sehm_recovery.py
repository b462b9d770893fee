"""Parameter recovery of the SEHM fit on simulated streams."""
import argparse

import numpy as np

from activity_hmm import sehm


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--days", type=int, default=20000)
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--truth", type=float, nargs=4, default=[0.1, 0.5, 0.2, 2.5], metavar=("B", "ALPHA", "OMEGA", "S"))
    args = p.parse_args()
    truth = sehm.SehmModel(*args.truth)
    names = ("b", "alpha", "omega", "s")
    rel = {n: [] for n in names}
    for seed in range(args.seeds):
        counts = sehm.simulate(truth, args.days, np.random.default_rng([33, seed]))
        f = sehm.fit(counts, seed=seed)
        for n in names:
            rel[n].append(abs(getattr(f.model, n) - getattr(truth, n)) / getattr(truth, n))
        print(f"seed {seed:2d}: " + "  ".join(f"{n}={getattr(f.model, n):.4f}" for n in names)
              + f"  ll-ll_true={f.log_likelihood - sehm.log_likelihood(truth, counts):.2f}")
    for n in names:
        r = np.array(rel[n])
        print(f"{n:6s} within 20%: {(r <= 0.2).sum()}/{r.size}  max relative error {r.max():.3f}")


if __name__ == "__main__":
    main()
