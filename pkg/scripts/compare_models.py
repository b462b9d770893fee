"""AIC and SMAPE of the gap HMM, the SEHM and the running mean on synthetic data from either generator."""
import argparse

import numpy as np

from activity_hmm import predict
from activity_hmm.sehm import SehmModel
from activity_hmm.simulate import simulate_hmm, simulate_sehm, two_state_model


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--generator", choices=("hmm", "sehm"), default="hmm")
    p.add_argument("--days", type=int, default=6000)
    p.add_argument("--horizons", type=int, nargs="+", default=[100, 200, 400])
    p.add_argument("--seeds", type=int, default=5)
    args = p.parse_args()
    for seed in range(args.seeds):
        rng = np.random.default_rng(seed)
        if args.generator == "hmm":
            series, _ = simulate_hmm(two_state_model(), args.days, rng)
        else:
            series = simulate_sehm(SehmModel(0.1, 0.5, 0.2, 2.5), args.days, rng)
        for row in predict.comparison_table(predict.rolling_eval(series, predict.ESTIMATORS, args.horizons)):
            print(f"seed {seed} n={row['n']:4d}  AIC hmm {row['aic_hmm']:9.1f} sehm {row['aic_sehm']:9.1f}  "
                  f"SMAPE hmm {row['smape_hmm']:5.1f} sehm {row['smape_sehm']:5.1f} "
                  f"baseline {row['smape_baseline']:5.1f}")


if __name__ == "__main__":
    main()
