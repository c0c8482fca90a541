"""Coverage of new-user predictive intervals on model-drawn data.

For each replicate, draw ``D`` days, fit on the first ``D0`` and check
whether the interval for the remaining days covers the realized count.
Intervals from the true parameters are reported alongside as a reference.
"""

import argparse
import sys
import warnings

from abhorizon.data import compute_suffstats, holdout_truth
from abhorizon.fit import FitConfig, fit_mle
from abhorizon.io import write_table
from abhorizon.model import HyperParams, negbin_interval, predict_new_users
from abhorizon.simulate import sample_model


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--params", default="0.1,0.5,50,5", help="beta,sigma,c,r")
    ap.add_argument("--days", type=int, default=200)
    ap.add_argument("--pilot-days", type=int, default=20)
    ap.add_argument("--reps", type=int, default=20)
    ap.add_argument("--level", type=float, default=0.95)
    ap.add_argument("--seed", type=int, default=1000)
    ap.add_argument("--out", default="-")
    args = ap.parse_args(argv)

    truth = HyperParams(*(float(x) for x in args.params.split(",")))
    D0, D1 = args.pilot_days, args.days - args.pilot_days
    rows = []
    for rep in range(args.reps):
        data = sample_model(truth, args.days, seed=args.seed + rep)
        stats = compute_suffstats(data, D0)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = fit_mle(stats, FitConfig(seed=rep))
        realized = holdout_truth(data, D0, D1).new_users
        lo, hi = negbin_interval(predict_new_users(res.params, stats, D1), args.level)
        tlo, thi = negbin_interval(predict_new_users(truth, stats, D1), args.level)
        rows.append(
            {
                "rep": rep, "N": stats.N, "realized": realized, "lo": lo, "hi": hi,
                "covered": int(lo <= realized <= hi), "covered_true_params": int(tlo <= realized <= thi),
                **res.params.to_dict(),
            }
        )
    write_table(rows, sys.stdout if args.out == "-" else args.out)
    hits = sum(r["covered"] for r in rows)
    ref = sum(r["covered_true_params"] for r in rows)
    print(f"fitted: {hits}/{len(rows)} covered; true params: {ref}/{len(rows)}", file=sys.stderr)


if __name__ == "__main__":
    main()
