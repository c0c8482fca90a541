"""Accuracy of every method on Zipf-Poisson data across tail exponents.

Writes one row per (tau, method) with the median and quartiles of v.
"""

import argparse
import sys

from abhorizon.bench import ALL_METHODS, run_benchmark, summarize
from abhorizon.io import write_table
from abhorizon.simulate import sample_zipf


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--taus", default="0.6,0.7,0.8,0.9")
    ap.add_argument("--n-users", type=int, default=100_000)
    ap.add_argument("--pilot-days", type=int, default=10)
    ap.add_argument("--horizon", type=int, default=50)
    ap.add_argument("--reps", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="-")
    args = ap.parse_args(argv)

    rows = []
    for tau in (float(t) for t in args.taus.split(",")):
        days = args.pilot_days + args.horizon
        sets = [(f"tau{tau}-{i:02d}", sample_zipf(tau, args.n_users, days, seed=(args.seed, i))) for i in range(args.reps)]
        reports = run_benchmark(sets, args.pilot_days, args.horizon, ALL_METHODS, seed=args.seed)
        for s in summarize(reports):
            rows.append({"tau": tau, "method": s.method, "n": s.n, "median_v": s.median, "q1": s.q1, "q3": s.q3})
        print(f"tau={tau}: done", file=sys.stderr)
    write_table(rows, sys.stdout if args.out == "-" else args.out)


if __name__ == "__main__":
    main()
