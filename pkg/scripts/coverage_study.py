"""Credible-interval coverage of the linear coefficients in the
semi-parametric model, across simulation replicates.

Usage: python3 scripts/coverage_study.py [--replicates 20] [--n 5000]
"""

import argparse
import csv

import numpy as np

from monoord.experiments import run_parallel, semiparametric_coverage
from monoord.simulate import SEMI_BETA


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--replicates", type=int, default=20)
    ap.add_argument("--n", type=int, default=5000)
    ap.add_argument("--iterations", type=int, default=20_000)
    ap.add_argument("--burn-in", type=int, default=5_000, dest="burn_in")
    ap.add_argument("--thin", type=int, default=20)
    ap.add_argument("--jobs", type=int, default=None)
    ap.add_argument("--out", default="coverage.csv")
    args = ap.parse_args()

    schedule = dict(
        iterations=args.iterations, burn_in=args.burn_in, thin=args.thin
    )
    jobs = [(r, args.n, schedule) for r in range(args.replicates)]
    results = run_parallel(semiparametric_coverage, jobs, max_workers=args.jobs)

    covered = np.zeros(SEMI_BETA.size, dtype=int)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["replicate"]
            + [f"beta{j}_{side}" for j in range(SEMI_BETA.size)
               for side in ("lo", "mean", "hi")]
        )
        for r, (lo, hi, mean) in enumerate(results):
            covered += (lo <= SEMI_BETA) & (SEMI_BETA <= hi)
            row = [r]
            for j in range(SEMI_BETA.size):
                row += [repr(lo[j]), repr(mean[j]), repr(hi[j])]
            writer.writerow(row)

    for j, b in enumerate(SEMI_BETA):
        print(f"beta_{j + 1} = {b}: covered in {covered[j]}/{len(results)}")


if __name__ == "__main__":
    main()
