"""Built-in covariate selection with a pure-noise covariate.

Usage: python3 scripts/selection_study.py [--replicates 10] [--n 1500]
"""

import argparse
import csv

from monoord.experiments import run_parallel, selection_run


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--replicates", type=int, default=10)
    ap.add_argument("--n", type=int, default=2000)
    ap.add_argument("--iterations", type=int, default=40_000)
    ap.add_argument("--burn-in", type=int, default=10_000, dest="burn_in")
    ap.add_argument("--thin", type=int, default=40)
    ap.add_argument("--jobs", type=int, default=None)
    ap.add_argument("--out", default="selection.csv")
    args = ap.parse_args()

    schedule = dict(
        iterations=args.iterations, burn_in=args.burn_in, thin=args.thin
    )
    jobs = [(r, args.n, schedule) for r in range(args.replicates)]
    results = run_parallel(selection_run, jobs, max_workers=args.jobs)

    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        p = results[0][0].size
        writer.writerow(
            ["replicate"]
            + [f"inclusion_{j}" for j in range(p)]
            + [f"count_{j}" for j in range(p)]
        )
        for r, (inc, cnt) in enumerate(results):
            writer.writerow([r] + [repr(v) for v in inc] + [repr(v) for v in cnt])

    for r, (inc, cnt) in enumerate(results):
        print(f"rep {r}: inclusion {inc.round(3)}, counts {cnt.round(2)}")


if __name__ == "__main__":
    main()
