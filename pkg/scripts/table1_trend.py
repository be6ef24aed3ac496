"""Linear-scenario error study at N=1000 versus N=5000.

Runs paired replicates (the small dataset nests inside the large one) and
writes per-replicate overall MAE to CSV.

Usage: python3 scripts/table1_trend.py [--replicates 20] [--out table1.csv]
"""

import argparse
import csv

from monoord.experiments import run_parallel, table1_pair


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--replicates", type=int, default=20)
    ap.add_argument("--iterations", type=int, default=50_000)
    ap.add_argument("--burn-in", type=int, default=10_000, dest="burn_in")
    ap.add_argument("--thin", type=int, default=20)
    ap.add_argument("--jobs", type=int, default=None)
    ap.add_argument("--out", default="table1.csv")
    args = ap.parse_args()

    schedule = dict(
        iterations=args.iterations, burn_in=args.burn_in, thin=args.thin
    )
    jobs = [(r, schedule) for r in range(args.replicates)]
    results = run_parallel(table1_pair, jobs, max_workers=args.jobs)

    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["replicate", "mae_n1000", "mae_n5000"])
        for r, (a, b) in enumerate(results):
            writer.writerow([r, repr(a), repr(b)])

    small = [a for a, _ in results]
    big = [b for _, b in results]
    wins = sum(b < a for a, b in results)
    print(f"mean MAE x100: N=1000 {100 * sum(small) / len(small):.2f}, "
          f"N=5000 {100 * sum(big) / len(big):.2f}")
    print(f"N=5000 better in {wins}/{len(results)} replicates")


if __name__ == "__main__":
    main()
