"""Cross-validated pass and churn MSE for every predictor, agent and feature set.

Plays a generated pack with both grid agents, derives synthetic truth, and
writes the 12-row report.

Usage: python3 scripts/prediction_grid.py [--levels 30] [--seed 0] [--workers 4] [--out prediction_grid.csv]
"""

import argparse
import time

from aiplaytest import files
from aiplaytest.experiments import build_grid_data, run_grid
from aiplaytest.levels import generate_pack


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--levels", type=int, default=30)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="prediction_grid.csv")
    args = ap.parse_args()

    t0 = time.perf_counter()
    data = build_grid_data(generate_pack(args.levels, seed=args.seed), seed=args.seed, workers=args.workers)
    print("data built: " + ", ".join(f"{k} {v:.0f} s" for k, v in data.timings.items()))
    reports = run_grid(data, seed=args.seed, workers=args.workers)
    for r in reports:
        print(f"{r.tag:>24}  pass {r.pass_mu:.4f} ({r.pass_sigma:.4f})  churn {r.churn_mu:.2e} ({r.churn_sigma:.2e})")
    files.write_report(args.out, reports, {"levels": args.levels, "seed": args.seed})
    print(f"wrote {args.out} in {time.perf_counter() - t0:.0f} s")


if __name__ == "__main__":
    main()
