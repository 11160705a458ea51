"""Pass rate of the four search variants on the five hardest reference levels.

Usage: python3 scripts/variant_ordering.py [--runs 20] [--seed 0] [--workers 4] [--out variant_ordering.csv]
"""

import argparse
import time

import numpy as np

from aiplaytest import files
from aiplaytest.experiments import train_all
from aiplaytest.levels import HARDEST, by_name, reference_pack
from aiplaytest.mcts import VariantConfig
from aiplaytest.stats import collect_runs, group_by_level

VARIANTS = ("vanilla", "policy", "myopic", "policy-myopic")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--runs", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="variant_ordering.csv")
    args = ap.parse_args()

    t0 = time.perf_counter()
    hard = by_name(reference_pack(), HARDEST)
    weights = train_all(hard, seed=args.seed, workers=args.workers)
    rows = []
    for agent in VARIANTS:
        runs = group_by_level(collect_runs(hard, VariantConfig.for_agent(agent), args.runs, args.seed,
                                           weights, args.workers))
        rate = [float(np.mean([r.passed for r in runs[lv.level_id]])) for lv in hard]
        rows.append((agent, *rate))
        print(f"{agent:>14}: " + "  ".join(f"{lv.name} {p:.2f}" for lv, p in zip(hard, rate)))
    files.write_csv(args.out, ("agent", *HARDEST), rows, {"runs": args.runs, "seed": args.seed})
    print(f"wrote {args.out} in {time.perf_counter() - t0:.0f} s")


if __name__ == "__main__":
    main()
