"""Success rate of the CA* baseline and the exact solver as obstacles are added.

    python scripts/run_exp1.py --trials 30 --out results/exp1.csv
"""

import argparse
from pathlib import Path

from marpf.bench import BenchConfig, rows_to_csv, run_exp1, summarize


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--trials", type=int, default=30)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--max-added", type=int, default=6)
    ap.add_argument("--time-limit", type=float, default=120.0)
    ap.add_argument("--out", default="results/exp1.csv")
    args = ap.parse_args()

    cfg = BenchConfig("exp1", trials=args.trials, seed=args.seed,
                      max_added=args.max_added, time_limit_s=args.time_limit)
    rows = run_exp1(cfg)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(rows_to_csv(rows))
    print("mode    added  success")
    for mode, _, racks, rate, _ in summarize(rows):
        print(f"{mode:7s} {racks - 6:5d}  {rate:.2f}")


if __name__ == "__main__":
    main()
