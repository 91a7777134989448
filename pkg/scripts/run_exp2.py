"""Hybrid makespan for several waypoint intervals against the exact solver.

    python scripts/run_exp2.py --trials 30 --racks 12 --out results/exp2_sparse.csv
    python scripts/run_exp2.py --trials 30 --racks 18 --out results/exp2_dense.csv
"""

import argparse
from pathlib import Path

from marpf.bench import BenchConfig, rows_to_csv, run_exp2, summarize


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--trials", type=int, default=30)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--racks", type=int, default=12)
    ap.add_argument("--agvs", type=int, default=8)
    ap.add_argument("--taus", default="1,2,4")
    ap.add_argument("--time-limit", type=float, default=120.0)
    ap.add_argument("--out", default="results/exp2.csv")
    args = ap.parse_args()

    cfg = BenchConfig("exp2", trials=args.trials, seed=args.seed, racks=args.racks, agvs=args.agvs,
                      taus=tuple(int(t) for t in args.taus.split(",")),
                      time_limit_s=args.time_limit, local_time_limit_s=args.time_limit)
    rows = run_exp2(cfg)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(rows_to_csv(rows))
    print("mode    tau  success  mean makespan")
    for mode, tau, _, rate, mean in summarize(rows):
        tau_s = "-" if tau is None else str(tau)
        mean_s = "-" if mean is None else f"{mean:.2f}"
        print(f"{mode:7s} {tau_s:>3s}  {rate:7.2f}  {mean_s}")


if __name__ == "__main__":
    main()
