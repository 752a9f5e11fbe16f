"""Paired random-vs-candidate runs on the synthetic imbalanced benchmark.

    python3 scripts/convergence.py --seeds 100-104 --out convergence.csv

Prints one line per seed plus medians and writes the same rows as CSV.
"""

import argparse
import csv
from dataclasses import asdict, replace
from statistics import median

from mlbatch.benchmarks import ABConfig, run_ab


def seed_list(text):
    if "-" in text:
        lo, hi = text.split("-")
        return list(range(int(lo), int(hi) + 1))
    return [int(s) for s in text.split(",")]


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seeds", type=seed_list, default=seed_list("100-104"))
    p.add_argument("--candidate", default="adaptive")
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--lr", type=float, default=1e-2)
    p.add_argument("--se", type=float, default=16.0)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--out")
    args = p.parse_args()

    cfg = ABConfig(noise=args.noise)
    cfg.train = replace(cfg.train, epochs=args.epochs, lr=args.lr, s_e=args.se)
    rows = []
    for seed in args.seeds:
        r = run_ab(seed, cfg, args.candidate)
        rows.append(dict(asdict(r), batch_ratio=r.batch_ratio, auc_gap=r.auc_gap))
        print(f"seed {seed}: ratio {r.batch_ratio:.3f}  auc gap {r.auc_gap:+.4f}  "
              f"minority loss {r.random_minority_loss:.4f} -> {r.candidate_minority_loss:.4f}")
    print(f"median ratio {median(r['batch_ratio'] for r in rows):.3f}  "
          f"median auc gap {median(r['auc_gap'] for r in rows):+.4f}")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)


if __name__ == "__main__":
    main()
