"""Selection-pressure sweep: batch ratio and AUC gap for each s_e."""

import argparse
import csv
from dataclasses import replace
from statistics import median

from mlbatch.benchmarks import ABConfig, run_ab
from mlbatch.selector import SELECTION_PRESSURES


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    p.add_argument("--pressures", type=float, nargs="+", default=list(SELECTION_PRESSURES))
    p.add_argument("--candidate", default="adaptive")
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--out", default="se_sweep.csv")
    args = p.parse_args()

    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["s_e", "seed", "batch_ratio", "auc_gap", "minority_loss_gap"])
        for s_e in args.pressures:
            cfg = ABConfig()
            cfg.train = replace(cfg.train, s_e=s_e, epochs=args.epochs)
            ratios = []
            for seed in args.seeds:
                r = run_ab(seed, cfg, args.candidate)
                ratios.append(r.batch_ratio)
                w.writerow([s_e, seed, r.batch_ratio, r.auc_gap,
                            r.candidate_minority_loss - r.random_minority_loss])
            print(f"s_e={s_e:g}: median batch ratio {median(ratios):.3f}")


if __name__ == "__main__":
    main()
