"""Cross-validated strategy comparisons and their CSV artifacts."""

from __future__ import annotations

import csv
import json
import os
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from .data import Dataset, kfold
from .imbalance import build_profile
from .metrics import HIGHER_IS_BETTER, METRIC_NAMES, wilcoxon_signed_rank
from .selector import normalize_strategy
from .trainer import Split, TrainConfig, Trainer, model_features

CURVES_HEADER = ["run_id", "strategy", "seed", "fold", "epoch", "batch", "wallclock_ms", "train_loss"]
METRICS_HEADER = ["run_id", "strategy", "seed", "fold", "epoch", "split", *METRIC_NAMES]
DENSITY_HEADER = ["run_id", "epoch", "bucket", "sample_index", "log_loss"]
SUMMARY_HEADER = ["run_id", "dataset", "strategy", "seed", "fold", "best_epoch", *METRIC_NAMES]
EPOCHS_HEADER = ["run_id", "strategy", "seed", "fold", "epoch", "train_loss"]


@dataclass
class ExperimentConfig:
    strategies: list = field(default_factory=lambda: ["random", "adaptive"])
    folds: int = 5
    seeds: list = field(default_factory=lambda: [0])
    dataset_name: str = "dataset"
    dump_scores: bool = False
    debug_batches: bool = False
    threads: int = 1
    split_seed: int = 0
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        self.strategies = [normalize_strategy(s) for s in self.strategies]
        if len(set(self.strategies)) != len(self.strategies):
            raise ValueError("duplicate strategy")
        if self.folds < 3:
            # one fold each for test and validation, the rest for training
            raise ValueError("need at least 3 folds")


def run_id(strategy: str, fold: int, seed: int) -> str:
    return f"{strategy.replace('_', '-')}-f{fold}-s{seed}"


def _fmt(x: float) -> str:
    return repr(float(x))


def _run_group(dataset: Dataset, split: Split, fold: int, seed: int, config: ExperimentConfig):
    """All strategies for one (fold, seed); the post-warm-up state is computed
    once and handed to every later strategy."""
    X = model_features(dataset, split, config.train.standardize)
    profile = build_profile(X[split.train], dataset.labels[split.train],
                            k=min(config.train.k, split.train.size - 1))
    results = []
    warm = None
    for strategy in config.strategies:
        cfg = replace(config.train, strategy=strategy, seed=seed)
        log = [] if config.debug_batches else None
        trainer = Trainer(dataset, split, cfg, run_id=run_id(strategy, fold, seed), fold=fold,
                          profile=profile, batch_log=log.append if log is not None else None)
        snapshot = trainer.run(warm)
        if warm is None:
            warm = snapshot
        results.append((trainer.record, log, split.train))
    return results


def run_experiment(dataset: Dataset, config: ExperimentConfig, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    jobs = []
    folds = kfold(dataset, config.folds, config.split_seed)
    for fold in range(config.folds):
        split = Split(*folds.train_val_test(fold))
        for seed in config.seeds:
            jobs.append((split, fold, seed))
    threads = max(1, config.threads)
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(min(threads, len(jobs))) as pool:
            futures = [pool.submit(_run_group, dataset, s, f, sd, config) for s, f, sd in jobs]
            grouped = [fut.result() for fut in futures]
    else:
        grouped = [_run_group(dataset, s, f, sd, config) for s, f, sd in jobs]
    order = {s: i for i, s in enumerate(config.strategies)}
    runs = sorted((r for g in grouped for r in g),
                  key=lambda r: (order[r[0].strategy], r[0].fold, r[0].seed))
    write_artifacts(runs, config, out)
    return out


def write_artifacts(runs, config: ExperimentConfig, out: Path) -> None:
    with (out / "curves.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CURVES_HEADER)
        for rec, _, _ in runs:
            for epoch, batch, ms, loss in rec.batch_rows:
                w.writerow([rec.run_id, rec.strategy, rec.seed, rec.fold, epoch, batch,
                            f"{ms:.3f}", _fmt(loss)])
    with (out / "epochs.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(EPOCHS_HEADER)
        for rec, _, _ in runs:
            for row in rec.epoch_rows:
                w.writerow([rec.run_id, rec.strategy, rec.seed, rec.fold, row.epoch,
                            _fmt(row.train_loss)])
    with (out / "metrics.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(METRICS_HEADER)
        for rec, _, _ in runs:
            head = [rec.run_id, rec.strategy, rec.seed, rec.fold]
            for row in rec.epoch_rows:
                w.writerow(head + [row.epoch, "validation"] +
                           [_fmt(getattr(row.validation, m)) for m in METRIC_NAMES])
            w.writerow(head + [rec.best_epoch, "test"] +
                       [_fmt(getattr(rec.test, m)) for m in METRIC_NAMES])
    with (out / "density.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(DENSITY_HEADER)
        for rec, _, train_idx in runs:
            for d in rec.densities:
                for i, ll in zip(d.sample_indices, d.log_losses):
                    w.writerow([rec.run_id, d.epoch, d.bucket, int(train_idx[i]), _fmt(ll)])
    with (out / "summary.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_HEADER)
        for rec, _, _ in runs:
            w.writerow([rec.run_id, config.dataset_name, rec.strategy, rec.seed, rec.fold,
                        rec.best_epoch] + [_fmt(getattr(rec.test, m)) for m in METRIC_NAMES])
    if config.dump_scores:
        (out / "scores").mkdir(exist_ok=True)
        for rec, _, _ in runs:
            np.savez(out / "scores" / f"{rec.run_id}.npz", scores=rec.test_scores,
                     labels=rec.test_labels, threshold=config.train.threshold)
    if config.debug_batches:
        (out / "debug").mkdir(exist_ok=True)
        for rec, log, _ in runs:
            with (out / "debug" / f"{rec.run_id}.jsonl").open("w") as fh:
                for entry in log:
                    fh.write(json.dumps(entry) + "\n")


# --- statistical comparison -------------------------------------------------

@dataclass(frozen=True)
class Comparison:
    metric: str
    verdict: str
    p_value: float
    statistic: float
    pairs: int

    def label(self) -> str:
        return f"{self.verdict} ({self.p_value:.4f})"


def read_summaries(paths) -> list[dict]:
    rows = []
    for path in paths:
        path = Path(path)
        if not path.is_file():
            raise ValueError(f"summary file not found: {path}")
        with path.open(newline="") as fh:
            rows.extend(csv.DictReader(fh))
    return rows


def compare(summary_paths, metric: str = "all", baseline: str = "random",
            candidate: str = "adaptive", alpha: float = 0.05) -> list[Comparison]:
    """Paired Wilcoxon comparison of ``candidate`` against ``baseline``.

    Results are paired on (dataset, fold, seed). A significant difference in
    the metric's favourable direction is a "win", the other direction a
    "loss", anything else a "tie".
    """
    baseline, candidate = normalize_strategy(baseline), normalize_strategy(candidate)
    metrics = METRIC_NAMES if metric == "all" else (metric,)
    for m in metrics:
        if m not in HIGHER_IS_BETTER:
            raise ValueError(f"unknown metric {m!r}")
    by_key = defaultdict(dict)
    for row in read_summaries(summary_paths):
        key = (row.get("dataset", ""), row["fold"], row["seed"])
        strategy = normalize_strategy(row["strategy"])
        if strategy in by_key[key]:
            raise ValueError(f"duplicate result for {strategy} at {key}")
        by_key[key][strategy] = row
    present = {s for rows in by_key.values() for s in rows}
    for s in (baseline, candidate):
        if s not in present:
            raise ValueError(f"no results for strategy {s!r}")
    keys = sorted(k for k, rows in by_key.items() if baseline in rows or candidate in rows)
    unpaired = [k for k in keys if not (baseline in by_key[k] and candidate in by_key[k])]
    if unpaired:
        raise ValueError(f"unpaired results for {unpaired[:3]}")
    out = []
    for m in metrics:
        sign = 1.0 if HIGHER_IS_BETTER[m] else -1.0
        cand = np.array([float(by_key[k][candidate][m]) for k in keys])
        base = np.array([float(by_key[k][baseline][m]) for k in keys])
        diff = sign * (cand - base)
        stat, p = wilcoxon_signed_rank(sign * cand, sign * base)
        verdict = "tie"
        if p < alpha:
            verdict = "win" if _favours_first(diff) else "loss"
        out.append(Comparison(m, verdict, p, stat, len(keys)))
    return out


def _favours_first(diff) -> bool:
    diff = diff[diff != 0]
    ranks = rankdata(np.abs(diff))
    return ranks[diff > 0].sum() > ranks[diff < 0].sum()


def write_comparison(rows: list[Comparison], path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["metric", "verdict", "p_value", "statistic", "pairs"])
        for r in rows:
            w.writerow([r.metric, r.verdict, _fmt(r.p_value), _fmt(r.statistic), r.pairs])


def thread_budget(default: int = 1) -> int:
    value = os.environ.get("MLBATCH_THREADS")
    if not value:
        return default
    try:
        return max(1, int(value))
    except ValueError:
        return default
