"""Synthetic A/B protocol: random versus a loss-driven strategy on the
imbalanced synthetic benchmark, one paired run per seed."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .data import kfold, make_synthetic
from .diagnostics import LOG_OFFSET
from .trainer import Split, TrainConfig, Trainer


@dataclass
class ABConfig:
    n: int = 2000
    d: int = 20
    q: int = 10
    rare_labels: int = 2
    rare_rate: float = 0.02
    noise: float = 0.1
    folds: int = 5
    snapshot_epoch: int = 30
    train: TrainConfig = None

    def __post_init__(self):
        if self.train is None:
            self.train = TrainConfig(epochs=100, s_e=16, lr=1e-2)


@dataclass
class ABResult:
    seed: int
    batches_per_epoch: int
    total_batches: int
    random_final_loss: float
    batches_to_match: int | None  # None when the candidate never gets there
    random_val_auc: float
    candidate_val_auc: float
    random_minority_loss: float
    candidate_minority_loss: float

    @property
    def batch_ratio(self) -> float:
        if self.batches_to_match is None:
            return float("inf")
        return self.batches_to_match / self.total_batches

    @property
    def auc_gap(self) -> float:
        return self.candidate_val_auc - self.random_val_auc


def _minority_mean_loss(record, epoch: int) -> float:
    logs = [r.log_losses for r in record.densities if r.epoch == epoch and r.bucket != "0"]
    values = np.exp(np.concatenate(logs)) - LOG_OFFSET
    return float(values.mean()) if values.size else float("nan")


def run_ab(seed: int, config: ABConfig | None = None, candidate: str = "adaptive") -> ABResult:
    """Train random and ``candidate`` from the same seed, sharing the warm-up."""
    cfg = config or ABConfig()
    ds = make_synthetic(n=cfg.n, d=cfg.d, q=cfg.q, rare_labels=cfg.rare_labels,
                        rare_rate=cfg.rare_rate, noise=cfg.noise, seed=seed)
    split = Split(*kfold(ds, cfg.folds, seed).train_val_test(0))
    base = replace(cfg.train, seed=seed, density_epochs=(cfg.snapshot_epoch,))
    rand = Trainer(ds, split, replace(base, strategy="random"))
    warm = rand.run()
    cand = Trainer(ds, split, replace(base, strategy=candidate), profile=rand.profile)
    cand.run(warm)
    per_epoch = -(-split.train.size // min(base.batch_size, split.train.size))
    target = rand.record.epoch_rows[-1].train_loss
    hit = next((row.epoch for row in cand.record.epoch_rows if row.train_loss <= target), None)
    return ABResult(
        seed=seed,
        batches_per_epoch=per_epoch,
        total_batches=per_epoch * base.epochs,
        random_final_loss=target,
        batches_to_match=None if hit is None else hit * per_epoch,
        random_val_auc=rand.record.epoch_rows[-1].validation.macro_auc,
        candidate_val_auc=cand.record.epoch_rows[-1].validation.macro_auc,
        random_minority_loss=_minority_mean_loss(rand.record, cfg.snapshot_epoch),
        candidate_minority_loss=_minority_mean_loss(cand.record, cfg.snapshot_epoch),
    )
