"""Training loop: warm-up, batch selection, Adam steps, per-batch/epoch logging."""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import selector as sel
from .data import Dataset
from .diagnostics import density_snapshot
from .imbalance import ImbalanceProfile, build_profile
from .metrics import HIGHER_IS_BETTER, MetricReport, evaluate
from .model import MLP, Adam, bce_per_sample, forward, loss_and_grad


@dataclass
class TrainConfig:
    strategy: str = "adaptive"
    batch_size: int = 128
    epochs: int = 50
    s_e: float = 8.0
    warmup: int = 3
    k: int = 5
    lr: float = 1e-3
    weight_decay: float = 1e-4
    seed: int = 0
    standardize: bool = False
    hidden: int | None = None
    threshold: float = 0.5
    select_metric: str = "macro_auc"
    density_epochs: tuple = (30, 70)

    def __post_init__(self):
        self.strategy = sel.normalize_strategy(self.strategy)
        for name in ("batch_size", "epochs", "k"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.warmup < 0:
            raise ValueError("warmup must be >= 0")
        if self.s_e < 1:
            raise ValueError("s_e must be >= 1")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.select_metric not in HIGHER_IS_BETTER:
            raise ValueError(f"unknown selection metric {self.select_metric!r}")


@dataclass
class Split:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray

    def __post_init__(self):
        for name in ("train", "val", "test"):
            part = np.asarray(getattr(self, name), dtype=np.intp)
            if part.size == 0:
                raise ValueError(f"{name} split is empty")
            setattr(self, name, part)


@dataclass
class EpochRow:
    epoch: int
    validation: MetricReport
    train_loss: float  # mean BCE over the full training split after the epoch


@dataclass
class RunRecord:
    run_id: str
    strategy: str
    seed: int
    fold: int
    batch_rows: list = field(default_factory=list)  # (epoch, batch, wallclock_ms, train_loss)
    epoch_rows: list = field(default_factory=list)
    densities: list = field(default_factory=list)
    best_epoch: int = 0
    test: MetricReport | None = None
    test_scores: np.ndarray | None = None
    test_labels: np.ndarray | None = None


@dataclass
class WarmStart:
    """Everything needed to resume a run right after warm-up."""
    model: MLP
    adam: Adam
    raw_loss: np.ndarray
    rng_state: dict
    epoch: int
    batch: int
    elapsed_ms: float
    record: RunRecord
    best_value: float
    train_seed: int


def model_features(dataset: Dataset, split: Split, standardize: bool) -> np.ndarray:
    """Feature matrix as the model sees it; z-scoring uses training rows only."""
    X = dataset.features
    if not standardize:
        return X
    mu = X[split.train].mean(axis=0)
    sd = X[split.train].std(axis=0)
    sd[sd == 0] = 1.0
    return (X - mu) / sd


class Trainer:
    """Owns the model, optimizer and selection state for one run.

    ``weights`` overrides the imbalance weights derived from the training split;
    they only ever reach the selection state, never the gradient.
    """

    def __init__(self, dataset: Dataset, split: Split, config: TrainConfig,
                 run_id: str = "run", fold: int = 0, weights=None,
                 profile: ImbalanceProfile | None = None, batch_log=None):
        self.config = config
        self.split = split
        X = model_features(dataset, split, config.standardize)
        Y = dataset.labels.astype(np.float64)
        self.X_train, self.Y_train = X[split.train], Y[split.train]
        self.X_val, self.Y_val = X[split.val], Y[split.val]
        self.X_test, self.Y_test = X[split.test], Y[split.test]
        n = self.X_train.shape[0]
        self.batch_size = min(config.batch_size, n)
        self.profile = profile or build_profile(self.X_train, dataset.labels[split.train],
                                                k=min(config.k, n - 1))
        w = self.profile.weights if weights is None else np.asarray(weights, dtype=np.float64)
        hidden = config.hidden or max(64, 4 * dataset.q)
        self.model = MLP([dataset.d, hidden, dataset.q], rng=np.random.default_rng([config.seed, 0]))
        self.adam = Adam(lr=config.lr, weight_decay=config.weight_decay)
        self.rng = np.random.default_rng([config.seed, 1])
        mode = "rank" if config.strategy == "hard" else "quantized"
        self.state = sel.init_state(n, config.s_e, config.warmup, weights=w,
                                    batch_size=self.batch_size, mode=mode, rng_seed=config.seed)
        self.chain = None
        if config.strategy == "adaptive_chain":
            self.chain = sel.ChainContext(self.profile.adjacency, dataset.labels[split.train],
                                          self.profile.irlbl, self.profile.card)
        self.record = RunRecord(run_id, config.strategy, config.seed, fold)
        self.batch_log = batch_log
        self.epoch = 0
        self.batch = 0
        self._elapsed_offset = 0.0
        self._best = -np.inf
        self._t0 = time.perf_counter()

    # --- one step -------------------------------------------------------
    def step(self, batch_indices) -> float:
        """Gradient step on the unweighted batch-mean BCE, then refresh selection."""
        idx = np.asarray(batch_indices, dtype=np.intp)
        losses, grads = loss_and_grad(self.model, self.X_train[idx], self.Y_train[idx])
        self.adam.step(self.model.params, grads)
        sel.update_after_batch(self.state, idx, losses)
        if not self.state.probabilities.min() > 0:
            raise RuntimeError("selection distribution lost strict positivity")
        return float(losses.mean())

    def _epoch_batches(self):
        n = self.state.n
        sizes = sel.epoch_batch_sizes(n, self.batch_size)
        if self.config.strategy == "random" or self.state.in_warmup:
            perm = self.rng.permutation(n)
            bounds = np.cumsum([0] + sizes)
            for a, b in zip(bounds[:-1], bounds[1:]):
                yield perm[a:b]
            return
        for size in sizes:
            if self.chain is not None:
                yield sel.draw_chain_batch(self.state, None, None, None, 0.0, size,
                                           self.rng, context=self.chain)
            else:
                yield sel.draw_batch(self.state, size, self.rng)

    def _clock_ms(self) -> float:
        return self._elapsed_offset + (time.perf_counter() - self._t0) * 1000.0

    def run_epoch(self) -> EpochRow:
        self.epoch += 1
        warm = self.state.in_warmup
        for idx in self._epoch_batches():
            idx = np.asarray(idx, dtype=np.intp)
            p_drawn = self.state.probabilities[idx] if self.batch_log is not None else None
            loss = self.step(idx)
            self.batch += 1
            if warm:
                self.state.warmup_remaining -= 1
            self.record.batch_rows.append((self.epoch, self.batch, self._clock_ms(), loss))
            if self.batch_log is not None:
                self.batch_log({"run_id": self.record.run_id, "epoch": self.epoch,
                                "batch": self.batch, "indices": idx.tolist(),
                                "p": p_drawn.tolist()})
        return self._end_of_epoch()

    def _end_of_epoch(self) -> EpochRow:
        cfg = self.config
        train_losses = bce_per_sample(forward(self.model, self.X_train), self.Y_train)
        report = evaluate(forward(self.model, self.X_val), self.Y_val, cfg.threshold)
        row = EpochRow(self.epoch, report, float(train_losses.mean()))
        self.record.epoch_rows.append(row)
        if self.epoch in cfg.density_epochs:
            self.record.densities.extend(density_snapshot(
                train_losses, self.Y_train, self.profile.minority_mask, self.epoch))
        value = getattr(report, cfg.select_metric)
        if not np.isnan(value):
            value = value if HIGHER_IS_BETTER[cfg.select_metric] else -value
            if value > self._best:
                self._best = value
                self._capture_test()
        elif self.record.test is None:
            self._capture_test()
        return row

    def _capture_test(self):
        scores = forward(self.model, self.X_test)
        self.record.best_epoch = self.epoch
        self.record.test = evaluate(scores, self.Y_test, self.config.threshold)
        self.record.test_scores = scores
        self.record.test_labels = self.Y_test.astype(np.int8)

    # --- warm-start sharing ------------------------------------------------
    def snapshot(self) -> WarmStart:
        rec = self.record
        return WarmStart(
            model=self.model.copy(), adam=self.adam.copy(), raw_loss=self.state.raw_loss.copy(),
            rng_state=self.rng.bit_generator.state, epoch=self.epoch, batch=self.batch,
            elapsed_ms=self._clock_ms(),
            record=replace(rec, batch_rows=list(rec.batch_rows), epoch_rows=list(rec.epoch_rows),
                           densities=list(rec.densities)),
            best_value=self._best, train_seed=self.config.seed,
        )

    def restore(self, warm: WarmStart) -> None:
        if warm.train_seed != self.config.seed:
            raise ValueError("warm start belongs to a different seed")
        self.model = warm.model.copy()
        self.adam = warm.adam.copy()
        self.state.raw_loss = warm.raw_loss.copy()
        self.state.warmup_remaining = 0
        sel.refresh(self.state)
        self.rng.bit_generator.state = warm.rng_state
        self.epoch, self.batch = warm.epoch, warm.batch
        rec = warm.record
        self.record.batch_rows = list(rec.batch_rows)
        self.record.epoch_rows = list(rec.epoch_rows)
        self.record.densities = list(rec.densities)
        self.record.best_epoch = rec.best_epoch
        self.record.test = rec.test
        self.record.test_scores = rec.test_scores
        self.record.test_labels = rec.test_labels
        self._best = warm.best_value
        self._elapsed_offset = warm.elapsed_ms
        self._t0 = time.perf_counter()

    def run(self, warm_start: WarmStart | None = None):
        """Train for ``config.epochs`` epochs; returns the post-warm-up snapshot
        (None when warm-up does not finish inside the run)."""
        snapshot = None
        if warm_start is not None:
            self.restore(warm_start)
            snapshot = warm_start
        elif self.state.warmup_remaining == 0:
            snapshot = self.snapshot()
        while self.epoch < self.config.epochs:
            self.run_epoch()
            if snapshot is None and self.state.warmup_remaining == 0:
                snapshot = self.snapshot()
        return snapshot


def train(dataset: Dataset, split: Split, config: TrainConfig, run_id: str = "run",
          fold: int = 0, warm_start: WarmStart | None = None, batch_log=None,
          profile: ImbalanceProfile | None = None):
    """Run one configuration; returns ``(model, record, post-warm-up snapshot)``."""
    trainer = Trainer(dataset, split, config, run_id=run_id, fold=fold,
                      batch_log=batch_log, profile=profile)
    snapshot = trainer.run(warm_start)
    return trainer.model, trainer.record, snapshot
