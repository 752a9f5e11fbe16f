"""Per-sample loss distributions grouped by number of minority labels."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

BUCKETS = ("0", "1", "2", ">2")
LOG_OFFSET = 1e-12


@dataclass(frozen=True)
class DensityRecord:
    epoch: int
    bucket: str
    sample_indices: np.ndarray
    log_losses: np.ndarray


def minority_counts(labels, minority_mask) -> np.ndarray:
    Y = np.asarray(labels).astype(bool)
    return Y[:, np.asarray(minority_mask, dtype=bool)].sum(axis=1)


def bucket_of(count: int) -> str:
    return BUCKETS[count] if count < 3 else ">2"


def density_snapshot(losses, labels, minority_mask, epoch: int) -> list[DensityRecord]:
    """Split samples into the four minority-count buckets with log-scaled losses.

    ``losses`` may be a per-sample vector or anything with a ``raw_loss``
    attribute (a selection state).
    """
    loss = np.asarray(getattr(losses, "raw_loss", losses), dtype=np.float64)
    counts = np.minimum(minority_counts(labels, minority_mask), 3)
    log_loss = np.log(loss + LOG_OFFSET)
    records = []
    for b, name in enumerate(BUCKETS):
        idx = np.flatnonzero(counts == b)
        records.append(DensityRecord(epoch, name, idx, log_loss[idx]))
    return records
