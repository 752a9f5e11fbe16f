"""Global and local label-imbalance measures and label co-occurrence.

All quantities are computed on a training split only; nothing here looks at
validation or test rows.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class DegenerateInputError(ValueError):
    pass


@dataclass(frozen=True)
class ImbalanceProfile:
    irlbl: np.ndarray
    mean_ir: float
    minority_mask: np.ndarray
    b_matrix: np.ndarray
    s_matrix: np.ndarray
    epsilon: np.ndarray
    weights: np.ndarray
    adjacency: np.ndarray
    card: float
    k: int

    def dump_csv(self, directory, label_names=None) -> None:
        """Write one CSV per matrix/vector for inspection."""
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        q = self.irlbl.shape[0]
        names = list(label_names) if label_names is not None else [f"y{j}" for j in range(q)]
        with (out / "labels.csv").open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["label", "irlbl", "minority"])
            for name, ir, m in zip(names, self.irlbl, self.minority_mask):
                w.writerow([name, repr(float(ir)), int(m)])
        for fname, mat in (("b_matrix.csv", self.b_matrix), ("s_matrix.csv", self.s_matrix),
                           ("adjacency.csv", self.adjacency)):
            with (out / fname).open("w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(names)
                w.writerows([[repr(float(v)) for v in row] for row in mat])
        with (out / "weights.csv").open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["instance", "epsilon", "weight"])
            for i, (e, wt) in enumerate(zip(self.epsilon, self.weights)):
                w.writerow([i, repr(float(e)), repr(float(wt))])


def irlbl(labels) -> np.ndarray:
    """Per-label imbalance ratio: most frequent label's positive count over
    this label's count. Labels without positives get ``inf``."""
    Y = np.asarray(labels)
    counts = Y.sum(axis=0).astype(np.float64)
    c_max = counts.max(initial=0.0)
    if c_max == 0:
        raise DegenerateInputError("label matrix has no positive entries")
    with np.errstate(divide="ignore"):
        return np.where(counts > 0, c_max / np.where(counts > 0, counts, 1.0), np.inf)


def mean_ir(irlbl_values) -> float:
    values = np.asarray(irlbl_values, dtype=np.float64)
    finite = values[np.isfinite(values)]
    if finite.size == 0:
        raise DegenerateInputError("no label with positives to average over")
    return float(finite.mean())


def minority_set(irlbl_values, mean_ir_value: float) -> np.ndarray:
    return np.asarray(irlbl_values, dtype=np.float64) > mean_ir_value


def nearest_neighbors(features, k: int, workers: int = 1) -> np.ndarray:
    """Exact Euclidean kNN, self excluded, distance ties broken by lower index.

    Returns an ``(n, k)`` index array. Brute force over all pairs.
    """
    X = np.asarray(features, dtype=np.float64)
    n, d = X.shape
    if not 1 <= k <= n - 1:
        raise ValueError(f"k must lie in [1, n-1] = [1, {n - 1}], got {k}")
    chunk = max(1, min(n, (1 << 22) // max(1, n * d)))
    out = np.empty((n, k), dtype=np.intp)

    def run(start):
        stop = min(n, start + chunk)
        diff = X[start:stop, None, :] - X[None, :, :]
        dist = np.einsum("ijk,ijk->ij", diff, diff)
        dist[np.arange(stop - start), np.arange(start, stop)] = np.inf
        out[start:stop] = np.argsort(dist, axis=1, kind="stable")[:, :k]

    starts = range(0, n, chunk)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            list(pool.map(run, starts))
    else:
        for s in starts:
            run(s)
    return out


def local_imbalance(features, labels, k: int = 5, workers: int = 1) -> np.ndarray:
    """Fraction of the k nearest neighbours that disagree on each positive label;
    zero wherever the instance itself is negative."""
    Y = np.asarray(labels)
    nbrs = nearest_neighbors(features, k, workers=workers)
    disagree = (Y[nbrs] != Y[:, None, :]).mean(axis=1)
    return np.where(Y == 1, disagree, 0.0)


def imbalance_scores(b_matrix, minority_mask):
    """Column-normalised local imbalance, per-instance minority accumulation
    and the resulting instance weights.

    Entries with ``B == 1`` are outliers: they are marked ``-1`` in S and
    excluded from both the normalisation and the accumulation.
    """
    B = np.asarray(b_matrix, dtype=np.float64)
    mask = np.asarray(minority_mask, dtype=bool)
    inlier = B < 1.0
    denom = np.where(inlier, B, 0.0).sum(axis=0)
    safe = np.where(denom > 0, denom, 1.0)
    S = np.where(inlier, np.where(denom > 0, B / safe, 0.0), -1.0)
    contrib = np.where(S != -1.0, S, 0.0)
    epsilon = contrib[:, mask].sum(axis=1)
    return S, epsilon, 1.0 + epsilon


def label_adjacency(labels) -> np.ndarray:
    """Symmetric averaged conditional co-occurrence probabilities, zero diagonal."""
    Y = np.asarray(labels, dtype=np.float64)
    co = Y.T @ Y
    positives = np.diag(co).copy()
    cond = np.divide(co, positives[:, None], out=np.zeros_like(co), where=positives[:, None] > 0)
    np.fill_diagonal(cond, 0.0)
    A = 0.5 * (cond + cond.T)
    np.fill_diagonal(A, 0.0)
    return A


def top_related_labels(adjacency, anchor_label: int, count: int) -> list[int]:
    A = np.asarray(adjacency, dtype=np.float64)
    q = A.shape[0]
    if not 1 <= count <= q - 1:
        raise ValueError(f"count must lie in [1, q-1] = [1, {q - 1}], got {count}")
    others = np.array([j for j in range(q) if j != anchor_label])
    row = A[anchor_label, others]
    order = np.lexsort((others, -row))
    return [int(j) for j in others[order[:count]]]


def build_profile(features, labels, k: int = 5, workers: int = 1) -> ImbalanceProfile:
    Y = np.asarray(labels)
    ir = irlbl(Y)
    mir = mean_ir(ir)
    minority = minority_set(ir, mir)
    B = local_imbalance(features, Y, k, workers=workers)
    S, eps, w = imbalance_scores(B, minority)
    return ImbalanceProfile(
        irlbl=ir, mean_ir=mir, minority_mask=minority, b_matrix=B, s_matrix=S,
        epsilon=eps, weights=w, adjacency=label_adjacency(Y),
        card=float(Y.sum()) / Y.shape[0], k=k,
    )
