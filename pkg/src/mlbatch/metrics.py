"""Multi-label evaluation metrics and the Wilcoxon signed-rank test."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import rankdata

METRIC_NAMES = ("macro_f", "micro_f", "macro_auc", "ranking_loss", "hamming_loss", "one_error")
# direction in which each metric improves
HIGHER_IS_BETTER = {"macro_f": True, "micro_f": True, "macro_auc": True,
                    "ranking_loss": False, "hamming_loss": False, "one_error": False}


class DegenerateMetricError(ValueError):
    pass


@dataclass(frozen=True)
class MetricReport:
    macro_f: float
    micro_f: float
    macro_auc: float
    ranking_loss: float
    hamming_loss: float
    one_error: float

    def as_dict(self) -> dict:
        return asdict(self)


def _arrays(scores, labels):
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels).astype(bool)
    if s.shape != y.shape or s.ndim != 2:
        raise ValueError(f"scores {s.shape} and labels {y.shape} must be equal 2-d shapes")
    return s, y


def _confusion(scores, labels, threshold):
    s, y = _arrays(scores, labels)
    pred = s >= threshold
    tp = (pred & y).sum(axis=0)
    fp = (pred & ~y).sum(axis=0)
    fn = (~pred & y).sum(axis=0)
    return tp, fp, fn


def macro_f(scores, labels, threshold: float = 0.5) -> float:
    """Mean per-label F1 with predictions ``score >= threshold``.

    A label with no true and no predicted positives scores 1.
    """
    tp, fp, fn = _confusion(scores, labels, threshold)
    denom = 2 * tp + fp + fn
    f1 = np.where(denom > 0, 2 * tp / np.where(denom > 0, denom, 1), 1.0)
    return float(f1.mean())


def micro_f(scores, labels, threshold: float = 0.5) -> float:
    tp, fp, fn = (int(v.sum()) for v in _confusion(scores, labels, threshold))
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 1.0


def _auc_columns(s, y):
    """Mann-Whitney AUC per column (ties count one half); NaN where undefined."""
    n_pos = y.sum(axis=0)
    n_neg = y.shape[0] - n_pos
    ranks = rankdata(s, axis=0)
    rank_sum = np.where(y, ranks, 0.0).sum(axis=0)
    u = rank_sum - n_pos * (n_pos + 1) / 2.0
    valid = (n_pos > 0) & (n_neg > 0)
    out = np.full(s.shape[1], np.nan)
    out[valid] = u[valid] / (n_pos[valid] * n_neg[valid])
    return out


def macro_auc(scores, labels) -> float:
    s, y = _arrays(scores, labels)
    aucs = _auc_columns(s, y)
    valid = ~np.isnan(aucs)
    if not valid.any():
        raise DegenerateMetricError("no label has both positive and negative instances")
    return float(aucs[valid].mean())


def ranking_loss(scores, labels) -> float:
    """Mean fraction of misordered (relevant, irrelevant) label pairs per instance.

    Instances lacking either relevant or irrelevant labels are skipped; returns
    0 when none remain.
    """
    s, y = _arrays(scores, labels)
    n_pos = y.sum(axis=1)
    n_neg = y.shape[1] - n_pos
    keep = (n_pos > 0) & (n_neg > 0)
    if not keep.any():
        return 0.0
    s, y, n_pos, n_neg = s[keep], y[keep], n_pos[keep], n_neg[keep]
    ranks = rankdata(s, axis=1)
    correct = np.where(y, ranks, 0.0).sum(axis=1) - n_pos * (n_pos + 1) / 2.0
    pairs = n_pos * n_neg
    return float(((pairs - correct) / pairs).mean())


def hamming_loss(predictions, labels) -> float:
    p = np.asarray(predictions).astype(bool)
    y = np.asarray(labels).astype(bool)
    if p.shape != y.shape:
        raise ValueError("predictions and labels differ in shape")
    return float((p != y).mean())


def one_error(scores, labels) -> float:
    """Fraction of instances whose top-scored label (lowest index on ties) is
    irrelevant; instances without relevant labels are skipped."""
    s, y = _arrays(scores, labels)
    keep = y.any(axis=1)
    if not keep.any():
        return 0.0
    top = np.argmax(s[keep], axis=1)
    return float((~y[keep][np.arange(top.shape[0]), top]).mean())


def evaluate(scores, labels, threshold: float = 0.5) -> MetricReport:
    s, y = _arrays(scores, labels)
    try:
        auc = macro_auc(s, y)
    except DegenerateMetricError:
        auc = float("nan")
    return MetricReport(
        macro_f=macro_f(s, y, threshold),
        micro_f=micro_f(s, y, threshold),
        macro_auc=auc,
        ranking_loss=ranking_loss(s, y),
        hamming_loss=hamming_loss(s >= threshold, y),
        one_error=one_error(s, y),
    )


# --- Wilcoxon signed-rank ------------------------------------------------

def _signed_rank_counts(doubled_ranks) -> np.ndarray:
    """Number of sign assignments giving each value of 2*W+ (exact null)."""
    total = int(sum(doubled_ranks))
    counts = np.zeros(total + 1, dtype=np.int64)
    counts[0] = 1
    for r in doubled_ranks:
        r = int(r)
        counts[r:] = counts[r:] + counts[: total + 1 - r]
    return counts


def wilcoxon_signed_rank(a, b, method: str = "auto") -> tuple[float, float]:
    """Two-sided paired test. Returns ``(min(W+, W-), p_value)``.

    Zero differences are dropped and tied magnitudes get average ranks. With
    at most 20 nonzero pairs the exact null distribution is used, otherwise a
    normal approximation with tie and continuity corrections.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or a.size < 1:
        raise ValueError("need two equal-length 1-d samples")
    diff = a - b
    diff = diff[diff != 0]
    n = diff.size
    if n == 0:
        return 0.0, 1.0
    ranks = rankdata(np.abs(diff))
    w_plus = float(ranks[diff > 0].sum())
    w_minus = float(ranks[diff < 0].sum())
    statistic = min(w_plus, w_minus)
    if method == "auto":
        method = "exact" if n <= 20 else "normal"
    if method == "exact":
        counts = _signed_rank_counts(np.rint(2 * ranks).astype(np.int64))
        t = int(round(2 * w_plus))
        total = counts.sum()
        lower = counts[: t + 1].sum() / total
        upper = counts[t:].sum() / total
        return statistic, float(min(1.0, 2.0 * min(lower, upper)))
    if method != "normal":
        raise ValueError(f"unknown method {method!r}")
    mean = n * (n + 1) / 4.0
    _, tie_counts = np.unique(ranks, return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - (tie_counts ** 3 - tie_counts).sum() / 48.0
    if var <= 0:
        return statistic, 1.0
    z = max(0.0, abs(w_plus - mean) - 0.5) / math.sqrt(var)
    return statistic, float(min(1.0, math.erfc(z / math.sqrt(2.0))))
