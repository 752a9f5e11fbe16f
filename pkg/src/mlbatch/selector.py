"""Loss-driven mini-batch selection.

Four strategies share one state object:

* ``random``          uniform permutation per epoch
* ``hard``            rank-based probabilities on the raw per-sample loss
* ``adaptive``        imbalance-weighted loss, quantized, exponential in the index
* ``adaptive_chain``  as ``adaptive`` but each draw after the first is restricted
                      to instances carrying labels correlated with the previous
                      sample's rarest label

Probabilities for every non-random strategy have the form
``p(i) ∝ base ** e_i`` with ``base = s_e ** (1/n)`` and ``e_i`` either the
loss rank (1..n) or the quantization index (0..n), so ``p(i) > 0`` always.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .imbalance import top_related_labels

STRATEGIES = ("random", "hard", "adaptive", "adaptive_chain")
SELECTION_PRESSURES = (2.0, 8.0, 16.0, 64.0)


def normalize_strategy(name: str) -> str:
    key = name.strip().lower().replace("-", "_")
    if key not in STRATEGIES:
        raise ValueError(f"unknown strategy {name!r}; expected one of "
                         f"{', '.join(s.replace('_', '-') for s in STRATEGIES)}")
    return key


def batches_per_epoch(n: int, batch_size: int) -> int:
    return -(-n // batch_size)


def epoch_batch_sizes(n: int, batch_size: int) -> list[int]:
    """Sizes of the batches making up one epoch; only the last may be short."""
    full, rest = divmod(n, batch_size)
    return [batch_size] * full + ([rest] if rest else [])


@dataclass
class SelectionState:
    raw_loss: np.ndarray
    weights: np.ndarray
    weighted_loss: np.ndarray
    q_index: np.ndarray
    probabilities: np.ndarray
    s_e: float
    warmup_remaining: int
    mode: str = "quantized"  # "quantized" or "rank"
    rng_seed: int = 0

    @property
    def n(self) -> int:
        return self.raw_loss.shape[0]

    @property
    def in_warmup(self) -> bool:
        return self.warmup_remaining > 0

    def copy(self) -> "SelectionState":
        return SelectionState(self.raw_loss.copy(), self.weights.copy(),
                              self.weighted_loss.copy(), self.q_index.copy(),
                              self.probabilities.copy(), self.s_e,
                              self.warmup_remaining, self.mode, self.rng_seed)


def init_state(n: int, s_e: float = 8.0, warmup_epochs: int = 3, weights=None,
               batch_size: int = 128, mode: str = "quantized", rng_seed: int = 0) -> SelectionState:
    if n < 1:
        raise ValueError(f"need at least one sample, got n={n}")
    if s_e < 1:
        raise ValueError(f"selection pressure must be >= 1, got {s_e}")
    if warmup_epochs < 0:
        raise ValueError("warm-up epochs must be >= 0")
    if mode not in ("quantized", "rank"):
        raise ValueError(f"unknown probability mode {mode!r}")
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64).copy()
    if w.shape != (n,):
        raise ValueError(f"weights must have shape ({n},), got {w.shape}")
    bs = min(max(1, batch_size), n)
    return SelectionState(
        raw_loss=np.zeros(n), weights=w, weighted_loss=np.zeros(n),
        q_index=np.zeros(n, dtype=np.int64), probabilities=np.full(n, 1.0 / n),
        s_e=float(s_e), warmup_remaining=warmup_epochs * batches_per_epoch(n, bs),
        mode=mode, rng_seed=rng_seed,
    )


def quantize(weighted_loss) -> np.ndarray:
    """``ceil(l_i / (l_max / n))`` clipped to ``[0, n]``; all zeros when l_max is 0."""
    loss = np.asarray(weighted_loss, dtype=np.float64)
    n = loss.shape[0]
    l_max = loss.max(initial=0.0)
    if l_max <= 0:
        return np.zeros(n, dtype=np.int64)
    # l * n / l_max rather than l / delta keeps l == l_max at exactly n
    x = loss * n / l_max
    # snap values within rounding noise of an integer so that exact boundaries
    # (e.g. 1.5 * 0.4 / 0.3) do not jump a level on the last ulp
    r = np.rint(x)
    x = np.where(np.abs(x - r) <= 1e-9 * np.maximum(1.0, r), r, x)
    q = np.ceil(x)
    return np.clip(q, 0, n).astype(np.int64)


def _exponential(exponents, s_e: float) -> np.ndarray:
    e = np.asarray(exponents, dtype=np.float64)
    n = e.shape[0]
    if s_e == 1.0:
        return np.full(n, 1.0 / n)
    weights = np.exp((math.log(s_e) / n) * e)
    return weights / weights.sum()


def selection_probabilities(q_index, s_e: float) -> np.ndarray:
    return _exponential(q_index, s_e)


def loss_ranks(loss) -> np.ndarray:
    """1-based ascending ranks; equal losses ranked by ascending index."""
    loss = np.asarray(loss, dtype=np.float64)
    ranks = np.empty(loss.shape[0], dtype=np.int64)
    ranks[np.argsort(loss, kind="stable")] = np.arange(1, loss.shape[0] + 1)
    return ranks


def rank_probabilities(loss, s_e: float) -> np.ndarray:
    return _exponential(loss_ranks(loss), s_e)


def refresh(state: SelectionState) -> SelectionState:
    state.weighted_loss = state.weights * state.raw_loss
    if state.mode == "rank":
        state.q_index = loss_ranks(state.raw_loss)
    else:
        state.q_index = quantize(state.weighted_loss)
    state.probabilities = _exponential(state.q_index, state.s_e)
    return state


def update_after_batch(state: SelectionState, batch_indices, batch_raw_losses,
                       weights=None) -> SelectionState:
    """Store fresh losses for the batch and recompute probabilities over all n.

    Entries outside the batch keep their last observed loss.
    """
    idx = np.asarray(batch_indices, dtype=np.intp)
    losses = np.asarray(batch_raw_losses, dtype=np.float64)
    if idx.shape != losses.shape:
        raise ValueError("batch indices and losses differ in length")
    if idx.size and (idx.min() < 0 or idx.max() >= state.n):
        raise IndexError(f"batch index out of range [0, {state.n})")
    if not np.all(np.isfinite(losses)) or np.any(losses < 0):
        raise ValueError("batch losses must be finite and non-negative")
    if weights is not None:
        state.weights = np.asarray(weights, dtype=np.float64)
    state.raw_loss[idx] = losses
    return refresh(state)


def _draw_one(p: np.ndarray, rng) -> int:
    """Inverse-CDF draw of one index from unnormalised non-negative weights."""
    cum = np.cumsum(p)
    u = rng.random() * cum[-1]
    i = min(int(np.searchsorted(cum, u, side="right")), p.shape[0] - 1)
    # u can round up to cum[-1]; step back to the last drawable index
    while p[i] == 0:
        i -= 1
    return i


def _probs(state_or_p) -> np.ndarray:
    if isinstance(state_or_p, SelectionState):
        return state_or_p.probabilities
    return np.asarray(state_or_p, dtype=np.float64)


def draw_batch(state, batch_size: int, rng) -> list[int]:
    """Draw distinct indices one at a time, renormalising over the remaining pool."""
    p = _probs(state).copy()
    n = p.shape[0]
    if not 1 <= batch_size <= n:
        raise ValueError(f"batch size {batch_size} outside [1, {n}]")
    chosen = []
    for _ in range(batch_size):
        i = _draw_one(p, rng)
        chosen.append(i)
        p[i] = 0.0
    return chosen


class ChainContext:
    """Precomputed label structures used by chain selection.

    Caches, per anchor label, the instance mask of the correlated label set.
    """

    def __init__(self, adjacency, labels, irlbl, card: float):
        self.adjacency = np.asarray(adjacency, dtype=np.float64)
        self.labels = np.asarray(labels).astype(bool)
        self.irlbl = np.asarray(irlbl, dtype=np.float64)
        q = self.labels.shape[1]
        self.count = min(math.ceil(card), q - 1) if card > 0 else 0
        self._pool_cache: dict[int, np.ndarray] = {}

    def anchor(self, sample: int) -> int | None:
        positives = np.flatnonzero(self.labels[sample])
        if positives.size == 0:
            return None
        return int(positives[np.argmax(self.irlbl[positives])])

    def related(self, anchor: int) -> list[int]:
        if self.count < 1:
            return []
        return top_related_labels(self.adjacency, anchor, self.count)

    def pool(self, sample: int) -> np.ndarray | None:
        """Instance mask D_c induced by ``sample``; None when undefined."""
        a = self.anchor(sample)
        if a is None or self.count < 1:
            return None
        if a not in self._pool_cache:
            self._pool_cache[a] = self.labels[:, self.related(a)].any(axis=1)
        return self._pool_cache[a]


def draw_chain_batch(state, adjacency, labels, irlbl, card: float, batch_size: int,
                     rng, context: ChainContext | None = None) -> list[int]:
    """Chain selection: seed from the global distribution, then each next sample
    from the distribution restricted to the previous sample's correlated pool.

    Falls back to the global distribution (minus already chosen samples) when
    the previous sample has no positive label or its pool is exhausted.
    """
    ctx = context or ChainContext(adjacency, labels, irlbl, card)
    p = _probs(state).copy()
    n = p.shape[0]
    if not 1 <= batch_size <= n:
        raise ValueError(f"batch size {batch_size} outside [1, {n}]")
    chosen = [_draw_one(p, rng)]
    p[chosen[0]] = 0.0
    while len(chosen) < batch_size:
        mask = ctx.pool(chosen[-1])
        restricted = None
        if mask is not None:
            restricted = np.where(mask, p, 0.0)
            if not restricted.sum() > 0:
                restricted = None
        i = _draw_one(p if restricted is None else restricted, rng)
        chosen.append(i)
        p[i] = 0.0
    return chosen
