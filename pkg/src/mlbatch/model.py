"""Reference multi-label MLP: ReLU hidden layers, sigmoid outputs, per-sample
BCE, hand-written backprop and Adam with coupled L2 weight decay."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import expit

PROB_CLAMP = 1e-7
CHECKPOINT_VERSION = 1


class MLP:
    """Dense network; ``params`` alternates weight matrices and bias vectors."""

    def __init__(self, layer_sizes, rng=None, params=None):
        self.layer_sizes = [int(s) for s in layer_sizes]
        if len(self.layer_sizes) < 2 or min(self.layer_sizes) < 1:
            raise ValueError(f"invalid layer sizes {layer_sizes}")
        if params is not None:
            self.params = [np.array(p, dtype=np.float64) for p in params]
            expected = self._shapes()
            if [p.shape for p in self.params] != expected:
                raise ValueError(f"parameter shapes {[p.shape for p in self.params]} != {expected}")
            return
        rng = np.random.default_rng(rng)
        self.params = []
        last = len(self.layer_sizes) - 2
        for i, (fan_in, fan_out) in enumerate(zip(self.layer_sizes[:-1], self.layer_sizes[1:])):
            # He init for ReLU layers, Glorot for the sigmoid output layer
            scale = np.sqrt(2.0 / fan_in) if i < last else np.sqrt(2.0 / (fan_in + fan_out))
            self.params.append(rng.standard_normal((fan_in, fan_out)) * scale)
            self.params.append(np.zeros(fan_out))

    @classmethod
    def default(cls, d: int, q: int, rng=None) -> "MLP":
        return cls([d, max(64, 4 * q), q], rng=rng)

    def _shapes(self):
        shapes = []
        for fan_in, fan_out in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            shapes += [(fan_in, fan_out), (fan_out,)]
        return shapes

    @property
    def d(self) -> int:
        return self.layer_sizes[0]

    @property
    def q(self) -> int:
        return self.layer_sizes[-1]

    def copy(self) -> "MLP":
        return MLP(self.layer_sizes, params=[p.copy() for p in self.params])


def _check_batch(model: MLP, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.d:
        raise ValueError(f"expected batch of width {model.d}, got shape {X.shape}")
    return X


def _forward_cache(model: MLP, X):
    activations = [X]
    pre = []
    h = X
    n_layers = len(model.params) // 2
    for layer in range(n_layers):
        W, b = model.params[2 * layer], model.params[2 * layer + 1]
        z = h @ W + b
        pre.append(z)
        h = np.maximum(z, 0.0) if layer < n_layers - 1 else expit(z)
        activations.append(h)
    return activations, pre


def forward(model: MLP, X) -> np.ndarray:
    X = _check_batch(model, X)
    return _forward_cache(model, X)[0][-1]


def bce_per_sample(probabilities, labels) -> np.ndarray:
    """Binary cross-entropy averaged over labels, one value per row."""
    p = np.clip(np.asarray(probabilities, dtype=np.float64), PROB_CLAMP, 1.0 - PROB_CLAMP)
    y = np.asarray(labels, dtype=np.float64)
    return -(y * np.log(p) + (1.0 - y) * np.log1p(-p)).mean(axis=1)


def loss_and_grad(model: MLP, X, Y):
    """Per-sample BCE and gradients of its batch mean w.r.t. every parameter.

    The output-layer delta is ``(p - y) / (q * batch)``, the derivative of the
    unclamped loss; it matches the clamped loss wherever the clamp is inactive.
    """
    X = _check_batch(model, X)
    Y = np.asarray(Y, dtype=np.float64)
    activations, pre = _forward_cache(model, X)
    probs = activations[-1]
    losses = bce_per_sample(probs, Y)
    delta = (probs - Y) / (Y.shape[0] * Y.shape[1])
    grads = [None] * len(model.params)
    for layer in range(len(model.params) // 2 - 1, -1, -1):
        grads[2 * layer] = activations[layer].T @ delta
        grads[2 * layer + 1] = delta.sum(axis=0)
        if layer:
            delta = (delta @ model.params[2 * layer].T) * (pre[layer - 1] > 0)
    return losses, grads


def backward(model: MLP, X, Y) -> list[np.ndarray]:
    return loss_and_grad(model, X, Y)[1]


def mean_loss(model: MLP, X, Y) -> float:
    return float(bce_per_sample(forward(model, X), Y).mean())


@dataclass
class Adam:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 1e-4
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def bias_corrected(self):
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        return [m / c1 for m in self.m], [v / c2 for v in self.v]

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> list[np.ndarray]:
        """One in-place update; L2 decay is added to the gradient before the moments."""
        if len(params) != len(grads):
            raise ValueError("params and grads differ in length")
        if not self.m:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            if g.shape != p.shape:
                raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape}")
            if self.weight_decay:
                g = g + self.weight_decay * p
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
        return params

    def copy(self) -> "Adam":
        return Adam(self.lr, self.beta1, self.beta2, self.eps, self.weight_decay, self.t,
                    [m.copy() for m in self.m], [v.copy() for v in self.v])


def adam_step(state: Adam, params, grads):
    return state.step(params, grads)


def save_checkpoint(path, model: MLP, adam: Adam | None = None) -> None:
    arrays = {"version": np.array(CHECKPOINT_VERSION),
              "layer_sizes": np.array(model.layer_sizes)}
    for i, p in enumerate(model.params):
        arrays[f"param_{i}"] = p
    if adam is not None and adam.m:
        arrays["adam_hyper"] = np.array([adam.lr, adam.beta1, adam.beta2, adam.eps,
                                         adam.weight_decay, adam.t], dtype=np.float64)
        for i, (m, v) in enumerate(zip(adam.m, adam.v)):
            arrays[f"adam_m_{i}"] = m
            arrays[f"adam_v_{i}"] = v
    with Path(path).open("wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path):
    with np.load(path) as data:
        version = int(data["version"])
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        sizes = data["layer_sizes"].tolist()
        n_params = 2 * (len(sizes) - 1)
        model = MLP(sizes, params=[data[f"param_{i}"] for i in range(n_params)])
        adam = None
        if "adam_hyper" in data:
            lr, b1, b2, eps, wd, t = data["adam_hyper"].tolist()
            adam = Adam(lr, b1, b2, eps, wd, int(t),
                        [data[f"adam_m_{i}"].copy() for i in range(n_params)],
                        [data[f"adam_v_{i}"].copy() for i in range(n_params)])
    return model, adam
