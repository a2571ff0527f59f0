"""Dense-network numerics: forward ops, loss, analytic-gradient helpers, SGD.

All tensors are 2-D numpy arrays. Every affine layer follows one bias
convention: the input gains a trailing constant-1 column and the weight
matrix carries the bias as its last row, so biases travel with the weights
through sharing and blending.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np


class ShapeError(ValueError):
    """Raised when operand shapes do not compose."""


class NumericError(FloatingPointError):
    """Raised on non-finite values where finiteness is required."""


def add_bias_column(x: np.ndarray) -> np.ndarray:
    ones = np.ones((x.shape[0], 1), dtype=x.dtype)
    return np.concatenate([x, ones], axis=1)


def linear(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Affine map: [x, 1] @ w, where w's last row is the bias."""
    if x.ndim != 2 or w.ndim != 2 or w.shape[0] != x.shape[1] + 1:
        raise ShapeError(f"linear: x {x.shape} incompatible with w {w.shape}")
    return add_bias_column(x) @ w


def tanh_act(x: np.ndarray) -> np.ndarray:
    return np.tanh(x)


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy and softmax probabilities (stable log-sum-exp)."""
    labels = np.asarray(labels, dtype=np.int64)
    if logits.shape[0] != labels.shape[0]:
        raise ShapeError(f"{logits.shape[0]} logit rows vs {labels.shape[0]} labels")
    if labels.size and labels.max() >= logits.shape[1]:
        raise ShapeError(f"label {labels.max()} >= class count {logits.shape[1]}")
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_z
    probs = np.exp(log_probs)
    loss = float(-log_probs[np.arange(labels.size), labels].mean())
    return loss, probs


def softmax_cross_entropy_grad(probs: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """d(mean CE)/d(logits) = (probs - onehot) / n."""
    grad = probs.copy()
    grad[np.arange(labels.size), labels] -= 1.0
    return grad / labels.size


def accuracy(logits: np.ndarray, labels: np.ndarray) -> float:
    """Fraction of argmax predictions matching labels (first max wins ties)."""
    if labels.size == 0:
        return 0.0
    return float((logits.argmax(axis=1) == labels).mean())


def l2_penalty(params: list[np.ndarray], l2: float) -> float:
    """l2 times the sum of Frobenius norms (not squared)."""
    if l2 < 0:
        raise ValueError("l2 must be >= 0")
    return float(l2 * sum(np.linalg.norm(w) for w in params))


def l2_penalty_grad(w: np.ndarray, l2: float) -> np.ndarray:
    """Gradient of l2*||w||_F; zero matrix contributes zero by convention."""
    norm = np.linalg.norm(w)
    if norm == 0.0:
        return np.zeros_like(w)
    return (l2 / norm) * w


def dropout_mask(
    shape: tuple[int, ...], rate: float, rng: np.random.Generator | int
) -> np.ndarray:
    """Inverted-dropout mask: Bernoulli(1-rate) scaled by 1/(1-rate)."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate {rate} outside [0, 1)")
    if rate == 0.0:
        return np.ones(shape)
    gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    keep = gen.random(shape) >= rate
    return keep.astype(np.float64) / (1.0 - rate)


def sgd_step(
    params: Mapping[str, np.ndarray], grads: Mapping[str, np.ndarray], lr: float
) -> dict[str, np.ndarray]:
    """One gradient-descent step, returning fresh arrays."""
    out = {}
    for name, w in params.items():
        g = grads[name]
        if g.shape != w.shape:
            raise ShapeError(f"grad shape {g.shape} != param shape {w.shape} for {name}")
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for {name}")
        out[name] = w - lr * g
    return out


def finite_diff_grad(
    loss_fn: Callable[[Mapping[str, np.ndarray]], float],
    params: Mapping[str, np.ndarray],
    eps: float = 1e-4,
) -> dict[str, np.ndarray]:
    """Central-difference gradient of a scalar function, coordinate by coordinate."""
    if eps <= 0:
        raise ValueError("eps must be > 0")
    work = {k: np.array(v, dtype=np.float64, copy=True) for k, v in params.items()}
    grads = {k: np.zeros_like(v) for k, v in work.items()}
    for name, w in work.items():
        flat = w.reshape(-1)
        gflat = grads[name].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up = loss_fn(work)
            flat[i] = orig - eps
            down = loss_fn(work)
            flat[i] = orig
            gflat[i] = (up - down) / (2.0 * eps)
    return grads


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int, dtype=np.float64) -> np.ndarray:
    """Uniform Glorot weights of shape (fan_in + 1, fan_out); bias row zero."""
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    w = rng.uniform(-limit, limit, size=(fan_in + 1, fan_out))
    w[-1, :] = 0.0
    return w.astype(dtype)


@dataclass(frozen=True)
class TrainConfig:
    """Per-client optimization knobs."""

    lr: float
    l2: float = 0.0
    dropout: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("lr must be > 0")
        if self.l2 < 0:
            raise ValueError("l2 must be >= 0")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")


@dataclass
class FgnnParams:
    """Discriminator weights: a list of affine layers (bias row included)."""

    layers: list[np.ndarray]

    def __post_init__(self):
        for a, b in zip(self.layers, self.layers[1:]):
            if b.shape[0] != a.shape[1] + 1:
                raise ShapeError(f"layer widths do not compose: {a.shape} -> {b.shape}")

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    def flatten(self) -> np.ndarray:
        return np.concatenate([w.reshape(-1) for w in self.layers])

    @classmethod
    def unflatten(cls, flat: np.ndarray, shapes: list[tuple[int, int]]) -> "FgnnParams":
        layers = []
        offset = 0
        for shape in shapes:
            size = shape[0] * shape[1]
            layers.append(flat[offset : offset + size].reshape(shape).copy())
            offset += size
        if offset != flat.size:
            raise ShapeError(f"flat size {flat.size} != total shape size {offset}")
        return cls(layers=layers)

    def shapes(self) -> list[tuple[int, int]]:
        return [tuple(w.shape) for w in self.layers]


def init_fgnn_params(
    rng: np.random.Generator, in_dim: int, hidden: int, num_classes: int, dtype=np.float64
) -> FgnnParams:
    """Two-layer discriminator: in_dim -> hidden (tanh) -> num_classes."""
    return FgnnParams(
        layers=[glorot(rng, in_dim, hidden, dtype), glorot(rng, hidden, num_classes, dtype)]
    )
