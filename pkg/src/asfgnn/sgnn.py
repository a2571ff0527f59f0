"""Per-client GraphSAGE encoder: mean aggregation, concat, depth-K propagation.

The encoder projects raw features once (no nonlinearity), then runs K rounds
of {neighbor mean, concat with self, affine, tanh} and L2-normalizes the
final rows. Weights never leave the client that owns them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graphs import Graph
from .nn import ShapeError, glorot, linear, tanh_act


@dataclass
class SgnnParams:
    """Input projection w0 (F+1, dim) and K layer matrices (2*dim+1, dim)."""

    w0: np.ndarray
    layers: list[np.ndarray]

    def __post_init__(self):
        if len(self.layers) < 1:
            raise ShapeError("aggregation depth K must be >= 1")
        dim = self.w0.shape[1]
        for k, w in enumerate(self.layers, start=1):
            if w.shape != (2 * dim + 1, dim):
                raise ShapeError(
                    f"layer {k} shape {w.shape}, expected {(2 * dim + 1, dim)}"
                )

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def dim(self) -> int:
        return self.w0.shape[1]


def init_sgnn_params(
    rng: np.random.Generator, num_features: int, dim: int, depth: int, dtype=np.float64
) -> SgnnParams:
    w0 = glorot(rng, num_features, dim, dtype)
    layers = [glorot(rng, 2 * dim, dim, dtype) for _ in range(depth)]
    return SgnnParams(w0=w0, layers=layers)


def initial_embedding(features: np.ndarray, w0: np.ndarray) -> np.ndarray:
    """h0 = [x, 1] @ w0 (no nonlinearity at depth 0)."""
    return linear(features, w0)


def mean_aggregate(h_prev: np.ndarray, nbrs) -> np.ndarray:
    """Arithmetic mean of neighbor rows; zero vector for empty neighborhoods."""
    ids = np.asarray(sorted(nbrs), dtype=np.int64)
    if ids.size == 0:
        return np.zeros(h_prev.shape[1], dtype=h_prev.dtype)
    return h_prev[ids].mean(axis=0)


def sage_layer(h_self: np.ndarray, h_nbr: np.ndarray, w_k: np.ndarray) -> np.ndarray:
    """tanh(w_k applied to concat(self, neighbor mean)), bias row included."""
    if h_self.shape != h_nbr.shape:
        raise ShapeError(f"self {h_self.shape} vs neighbor {h_nbr.shape}")
    stacked = np.concatenate([h_self, h_nbr]).reshape(1, -1)
    return tanh_act(linear(stacked, w_k))[0]


def normalize_rows(h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """L2-normalize rows; all-zero rows stay zero (norm reported as 0)."""
    norms = np.linalg.norm(h, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    return h / safe[:, None], norms


def sgnn_forward(graph: Graph, params: SgnnParams) -> np.ndarray:
    """Depth-K message passing over the whole graph; rows unit-L2 (or zero)."""
    if graph.num_features + 1 != params.w0.shape[0]:
        raise ShapeError(
            f"graph has {graph.num_features} features, w0 expects {params.w0.shape[0] - 1}"
        )
    adj = graph.mean_adjacency
    h = initial_embedding(graph.features, params.w0)
    for w_k in params.layers:
        nbr = adj @ h
        h = tanh_act(linear(np.concatenate([h, nbr], axis=1), w_k))
    embed, _ = normalize_rows(h)
    return embed
