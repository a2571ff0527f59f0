"""Joint encoder + discriminator forward/backward for one client.

Hand-rolled reverse pass for the fixed architecture. The encoder and
discriminator share one loss (cross-entropy on the training rows plus an
l2 * Frobenius-norm penalty over every weight), and one SGD step updates
both. Dropout, when enabled, hits intermediate encoder activations and the
discriminator's hidden activations, never the logits or the normalized
embeddings.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .graphs import Graph
from .nn import (
    FgnnParams,
    NumericError,
    TrainConfig,
    accuracy,
    add_bias_column,
    dropout_mask,
    l2_penalty,
    l2_penalty_grad,
    softmax_cross_entropy,
    softmax_cross_entropy_grad,
)
from .sgnn import SgnnParams, init_sgnn_params, normalize_rows
from .nn import init_fgnn_params


@dataclass
class ModelParams:
    """All trainable weights for one client."""

    sgnn: SgnnParams
    fgnn: FgnnParams

    def to_dict(self) -> dict[str, np.ndarray]:
        out = {"w0": self.sgnn.w0}
        for k, w in enumerate(self.sgnn.layers, start=1):
            out[f"w{k}"] = w
        for l, w in enumerate(self.fgnn.layers, start=1):
            out[f"v{l}"] = w
        return out

    @classmethod
    def from_dict(cls, d: dict[str, np.ndarray], depth: int, num_disc_layers: int) -> "ModelParams":
        sgnn = SgnnParams(w0=d["w0"], layers=[d[f"w{k}"] for k in range(1, depth + 1)])
        fgnn = FgnnParams(layers=[d[f"v{l}"] for l in range(1, num_disc_layers + 1)])
        return cls(sgnn=sgnn, fgnn=fgnn)

    def all_weights(self) -> list[np.ndarray]:
        return [self.sgnn.w0, *self.sgnn.layers, *self.fgnn.layers]


def init_model_params(
    rng: np.random.Generator,
    num_features: int,
    dim: int,
    depth: int,
    num_classes: int,
    dtype=np.float64,
) -> ModelParams:
    sgnn = init_sgnn_params(rng, num_features, dim, depth, dtype)
    fgnn = init_fgnn_params(rng, dim, dim, num_classes, dtype)
    return ModelParams(sgnn=sgnn, fgnn=fgnn)


@dataclass
class GraphCache:
    """Sparse per-client views used by the trainer."""

    x: sp.csr_matrix  # (n, F) features
    adj: sp.csr_matrix  # (n, n) neighbor-mean operator
    labels: np.ndarray
    num_nodes: int

    @classmethod
    def from_graph(cls, graph: Graph, dtype=np.float64) -> "GraphCache":
        return cls(
            x=sp.csr_matrix(graph.features.astype(dtype)),
            adj=graph.mean_adjacency.astype(dtype),
            labels=graph.labels,
            num_nodes=graph.num_nodes,
        )


@dataclass
class Trace:
    """Forward intermediates kept for the reverse pass."""

    h_list: list[np.ndarray]  # h0..hK after any dropout
    t_list: list[np.ndarray]  # tanh outputs per encoder layer, pre-dropout
    c_list: list[np.ndarray]  # concat inputs per encoder layer (no bias col)
    enc_masks: list  # dropout masks per encoder layer (None where not applied)
    pre_norm: np.ndarray
    norms: np.ndarray
    embed: np.ndarray
    g_list: list[np.ndarray]  # discriminator layer inputs (post-dropout), g0 = embed
    dt_list: list[np.ndarray]  # discriminator tanh outputs, pre-dropout
    disc_masks: list
    logits: np.ndarray


def forward(
    cache: GraphCache,
    params: ModelParams,
    training: bool = False,
    dropout: float = 0.0,
    rng: np.random.Generator | None = None,
) -> Trace:
    """Full-graph forward through encoder and discriminator."""
    use_drop = training and dropout > 0.0
    if use_drop and rng is None:
        raise ValueError("dropout requires an rng")
    dtype = params.sgnn.w0.dtype

    h = (cache.x @ params.sgnn.w0[:-1]) + params.sgnn.w0[-1]
    h_list, t_list, c_list, enc_masks = [h], [], [], []
    depth = params.sgnn.depth
    for k, w_k in enumerate(params.sgnn.layers, start=1):
        nbr = cache.adj @ h
        c = np.concatenate([h, nbr], axis=1)
        t = np.tanh(add_bias_column(c) @ w_k)
        # Intermediate encoder activations only; the last layer feeds the
        # normalization and stays deterministic.
        if use_drop and k < depth:
            mask = dropout_mask(t.shape, dropout, rng).astype(dtype)
            h = t * mask
        else:
            mask = None
            h = t
        c_list.append(c)
        t_list.append(t)
        enc_masks.append(mask)
        h_list.append(h)

    embed, norms = normalize_rows(h)

    g = embed
    g_list, dt_list, disc_masks = [g], [], []
    num_layers = params.fgnn.num_layers
    for l, v_l in enumerate(params.fgnn.layers, start=1):
        z = add_bias_column(g) @ v_l
        if l == num_layers:
            logits = z
            break
        t = np.tanh(z)
        if use_drop:
            mask = dropout_mask(t.shape, dropout, rng).astype(dtype)
            g = t * mask
        else:
            mask = None
            g = t
        dt_list.append(t)
        disc_masks.append(mask)
        g_list.append(g)

    return Trace(
        h_list=h_list,
        t_list=t_list,
        c_list=c_list,
        enc_masks=enc_masks,
        pre_norm=h,
        norms=norms,
        embed=embed,
        g_list=g_list,
        dt_list=dt_list,
        disc_masks=disc_masks,
        logits=logits,
    )


def loss_from_trace(
    trace: Trace, cache: GraphCache, train_ids: np.ndarray, params: ModelParams, l2: float
) -> tuple[float, np.ndarray]:
    ce, probs = softmax_cross_entropy(trace.logits[train_ids], cache.labels[train_ids])
    loss = ce + l2_penalty(params.all_weights(), l2)
    if not np.isfinite(loss):
        raise NumericError("loss is not finite")
    return loss, probs


def backward(
    trace: Trace,
    cache: GraphCache,
    params: ModelParams,
    train_ids: np.ndarray,
    probs: np.ndarray,
    l2: float,
) -> dict[str, np.ndarray]:
    """Analytic gradients of the training loss for every weight matrix."""
    n_out = trace.logits.shape[1]
    d_logits = np.zeros_like(trace.logits)
    d_logits[train_ids] = softmax_cross_entropy_grad(probs, cache.labels[train_ids])

    grads: dict[str, np.ndarray] = {}
    dz = d_logits
    for l in range(params.fgnn.num_layers, 0, -1):
        g_in = trace.g_list[l - 1]
        grads[f"v{l}"] = add_bias_column(g_in).T @ dz
        dg = dz @ params.fgnn.layers[l - 1][:-1].T
        if l > 1:
            t = trace.dt_list[l - 2]
            mask = trace.disc_masks[l - 2]
            if mask is not None:
                dg = dg * mask
            dz = dg * (1.0 - t * t)
    d_embed = dg

    # Row normalization: d h = (g - (g . e) e) / ||h||; zero rows contribute 0.
    norms = trace.norms
    safe = np.where(norms > 0, norms, 1.0)
    row_dot = (d_embed * trace.embed).sum(axis=1, keepdims=True)
    dh = (d_embed - row_dot * trace.embed) / safe[:, None]
    dh[norms == 0] = 0.0

    dim = params.sgnn.dim
    for k in range(params.sgnn.depth, 0, -1):
        mask = trace.enc_masks[k - 1]
        if mask is not None:
            dh = dh * mask
        t = trace.t_list[k - 1]
        dz = dh * (1.0 - t * t)
        grads[f"w{k}"] = add_bias_column(trace.c_list[k - 1]).T @ dz
        dc = dz @ params.sgnn.layers[k - 1][:-1].T
        dh = dc[:, :dim] + cache.adj.T @ dc[:, dim:]

    dw0 = np.empty_like(params.sgnn.w0)
    dw0[:-1] = cache.x.T @ dh
    dw0[-1] = dh.sum(axis=0)
    grads["w0"] = dw0

    if l2 > 0:
        for name, w in params.to_dict().items():
            grads[name] = grads[name] + l2_penalty_grad(w, l2)
    return grads


def loss_and_grads(
    cache: GraphCache,
    params: ModelParams,
    train_ids: np.ndarray,
    cfg: TrainConfig,
    rng: np.random.Generator | None = None,
) -> tuple[float, dict[str, np.ndarray], Trace]:
    trace = forward(cache, params, training=True, dropout=cfg.dropout, rng=rng)
    loss, probs = loss_from_trace(trace, cache, train_ids, params, cfg.l2)
    grads = backward(trace, cache, params, train_ids, probs, cfg.l2)
    return loss, grads, trace


def evaluate(cache: GraphCache, params: ModelParams, node_ids: np.ndarray) -> float:
    """Accuracy of the eval-mode model on the given node ids."""
    trace = forward(cache, params, training=False)
    return accuracy(trace.logits[node_ids], cache.labels[node_ids])
