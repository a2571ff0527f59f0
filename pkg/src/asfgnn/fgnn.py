"""Federated discriminator training with JS-weighted local blending.

Each round: every client re-runs its encoder, takes one local gradient step
on the joint loss, and uploads its discriminator weights, label counts, and
validation metric through additive secret sharing. The server reconstructs
only aggregates (mean weights, summed counts, mean metric), broadcasts them,
and each client blends its local discriminator with the global one using the
JS divergence between its label distribution and the global label
distribution. Encoder weights never enter a wire message.

Baseline loops live here too: plain FedAvg over the whole stack (FL) and
communication-free local training (SP / CM).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graphs import ClientDataset
from .model import GraphCache, ModelParams, backward, forward, loss_from_trace
from .nn import FgnnParams, TrainConfig, accuracy, sgd_step
from .seeds import derive_rng
from .sharing import (
    DEFAULT_RING,
    FixedPointRing,
    PayloadKind,
    Transport,
    WireRecord,
)


@dataclass
class LabelCounts:
    """Per-class sample counts of one client's training batch."""

    counts: np.ndarray  # (J,) int64

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if np.any(self.counts < 0):
            raise ValueError("negative label count")

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @classmethod
    def from_labels(cls, labels: np.ndarray, num_classes: int) -> "LabelCounts":
        return cls(counts=np.bincount(labels, minlength=num_classes))


@dataclass(frozen=True)
class LabelDistribution:
    """A categorical distribution over the J classes."""

    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "probs", np.asarray(self.probs, dtype=np.float64))
        if np.any(self.probs < 0) or abs(self.probs.sum() - 1.0) > 1e-12:
            raise ValueError("probabilities must be nonnegative and sum to 1")

    @classmethod
    def from_counts(cls, counts: np.ndarray, smoothing: float = 0.0) -> "LabelDistribution":
        counts = np.asarray(counts, dtype=np.float64) + smoothing
        return cls(probs=counts / counts.sum())


def js_divergence(p: LabelDistribution | np.ndarray, q: LabelDistribution | np.ndarray) -> float:
    """Jensen-Shannon divergence, log base 2, so the range is [0, 1]."""
    pv = p.probs if isinstance(p, LabelDistribution) else LabelDistribution(probs=p).probs
    qv = q.probs if isinstance(q, LabelDistribution) else LabelDistribution(probs=q).probs
    if pv.shape != qv.shape:
        raise ValueError(f"distribution lengths differ: {pv.shape} vs {qv.shape}")
    m = 0.5 * (pv + qv)

    def kl(a: np.ndarray, b: np.ndarray) -> float:
        nz = a > 0  # 0 log 0 := 0
        return float(np.sum(a[nz] * np.log2(a[nz] / b[nz])))

    value = 0.5 * kl(pv, m) + 0.5 * kl(qv, m)
    return float(min(1.0, max(0.0, value)))


def personalization_weight(
    own_counts: np.ndarray, total_counts: np.ndarray, smoothing: float = 1.0
) -> float:
    """How much of the local discriminator a client keeps after a round.

    The client compares its own label distribution with the rest of the
    federation's (total minus own), both Laplace-smoothed so tiny batches do
    not saturate the divergence. A single-client federation has nothing to
    compare against and keeps the server model (weight 0, which equals its
    own upload).
    """
    others = np.asarray(total_counts, dtype=np.float64) - np.asarray(own_counts, dtype=np.float64)
    others = np.maximum(others, 0.0)
    if others.sum() <= 0:
        return 0.0
    q_local = LabelDistribution.from_counts(own_counts, smoothing)
    q_others = LabelDistribution.from_counts(others, smoothing)
    return js_divergence(q_local, q_others)


def blend_update(w_local: FgnnParams, w_server: FgnnParams, js: float) -> FgnnParams:
    """Convex combination: js keeps the local model, 1-js takes the global."""
    if not 0.0 <= js <= 1.0:
        raise ValueError(f"js weight {js} outside [0, 1]")
    layers = [
        js * wl + (1.0 - js) * ws.astype(wl.dtype)
        for wl, ws in zip(w_local.layers, w_server.layers)
    ]
    return FgnnParams(layers=layers)


@dataclass
class ClientState:
    """Everything one client needs to participate in training."""

    dataset: ClientDataset
    cache: GraphCache
    params: ModelParams
    cfg: TrainConfig
    rng: np.random.Generator  # dropout stream

    @property
    def client_id(self) -> int:
        return self.dataset.client_id


@dataclass
class RoundReport:
    """Server-side record of one federated round."""

    round_index: int
    global_metric: float
    per_client_metric: list[float]
    per_client_js: list[float]
    per_client_test: list[float]

    def to_json_dict(self) -> dict:
        return {
            "round": self.round_index,
            "global_metric": self.global_metric,
            "per_client_metric": self.per_client_metric,
            "per_client_js": self.per_client_js,
            "per_client_test": self.per_client_test,
        }


@dataclass
class LocalUpdate:
    """What a client produces each round before the secure upload."""

    params: ModelParams
    counts: LabelCounts
    metric: float
    test_metric: float
    loss: float


def local_train_round(
    state: ClientState, local_epochs: int = 1
) -> LocalUpdate:
    """One client round: forward, metric, label counts, SGD step(s).

    The metric is the validation accuracy of the model entering the round
    (evaluation mode, dropout off), matching the upload-then-blend order.
    """
    ds = state.dataset
    if ds.train_mask.size == 0:
        raise ValueError("client has an empty training mask")

    counts = LabelCounts.from_labels(
        state.cache.labels[ds.train_mask], ds.graph.num_classes
    )

    params = state.params
    loss = float("nan")
    eval_trace = None
    for step in range(local_epochs):
        trace = forward(params=params, cache=state.cache, training=True, dropout=state.cfg.dropout, rng=state.rng)
        if step == 0:
            if state.cfg.dropout > 0.0:
                eval_trace = forward(params=params, cache=state.cache, training=False)
            else:
                eval_trace = trace
        loss, probs = loss_from_trace(trace, state.cache, ds.train_mask, params, state.cfg.l2)
        grads = backward(trace, state.cache, params, ds.train_mask, probs, state.cfg.l2)
        new_weights = sgd_step(params.to_dict(), grads, state.cfg.lr)
        params = ModelParams.from_dict(
            new_weights, depth=params.sgnn.depth, num_disc_layers=params.fgnn.num_layers
        )

    metric = accuracy(eval_trace.logits[ds.val_mask], state.cache.labels[ds.val_mask])
    test_metric = accuracy(eval_trace.logits[ds.test_mask], state.cache.labels[ds.test_mask])
    return LocalUpdate(params=params, counts=counts, metric=metric, test_metric=test_metric, loss=loss)


def _upload_and_reconstruct(
    vectors: dict[int, np.ndarray],
    kind: PayloadKind,
    round_index: int,
    rng: np.random.Generator,
    transport: Transport | None,
    ring: FixedPointRing,
    average: bool,
) -> np.ndarray:
    """Secret-share each client's vector, log the share-sum uploads, aggregate.

    Every client ends up holding one share of every other client's vector;
    what travels to the server is each client's modular share-sum. With a
    single client the encoded vector is uploaded as-is (nothing to hide from).
    """
    client_ids = sorted(vectors)
    num = len(client_ids)
    encoded = {cid: ring.encode(vectors[cid]) for cid in client_ids}
    if num == 1:
        holder_sums = {client_ids[0]: encoded[client_ids[0]]}
    else:
        shared = {cid: ring.shr(encoded[cid], num, rng) for cid in client_ids}
        holder_sums = {
            cid: ring.wrap(sum(shared[src][i] for src in client_ids))
            for i, cid in enumerate(client_ids)
        }
    if transport is not None:
        for cid in client_ids:
            transport.send(
                WireRecord(
                    round_index=round_index,
                    client_id=cid,
                    kind=kind,
                    frac_bits=ring.frac_bits,
                    words=holder_sums[cid],
                )
            )
    total = ring.decode(ring.rec(np.stack([holder_sums[cid] for cid in client_ids])))
    return total / num if average else total


def run_fgnn(
    clients: list[ClientState],
    rounds: int,
    *,
    use_js: bool = True,
    transport: Transport | None = None,
    ring: FixedPointRing = DEFAULT_RING,
    seed: int = 0,
    local_epochs: int = 1,
    on_round=None,
) -> list[RoundReport]:
    """The separated-federated protocol: only discriminators are aggregated."""
    share_rng = derive_rng(seed, "shares")
    disc_shapes = clients[0].params.fgnn.shapes()
    reports = []
    for t in range(1, rounds + 1):
        updates = {c.client_id: local_train_round(c, local_epochs) for c in clients}

        weight_vecs = {cid: u.params.fgnn.flatten().astype(np.float64) for cid, u in updates.items()}
        count_vecs = {cid: u.counts.counts.astype(np.float64) for cid, u in updates.items()}
        metric_vecs = {cid: np.array([u.metric]) for cid, u in updates.items()}

        mean_weights = _upload_and_reconstruct(
            weight_vecs, PayloadKind.WEIGHTS, t, share_rng, transport, ring, average=True
        )
        total_counts = _upload_and_reconstruct(
            count_vecs, PayloadKind.COUNTS, t, share_rng, transport, ring, average=False
        )
        mean_metric = _upload_and_reconstruct(
            metric_vecs, PayloadKind.METRIC, t, share_rng, transport, ring, average=True
        )

        server_fgnn = FgnnParams.unflatten(mean_weights, disc_shapes)
        server_counts = np.round(total_counts)

        js_values = {}
        for client in clients:
            update = updates[client.client_id]
            js = (
                personalization_weight(update.counts.counts, server_counts)
                if use_js
                else 0.0
            )
            js_values[client.client_id] = js
            client.params = ModelParams(
                sgnn=update.params.sgnn,
                fgnn=blend_update(update.params.fgnn, server_fgnn, js),
            )

        if on_round is not None:
            on_round(t, server_fgnn)
        reports.append(
            RoundReport(
                round_index=t,
                global_metric=float(mean_metric[0]),
                per_client_metric=[updates[c.client_id].metric for c in clients],
                per_client_js=[js_values[c.client_id] for c in clients],
                per_client_test=[updates[c.client_id].test_metric for c in clients],
            )
        )
    return reports


def run_fedavg(
    clients: list[ClientState],
    rounds: int,
    *,
    transport: Transport | None = None,
    ring: FixedPointRing = DEFAULT_RING,
    seed: int = 0,
    local_epochs: int = 1,
) -> list[RoundReport]:
    """FL baseline: the whole stack is averaged and replaces every local model."""
    share_rng = derive_rng(seed, "shares")
    template = clients[0].params
    shapes = [w.shape for w in template.all_weights()]
    for c in clients[1:]:
        if [w.shape for w in c.params.all_weights()] != shapes:
            raise ValueError("plain federated averaging needs identical architectures")

    def flatten(p: ModelParams) -> np.ndarray:
        return np.concatenate([w.reshape(-1) for w in p.all_weights()]).astype(np.float64)

    def unflatten(flat: np.ndarray, like: ModelParams) -> ModelParams:
        out = {}
        offset = 0
        for name, w in like.to_dict().items():
            size = w.size
            out[name] = flat[offset : offset + size].reshape(w.shape).astype(w.dtype)
            offset += size
        return ModelParams.from_dict(out, like.sgnn.depth, like.fgnn.num_layers)

    reports = []
    for t in range(1, rounds + 1):
        updates = {c.client_id: local_train_round(c, local_epochs) for c in clients}
        weight_vecs = {cid: flatten(u.params) for cid, u in updates.items()}
        count_vecs = {cid: u.counts.counts.astype(np.float64) for cid, u in updates.items()}
        metric_vecs = {cid: np.array([u.metric]) for cid, u in updates.items()}

        mean_weights = _upload_and_reconstruct(
            weight_vecs, PayloadKind.WEIGHTS, t, share_rng, transport, ring, average=True
        )
        _upload_and_reconstruct(
            count_vecs, PayloadKind.COUNTS, t, share_rng, transport, ring, average=False
        )
        mean_metric = _upload_and_reconstruct(
            metric_vecs, PayloadKind.METRIC, t, share_rng, transport, ring, average=True
        )

        for client in clients:
            client.params = unflatten(mean_weights, client.params)

        reports.append(
            RoundReport(
                round_index=t,
                global_metric=float(mean_metric[0]),
                per_client_metric=[updates[c.client_id].metric for c in clients],
                per_client_js=[0.0 for _ in clients],
                per_client_test=[updates[c.client_id].test_metric for c in clients],
            )
        )
    return reports


def run_local(
    clients: list[ClientState], rounds: int, *, local_epochs: int = 1
) -> list[RoundReport]:
    """SP / CM loop: independent local training, no communication at all."""
    reports = []
    for t in range(1, rounds + 1):
        updates = {}
        for client in clients:
            update = local_train_round(client, local_epochs)
            client.params = update.params
            updates[client.client_id] = update
        metrics = [updates[c.client_id].metric for c in clients]
        reports.append(
            RoundReport(
                round_index=t,
                global_metric=float(np.mean(metrics)),
                per_client_metric=metrics,
                per_client_js=[0.0 for _ in clients],
                per_client_test=[updates[c.client_id].test_metric for c in clients],
            )
        )
    return reports
