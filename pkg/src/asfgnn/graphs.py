"""Graph datasets and the Non-IID partitioning used to build per-client data.

A dataset on disk is a directory with ``meta.json`` ({num_nodes, num_features,
num_classes}), ``nodes.csv`` (rows ``node_id,label,f_0,...,f_{F-1}``, decimal
text, no header), ``edges.csv`` (rows ``src,dst``) and an optional
``masks.json`` ({train: [ids], val: [ids], test: [ids]}). All ids 0-based.

Graphs are undirected, self-loop free, and store each edge once in canonical
(min, max) order. Splitting always takes induced subgraphs: an edge survives
only if both endpoints land in the same client.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from functools import cached_property
from pathlib import Path

import numpy as np
import pandas as pd
import scipy.sparse as sp

from .seeds import derive_rng

# Fallback train/val/test fractions (the usual 140/500/1000 citation split)
# used when a source dataset carries no masks of its own.
DEFAULT_MASK_FRACTIONS = (140 / 2708, 500 / 2708, 1000 / 2708)


class DatasetError(ValueError):
    """Raised for malformed dataset directories or invalid graph structure."""


def _canonical_edges(edges: np.ndarray) -> np.ndarray:
    """Drop self-loops, orient as (min, max), and deduplicate."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    edges = edges[edges[:, 0] != edges[:, 1]]
    lo = np.minimum(edges[:, 0], edges[:, 1])
    hi = np.maximum(edges[:, 0], edges[:, 1])
    canon = np.stack([lo, hi], axis=1)
    return np.unique(canon, axis=0)


@dataclass(frozen=True, eq=False)
class Graph:
    """An undirected feature graph with integer class labels."""

    features: np.ndarray  # (num_nodes, F)
    labels: np.ndarray  # (num_nodes,) ints in [0, num_classes)
    edges: np.ndarray  # (m, 2) canonical undirected pairs
    num_classes: int

    def __post_init__(self):
        object.__setattr__(self, "features", np.asarray(self.features, dtype=np.float64))
        object.__setattr__(self, "labels", np.asarray(self.labels, dtype=np.int64))
        object.__setattr__(self, "edges", _canonical_edges(self.edges))
        n = self.features.shape[0]
        if self.labels.shape != (n,):
            raise DatasetError(f"labels length {self.labels.shape} != num_nodes {n}")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise DatasetError("label id outside [0, num_classes)")
        if self.edges.size and self.edges.max() >= n:
            raise DatasetError("edge endpoint out of range")
        if self.edges.size and self.edges.min() < 0:
            raise DatasetError("negative edge endpoint")

    @property
    def num_nodes(self) -> int:
        return self.features.shape[0]

    @property
    def num_features(self) -> int:
        return self.features.shape[1]

    @cached_property
    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.num_nodes, dtype=np.int64)
        if self.edges.size:
            np.add.at(deg, self.edges[:, 0], 1)
            np.add.at(deg, self.edges[:, 1], 1)
        return deg

    @cached_property
    def neighbor_lists(self) -> list[np.ndarray]:
        """Sorted neighbor ids per node."""
        nbrs: list[list[int]] = [[] for _ in range(self.num_nodes)]
        for u, v in self.edges:
            nbrs[u].append(v)
            nbrs[v].append(u)
        return [np.array(sorted(ns), dtype=np.int64) for ns in nbrs]

    @cached_property
    def mean_adjacency(self) -> sp.csr_matrix:
        """Row-stochastic neighbor-mean operator (zero rows for isolated nodes)."""
        n = self.num_nodes
        if not self.edges.size:
            return sp.csr_matrix((n, n))
        rows = np.concatenate([self.edges[:, 0], self.edges[:, 1]])
        cols = np.concatenate([self.edges[:, 1], self.edges[:, 0]])
        vals = 1.0 / self.degrees[rows]
        return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def neighbors(graph: Graph, v: int) -> set[int]:
    """Adjacent node ids of v; empty set for isolated nodes."""
    if not 0 <= v < graph.num_nodes:
        raise DatasetError(f"node id {v} out of range [0, {graph.num_nodes})")
    return set(int(u) for u in graph.neighbor_lists[v])


@dataclass(frozen=True, eq=False)
class ClientDataset:
    """One client's local graph plus disjoint train/val/test node-id masks."""

    graph: Graph
    train_mask: np.ndarray
    val_mask: np.ndarray
    test_mask: np.ndarray
    client_id: int

    def __post_init__(self):
        for name in ("train_mask", "val_mask", "test_mask"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.int64))
        masks = [self.train_mask, self.val_mask, self.test_mask]
        all_ids = np.concatenate(masks) if any(m.size for m in masks) else np.empty(0, np.int64)
        if all_ids.size != np.unique(all_ids).size:
            raise DatasetError("train/val/test masks overlap")
        if all_ids.size and (all_ids.min() < 0 or all_ids.max() >= self.graph.num_nodes):
            raise DatasetError("mask id outside node range")
        if self.train_mask.size == 0:
            raise DatasetError("train mask is empty")


@dataclass(frozen=True)
class SplitSpec:
    """Label-ratio split: alpha is each client's share drawn from its own part."""

    alpha: float
    part1_classes: tuple[int, ...]
    part2_classes: tuple[int, ...]
    seed: int

    def __post_init__(self):
        if not 0.5 <= self.alpha <= 1.0:
            raise DatasetError(f"alpha {self.alpha} outside [0.5, 1.0]")
        p1, p2 = set(self.part1_classes), set(self.part2_classes)
        if p1 & p2:
            raise DatasetError("part class sets overlap")
        all_classes = p1 | p2
        if all_classes != set(range(len(all_classes))):
            raise DatasetError("part classes must cover 0..J-1 exactly")


# ---------------------------------------------------------------------------
# Dataset I/O


def load_dataset(path: str | Path) -> Graph:
    """Load a dataset directory into a validated Graph."""
    path = Path(path)
    for fname in ("meta.json", "nodes.csv", "edges.csv"):
        if not (path / fname).exists():
            raise DatasetError(f"missing {fname} in {path}")
    meta = json.loads((path / "meta.json").read_text())
    n, f, j = int(meta["num_nodes"]), int(meta["num_features"]), int(meta["num_classes"])

    nodes = pd.read_csv(path / "nodes.csv", header=None, float_precision="round_trip").to_numpy()
    if nodes.shape[0] != n:
        raise DatasetError(f"nodes.csv has {nodes.shape[0]} rows, meta says {n}")
    if nodes.shape[1] != f + 2:
        raise DatasetError(f"feature width {nodes.shape[1] - 2} != meta num_features {f}")
    ids = nodes[:, 0].astype(np.int64)
    if sorted(ids.tolist()) != list(range(n)):
        raise DatasetError("node ids are not a permutation of 0..n-1")
    order = np.argsort(ids)
    labels = nodes[order, 1].astype(np.int64)
    if labels.size and labels.max() >= j:
        raise DatasetError(f"label {labels.max()} >= num_classes {j}")
    features = nodes[order, 2:].astype(np.float64)

    if (path / "edges.csv").stat().st_size == 0:
        edges = np.empty((0, 2), dtype=np.int64)
    else:
        edges = pd.read_csv(path / "edges.csv", header=None).to_numpy().astype(np.int64)
    if edges.size and edges.max() >= n:
        raise DatasetError(f"dangling edge endpoint {edges.max()} >= num_nodes {n}")

    return Graph(features=features, labels=labels, edges=edges, num_classes=j)


def load_masks(path: str | Path) -> dict[str, np.ndarray] | None:
    """Load masks.json if present; keys train/val/test map to id arrays."""
    mpath = Path(path) / "masks.json"
    if not mpath.exists():
        return None
    raw = json.loads(mpath.read_text())
    return {k: np.asarray(raw[k], dtype=np.int64) for k in ("train", "val", "test")}


def save_dataset(graph: Graph, path: str | Path, masks: dict[str, np.ndarray] | None = None) -> None:
    """Write a Graph (and optional masks) in the directory format."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    meta = {
        "num_nodes": graph.num_nodes,
        "num_features": graph.num_features,
        "num_classes": graph.num_classes,
    }
    (path / "meta.json").write_text(json.dumps(meta, indent=1) + "\n")

    with open(path / "nodes.csv", "w") as fh:
        for i in range(graph.num_nodes):
            feats = ",".join(format(x, ".17g") for x in graph.features[i])
            fh.write(f"{i},{graph.labels[i]},{feats}\n")
    with open(path / "edges.csv", "w") as fh:
        for u, v in graph.edges:
            fh.write(f"{u},{v}\n")
    if masks is not None:
        payload = {k: [int(i) for i in masks[k]] for k in ("train", "val", "test")}
        (path / "masks.json").write_text(json.dumps(payload) + "\n")


# ---------------------------------------------------------------------------
# Splitting


def induced_subgraph(graph: Graph, node_ids: np.ndarray) -> Graph:
    """Subgraph on node_ids (relabeled 0..k-1 in the given order).

    Keeps only edges with both endpoints inside node_ids; num_classes is
    inherited from the parent graph.
    """
    node_ids = np.asarray(node_ids, dtype=np.int64)
    if node_ids.size != np.unique(node_ids).size:
        raise DatasetError("duplicate node ids in subgraph selection")
    new_id = -np.ones(graph.num_nodes, dtype=np.int64)
    new_id[node_ids] = np.arange(node_ids.size)
    if graph.edges.size:
        keep = (new_id[graph.edges[:, 0]] >= 0) & (new_id[graph.edges[:, 1]] >= 0)
        edges = new_id[graph.edges[keep]]
    else:
        edges = np.empty((0, 2), dtype=np.int64)
    return Graph(
        features=graph.features[node_ids],
        labels=graph.labels[node_ids],
        edges=edges,
        num_classes=graph.num_classes,
    )


def split_by_classes(graph: Graph, classes: set[int] | tuple[int, ...]) -> Graph:
    """Induced subgraph of all nodes whose label is in `classes`."""
    mask = np.isin(graph.labels, sorted(classes))
    return induced_subgraph(graph, np.nonzero(mask)[0])


def split_by_degree(graph: Graph, threshold: int) -> tuple[Graph, Graph]:
    """Partition nodes into (degree <= threshold, degree > threshold) subgraphs."""
    if threshold < 0:
        raise DatasetError("degree threshold must be >= 0")
    low = np.nonzero(graph.degrees <= threshold)[0]
    high = np.nonzero(graph.degrees > threshold)[0]
    return induced_subgraph(graph, low), induced_subgraph(graph, high)


def derive_masks(
    num_nodes: int, fractions: tuple[float, float, float], rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sample disjoint train/val/test id sets with the given fractions."""
    perm = rng.permutation(num_nodes)
    n_train = max(1, int(fractions[0] * num_nodes))
    n_val = int(fractions[1] * num_nodes)
    n_test = int(fractions[2] * num_nodes)
    if n_train + n_val + n_test > num_nodes:
        raise DatasetError("mask fractions exceed available nodes")
    train = np.sort(perm[:n_train])
    val = np.sort(perm[n_train : n_train + n_val])
    test = np.sort(perm[n_train + n_val : n_train + n_val + n_test])
    return train, val, test


def _mask_fractions(masks: dict[str, np.ndarray] | None, num_nodes: int) -> tuple[float, float, float]:
    if masks is None:
        return DEFAULT_MASK_FRACTIONS
    return (
        masks["train"].size / num_nodes,
        masks["val"].size / num_nodes,
        masks["test"].size / num_nodes,
    )


def _merge_parts(g1: Graph, sel1: np.ndarray, g2: Graph, sel2: np.ndarray, num_classes: int) -> Graph:
    """Disjoint union of induced subgraphs from the two part graphs."""
    sub1 = induced_subgraph(g1, sel1)
    sub2 = induced_subgraph(g2, sel2)
    edges2 = sub2.edges + sub1.num_nodes if sub2.edges.size else sub2.edges
    return Graph(
        features=np.vstack([sub1.features, sub2.features]),
        labels=np.concatenate([sub1.labels, sub2.labels]),
        edges=np.vstack([sub1.edges, edges2]) if (sub1.edges.size or edges2.size) else sub1.edges,
        num_classes=num_classes,
    )


def split_by_label_ratio(
    g1: Graph,
    g2: Graph,
    spec: SplitSpec,
    masks1: dict[str, np.ndarray] | None = None,
    masks2: dict[str, np.ndarray] | None = None,
) -> list[ClientDataset]:
    """Build the two-client label-ratio split.

    Client A draws floor(alpha*N1) nodes from g1 plus floor((1-alpha)*N1) from
    g2; client B draws floor((1-alpha)*N2) from g1 plus floor(alpha*N2) from
    g2, all uniform without replacement and node-disjoint from A. When the two
    parts have unequal sizes the formulas can over-subscribe a part; client B's
    request is then capped at what remains (A draws first).

    Train/val/test masks are re-sampled per client with the source fractions.
    """
    if g1.num_features != g2.num_features:
        raise DatasetError("feature widths differ between parts")
    p1 = set(spec.part1_classes)
    p2 = set(spec.part2_classes)
    if not set(np.unique(g1.labels)).issubset(p1):
        raise DatasetError("g1 carries labels outside part1_classes")
    if not set(np.unique(g2.labels)).issubset(p2):
        raise DatasetError("g2 carries labels outside part2_classes")
    num_classes = max(g1.num_classes, g2.num_classes)
    if len(p1 | p2) != num_classes:
        raise DatasetError("part classes do not cover the label range")

    n1, n2 = g1.num_nodes, g2.num_nodes
    a_from_1 = int(np.floor(spec.alpha * n1))
    a_from_2 = int(np.floor((1.0 - spec.alpha) * n1))
    b_from_1 = int(np.floor((1.0 - spec.alpha) * n2))
    b_from_2 = int(np.floor(spec.alpha * n2))
    if a_from_1 > n1 or a_from_2 > n2:
        raise DatasetError("requested counts exceed available nodes")

    rng = derive_rng(spec.seed, "label-ratio-split")
    perm1 = rng.permutation(n1)
    perm2 = rng.permutation(n2)
    a_sel_1 = np.sort(perm1[:a_from_1])
    a_sel_2 = np.sort(perm2[:a_from_2])
    b_from_1 = min(b_from_1, n1 - a_from_1)
    b_from_2 = min(b_from_2, n2 - a_from_2)
    b_sel_1 = np.sort(perm1[a_from_1 : a_from_1 + b_from_1])
    b_sel_2 = np.sort(perm2[a_from_2 : a_from_2 + b_from_2])

    frac1 = _mask_fractions(masks1, n1)
    frac2 = _mask_fractions(masks2, n2)
    fractions = tuple(
        (f1 * n1 + f2 * n2) / (n1 + n2) for f1, f2 in zip(frac1, frac2)
    )

    clients = []
    for cid, (sel1, sel2) in enumerate([(a_sel_1, a_sel_2), (b_sel_1, b_sel_2)]):
        graph = _merge_parts(g1, sel1, g2, sel2, num_classes)
        train, val, test = derive_masks(
            graph.num_nodes, fractions, derive_rng(spec.seed, "client-masks", cid)
        )
        clients.append(
            ClientDataset(graph=graph, train_mask=train, val_mask=val, test_mask=test, client_id=cid)
        )
    return clients


def partition_classes(num_classes: int, num_clients: int) -> list[tuple[int, ...]]:
    """Split class ids into num_clients near-equal contiguous groups."""
    if num_clients > num_classes:
        raise DatasetError("more clients than classes for a disjoint-label split")
    bounds = np.linspace(0, num_classes, num_clients + 1).round().astype(int)
    return [tuple(range(bounds[i], bounds[i + 1])) for i in range(num_clients)]


def split_disjoint_labels(
    graph: Graph,
    num_clients: int,
    seed: int,
    masks: dict[str, np.ndarray] | None = None,
) -> list[ClientDataset]:
    """One client per near-equal class group (fully disjoint label sets)."""
    fractions = _mask_fractions(masks, graph.num_nodes)
    clients = []
    for cid, group in enumerate(partition_classes(graph.num_classes, num_clients)):
        sub = split_by_classes(graph, set(group))
        train, val, test = derive_masks(
            sub.num_nodes, fractions, derive_rng(seed, "client-masks", cid)
        )
        clients.append(
            ClientDataset(graph=sub, train_mask=train, val_mask=val, test_mask=test, client_id=cid)
        )
    return clients
