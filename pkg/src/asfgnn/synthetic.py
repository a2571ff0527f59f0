"""Seeded generator for a citation-style node-classification benchmark.

Produces a bag-of-words graph whose shape mirrors the classic citation
datasets: 2708 nodes, 1433 binary features, 7 classes split into a 4-class
part (1412 nodes, 2657 intra-part edges) and a 3-class part (1296 nodes,
1961 intra-part edges) joined by 811 cross-part edges.

Class structure: each class owns a disjoint vocabulary block; every part-1
class is paired with a part-2 class whose block it borrows words from, so the
pooled 7-way problem is strictly harder than either within-part problem.
Edges are homophilous with a heavy-tailed degree profile.
"""

from __future__ import annotations

from dataclasses import replace
from pathlib import Path

import numpy as np

from .graphs import Graph, save_dataset, split_by_classes
from .seeds import derive_rng

NUM_FEATURES = 1433
CLASS_SIZES = (351, 217, 418, 426, 818, 298, 180)  # part1 = 0..3, part2 = 4..6
PART1_CLASSES = (0, 1, 2, 3)
PART2_CLASSES = (4, 5, 6)
EDGES_PART1 = 2657
EDGES_PART2 = 1961
EDGES_CROSS = 2200
# Cross-part confusion pairs (class -> class it borrows vocabulary from).
CONFUSION = {0: 4, 1: 5, 2: 6, 3: 4, 4: 0, 5: 1, 6: 2}

WORDS_PER_CLASS = 190
COMMON_WORDS = 100  # vocabulary ids 0..99 are class-free noise words
SIG_DRAWS = {0: 10, 1: 10, 2: 10, 3: 10, 4: 18, 5: 18, 6: 18}  # words per class
NOISE_DRAWS = 6  # idiosyncratic words drawn from the whole vocabulary
# Fraction of signature words drawn from the paired cross-part class: mixing
# both parts makes the paired classes ambiguous, while within a part the
# borrowed words stay discriminative.
CONFUSION_MIX = 0.2
# Fraction drawn from the next class within the same part: the within-part
# problems carry real ambiguity too, so small training sets overfit.
WITHIN_MIX = 0.25
HOMOPHILY = {1: 0.95, 2: 0.7}  # per part: distinct linking regimes

# Within-part ring: which same-part class each class blends with.
WITHIN_NEXT = {0: 1, 1: 2, 2: 3, 3: 0, 4: 5, 5: 6, 6: 4}

TRAIN_PER_CLASS = 20
VAL_SIZE = 500
TEST_SIZE = 1000


def _class_block(c: int) -> np.ndarray:
    start = COMMON_WORDS + c * WORDS_PER_CLASS
    return np.arange(start, start + WORDS_PER_CLASS)


def _sample_edges(
    rng: np.random.Generator,
    target: int,
    u_pool: np.ndarray,
    u_weights: np.ndarray,
    v_pool_of: dict[int, tuple[np.ndarray, np.ndarray]],
    preferred_frac: float,
    labels: np.ndarray,
    fallback_pool: np.ndarray,
    fallback_weights: np.ndarray,
) -> set[tuple[int, int]]:
    """Rejection-sample `target` distinct undirected edges.

    Endpoint u is drawn from u_pool by weight; v comes from the label-keyed
    preferred pool with probability preferred_frac, else from the fallback.
    """
    edges: set[tuple[int, int]] = set()
    while len(edges) < target:
        batch = max(256, 2 * (target - len(edges)))
        us = rng.choice(u_pool, size=batch, p=u_weights)
        prefer = rng.random(batch) < preferred_frac
        for u, pref in zip(us, prefer):
            pool, w = v_pool_of[labels[u]] if pref else (fallback_pool, fallback_weights)
            v = int(rng.choice(pool, p=w))
            if v == u:
                continue
            edges.add((min(u, v), max(u, v)))
            if len(edges) == target:
                break
    return edges


def make_citation_graph(seed: int = 7) -> Graph:
    """Build the full benchmark graph (deterministic in seed)."""
    rng = derive_rng(seed, "citation-benchmark")
    num_nodes = sum(CLASS_SIZES)
    num_classes = len(CLASS_SIZES)

    labels = np.concatenate([np.full(sz, c, dtype=np.int64) for c, sz in enumerate(CLASS_SIZES)])
    labels = labels[rng.permutation(num_nodes)]

    # Heavy-tailed connectivity weights give a realistic degree profile.
    popularity = np.exp(rng.normal(0.0, 0.8, size=num_nodes))

    def pools(node_ids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        w = popularity[node_ids]
        return node_ids, w / w.sum()

    class_nodes = {c: np.nonzero(labels == c)[0] for c in range(num_classes)}
    class_pools = {c: pools(ids) for c, ids in class_nodes.items()}

    all_edges: set[tuple[int, int]] = set()
    for part, (part_classes, target) in enumerate(
        ((PART1_CLASSES, EDGES_PART1), (PART2_CLASSES, EDGES_PART2)), start=1
    ):
        part_ids = np.nonzero(np.isin(labels, part_classes))[0]
        part_pool, part_w = pools(part_ids)
        all_edges |= _sample_edges(
            rng,
            target,
            part_pool,
            part_w,
            {c: class_pools[c] for c in part_classes},
            HOMOPHILY[part],
            labels,
            part_pool,
            part_w,
        )

    # Cross-part edges attach preferentially to sparsely connected nodes
    # (where one foreign neighbor dominates the neighborhood mean) and to the
    # confusion pairs, so pooling the parts pollutes message passing.
    def inverse_pools(node_ids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        w = 1.0 / popularity[node_ids]
        return node_ids, w / w.sum()

    part1_ids = np.nonzero(np.isin(labels, PART1_CLASSES))[0]
    part2_ids = np.nonzero(np.isin(labels, PART2_CLASSES))[0]
    p1_pool, p1_w = inverse_pools(part1_ids)
    p2_pool, p2_w = inverse_pools(part2_ids)
    cross = _sample_edges(
        rng,
        EDGES_CROSS,
        p1_pool,
        p1_w,
        {c: inverse_pools(class_nodes[CONFUSION[c]]) for c in PART1_CLASSES},
        0.7,
        labels,
        p2_pool,
        p2_w,
    )
    all_edges |= cross

    features = np.zeros((num_nodes, NUM_FEATURES), dtype=np.float64)
    for v in range(num_nodes):
        c = labels[v]
        draws = SIG_DRAWS[c]
        sources = rng.choice(
            3, size=draws, p=(1 - CONFUSION_MIX - WITHIN_MIX, CONFUSION_MIX, WITHIN_MIX)
        )
        for block_class, count in zip(
            (c, CONFUSION[c], WITHIN_NEXT[c]), np.bincount(sources, minlength=3)
        ):
            if count:
                words = rng.choice(_class_block(block_class), size=count, replace=False)
                features[v, words] = 1.0
        noise = rng.integers(0, NUM_FEATURES, size=NOISE_DRAWS)
        features[v, noise] = 1.0

    edges = np.array(sorted(all_edges), dtype=np.int64)
    return Graph(features=features, labels=labels, edges=edges, num_classes=num_classes)


def make_masks(graph: Graph, seed: int = 7) -> dict[str, np.ndarray]:
    """Citation-style masks: 20 train nodes per class, then 500 val / 1000 test."""
    rng = derive_rng(seed, "citation-masks")
    train: list[int] = []
    for c in range(graph.num_classes):
        ids = np.nonzero(graph.labels == c)[0]
        train.extend(rng.choice(ids, size=TRAIN_PER_CLASS, replace=False).tolist())
    train_arr = np.sort(np.array(train, dtype=np.int64))
    rest = np.setdiff1d(np.arange(graph.num_nodes), train_arr)
    rest = rng.permutation(rest)
    return {
        "train": train_arr,
        "val": np.sort(rest[:VAL_SIZE]),
        "test": np.sort(rest[VAL_SIZE : VAL_SIZE + TEST_SIZE]),
    }


def _restrict_masks(masks: dict[str, np.ndarray], node_ids: np.ndarray) -> dict[str, np.ndarray]:
    new_id = -np.ones(int(node_ids.max()) + 1 if node_ids.size else 0, dtype=np.int64)
    new_id[node_ids] = np.arange(node_ids.size)
    out = {}
    for key, ids in masks.items():
        kept = ids[np.isin(ids, node_ids)]
        out[key] = np.sort(new_id[kept])
    return out


def write_benchmark(out_dir: str | Path, seed: int = 7) -> dict[str, Path]:
    """Write full/, part1/, part2/ dataset directories; returns their paths."""
    out_dir = Path(out_dir)
    graph = make_citation_graph(seed)
    masks = make_masks(graph, seed)

    full_dir = out_dir / "full"
    save_dataset(graph, full_dir, masks)

    paths = {"full": full_dir}
    for name, classes in (("part1", PART1_CLASSES), ("part2", PART2_CLASSES)):
        node_ids = np.nonzero(np.isin(graph.labels, classes))[0]
        part = split_by_classes(graph, set(classes))
        if name == "part1":
            # Labels 0..3 only, so the part is self-contained with 4 classes.
            part = replace(part, num_classes=len(classes))
        part_dir = out_dir / name
        save_dataset(part, part_dir, _restrict_masks(masks, node_ids))
        paths[name] = part_dir
    return paths
