import numpy as np
import pytest

from asfgnn.graphs import Graph
from asfgnn.synthetic import write_benchmark


@pytest.fixture(scope="session")
def benchmark_dir(tmp_path_factory):
    """The bundled citation-style benchmark, generated once per session."""
    root = tmp_path_factory.mktemp("citation")
    write_benchmark(root, seed=7)
    return root


def path_graph(num_nodes: int, num_features: int = 3, num_classes: int = 2, seed: int = 0) -> Graph:
    rng = np.random.default_rng(seed)
    edges = np.array([[i, i + 1] for i in range(num_nodes - 1)], dtype=np.int64)
    return Graph(
        features=rng.normal(size=(num_nodes, num_features)),
        labels=rng.integers(0, num_classes, size=num_nodes),
        edges=edges,
        num_classes=num_classes,
    )


def random_graph(
    num_nodes: int,
    num_edges: int,
    num_features: int = 4,
    num_classes: int = 3,
    seed: int = 0,
) -> Graph:
    rng = np.random.default_rng(seed)
    pairs = set()
    while len(pairs) < num_edges:
        u, v = rng.integers(0, num_nodes, size=2)
        if u != v:
            pairs.add((min(int(u), int(v)), max(int(u), int(v))))
    return Graph(
        features=rng.normal(size=(num_nodes, num_features)),
        labels=rng.integers(0, num_classes, size=num_nodes),
        edges=np.array(sorted(pairs), dtype=np.int64),
        num_classes=num_classes,
    )
