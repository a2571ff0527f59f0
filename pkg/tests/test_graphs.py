import json

import numpy as np
import pytest

from asfgnn.graphs import (
    ClientDataset,
    DatasetError,
    Graph,
    SplitSpec,
    induced_subgraph,
    load_dataset,
    load_masks,
    neighbors,
    partition_classes,
    save_dataset,
    split_by_classes,
    split_by_degree,
    split_by_label_ratio,
    split_disjoint_labels,
)

from conftest import path_graph, random_graph


def write_tiny_dataset(path, nodes_rows, edges_rows, meta):
    path.mkdir(parents=True, exist_ok=True)
    (path / "meta.json").write_text(json.dumps(meta))
    (path / "nodes.csv").write_text("\n".join(nodes_rows) + ("\n" if nodes_rows else ""))
    (path / "edges.csv").write_text("\n".join(edges_rows) + ("\n" if edges_rows else ""))


class TestLoadDataset:
    def test_citation_part1_statistics(self, benchmark_dir):
        g = load_dataset(benchmark_dir / "part1")
        assert g.num_nodes == 1412
        assert len(g.edges) == 2657
        assert g.num_features == 1433
        assert g.num_classes == 4

    def test_citation_part2_statistics(self, benchmark_dir):
        g = load_dataset(benchmark_dir / "part2")
        assert g.num_nodes == 1296
        assert len(g.edges) == 1961
        assert len(np.unique(g.labels)) == 3

    def test_empty_edges_gives_isolated_nodes(self, tmp_path):
        write_tiny_dataset(
            tmp_path / "iso",
            ["0,0,1.0,0.0", "1,1,0.0,1.0", "2,0,1.0,1.0"],
            [],
            {"num_nodes": 3, "num_features": 2, "num_classes": 2},
        )
        g = load_dataset(tmp_path / "iso")
        assert g.num_nodes == 3
        assert g.edges.shape == (0, 2)
        assert all(neighbors(g, v) == set() for v in range(3))

    def test_self_loop_dropped(self, tmp_path):
        write_tiny_dataset(
            tmp_path / "loop",
            ["0,0,1.0", "1,1,2.0"],
            ["0,0", "0,1"],
            {"num_nodes": 2, "num_features": 1, "num_classes": 2},
        )
        g = load_dataset(tmp_path / "loop")
        assert len(g.edges) == 1
        assert g.edges.tolist() == [[0, 1]]

    def test_missing_file(self, tmp_path):
        (tmp_path / "broken").mkdir()
        with pytest.raises(DatasetError, match="missing"):
            load_dataset(tmp_path / "broken")

    def test_feature_width_mismatch(self, tmp_path):
        write_tiny_dataset(
            tmp_path / "wide",
            ["0,0,1.0,2.0"],
            [],
            {"num_nodes": 1, "num_features": 1, "num_classes": 1},
        )
        with pytest.raises(DatasetError, match="feature width"):
            load_dataset(tmp_path / "wide")

    def test_label_out_of_range(self, tmp_path):
        write_tiny_dataset(
            tmp_path / "label",
            ["0,5,1.0"],
            [],
            {"num_nodes": 1, "num_features": 1, "num_classes": 2},
        )
        with pytest.raises(DatasetError, match="label"):
            load_dataset(tmp_path / "label")

    def test_dangling_edge(self, tmp_path):
        write_tiny_dataset(
            tmp_path / "dangle",
            ["0,0,1.0", "1,0,2.0"],
            ["0,7"],
            {"num_nodes": 2, "num_features": 1, "num_classes": 1},
        )
        with pytest.raises(DatasetError, match="dangling"):
            load_dataset(tmp_path / "dangle")

    def test_round_trip_identity(self, tmp_path):
        g = random_graph(20, 30, num_features=3, seed=3)
        masks = {"train": np.array([0, 1]), "val": np.array([2]), "test": np.array([3, 4])}
        save_dataset(g, tmp_path / "rt", masks)
        g2 = load_dataset(tmp_path / "rt")
        assert np.array_equal(g.features, g2.features)
        assert np.array_equal(g.labels, g2.labels)
        assert np.array_equal(g.edges, g2.edges)
        assert g.num_classes == g2.num_classes
        m2 = load_masks(tmp_path / "rt")
        for key in masks:
            assert np.array_equal(masks[key], m2[key])


class TestNeighbors:
    def test_path_middle(self):
        g = path_graph(3)
        assert neighbors(g, 1) == {0, 2}

    def test_isolated(self):
        g = Graph(
            features=np.zeros((2, 1)),
            labels=np.zeros(2, dtype=int),
            edges=np.empty((0, 2), dtype=int),
            num_classes=1,
        )
        assert neighbors(g, 0) == set()

    def test_out_of_range(self):
        g = path_graph(3)
        with pytest.raises(DatasetError):
            neighbors(g, 5)


def two_part_graphs(n1=10, n2=10, num_features=3, seed=0):
    """Part 1 labeled with classes {0,1}, part 2 with {2}."""
    rng = np.random.default_rng(seed)
    g1 = Graph(
        features=rng.normal(size=(n1, num_features)),
        labels=rng.integers(0, 2, size=n1),
        edges=np.array([[i, i + 1] for i in range(n1 - 1)]),
        num_classes=3,
    )
    g2 = Graph(
        features=rng.normal(size=(n2, num_features)),
        labels=np.full(n2, 2),
        edges=np.array([[i, i + 1] for i in range(n2 - 1)]),
        num_classes=3,
    )
    return g1, g2


class TestLabelRatioSplit:
    def test_alpha_one_separates_parts(self):
        g1, g2 = two_part_graphs()
        spec = SplitSpec(alpha=1.0, part1_classes=(0, 1), part2_classes=(2,), seed=1)
        a, b = split_by_label_ratio(g1, g2, spec)
        assert set(np.unique(a.graph.labels)) <= {0, 1}
        assert set(np.unique(b.graph.labels)) == {2}
        assert a.graph.num_nodes == 10 and b.graph.num_nodes == 10

    def test_alpha_point8_counts(self):
        g1, g2 = two_part_graphs()
        spec = SplitSpec(alpha=0.8, part1_classes=(0, 1), part2_classes=(2,), seed=1)
        a, b = split_by_label_ratio(g1, g2, spec)
        assert int(np.isin(a.graph.labels, [0, 1]).sum()) == 8
        assert int((a.graph.labels == 2).sum()) == 2
        assert int(np.isin(b.graph.labels, [0, 1]).sum()) == 2
        assert int((b.graph.labels == 2).sum()) == 8

    def test_alpha_half_symmetric(self):
        g1, g2 = two_part_graphs()
        spec = SplitSpec(alpha=0.5, part1_classes=(0, 1), part2_classes=(2,), seed=1)
        a, b = split_by_label_ratio(g1, g2, spec)
        for client in (a, b):
            assert int(np.isin(client.graph.labels, [0, 1]).sum()) == 5
            assert int((client.graph.labels == 2).sum()) == 5

    def test_alpha_out_of_range(self):
        with pytest.raises(DatasetError):
            SplitSpec(alpha=0.3, part1_classes=(0, 1), part2_classes=(2,), seed=1)

    def test_overdraw_raises(self):
        g1, g2 = two_part_graphs(n1=100, n2=4)
        spec = SplitSpec(alpha=0.5, part1_classes=(0, 1), part2_classes=(2,), seed=1)
        with pytest.raises(DatasetError, match="exceed"):
            split_by_label_ratio(g1, g2, spec)

    def test_node_disjoint_and_total_counts(self):
        g1, g2 = two_part_graphs(n1=12, n2=12, seed=2)
        spec = SplitSpec(alpha=0.75, part1_classes=(0, 1), part2_classes=(2,), seed=5)
        a, b = split_by_label_ratio(g1, g2, spec)
        expected = (
            int(0.75 * 12) + int(0.25 * 12) + int(0.25 * 12) + int(0.75 * 12)
        )
        assert a.graph.num_nodes + b.graph.num_nodes == expected
        # Feature rows are unique in the generated parts, so row-identity
        # detects any node landing in both clients.
        rows = {tuple(r) for r in a.graph.features} & {tuple(r) for r in b.graph.features}
        assert not rows

    def test_fixed_seed_reproducible(self):
        g1, g2 = two_part_graphs()
        spec = SplitSpec(alpha=0.7, part1_classes=(0, 1), part2_classes=(2,), seed=9)
        a1, b1 = split_by_label_ratio(g1, g2, spec)
        a2, b2 = split_by_label_ratio(g1, g2, spec)
        assert np.array_equal(a1.graph.features, a2.graph.features)
        assert np.array_equal(a1.train_mask, a2.train_mask)
        assert np.array_equal(b1.graph.edges, b2.graph.edges)

    def test_masks_disjoint_and_train_nonempty(self):
        g1, g2 = two_part_graphs(n1=30, n2=30, seed=4)
        spec = SplitSpec(alpha=0.9, part1_classes=(0, 1), part2_classes=(2,), seed=3)
        for client in split_by_label_ratio(g1, g2, spec):
            assert client.train_mask.size > 0
            combined = np.concatenate([client.train_mask, client.val_mask, client.test_mask])
            assert len(np.unique(combined)) == len(combined)

    def test_neighbors_never_cross_clients(self):
        g1, g2 = two_part_graphs(n1=20, n2=20, seed=6)
        spec = SplitSpec(alpha=0.8, part1_classes=(0, 1), part2_classes=(2,), seed=2)
        a, b = split_by_label_ratio(g1, g2, spec)
        # All edges are internal by construction of the induced subgraph.
        for client in (a, b):
            if client.graph.edges.size:
                assert client.graph.edges.max() < client.graph.num_nodes


class TestDegreeSplit:
    def test_path_threshold_one(self):
        g = path_graph(3)
        low, high = split_by_degree(g, 1)
        assert low.num_nodes == 2  # the two endpoints, degree 1
        assert high.num_nodes == 1

    def test_threshold_zero_isolated_only(self):
        g = random_graph(10, 8, seed=1)
        low, _ = split_by_degree(g, 0)
        assert low.num_nodes == int((g.degrees == 0).sum())

    def test_partition_exact(self):
        g = random_graph(40, 60, seed=2)
        low, high = split_by_degree(g, 3)
        assert low.num_nodes + high.num_nodes == g.num_nodes

    def test_citation_threshold_three(self, benchmark_dir):
        g = load_dataset(benchmark_dir / "full")
        low, high = split_by_degree(g, 3)
        assert low.num_nodes + high.num_nodes == 2708
        expected_low = int((g.degrees <= 3).sum())
        assert low.num_nodes == expected_low


class TestSubgraphs:
    def test_induced_subgraph_drops_outside_edges(self):
        g = path_graph(4)
        sub = induced_subgraph(g, np.array([0, 1, 3]))
        assert sub.num_nodes == 3
        assert sub.edges.tolist() == [[0, 1]]

    def test_split_by_classes(self):
        g = random_graph(30, 40, num_classes=3, seed=5)
        sub = split_by_classes(g, {0, 2})
        assert set(np.unique(sub.labels)) <= {0, 2}
        assert sub.num_nodes == int(np.isin(g.labels, [0, 2]).sum())

    def test_partition_classes_near_equal(self):
        groups = partition_classes(7, 3)
        assert [len(g) for g in groups] == [2, 3, 2]
        assert sorted(c for g in groups for c in g) == list(range(7))

    def test_split_disjoint_labels(self):
        g = random_graph(60, 80, num_classes=4, seed=8)
        clients = split_disjoint_labels(g, 2, seed=1)
        labels0 = set(np.unique(clients[0].graph.labels))
        labels1 = set(np.unique(clients[1].graph.labels))
        assert labels0 & labels1 == set()
