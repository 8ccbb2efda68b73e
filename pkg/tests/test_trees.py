import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rstre.errors import InvalidParameter
from rstre.graph_env import complete_graph
from rstre.samplers import wilson_sample
from rstre.trees import SpanningTree, adjacency, bfs_distances, edge_overlap


def path_tree(n):
    return SpanningTree.from_edges(n, [(i, i + 1) for i in range(n - 1)])


def star_tree(n):
    return SpanningTree.from_edges(n, [(0, i) for i in range(1, n)])


def test_shapes():
    assert path_tree(5).diameter() == 4
    assert star_tree(5).diameter() == 2
    assert SpanningTree(np.array([-1]), 0).diameter() == 0
    assert path_tree(5).distance(0, 4) == 4
    assert path_tree(5).path(3, 1) == [3, 2, 1]


def test_from_edges_rejects_non_trees():
    with pytest.raises(InvalidParameter):
        SpanningTree.from_edges(4, [(0, 1), (1, 2)])
    with pytest.raises(InvalidParameter):
        SpanningTree.from_edges(4, [(0, 1), (1, 0), (2, 3)])


def test_validate():
    with pytest.raises(InvalidParameter):
        SpanningTree(np.array([-1, 2, 1]), 0).validate()
    with pytest.raises(InvalidParameter):
        SpanningTree(np.array([-1, -1, 0]), 0).validate()
    path_tree(6).validate()


def test_text_round_trip():
    t = wilson_sample(complete_graph(12), 3, np.random.default_rng(1))
    text = t.to_text()
    assert text.startswith("rstre-tree v1 n=12 root=3\n")
    assert len(text.strip().splitlines()) == 12
    assert SpanningTree.from_text(text) == t
    with pytest.raises(InvalidParameter):
        SpanningTree.from_text("rstre-env v1 n=2 seed=0\n")


def test_overlap_examples():
    t = path_tree(4)
    assert edge_overlap(t, t) == 3
    star = SpanningTree.from_edges(4, [(0, 1), (0, 2), (0, 3)])
    path = SpanningTree.from_edges(4, [(0, 1), (1, 2), (2, 3)])
    assert edge_overlap(star, path) == 1
    with pytest.raises(InvalidParameter):
        edge_overlap(t, path_tree(5))


def all_pairs_diameter(t):
    indptr, nbr = t.adjacency()
    return max(int(bfs_distances(indptr, nbr, s).max()) for s in range(t.n))


@given(st.integers(1, 200), st.integers(0, 2**32))
def test_double_sweep_equals_all_pairs(n, seed):
    t = wilson_sample(complete_graph(n), 0, np.random.default_rng(seed)) if n > 1 else SpanningTree([-1], 0)
    assert t.diameter() == all_pairs_diameter(t)


@given(st.integers(2, 60), st.integers(0, 2**32))
def test_random_tree_invariants(n, seed):
    t = wilson_sample(complete_graph(n), 0, np.random.default_rng(seed))
    t.validate()
    e = t.edges()
    assert e.shape == (n - 1, 2) and np.all(e[:, 0] < e[:, 1])
    assert hash(t) == hash(SpanningTree.from_edges(n, e, root=n - 1))
    assert t.depths()[t.root] == 0


def test_adjacency_csr():
    indptr, nbr = adjacency(3, np.array([0, 1]), np.array([1, 2]))
    assert indptr.tolist() == [0, 1, 3, 4]
    assert sorted(nbr[1:3].tolist()) == [0, 2]
