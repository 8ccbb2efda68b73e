import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rstre.checks import random_connected_graph
from rstre.errors import BudgetExceeded, InvalidParameter, SizeCapError
from rstre.graph_env import Environment, complete_graph, gen_environment, graph_from_edges, log_weight_view
from rstre.oracle import gibbs_log_prob, log_partition_function, tree_hamiltonian
from rstre.samplers import (
    enumerate_spanning_trees,
    loop_erase,
    matrix_tree_count,
    mst_kruskal,
    mst_of_graph,
    mst_of_tail,
    sequential_exact_run,
    sequential_exact_sample,
    sequential_tree_log_prob,
    wilson_parents,
    wilson_run,
    wilson_sample,
)
from rstre.trees import SpanningTree


def test_loop_erase_examples():
    assert loop_erase("abac") == list("ac")
    assert loop_erase("abcbd") == list("abd")
    assert loop_erase("a") == ["a"]
    with pytest.raises(InvalidParameter):
        loop_erase([])


@given(st.lists(st.integers(0, 6), min_size=1, max_size=60))
def test_loop_erase_properties(path):
    once = loop_erase(path)
    assert loop_erase(once) == once
    assert once[0] == path[0] and once[-1] == path[-1]
    assert len(set(once)) == len(once)
    # consecutive erased vertices were consecutive somewhere in the walk
    steps = set(zip(path, path[1:]))
    assert all(pair in steps for pair in zip(once, once[1:]))


def tv_from_parents(g, parents, dist):
    idx = dist.index()
    counts = np.zeros(len(dist.trees))
    for row in parents:
        counts[idx[SpanningTree(row, 0).edge_ids().tobytes()]] += 1
    return 0.5 * float(np.abs(counts / counts.sum() - dist.probs).sum())


@pytest.mark.slow
def test_wilson_uniform_on_k4():
    g = complete_graph(4)
    dist = enumerate_spanning_trees(g)
    assert len(dist.trees) == 16
    parents = wilson_parents(g, 0, np.random.default_rng(4), 100_000)
    assert tv_from_parents(g, parents, dist) <= 0.02


@pytest.mark.slow
def test_wilson_matches_gibbs_on_weighted_k5():
    g = log_weight_view(gen_environment(5, 31), 3.0)
    dist = enumerate_spanning_trees(g)
    parents = wilson_parents(g, 2, np.random.default_rng(5), 100_000)
    assert tv_from_parents(g, [SpanningTree(p, 2).parent for p in parents], dist) <= 0.02


def test_wilson_cached_mode_matches_gibbs():
    g = log_weight_view(gen_environment(4, 3), 2.0)
    dist = enumerate_spanning_trees(g)
    rng = np.random.default_rng(6)
    samples = [wilson_sample(g, 0, rng, transitions="cached") for _ in range(20_000)]
    assert dist.tv_distance(samples) <= 0.03


def test_wilson_on_a_path_is_deterministic():
    g = graph_from_edges(3, [(0, 1), (1, 2)], [-5.0, 3.0])
    rng = np.random.default_rng(0)
    for root in range(3):
        t = wilson_sample(g, root, rng)
        assert t == SpanningTree.from_edges(3, [(0, 1), (1, 2)])
        assert t.root == root


def test_wilson_gumbel_shift_invariance():
    g = log_weight_view(gen_environment(30, 2), 7.0)
    a = wilson_sample(g, 0, np.random.default_rng(99))
    b = wilson_sample(g.shifted(-40.0), 0, np.random.default_rng(99))
    assert a == b


def test_wilson_budget_and_arguments():
    g = log_weight_view(gen_environment(40, 1), 40 ** 1.5)
    with pytest.raises(BudgetExceeded) as info:
        wilson_run(g, 0, np.random.default_rng(0), budget=10)
    assert "steps" in info.value.diagnostics
    with pytest.raises(InvalidParameter):
        wilson_run(g, 40, np.random.default_rng(0))
    with pytest.raises(InvalidParameter):
        wilson_run(g, 0, np.random.default_rng(0), transitions="alias")
    with pytest.raises(BudgetExceeded):
        wilson_parents(g, 0, np.random.default_rng(0), 5, budget=10)


@given(st.integers(2, 40), st.sampled_from([0.0, 1.0, 20.0]), st.integers(0, 2**32))
def test_every_sample_is_a_spanning_tree(n, beta, seed):
    g = random_connected_graph(n, np.random.default_rng(seed), 0.3, beta)
    rng = np.random.default_rng(seed + 1)
    trees = [sequential_exact_sample(g, rng)]
    if beta <= 1.0:
        # at large beta on sparse graphs Wilson can trap past its budget
        trees.append(wilson_sample(g, 0, rng))
    for t in trees:
        t.validate()
        assert all(g.edge_index(int(a), int(b)) >= 0 for a, b in t.edges())


def test_sequential_triangle_probabilities(triangle_112):
    light = SpanningTree.from_edges(3, [(0, 1), (0, 2)])
    heavy = [SpanningTree.from_edges(3, [(0, 1), (1, 2)]), SpanningTree.from_edges(3, [(0, 2), (1, 2)])]
    assert sequential_tree_log_prob(triangle_112, light) == pytest.approx(math.log(0.2), rel=1e-14)
    for t in heavy:
        assert sequential_tree_log_prob(triangle_112, t) == pytest.approx(math.log(0.4), rel=1e-14)
    rng = np.random.default_rng(1)
    draws = [sequential_exact_sample(triangle_112, rng) for _ in range(20_000)]
    assert np.mean([d == light for d in draws]) == pytest.approx(0.2, abs=0.015)


def test_sequential_on_a_tree_graph():
    g = graph_from_edges(5, [(0, 1), (1, 2), (1, 3), (3, 4)], [-3.0, 0.0, -100.0, 2.0])
    t = SpanningTree.from_edges(5, g.u.size and np.column_stack([g.u, g.v]))
    assert sequential_tree_log_prob(g, t) == 0.0
    assert sequential_exact_sample(g, np.random.default_rng(2)) == t


def test_sequential_high_beta_triangle():
    omega = [0.2, 0.5, 0.9]
    g = graph_from_edges(3, [(0, 1), (0, 2), (1, 2)], [-100 * w for w in omega])
    best = SpanningTree.from_edges(3, [(0, 1), (0, 2)])
    # 1 - P(best) is about 4e-18, below double resolution near 1
    assert math.expm1(sequential_tree_log_prob(g, best)) > -1e-16
    other = SpanningTree.from_edges(3, [(0, 1), (1, 2)])
    assert sequential_tree_log_prob(g, other) == pytest.approx(-40.0, rel=1e-12)


@settings(max_examples=25)
@given(st.integers(3, 6), st.sampled_from([0.0, 1.0, 5.0, 200.0]), st.integers(0, 2**32))
def test_sequential_probabilities_match_enumeration(n, beta, seed):
    g = log_weight_view(gen_environment(n, seed), beta)
    dist = enumerate_spanning_trees(g)
    for t, lw in zip(dist.trees, dist.log_weights):
        lp = sequential_tree_log_prob(g, t)
        assert abs(math.expm1(lp - (lw - dist.log_z))) <= 1e-9


def test_sequential_caps_and_queries():
    g = log_weight_view(gen_environment(12, 0), 1.0)
    tree, queries = sequential_exact_run(g, np.random.default_rng(0))
    assert 0 < queries <= g.m
    with pytest.raises(SizeCapError):
        sequential_exact_run(g, np.random.default_rng(0), max_n=10)
    with pytest.raises(InvalidParameter):
        sequential_tree_log_prob(graph_from_edges(3, [(0, 1), (1, 2)]), SpanningTree.from_edges(3, [(0, 2), (1, 2)]))


def test_mst_examples():
    env = Environment(3, 0, np.array([0.2, 0.5, 0.9]))
    assert mst_kruskal(env) == SpanningTree.from_edges(3, [(0, 1), (0, 2)])
    env = gen_environment(30, 4)
    warped = Environment(30, 4, env.omega ** 3)
    assert mst_kruskal(env) == mst_kruskal(warped)


def test_mst_equals_argmin_on_k6():
    env = gen_environment(6, 17)
    dist = enumerate_spanning_trees(log_weight_view(env, 0.0))
    assert len(dist.trees) == 1296
    best = min(dist.trees, key=lambda t: tree_hamiltonian(env, t))
    assert best == mst_kruskal(env)


def test_mst_from_tail():
    env = gen_environment(200, 5)
    full = mst_kruskal(env)
    assert mst_of_tail(env.lower_tail(0.1)) == full
    assert mst_kruskal(env.lower_tail(0.1)) == full
    assert mst_of_tail(env.lower_tail(0.001)) is None
    with pytest.raises(InvalidParameter):
        mst_kruskal(env.lower_tail(0.001))


def test_mst_of_graph_maximises_conductance():
    env = gen_environment(7, 8)
    assert mst_of_graph(log_weight_view(env, 2.0)) == mst_kruskal(env)
    with pytest.raises(InvalidParameter):
        mst_of_graph(graph_from_edges(4, [(0, 1), (2, 3)]))


def test_enumeration_examples(triangle_112):
    dist = enumerate_spanning_trees(complete_graph(4))
    assert np.allclose(dist.probs, 1 / 16)
    dist = enumerate_spanning_trees(triangle_112)
    probs = dict(zip([tuple(map(tuple, t.edges().tolist())) for t in dist.trees], dist.probs))
    assert probs[((0, 1), (0, 2))] == pytest.approx(0.2)
    assert probs[((0, 1), (1, 2))] == pytest.approx(0.4)
    with pytest.raises(SizeCapError):
        enumerate_spanning_trees(complete_graph(9))


@given(st.integers(2, 8), st.integers(0, 2**32))
def test_enumeration_count_and_normalisation(n, seed):
    g = random_connected_graph(n, np.random.default_rng(seed), 0.5, 3.0)
    dist = enumerate_spanning_trees(g)
    assert len(dist.trees) == matrix_tree_count(g)
    assert math.fsum(dist.probs) == pytest.approx(1.0, abs=1e-12)
    unit = g.with_log_w(np.zeros(g.m))
    assert math.exp(log_partition_function(unit)) == pytest.approx(len(dist.trees), rel=1e-12)
    t = dist.trees[0]
    assert gibbs_log_prob(g, t) == pytest.approx(dist.log_weights[0] - dist.log_z, abs=1e-9)


def test_enumeration_larger_cap_for_sparse_graphs():
    ring = graph_from_edges(11, [(i, (i + 1) % 11) for i in range(11)])
    assert len(enumerate_spanning_trees(ring, max_n=12).trees) == 11
