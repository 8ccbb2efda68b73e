"""Spanning-tree samplers.

* ``wilson_sample``: Wilson's algorithm with the non-lazy jump chain. A step
  from u picks argmax_v (l_uv + G_v) with G_v standard Gumbel noise, so the
  walk never exponentiates a log-weight.
* ``sequential_exact_sample``: walks the edges in order of decreasing
  conductance, includes each with its Kirchhoff probability in the current
  contracted graph, contracts or deletes, and repeats. Exact at any beta.
* ``mst_kruskal``: the minimum spanning tree, i.e. the beta -> infinity limit.
* ``enumerate_spanning_trees``: brute force over all trees for n <= 8.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np
from scipy.special import logsumexp

from .errors import (
    BudgetExceeded,
    InternalInvariantViolation,
    InvalidParameter,
    NumericRangeError,
    SizeCapError,
)
from .graph_env import EdgeTail, Environment, LogWeightGraph, _find
from .oracle import pair_conductance
from .trees import SpanningTree
from .xfloat import xadd, xdiv, xfrom_log_array, xlog, xto_float

EXACT_MAX_N = 128
ENUM_MAX_N = 8


def loop_erase(path) -> list:
    """Chronological loop erasure of a finite path."""
    path = list(path)
    if not path:
        raise InvalidParameter("cannot loop-erase an empty path")
    out = []
    where = {}
    for x in path:
        if x in where:
            k = where[x]
            for y in out[k + 1:]:
                del where[y]
            del out[k + 1:]
        else:
            where[x] = len(out)
            out.append(x)
    return out


# -- Wilson ---------------------------------------------------------------------


def default_budget(n: int) -> int:
    return int(1e4 * n * max(math.log(n), 1.0))


@numba.njit(cache=True)
def _wilson_gumbel(lmat, root, rng, budget):
    n = lmat.shape[0]
    in_tree = np.zeros(n, dtype=np.bool_)
    in_tree[root] = True
    nxt = np.full(n, -1, dtype=np.int64)
    parent = np.full(n, -1, dtype=np.int64)
    steps = 0
    for start in range(n):
        u = start
        while not in_tree[u]:
            best = -np.inf
            arg = -1
            for j in range(n):
                x = lmat[u, j]
                if x == -np.inf:
                    continue
                val = x - math.log(rng.standard_exponential())
                if val > best:
                    best = val
                    arg = j
            if arg < 0:
                return parent, steps, False
            nxt[u] = arg
            u = arg
            steps += 1
            if steps > budget:
                return parent, steps, False
        u = start
        while not in_tree[u]:
            in_tree[u] = True
            parent[u] = nxt[u]
            u = nxt[u]
    return parent, steps, True


@numba.njit(cache=True)
def _wilson_cached(lmat, root, rng, budget):
    # Per-vertex normalised CDF built on first visit. Transitions whose
    # relative weight underflows exp(-745) are dropped, unlike the Gumbel path.
    n = lmat.shape[0]
    cdf = np.empty((n, n))
    ready = np.zeros(n, dtype=np.bool_)
    in_tree = np.zeros(n, dtype=np.bool_)
    in_tree[root] = True
    nxt = np.full(n, -1, dtype=np.int64)
    parent = np.full(n, -1, dtype=np.int64)
    steps = 0
    for start in range(n):
        u = start
        while not in_tree[u]:
            if not ready[u]:
                top = -np.inf
                for j in range(n):
                    top = max(top, lmat[u, j])
                acc = 0.0
                for j in range(n):
                    acc += math.exp(lmat[u, j] - top)
                    cdf[u, j] = acc
                ready[u] = True
            target = rng.random() * cdf[u, n - 1]
            arg = np.searchsorted(cdf[u], target, side="right")
            if arg >= n:
                arg = n - 1
            while lmat[u, arg] == -np.inf:
                arg -= 1
            nxt[u] = arg
            u = arg
            steps += 1
            if steps > budget:
                return parent, steps, False
        u = start
        while not in_tree[u]:
            in_tree[u] = True
            parent[u] = nxt[u]
            u = nxt[u]
    return parent, steps, True


@numba.njit(cache=True)
def _wilson_batch(lmat, root, rng, budget, count):
    out = np.empty((count, lmat.shape[0]), dtype=np.int64)
    for k in range(count):
        parent, _, ok = _wilson_gumbel(lmat, root, rng, budget)
        if not ok:
            return out[:k]
        out[k] = parent
    return out


def wilson_parents(g: LogWeightGraph, root: int, rng, count: int, budget=None) -> np.ndarray:
    """Parent arrays of `count` independent Wilson trees, one per row."""
    budget = default_budget(g.n) if budget is None else int(budget)
    out = _wilson_batch(g.dense_log_matrix(), root, rng, budget, count)
    if out.shape[0] < count:
        raise BudgetExceeded(f"Wilson walk exceeded {budget} steps", {"completed": int(out.shape[0])})
    return out


def wilson_run(g: LogWeightGraph, root: int, rng, budget=None, transitions="gumbel"):
    """(tree, steps). Raises BudgetExceeded if the walk runs past `budget` steps."""
    if not 0 <= root < g.n:
        raise InvalidParameter(f"root {root} out of range")
    budget = default_budget(g.n) if budget is None else int(budget)
    lmat = g.dense_log_matrix()
    if transitions == "gumbel":
        parent, steps, ok = _wilson_gumbel(lmat, root, rng, budget)
    elif transitions == "cached":
        if g.n > 8192:
            raise SizeCapError("the cached transition table is limited to n <= 8192")
        parent, steps, ok = _wilson_cached(lmat, root, rng, budget)
    else:
        raise InvalidParameter(f"unknown transition mode {transitions!r}")
    if not ok:
        placed = int(np.count_nonzero(parent >= 0)) + 1
        raise BudgetExceeded(
            f"Wilson walk exceeded {budget} steps with {placed}/{g.n} vertices in the tree",
            {"steps": int(steps), "budget": budget, "in_tree": placed},
        )
    return SpanningTree(parent, root), int(steps)


def wilson_sample(g: LogWeightGraph, root: int, rng, budget=None, transitions="gumbel") -> SpanningTree:
    return wilson_run(g, root, rng, budget, transitions)[0]


# -- exact sequential sampler -----------------------------------------------------------


@numba.njit(cache=True)
def _sequential(n, u, v, wm, we, order, uniforms, forced):
    """Core loop shared by sampling (forced[i] == -1) and scoring a given tree.

    Returns (chosen mask, log-probability of the decisions, oracle queries,
    status) with status 0 ok, 1 a forced decision had probability 0,
    2 the result is not a spanning tree.
    """
    m = u.shape[0]
    parent = np.arange(n)
    size = np.ones(n, dtype=np.int64)
    label = np.empty(n, dtype=np.int64)
    chosen = np.zeros(m, dtype=np.bool_)
    logp = 0.0
    queries = 0
    merged = 0
    for pos in range(m):
        i = order[pos]
        ra = _find(parent, u[i])
        rb = _find(parent, v[i])
        if ra == rb:
            if forced[i] == 1:
                return chosen, -np.inf, queries, 1
            continue
        s = 0
        for x in range(n):
            if _find(parent, x) == x:
                label[x] = s
                s += 1
        mm = np.zeros((s, s))
        me = np.zeros((s, s), dtype=np.int64)
        for q in range(pos + 1, m):
            j = order[q]
            a = label[_find(parent, u[j])]
            b = label[_find(parent, v[j])]
            if a == b or wm[j] == 0.0:
                continue
            rm, re = xadd(mm[a, b], me[a, b], wm[j], we[j])
            mm[a, b], me[a, b] = rm, re
            mm[b, a], me[b, a] = rm, re
        cm, ce = pair_conductance(mm, me, label[ra], label[rb])
        tm, te = xadd(wm[i], we[i], cm, ce)
        pin_m, pin_e = xdiv(wm[i], we[i], tm, te)
        queries += 1
        if cm == 0.0:
            pout_m, pout_e = 0.0, np.int64(0)
        else:
            pout_m, pout_e = xdiv(cm, ce, tm, te)
        if forced[i] == -1:
            include = uniforms[pos] >= xto_float(pout_m, pout_e)
        else:
            include = forced[i] == 1
        if include:
            logp += xlog(pin_m, pin_e)
            if size[ra] < size[rb]:
                ra, rb = rb, ra
            parent[rb] = ra
            size[ra] += size[rb]
            chosen[i] = True
            merged += 1
            if merged == n - 1 and forced[i] == -1:
                break
        else:
            if pout_m == 0.0:
                return chosen, -np.inf, queries, 1
            logp += xlog(pout_m, pout_e)
    if merged != n - 1:
        return chosen, logp, queries, 2
    return chosen, logp, queries, 0


def _exact_inputs(g: LogWeightGraph, max_n: int):
    if g.n > max_n:
        raise SizeCapError(f"exact sampler is capped at n <= {max_n}, got n={g.n}")
    if not np.all(np.isfinite(g.log_w) | (g.log_w == -np.inf)):
        raise NumericRangeError("log-weights must be finite or -inf")
    if np.any(np.abs(g.log_w[np.isfinite(g.log_w)]) > 2.0**61):
        raise NumericRangeError("log-weight beyond the extended exponent range")
    wm, we = xfrom_log_array(np.ascontiguousarray(g.log_w))
    # decreasing conductance, ties by edge index
    order = np.lexsort((np.arange(g.m), -g.log_w))
    return wm, we, order


def sequential_exact_run(g: LogWeightGraph, rng, max_n: int = EXACT_MAX_N):
    """(tree, oracle queries)."""
    wm, we, order = _exact_inputs(g, max_n)
    uniforms = rng.random(g.m)
    forced = np.full(g.m, -1, dtype=np.int8)
    chosen, _, queries, status = _sequential(g.n, g.u, g.v, wm, we, order, uniforms, forced)
    if status != 0:
        raise InternalInvariantViolation(
            "sequential sampler did not produce a spanning tree (is the graph connected?)"
        )
    edges = np.column_stack([g.u[chosen], g.v[chosen]])
    return SpanningTree.from_edges(g.n, edges), int(queries)


def sequential_exact_sample(g: LogWeightGraph, rng, max_n: int = EXACT_MAX_N) -> SpanningTree:
    return sequential_exact_run(g, rng, max_n)[0]


def sequential_tree_log_prob(g: LogWeightGraph, t: SpanningTree, max_n: int = EXACT_MAX_N) -> float:
    """log of the probability that sequential_exact_sample returns t.

    Chains the coin probabilities the sampler would meet along t's decisions;
    -inf if some decision is impossible.
    """
    from .oracle import tree_edge_indices

    wm, we, order = _exact_inputs(g, max_n)
    forced = np.zeros(g.m, dtype=np.int8)
    forced[tree_edge_indices(g, t)] = 1
    _, logp, _, status = _sequential(g.n, g.u, g.v, wm, we, order, np.zeros(g.m), forced)
    if status == 2:
        raise InvalidParameter("edge set is not a spanning tree of g")
    return float(logp)


# -- MST --------------------------------------------------------------------------------


@numba.njit(cache=True)
def _kruskal(n, u, v):
    parent = np.arange(n)
    size = np.ones(n, dtype=np.int64)
    take = np.zeros(u.shape[0], dtype=np.bool_)
    merged = 0
    for i in range(u.shape[0]):
        a = _find(parent, u[i])
        b = _find(parent, v[i])
        if a == b:
            continue
        if size[a] < size[b]:
            a, b = b, a
        parent[b] = a
        size[a] += size[b]
        take[i] = True
        merged += 1
        if merged == n - 1:
            break
    return take, merged


def mst_kruskal(env) -> SpanningTree:
    """Minimum spanning tree of K_n under omega, ties broken by edge id.

    Accepts an Environment, or an EdgeTail (raises InvalidParameter if the
    tail's edges do not span).
    """
    if isinstance(env, Environment):
        ids = np.argsort(env.omega, kind="stable")
        tree = mst_of_tail(EdgeTail(env.n, env.seed, 1.0, ids, env.omega[ids]))
    elif isinstance(env, EdgeTail):
        tree = mst_of_tail(env)
    else:
        raise InvalidParameter("mst_kruskal needs an Environment or EdgeTail")
    if tree is None:
        raise InvalidParameter("edges do not span the vertex set")
    return tree


def mst_of_tail(tail: EdgeTail):
    """Kruskal on a sorted edge tail; None when the tail is not connected."""
    if tail.n == 1:
        return SpanningTree(np.array([-1]), 0)
    u, v = tail.pairs()
    take, merged = _kruskal(tail.n, u, v)
    if merged != tail.n - 1:
        return None
    return SpanningTree.from_edges(tail.n, np.column_stack([u[take], v[take]]))


def mst_of_graph(g: LogWeightGraph) -> SpanningTree:
    """Maximum-conductance spanning tree of an explicit graph (ties by edge index)."""
    order = np.lexsort((np.arange(g.m), -g.log_w))
    take, merged = _kruskal(g.n, g.u[order], g.v[order])
    if merged != g.n - 1:
        raise InvalidParameter("graph is disconnected")
    sel = order[take]
    return SpanningTree.from_edges(g.n, np.column_stack([g.u[sel], g.v[sel]]))


# -- enumeration ------------------------------------------------------------------------


@dataclass
class TreeDistribution:
    trees: list
    log_weights: np.ndarray
    log_z: float

    @property
    def probs(self) -> np.ndarray:
        return np.exp(self.log_weights - self.log_z)

    def index(self) -> dict:
        return {t.edge_ids().tobytes(): k for k, t in enumerate(self.trees)}

    def tv_distance(self, samples) -> float:
        """Total variation between the empirical law of `samples` and this one."""
        idx = self.index()
        counts = np.zeros(len(self.trees))
        for t in samples:
            counts[idx[t.edge_ids().tobytes()]] += 1
        return 0.5 * float(np.abs(counts / counts.sum() - self.probs).sum())


def matrix_tree_count(g: LogWeightGraph) -> int:
    """Number of spanning trees of g's underlying simple graph."""
    lap = np.zeros((g.n, g.n))
    np.add.at(lap, (g.u, g.v), -1.0)
    np.add.at(lap, (g.v, g.u), -1.0)
    lap[np.diag_indices(g.n)] = -lap.sum(axis=1)
    if g.n == 1:
        return 1
    return int(round(np.linalg.det(lap[1:, 1:])))


def enumerate_spanning_trees(g: LogWeightGraph, max_n: int = ENUM_MAX_N) -> TreeDistribution:
    """All spanning trees with their log-weights. The default cap keeps K_n
    enumeration tractable; sparse graphs can pass a larger `max_n`."""
    if g.n > max_n:
        raise SizeCapError(f"enumeration is capped at n <= {max_n}, got n={g.n}")
    n, m = g.n, g.m
    us, vs, lw = g.u.tolist(), g.v.tolist(), g.log_w.tolist()
    found = []

    def walk(pos, comp, picked):
        need = n - 1 - len(picked)
        if need == 0:
            found.append(list(picked))
            return
        if m - pos < need:
            return
        a, b = comp[us[pos]], comp[vs[pos]]
        if a != b:
            merged = [a if c == b else c for c in comp]
            picked.append(pos)
            walk(pos + 1, merged, picked)
            picked.pop()
        walk(pos + 1, comp, picked)

    walk(0, list(range(n)), [])
    expected = matrix_tree_count(g)
    if len(found) != expected:
        raise InternalInvariantViolation(f"enumerated {len(found)} trees, matrix-tree count is {expected}")
    trees, logw = [], []
    for sel in found:
        trees.append(SpanningTree.from_edges(n, [(us[k], vs[k]) for k in sel]))
        logw.append(math.fsum(lw[k] for k in sel))
    logw = np.array(logw)
    return TreeDistribution(trees, logw, float(logsumexp(logw)) if len(logw) else -math.inf)
