"""Disorder generation, canonical edge ids and log-domain weight views.

Generator stream: an Environment with seed ``s`` draws its omega values from
``numpy.random.Generator(PCG64(s)).random(N)``, i.e. 53-bit uniforms on [0, 1)
in canonical edge order. Edge ``(u, v)`` with ``u < v`` has id
``u*n - u*(u+1)/2 + (v - u - 1)``, which is the row-major order of the strict
upper triangle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import InvalidParameter


def num_edges(n: int) -> int:
    return n * (n - 1) // 2


def canonical_edge_id(u: int, v: int, n: int) -> int:
    if not (0 <= u < n and 0 <= v < n):
        raise InvalidParameter(f"vertex out of range: ({u}, {v}) with n={n}")
    if u == v:
        raise InvalidParameter(f"self-loop ({u}, {v}) has no edge id")
    if u > v:
        u, v = v, u
    return u * n - u * (u + 1) // 2 + (v - u - 1)


def edge_ids(u, v, n: int) -> np.ndarray:
    """Vectorized canonical_edge_id; no range checks."""
    u = np.asarray(u, dtype=np.int64)
    v = np.asarray(v, dtype=np.int64)
    a = np.minimum(u, v)
    b = np.maximum(u, v)
    return a * n - a * (a + 1) // 2 + (b - a - 1)


def edge_pair(eid: int, n: int) -> tuple[int, int]:
    if not 0 <= eid < num_edges(n):
        raise InvalidParameter(f"edge id {eid} out of range for n={n}")
    u, v = edge_pairs(np.array([eid]), n)
    return int(u[0]), int(v[0])


def edge_pairs(ids, n: int) -> tuple[np.ndarray, np.ndarray]:
    ids = np.asarray(ids, dtype=np.int64)
    rows = np.arange(n, dtype=np.int64)
    offsets = rows * n - rows * (rows + 1) // 2
    u = np.searchsorted(offsets, ids, side="right") - 1
    v = ids - offsets[u] + u + 1
    return u, v


def _check_seed(seed) -> int:
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise InvalidParameter(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def _generator(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True, eq=False)
class Environment:
    n: int
    seed: int
    omega: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.omega.shape != (num_edges(self.n),):
            raise InvalidParameter("omega must have one entry per edge of K_n")
        self.omega.setflags(write=False)

    def omega_of(self, u: int, v: int) -> float:
        return float(self.omega[canonical_edge_id(u, v, self.n)])

    def lower_tail(self, p: float) -> EdgeTail:
        ids = np.flatnonzero(self.omega <= p)
        om = self.omega[ids]
        order = np.lexsort((ids, om))
        return EdgeTail(self.n, self.seed, float(p), ids[order], om[order])


def gen_environment(n: int, seed: int) -> Environment:
    if n < 2:
        raise InvalidParameter(f"need n >= 2, got {n}")
    seed = _check_seed(seed)
    return Environment(n, seed, _generator(seed).random(num_edges(n)))


@dataclass(frozen=True, eq=False)
class EdgeTail:
    """The edges of K_n with omega <= p, sorted by (omega, edge id).

    Enough to answer every question that only looks at p'-open edges for
    p' <= p (clusters, the MST when the tail spans), without storing the
    full n(n-1)/2 environment.
    """

    n: int
    seed: int
    p: float
    ids: np.ndarray = field(repr=False)
    omega: np.ndarray = field(repr=False)

    def pairs(self) -> tuple[np.ndarray, np.ndarray]:
        return edge_pairs(self.ids, self.n)

    def prefix(self, p: float) -> tuple[np.ndarray, np.ndarray]:
        """(ids, omega) of the edges with omega <= p; requires p <= self.p."""
        if p > self.p:
            raise InvalidParameter(f"tail only covers omega <= {self.p}, asked for {p}")
        k = np.searchsorted(self.omega, p, side="right")
        return self.ids[:k], self.omega[:k]


def stream_lower_tail(n: int, seed: int, p: float, chunk: int = 1 << 24) -> EdgeTail:
    """Lower tail of gen_environment(n, seed), read chunkwise from the same stream."""
    if n < 2:
        raise InvalidParameter(f"need n >= 2, got {n}")
    rng = _generator(_check_seed(seed))
    total = num_edges(n)
    ids, vals = [], []
    start = 0
    while start < total:
        k = min(chunk, total - start)
        block = rng.random(k)
        hit = np.flatnonzero(block <= p)
        ids.append(hit + start)
        vals.append(block[hit])
        start += k
    ids = np.concatenate(ids)
    vals = np.concatenate(vals)
    order = np.lexsort((ids, vals))
    return EdgeTail(n, int(seed), float(p), ids[order], vals[order])


def sample_lower_tail(n: int, seed: int, p: float) -> EdgeTail:
    """Draw the omega <= p part of a fresh environment directly.

    Exact in law: the number of open edges is Binomial(N, p), their ids are a
    uniform K-subset and their values are i.i.d. uniform on [0, p]. Costs
    O(N p) instead of O(N), but is a different stream from gen_environment.
    """
    if n < 2:
        raise InvalidParameter(f"need n >= 2, got {n}")
    if not 0.0 <= p <= 1.0:
        raise InvalidParameter(f"p must lie in [0, 1], got {p}")
    rng = np.random.default_rng([_check_seed(seed), 0x7A11])
    total = num_edges(n)
    k = int(rng.binomial(total, p))
    ids = rng.choice(total, size=k, replace=False, shuffle=False).astype(np.int64)
    vals = rng.random(k) * p
    order = np.lexsort((ids, vals))
    return EdgeTail(n, int(seed), float(p), ids[order], vals[order])


def extend_lower_tail(tail: EdgeTail, p: float, rng: np.random.Generator) -> EdgeTail:
    """Extend a sampled tail from tail.p to p, conditionally on what is there."""
    if p <= tail.p:
        return tail
    total = num_edges(tail.n)
    rest = total - tail.ids.size
    q = (p - tail.p) / (1.0 - tail.p)
    k = int(rng.binomial(rest, min(q, 1.0)))
    present = np.sort(tail.ids)
    fresh = np.empty(0, dtype=np.int64)
    while fresh.size < k:
        want = int((k - fresh.size) * 1.1) + 16
        cand = rng.integers(0, total, size=want)
        cand = cand[~np.isin(cand, present)]
        fresh = np.unique(np.concatenate([fresh, cand]))
    if fresh.size > k:
        fresh = rng.choice(fresh, size=k, replace=False)
    vals = tail.p + (p - tail.p) * rng.random(k)
    ids = np.concatenate([tail.ids, fresh])
    om = np.concatenate([tail.omega, vals])
    order = np.lexsort((ids, om))
    return EdgeTail(tail.n, tail.seed, float(p), ids[order], om[order])


# -- log-conductance views ---------------------------------------------------


class LogWeightGraph:
    """A simple graph with per-edge log-conductances.

    Either a view of K_n over an Environment (``env`` set, edges in canonical
    order) or an explicit edge list. Conductances are never exponentiated
    here.
    """

    def __init__(self, n, u, v, log_w, beta=None, env=None, omega=None):
        self.n = int(n)
        self.u = np.asarray(u, dtype=np.int64)
        self.v = np.asarray(v, dtype=np.int64)
        self.log_w = np.asarray(log_w, dtype=np.float64)
        self.beta = beta
        self.env = env
        self.omega = omega
        self._dense = None

    @property
    def m(self) -> int:
        return self.log_w.shape[0]

    def edge_index(self, a: int, b: int) -> int:
        if self.env is not None:
            return canonical_edge_id(a, b, self.n)
        hit = np.flatnonzero(((self.u == a) & (self.v == b)) | ((self.u == b) & (self.v == a)))
        if hit.size == 0:
            raise InvalidParameter(f"({a}, {b}) is not an edge")
        return int(hit[0])

    def dense_log_matrix(self) -> np.ndarray:
        """n x n matrix of log-conductances, -inf where there is no edge."""
        if self._dense is None:
            mat = np.full((self.n, self.n), -np.inf)
            mat[self.u, self.v] = self.log_w
            mat[self.v, self.u] = self.log_w
            mat.setflags(write=False)
            self._dense = mat
        return self._dense

    def log_vertex_weights(self) -> np.ndarray:
        """log w(v) = log sum of incident conductances."""
        mat = self.dense_log_matrix()
        top = mat.max(axis=1)
        safe = np.where(np.isfinite(top), top, 0.0)
        with np.errstate(divide="ignore"):
            return safe + np.log(np.exp(mat - safe[:, None]).sum(axis=1))

    def is_connected(self) -> bool:
        uf = UnionFind(self.n)
        finite = np.isfinite(self.log_w)
        for a, b in zip(self.u[finite].tolist(), self.v[finite].tolist()):
            uf.union(a, b)
        return uf.components == 1

    def shifted(self, c: float) -> LogWeightGraph:
        return LogWeightGraph(self.n, self.u, self.v, self.log_w + c, self.beta, self.env, self.omega)

    def with_log_w(self, log_w) -> LogWeightGraph:
        return LogWeightGraph(self.n, self.u, self.v, log_w, self.beta, None, self.omega)


def log_weight_view(env: Environment, beta: float) -> LogWeightGraph:
    beta = float(beta)
    if not beta >= 0.0 or not math.isfinite(beta):
        raise InvalidParameter(f"beta must be finite and nonnegative, got {beta}")
    u, v = np.triu_indices(env.n, 1)
    return LogWeightGraph(env.n, u, v, -beta * env.omega, beta=beta, env=env, omega=env.omega)


def graph_from_edges(n: int, edges, log_w=None) -> LogWeightGraph:
    """Explicit simple graph; log_w defaults to 0 (unit conductances)."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if n < 1 or (edges.size and (edges.min() < 0 or edges.max() >= n)):
        raise InvalidParameter("edge endpoint out of range")
    if np.any(edges[:, 0] == edges[:, 1]):
        raise InvalidParameter("self-loops are not allowed")
    key = np.sort(edges, axis=1)
    if np.unique(key, axis=0).shape[0] != key.shape[0]:
        raise InvalidParameter("parallel edges are not allowed")
    log_w = np.zeros(len(edges)) if log_w is None else np.asarray(log_w, dtype=np.float64)
    if log_w.shape != (len(edges),):
        raise InvalidParameter("need one log-weight per edge")
    return LogWeightGraph(n, edges[:, 0], edges[:, 1], log_w)


def complete_graph(n: int, log_w=None) -> LogWeightGraph:
    u, v = np.triu_indices(n, 1)
    return graph_from_edges(n, np.column_stack([u, v]), log_w)


# -- union-find ----------------------------------------------------------------


class UnionFind:
    """Path compression + union by size."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n
        self.components = n

    def find(self, x: int) -> int:
        parent = self.parent
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        self.components -= 1
        return True


@numba.njit(cache=True)
def _find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


@numba.njit(cache=True)
def component_labels(n, u, v):
    """Union-find labels (root per vertex) for the graph with the given edges."""
    parent = np.arange(n)
    size = np.ones(n, dtype=np.int64)
    for i in range(u.shape[0]):
        a = _find(parent, u[i])
        b = _find(parent, v[i])
        if a == b:
            continue
        if size[a] < size[b]:
            a, b = b, a
        parent[b] = a
        size[a] += size[b]
    for x in range(n):
        parent[x] = _find(parent, x)
    return parent


# -- text format ---------------------------------------------------------------


def write_environment(env: Environment, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"rstre-env v1 n={env.n} seed={env.seed}\n")
        fh.writelines(f"{x:.17g}\n" for x in env.omega.tolist())


def _parse_header(line: str, magic: str) -> dict:
    parts = line.split()
    if parts[:2] != [magic, "v1"]:
        raise InvalidParameter(f"not a {magic} v1 file")
    fields = {}
    for item in parts[2:]:
        key, _, val = item.partition("=")
        fields[key] = int(val)
    return fields


def read_environment(path) -> Environment:
    with open(path) as fh:
        head = _parse_header(fh.readline(), "rstre-env")
        omega = np.array([float(line) for line in fh if line.strip()])
    n = head["n"]
    if omega.shape != (num_edges(n),):
        raise InvalidParameter(f"expected {num_edges(n)} values, found {omega.shape[0]}")
    if np.any((omega < 0) | (omega > 1)):
        raise InvalidParameter("omega values must lie in [0, 1]")
    return Environment(n, _check_seed(head["seed"]), omega)
