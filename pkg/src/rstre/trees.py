"""Rooted spanning trees and the tree queries used across the package."""

from __future__ import annotations

from collections import deque

import numba
import numpy as np

from .errors import InvalidParameter
from .graph_env import component_labels, edge_ids


@numba.njit(cache=True)
def _csr(n, a, b):
    deg = np.zeros(n + 1, dtype=np.int64)
    for i in range(a.shape[0]):
        deg[a[i] + 1] += 1
        deg[b[i] + 1] += 1
    indptr = np.cumsum(deg)
    fill = indptr[:-1].copy()
    nbr = np.empty(2 * a.shape[0], dtype=np.int64)
    for i in range(a.shape[0]):
        nbr[fill[a[i]]] = b[i]
        fill[a[i]] += 1
        nbr[fill[b[i]]] = a[i]
        fill[b[i]] += 1
    return indptr, nbr


@numba.njit(cache=True)
def _bfs(indptr, nbr, src, dist):
    """Fill dist (preset to -1) from src; returns (farthest vertex, its distance)."""
    queue = np.empty(dist.shape[0], dtype=np.int64)
    queue[0] = src
    dist[src] = 0
    head, tail = 0, 1
    far = src
    while head < tail:
        x = queue[head]
        head += 1
        if dist[x] > dist[far]:
            far = x
        for k in range(indptr[x], indptr[x + 1]):
            y = nbr[k]
            if dist[y] < 0:
                dist[y] = dist[x] + 1
                queue[tail] = y
                tail += 1
    return far, dist[far]


def adjacency(n: int, a, b):
    return _csr(n, np.asarray(a, dtype=np.int64), np.asarray(b, dtype=np.int64))


def bfs_distances(indptr, nbr, src: int) -> np.ndarray:
    dist = np.full(indptr.shape[0] - 1, -1, dtype=np.int64)
    _bfs(indptr, nbr, src, dist)
    return dist


def double_sweep(indptr, nbr, start: int) -> tuple[int, int, int]:
    """(a, b, d(a, b)) where a is farthest from start and b farthest from a."""
    dist = np.full(indptr.shape[0] - 1, -1, dtype=np.int64)
    a, _ = _bfs(indptr, nbr, start, dist)
    dist[:] = -1
    b, d = _bfs(indptr, nbr, a, dist)
    return int(a), int(b), int(d)


class SpanningTree:
    """A spanning tree stored as a parent map; ``parent[root] == -1``."""

    def __init__(self, parent, root: int):
        self.parent = np.asarray(parent, dtype=np.int64)
        self.parent.setflags(write=False)
        self.n = self.parent.shape[0]
        self.root = int(root)
        self._adj = None

    @classmethod
    def from_edges(cls, n: int, edges, root: int = 0) -> SpanningTree:
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if edges.shape[0] != n - 1:
            raise InvalidParameter(f"a spanning tree on {n} vertices has {n - 1} edges, got {edges.shape[0]}")
        indptr, nbr = adjacency(n, edges[:, 0], edges[:, 1])
        parent = np.full(n, -2, dtype=np.int64)
        parent[root] = -1
        queue = deque([root])
        while queue:
            x = queue.popleft()
            for y in nbr[indptr[x]:indptr[x + 1]].tolist():
                if parent[y] == -2:
                    parent[y] = x
                    queue.append(y)
        if np.any(parent == -2):
            raise InvalidParameter("edge set does not span")
        return cls(parent, root)

    def edges(self) -> np.ndarray:
        """(n-1, 2) array of (min, max) endpoint pairs, sorted."""
        child = np.flatnonzero(self.parent >= 0)
        par = self.parent[child]
        pairs = np.column_stack([np.minimum(child, par), np.maximum(child, par)])
        return pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))]

    def edge_ids(self) -> np.ndarray:
        e = self.edges()
        return np.sort(edge_ids(e[:, 0], e[:, 1], self.n))

    def adjacency(self):
        if self._adj is None:
            e = self.edges()
            self._adj = adjacency(self.n, e[:, 0], e[:, 1])
        return self._adj

    def validate(self) -> None:
        """Raise InvalidParameter unless this is a spanning tree of K_n."""
        par = self.parent
        if self.n < 1 or par[self.root] != -1 or np.count_nonzero(par < 0) != 1:
            raise InvalidParameter("parent map must have exactly one root")
        if np.any(par >= self.n) or np.any(par < -1):
            raise InvalidParameter("parent out of range")
        child = np.flatnonzero(par >= 0)
        if np.any(par[child] == child):
            raise InvalidParameter("vertex is its own parent")
        labels = component_labels(self.n, child, par[child])
        if np.unique(labels).size != 1:
            raise InvalidParameter("parent map has a cycle or is disconnected")

    def diameter(self) -> int:
        if self.n == 1:
            return 0
        indptr, nbr = self.adjacency()
        return double_sweep(indptr, nbr, self.root)[2]

    def depths(self) -> np.ndarray:
        indptr, nbr = self.adjacency()
        return bfs_distances(indptr, nbr, self.root)

    def path(self, a: int, b: int) -> list[int]:
        """Vertex sequence of the tree path from a to b."""
        up_a, up_b = [a], [b]
        seen = {a: 0}
        x = a
        while self.parent[x] >= 0:
            x = int(self.parent[x])
            seen[x] = len(up_a)
            up_a.append(x)
        y = b
        while y not in seen:
            y = int(self.parent[y])
            up_b.append(y)
        return up_a[: seen[y]] + up_b[::-1]

    def distance(self, a: int, b: int) -> int:
        return len(self.path(a, b)) - 1

    def to_text(self) -> str:
        lines = [f"rstre-tree v1 n={self.n} root={self.root}"]
        lines += [f"{c} {p}" for c, p in enumerate(self.parent.tolist()) if p >= 0]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> SpanningTree:
        lines = [ln for ln in text.splitlines() if ln.strip()]
        parts = lines[0].split()
        if parts[:2] != ["rstre-tree", "v1"]:
            raise InvalidParameter("not a rstre-tree v1 file")
        head = dict(item.split("=") for item in parts[2:])
        n, root = int(head["n"]), int(head["root"])
        parent = np.full(n, -1, dtype=np.int64)
        for ln in lines[1:]:
            c, p = map(int, ln.split())
            parent[c] = p
        t = cls(parent, root)
        t.validate()
        return t

    def __eq__(self, other):
        if not isinstance(other, SpanningTree):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.edge_ids(), other.edge_ids())

    def __hash__(self):
        return hash(self.edge_ids().tobytes())

    def __repr__(self):
        return f"SpanningTree(n={self.n}, root={self.root})"


def edge_overlap(t1: SpanningTree, t2: SpanningTree) -> int:
    if t1.n != t2.n:
        raise InvalidParameter(f"trees on different vertex counts: {t1.n} vs {t2.n}")
    return int(np.intersect1d(t1.edge_ids(), t2.edge_ids(), assume_unique=True).size)
