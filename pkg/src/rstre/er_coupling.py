"""The omega <-> Erdos-Renyi coupling.

An edge is p-open when omega_e <= p, so the p-open subgraph of K_n is a
G(n, p) sample and raising p only adds edges. This module extracts the
p-open clusters and the structural statistics the tree results are phrased
in: sizes, excess, diameters, longest paths, 2-cores and kernels, the
minimal subtree of a spanning tree spanned by a vertex set, and the
threshold schedule p_i with its well-behaved events.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameter
from .graph_env import EdgeTail, Environment, component_labels, edge_ids, edge_pairs
from .trees import SpanningTree, adjacency, bfs_distances, double_sweep

LONGEST_PATH_WORK = 2_000_000
DIAMETER_MAX_BFS = 2_000


@dataclass
class Subgraph:
    """A vertex set plus the edges among them, in original vertex labels."""

    vertices: np.ndarray
    edges: np.ndarray

    @property
    def size(self) -> int:
        return int(self.vertices.size)

    @property
    def excess(self) -> int:
        return int(self.edges.shape[0]) - self.size

    def local(self):
        """(indptr, nbr) adjacency over positions in `vertices`."""
        pos = np.searchsorted(self.vertices, self.edges)
        return adjacency(self.size, pos[:, 0], pos[:, 1])


def subgraph(vertices, edges) -> Subgraph:
    vertices = np.unique(np.asarray(vertices, dtype=np.int64))
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    return Subgraph(vertices, edges)


def open_edges(env, p: float) -> tuple[np.ndarray, np.ndarray]:
    """Endpoints of the p-open edges of an Environment or EdgeTail."""
    if isinstance(env, Environment):
        ids = np.flatnonzero(env.omega <= p)
    elif isinstance(env, EdgeTail):
        ids = env.prefix(p)[0]
    else:
        raise InvalidParameter("expected an Environment or EdgeTail")
    return edge_pairs(ids, env.n)


@dataclass
class ClusterDecomposition:
    n: int
    p: float
    comp: np.ndarray  # rank of each vertex's component, 0 = largest
    sizes: np.ndarray
    edge_counts: np.ndarray
    u: np.ndarray
    v: np.ndarray

    @property
    def num_components(self) -> int:
        return int(self.sizes.size)

    def members(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.comp == k)

    def component(self, k: int) -> Subgraph:
        if not 0 <= k < self.num_components:
            raise InvalidParameter(f"component rank {k} out of range")
        mask = self.comp[self.u] == k
        return Subgraph(self.members(k), np.column_stack([self.u[mask], self.v[mask]]))


def decompose(n: int, u, v, p: float = math.nan) -> ClusterDecomposition:
    u = np.asarray(u, dtype=np.int64)
    v = np.asarray(v, dtype=np.int64)
    roots = component_labels(n, u, v)
    uniq, inv = np.unique(roots, return_inverse=True)
    sizes = np.bincount(inv)
    first = np.full(uniq.size, n, dtype=np.int64)
    np.minimum.at(first, inv, np.arange(n))
    order = np.lexsort((first, -sizes))
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    comp = rank[inv]
    edge_counts = np.bincount(comp[u], minlength=order.size) if u.size else np.zeros(order.size, dtype=np.int64)
    return ClusterDecomposition(n, p, comp, sizes[order], edge_counts, u, v)


def clusters_at(env, p: float) -> ClusterDecomposition:
    u, v = open_edges(env, p)
    return decompose(env.n, u, v, p)


# -- component statistics ----------------------------------------------------------------


def tree_diameter(sub: Subgraph) -> int:
    if sub.size <= 1:
        return 0
    indptr, nbr = sub.local()
    return double_sweep(indptr, nbr, 0)[2]


def graph_diameter(sub: Subgraph, max_bfs: int = DIAMETER_MAX_BFS) -> tuple[int, bool]:
    """(diameter, exact) of a connected subgraph.

    Trees use the double sweep. Otherwise iFUB: BFS from a central vertex,
    then eccentricities level by level from the far end until the lower bound
    beats twice the current level. Gives up after `max_bfs` searches and
    returns the lower bound found so far.
    """
    if sub.size <= 1:
        return 0, True
    indptr, nbr = sub.local()
    a, b, d = double_sweep(indptr, nbr, 0)
    if sub.excess == -1:
        return d, True
    # middle vertex of the a-b path as the iFUB root
    da = bfs_distances(indptr, nbr, a)
    db = bfs_distances(indptr, nbr, b)
    mid = np.flatnonzero((da + db == d) & (da == d // 2))
    root = int(mid[0]) if mid.size else a
    level = bfs_distances(indptr, nbr, root)
    lower = d
    searches = 3
    top = int(level.max())
    for i in range(top, 0, -1):
        if lower >= 2 * i:
            return lower, True
        for x in np.flatnonzero(level == i).tolist():
            lower = max(lower, int(bfs_distances(indptr, nbr, x).max()))
            searches += 1
            if lower >= 2 * i:
                break
            if searches > max_bfs:
                return lower, False
    return lower, True


def _hanging_trees(sub: Subgraph, core_mask: np.ndarray, indptr, nbr):
    """Height of the forest hanging off each core vertex, and the longest
    path that stays inside one hanging tree (through its core root)."""
    k = sub.size
    height = np.zeros(k, dtype=np.int64)
    best = 0
    # BFS outward from the core, then fold heights back in reverse order
    dist = np.full(k, -1, dtype=np.int64)
    par = np.full(k, -1, dtype=np.int64)
    order = [int(x) for x in np.flatnonzero(core_mask)]
    for x in order:
        dist[x] = 0
    head = 0
    while head < len(order):
        x = order[head]
        head += 1
        for y in nbr[indptr[x]:indptr[x + 1]].tolist():
            if dist[y] < 0:
                dist[y] = dist[x] + 1
                par[y] = x
                order.append(y)
    top1 = np.zeros(k, dtype=np.int64)
    top2 = np.zeros(k, dtype=np.int64)
    for x in reversed(order):
        height[x] = top1[x]
        best = max(best, int(top1[x] + top2[x]))
        p = par[x]
        if p >= 0:
            h = height[x] + 1
            if h > top1[p]:
                top1[p], top2[p] = h, top1[p]
            elif h > top2[p]:
                top2[p] = h
    return height, best


def _core_mask(size: int, indptr, nbr) -> np.ndarray:
    deg = np.diff(indptr).astype(np.int64)
    alive = np.ones(size, dtype=bool)
    stack = [int(x) for x in np.flatnonzero(deg <= 1)]
    while stack:
        x = stack.pop()
        if not alive[x]:
            continue
        alive[x] = False
        for y in nbr[indptr[x]:indptr[x + 1]].tolist():
            if alive[y]:
                deg[y] -= 1
                if deg[y] == 1:
                    stack.append(y)
    return alive


def longest_path(sub: Subgraph, work: int = LONGEST_PATH_WORK) -> tuple[int, bool]:
    """(length in edges, exact) of the longest simple path.

    Trees: the diameter. Size <= 40 or excess <= 10: a simple path leaves the
    2-core at most at its two ends, so it is a simple core path x..y plus the
    deepest hanging branches at x and y (or lies in a single hanging tree);
    core paths are enumerated exhaustively. Past `work` DFS steps, or for
    larger excess, a double-sweep lower bound is returned flagged inexact.
    """
    if sub.size <= 1:
        return 0, True
    indptr, nbr = sub.local()
    if sub.excess == -1:
        return double_sweep(indptr, nbr, 0)[2], True
    lower = double_sweep(indptr, nbr, 0)[2]
    if not (sub.size <= 40 or sub.excess <= 10):
        return lower, False
    core = _core_mask(sub.size, indptr, nbr)
    height, best = _hanging_trees(sub, core, indptr, nbr)
    best = max(best, lower)
    nbrs = [
        [y for y in nbr[indptr[x]:indptr[x + 1]].tolist() if core[y]] if core[x] else []
        for x in range(sub.size)
    ]
    steps = 0
    on_path = np.zeros(sub.size, dtype=bool)
    for x in np.flatnonzero(core).tolist():
        hx = int(height[x])
        on_path[x] = True
        stack = [(x, 0, iter(nbrs[x]))]
        while stack:
            node, length, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                on_path[node] = False
                stack.pop()
                continue
            if on_path[nxt]:
                continue
            steps += 1
            if steps > work:
                on_path[:] = False
                return best, False
            best = max(best, hx + length + 1 + int(height[nxt]))
            on_path[nxt] = True
            stack.append((nxt, length + 1, iter(nbrs[nxt])))
    return best, True


@dataclass(frozen=True)
class ComponentStats:
    size: int
    excess: int
    diameter: int
    diameter_exact: bool
    longest_path: int
    longest_path_exact: bool


def component_stats(dec: ClusterDecomposition, k: int) -> ComponentStats:
    sub = dec.component(k)
    diam, diam_exact = graph_diameter(sub)
    lp, lp_exact = longest_path(sub)
    return ComponentStats(sub.size, sub.excess, diam, diam_exact, lp, lp_exact)


# -- 2-core and kernel ----------------------------------------------------------------------


def two_core(sub: Subgraph) -> Subgraph:
    if sub.size == 0:
        return sub
    indptr, nbr = sub.local()
    alive = _core_mask(sub.size, indptr, nbr)
    keep = sub.vertices[alive]
    emask = np.isin(sub.edges[:, 0], keep) & np.isin(sub.edges[:, 1], keep)
    return Subgraph(keep, sub.edges[emask])


@dataclass
class Kernel:
    """Multigraph on the degree >= 3 vertices of a 2-core; each edge carries
    the length of the path it replaces. A bare cycle becomes one vertex with
    a self-loop."""

    vertices: np.ndarray
    edges: list  # (a, b, length) in original labels

    @property
    def labels(self) -> np.ndarray:
        return np.array([e[2] for e in self.edges], dtype=np.int64)


def kernel_graph(core: Subgraph) -> Kernel:
    if core.size == 0:
        return Kernel(core.vertices, [])
    pos = np.searchsorted(core.vertices, core.edges)
    incident = [[] for _ in range(core.size)]
    for k, (a, b) in enumerate(pos.tolist()):
        incident[a].append((b, k))
        incident[b].append((a, k))
    deg = np.array([len(x) for x in incident])
    if np.any(deg < 2):
        raise InvalidParameter("kernel_graph needs a 2-core (all degrees >= 2)")
    verts = core.vertices
    branch = np.flatnonzero(deg >= 3)
    if branch.size == 0:
        # a connected 2-core with all degrees 2 is a cycle
        return Kernel(verts[:1], [(int(verts[0]), int(verts[0]), core.size)])
    used = np.zeros(pos.shape[0], dtype=bool)
    out = []
    for a in branch.tolist():
        for cur, k in incident[a]:
            if used[k]:
                continue
            used[k] = True
            length = 1
            while deg[cur] == 2:
                cur, k = next((y, j) for y, j in incident[cur] if j != k)
                used[k] = True
                length += 1
            out.append((int(verts[a]), int(verts[cur]), length))
    return Kernel(verts[branch], out)


# -- minimal subtrees and gap events ------------------------------------------------------------


def minimal_subtree(t: SpanningTree, A) -> Subgraph:
    """Union of the tree paths between vertices of A (leaves not in A pruned)."""
    A = np.unique(np.asarray(list(A), dtype=np.int64))
    if A.size == 0:
        raise InvalidParameter("minimal_subtree needs a nonempty vertex set")
    if A[0] < 0 or A[-1] >= t.n:
        raise InvalidParameter("vertex set not contained in the tree")
    indptr, nbr = t.adjacency()
    deg = np.diff(indptr).astype(np.int64)
    alive = np.ones(t.n, dtype=bool)
    keep = np.zeros(t.n, dtype=bool)
    keep[A] = True
    stack = [x for x in np.flatnonzero((deg <= 1) & ~keep).tolist()]
    while stack:
        x = stack.pop()
        alive[x] = False
        for y in nbr[indptr[x]:indptr[x + 1]].tolist():
            if alive[y]:
                deg[y] -= 1
                if deg[y] == 1 and not keep[y]:
                    stack.append(y)
    e = t.edges()
    emask = alive[e[:, 0]] & alive[e[:, 1]]
    return Subgraph(np.flatnonzero(alive), e[emask])


def gap_violations(t: SpanningTree, env, p: float, q: float) -> int:
    """Number of p-clusters whose minimal subtree uses an edge with omega > q."""
    if not p < q:
        raise InvalidParameter(f"need p < q, got p={p}, q={q}")
    dec = clusters_at(env, p)
    if not np.any(dec.sizes >= 2):
        return 0
    e = t.edges()
    omega = env.omega[edge_ids(e[:, 0], e[:, 1], t.n)]
    heavy = e[omega > q]
    if heavy.shape[0] == 0:
        return 0
    # An edge (c, parent c) lies in T_C iff C has vertices both inside and
    # outside the subtree below c.
    order = _preorder(t)
    pos = np.empty(t.n, dtype=np.int64)
    pos[order] = np.arange(t.n)
    sub_size = _subtree_sizes(t, order)
    comp_in_order = dec.comp[order]
    bad = set()
    for a, b in heavy.tolist():
        c = a if t.parent[a] == b else b
        lo = pos[c]
        counts = np.bincount(comp_in_order[lo:lo + sub_size[c]], minlength=dec.num_components)
        bad.update(np.flatnonzero((counts > 0) & (counts < dec.sizes)).tolist())
    return len(bad)


def _preorder(t: SpanningTree) -> np.ndarray:
    children = [[] for _ in range(t.n)]
    for c, p in enumerate(t.parent.tolist()):
        if p >= 0:
            children[p].append(c)
    out = []
    stack = [t.root]
    while stack:
        x = stack.pop()
        out.append(x)
        stack.extend(reversed(children[x]))
    return np.array(out, dtype=np.int64)


def _subtree_sizes(t: SpanningTree, order: np.ndarray) -> np.ndarray:
    size = np.ones(t.n, dtype=np.int64)
    par = t.parent
    for x in order[::-1].tolist():
        if par[x] >= 0:
            size[par[x]] += size[x]
    return size


# -- threshold schedule -------------------------------------------------------------


@dataclass(frozen=True)
class PSchedule:
    n: int
    eps: float
    g0: float
    g: np.ndarray
    p: np.ndarray
    m: int


def p_schedule(n: int, eps: float, g0: float = 16.0) -> PSchedule:
    """g_i = (5/4)^(i/2) g0 and p_i = (1 + g_i eps)/n for i = 0..m+2, where m
    is the first index with g_m eps >= 1/log n."""
    if not 0 < eps < 1:
        raise InvalidParameter(f"eps must lie in (0, 1), got {eps}")
    if g0 < 1:
        raise InvalidParameter(f"g0 must be >= 1, got {g0}")
    target = 1.0 / math.log(n)
    m = 0
    while 1.25 ** (m / 2) * g0 * eps < target:
        m += 1
    i = np.arange(m + 3)
    g = 1.25 ** (i / 2) * g0
    return PSchedule(n, eps, g0, g, (1.0 + g * eps) / n, m)


def admissible_eps(n: int, beta: float) -> tuple[float, float] | None:
    """Interval of eps with eps <= 1/log n and beta*eps >= n log n, or None."""
    lo = n * math.log(n) / beta
    hi = 1.0 / math.log(n)
    return (lo, hi) if lo <= hi else None


@dataclass(frozen=True)
class WellBehaved:
    A: bool
    B: bool
    C: bool
    approximate: bool

    @property
    def all(self) -> bool:
        return self.A and self.B and self.C


def _longest_bounded(sub: Subgraph, bound: float) -> tuple[bool, bool]:
    """(longest path <= bound, decided exactly)."""
    if sub.size - 1 <= bound:
        return True, True
    length, exact = longest_path(sub)
    if length > bound:
        return False, True
    return True, exact


def well_behaved_flags(env, sched: PSchedule, i: int) -> WellBehaved:
    if not 0 <= i <= sched.m:
        raise InvalidParameter(f"index {i} outside 0..{sched.m}")
    n, eps, g = sched.n, sched.eps, float(sched.g[i])
    dec_i = clusters_at(env, float(sched.p[i]))
    dec_next = clusters_at(env, float(sched.p[i + 1]))
    c1 = dec_i.members(0)

    big_enough = dec_i.sizes[0] >= 1.5 * g * eps * n
    a_ok, a_exact = _longest_bounded(dec_i.component(0), (g * eps * n ** (1 / 3)) ** 4 * n ** (1 / 3))
    flag_a = bool(big_enough and a_ok)

    u, v = open_edges(env, float(sched.p[i + 2]))
    outside = np.ones(n, dtype=bool)
    outside[c1] = False
    keep = outside[u] & outside[v]
    rest = decompose(n, u[keep], v[keep])
    bound_b = n ** (1 / 3) / math.sqrt(g * eps * n ** (1 / 3))
    flag_b, b_exact = True, True
    for k in np.flatnonzero(rest.sizes - 1 > bound_b).tolist():
        if outside[rest.members(k)[0]]:
            ok, exact = _longest_bounded(rest.component(k), bound_b)
            b_exact &= exact
            if not ok:
                flag_b = False
                break

    flag_c = bool(np.all(dec_next.comp[c1] == 0))
    return WellBehaved(flag_a, flag_b, flag_c, not (a_exact and b_exact))
