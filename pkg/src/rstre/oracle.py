"""Exact linear-algebra oracle: partition function, effective resistance,
Kirchhoff edge probabilities and Gibbs probabilities at any beta.

All work happens on a dense conductance matrix held as XFloat pairs
(mantissa array, exponent array). Vertices are removed by Kron reduction
in its subtraction-free form: eliminating k adds c_ik * c_kj / d_k to c_ij,
where d_k is k's total conductance to the remaining vertices. Every
quantity stays a sum of positive terms, so there is no cancellation even
when weights span thousands of orders of magnitude. The pivots d_k
multiply to the reduced-Laplacian determinant, i.e. the weighted tree count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .errors import InvalidParameter, SizeCapError
from .graph_env import Environment, LogWeightGraph, edge_ids
from .trees import SpanningTree
from .xfloat import XFloat, xadd, xdiv, xfrom_log_array, xmul

MAX_N = 256


@numba.njit(cache=True)
def xmatrix(n, u, v, wm, we, skip):
    """Dense XFloat conductance matrix; parallel edges add, edge `skip` is left out."""
    mm = np.zeros((n, n))
    me = np.zeros((n, n), dtype=np.int64)
    for i in range(u.shape[0]):
        if i == skip or wm[i] == 0.0:
            continue
        a, b = u[i], v[i]
        if a == b:
            continue
        mm[a, b], me[a, b] = xadd(mm[a, b], me[a, b], wm[i], we[i])
        mm[b, a], me[b, a] = mm[a, b], me[a, b]
    return mm, me


@numba.njit(cache=True)
def kron_eliminate(mm, me, alive, order):
    """Eliminate the vertices in `order` in place.

    Returns (det mantissa, det exponent, zero_pivot). The determinant is the
    product of the pivots met; a zero pivot means the vertex had no
    remaining neighbours (the graph is disconnected) and is skipped.
    """
    s = mm.shape[0]
    detm, dete = 1.0, np.int64(0)
    zero = False
    idx = np.empty(s, dtype=np.int64)
    for t in range(order.shape[0]):
        k = order[t]
        alive[k] = False
        cnt = 0
        dm, de = 0.0, np.int64(0)
        for j in range(s):
            if alive[j] and mm[k, j] != 0.0:
                dm, de = xadd(dm, de, mm[k, j], me[k, j])
                idx[cnt] = j
                cnt += 1
        if dm == 0.0:
            zero = True
            continue
        detm, dete = xmul(detm, dete, dm, de)
        for a in range(cnt):
            i = idx[a]
            tm, te = xdiv(mm[k, i], me[k, i], dm, de)
            for b in range(a + 1, cnt):
                j = idx[b]
                fm, fe = xmul(tm, te, mm[k, j], me[k, j])
                rm, re = xadd(mm[i, j], me[i, j], fm, fe)
                mm[i, j], me[i, j] = rm, re
                mm[j, i], me[j, i] = rm, re
    return detm, dete, zero


@numba.njit(cache=True)
def pair_conductance(mm, me, a, b):
    """Conductance between a and b after eliminating every other vertex."""
    s = mm.shape[0]
    alive = np.ones(s, dtype=np.bool_)
    order = np.empty(s - 2, dtype=np.int64)
    t = 0
    for k in range(s):
        if k != a and k != b:
            order[t] = k
            t += 1
    kron_eliminate(mm, me, alive, order)
    return mm[a, b], me[a, b]


@numba.njit(cache=True)
def _log_det(mm, me):
    s = mm.shape[0]
    alive = np.ones(s, dtype=np.bool_)
    order = np.arange(s - 1)
    detm, dete, zero = kron_eliminate(mm, me, alive, order)
    if zero:
        return 0.0, np.int64(0)
    return detm, dete


def _check(g: LogWeightGraph, max_n: int = MAX_N):
    if g.n > max_n:
        raise SizeCapError(f"oracle is capped at n <= {max_n}, got n={g.n}")


def _weights(g: LogWeightGraph):
    return xfrom_log_array(np.ascontiguousarray(g.log_w))


def partition_function(g: LogWeightGraph) -> XFloat:
    """Weighted spanning-tree sum; XFloat(0) when g is disconnected."""
    _check(g)
    if g.n == 1:
        return XFloat(1.0)
    wm, we = _weights(g)
    mm, me = xmatrix(g.n, g.u, g.v, wm, we, -1)
    m, e = _log_det(mm, me)
    return XFloat(m, e)


def log_partition_function(g: LogWeightGraph) -> float:
    """log Z, or -inf for a disconnected graph."""
    return partition_function(g).log()


@dataclass(frozen=True)
class ResistanceReport:
    """r_eff is None when a and b are disconnected; condition_flag is then set."""

    r_eff: XFloat | None
    condition_flag: bool = False

    def __float__(self):
        return math.inf if self.r_eff is None else float(self.r_eff)


def _pair_rest(g: LogWeightGraph, a: int, b: int, skip: int = -1):
    wm, we = _weights(g)
    mm, me = xmatrix(g.n, g.u, g.v, wm, we, skip)
    cm, ce = pair_conductance(mm, me, a, b)
    return XFloat(cm, ce), (wm, we)


def effective_resistance(g: LogWeightGraph, a: int, b: int) -> ResistanceReport:
    """R(a <-> b) from the a-b conductance left after eliminating all other vertices."""
    if a == b:
        raise InvalidParameter("effective resistance needs two distinct vertices")
    if not (0 <= a < g.n and 0 <= b < g.n):
        raise InvalidParameter("vertex out of range")
    _check(g)
    c, _ = _pair_rest(g, a, b)
    if c.significand == 0.0:
        return ResistanceReport(None, True)
    return ResistanceReport(1 / c, False)


def _edge_index(g: LogWeightGraph, e) -> int:
    if isinstance(e, tuple):
        return g.edge_index(*e)
    e = int(e)
    if not 0 <= e < g.m:
        raise InvalidParameter(f"edge index {e} out of range")
    return e


def edge_inclusion_xprob(g: LogWeightGraph, e) -> tuple[XFloat, XFloat]:
    """(P(e in T), P(e not in T)) as XFloats.

    With C the conductance between e's endpoints once e itself is removed,
    P(in) = w/(w + C) = w * R_eff and P(out) = C/(w + C); neither needs a
    subtraction, so tiny complements stay accurate.
    """
    _check(g)
    i = _edge_index(g, e)
    rest, (wm, we) = _pair_rest(g, int(g.u[i]), int(g.v[i]), skip=i)
    w = XFloat(wm[i], we[i])
    total = w + rest
    return w / total, rest / total


def edge_inclusion_prob(g: LogWeightGraph, e) -> float:
    return float(edge_inclusion_xprob(g, e)[0])


def all_inclusion_probs(g: LogWeightGraph) -> np.ndarray:
    return np.array([edge_inclusion_prob(g, i) for i in range(g.m)])


def tree_edge_indices(g: LogWeightGraph, t: SpanningTree) -> np.ndarray:
    """Positions in g's edge list of t's edges; InvalidParameter if one is missing."""
    if t.n != g.n:
        raise InvalidParameter("tree and graph have different vertex counts")
    e = t.edges()
    if g.env is not None:
        return edge_ids(e[:, 0], e[:, 1], g.n)
    lookup = {}
    for i, (a, b) in enumerate(zip(g.u.tolist(), g.v.tolist())):
        lookup[(min(a, b), max(a, b))] = i
    try:
        return np.array([lookup[(a, b)] for a, b in e.tolist()], dtype=np.int64)
    except KeyError as exc:
        raise InvalidParameter(f"tree edge {exc.args[0]} is not in the graph") from None


def tree_hamiltonian(env: Environment, t: SpanningTree) -> float:
    if t.n != env.n:
        raise InvalidParameter("tree does not span the environment's vertex set")
    t.validate()
    return math.fsum(env.omega[t.edge_ids()].tolist())


def tree_log_weight(g: LogWeightGraph, t: SpanningTree) -> float:
    return math.fsum(g.log_w[tree_edge_indices(g, t)].tolist())


def gibbs_log_prob(g: LogWeightGraph, t: SpanningTree) -> float:
    t.validate()
    return tree_log_weight(g, t) - log_partition_function(g)

