"""Random-walk statistics of weighted graphs.

Stationary law, bottleneck ratios, the lazy-chain spectrum, mixing time,
the escaping sum, the three-condition check, and walks from a vertex to the
giant p-cluster.

The lazy kernel is Q = (I + P)/2 with P(u, v) = w(u, v)/w(u). It is
reversible with respect to pi(v) = w(v)/sum_u w(u), so
S = D^(1/2) Q D^(-1/2) (D = diag pi) is symmetric with entries
S_uv = delta_uv/2 + exp(l_uv - (lw_u + lw_v)/2)/2, which is what gets
diagonalised. Bottleneck ratios use Phi(S) = cut(S)/(2 vol(S)) with
vol(S) = sum_{v in S} w(v), i.e. Q(S, S^c)/pi(S) for the lazy chain.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numba
import numpy as np
from scipy.special import logsumexp

from .errors import InvalidParameter, SizeCapError
from .graph_env import Environment, LogWeightGraph
from .xfloat import xadd, xdiv, xfrom_log, xfrom_log_array, xlog, xmul

SPECTRUM_MAX_N = 512
EXACT_PHI_MAX_N = 20
T_CAP = 2**53
# deviation(t) <= 1/2 is tested with this relative slack so that chains whose
# deviation hits 1/2 exactly (e.g. the unit path on 3 vertices) are not pushed
# over by eigensolver rounding
MIX_THRESHOLD = 0.5 * (1 + 1e-9)


def stationary_distribution(g: LogWeightGraph) -> np.ndarray:
    lw = g.log_vertex_weights()
    return np.exp(lw - logsumexp(lw))


def lazy_kernel(g: LogWeightGraph) -> np.ndarray:
    """Dense lazy transition matrix (only sensible when weights fit in doubles)."""
    lmat = g.dense_log_matrix()
    lw = g.log_vertex_weights()
    return 0.5 * np.eye(g.n) + 0.5 * np.exp(lmat - lw[:, None])


def _as_mask(n: int, S) -> np.ndarray:
    mask = np.zeros(n, dtype=bool)
    idx = np.asarray(list(S), dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise InvalidParameter("vertex out of range")
    mask[idx] = True
    return mask


def bottleneck_of_set(g: LogWeightGraph, S) -> float:
    mask = _as_mask(g.n, S)
    k = int(mask.sum())
    if k == 0 or k == g.n:
        raise InvalidParameter("S must be a nonempty proper subset")
    cross = mask[g.u] != mask[g.v]
    log_cut = logsumexp(g.log_w[cross]) if cross.any() else -math.inf
    log_vol = logsumexp(g.log_vertex_weights()[mask])
    return 0.5 * math.exp(log_cut - log_vol)


def bottleneck_exact(g: LogWeightGraph) -> float:
    """Minimum of Phi(S) over all S with 0 < pi(S) <= 1/2, by enumeration."""
    n = g.n
    if n > EXACT_PHI_MAX_N:
        raise SizeCapError(f"exhaustive bottleneck is capped at n <= {EXACT_PHI_MAX_N}")
    if n < 2:
        raise InvalidParameter("need at least two vertices")
    lw = g.log_vertex_weights()
    log_half = logsumexp(lw) - math.log(2.0)
    bits = np.arange(n, dtype=np.int64)
    best = math.inf
    chunk = 1 << 12
    # masks 1 .. 2^n - 2, in chunks
    for start in range(1, (1 << n) - 1, chunk):
        masks = np.arange(start, min(start + chunk, (1 << n) - 1), dtype=np.int64)
        member = ((masks[:, None] >> bits[None, :]) & 1).astype(bool)
        log_vol = logsumexp(np.where(member, lw[None, :], -np.inf), axis=1)
        ok = log_vol <= log_half + 1e-12
        if not ok.any():
            continue
        member = member[ok]
        log_vol = log_vol[ok]
        cross = member[:, g.u] != member[:, g.v]
        log_cut = logsumexp(np.where(cross, g.log_w[None, :], -np.inf), axis=1)
        best = min(best, float(np.min(0.5 * np.exp(log_cut - log_vol))))
    return best


@dataclass
class ChainSpectrum:
    pi: np.ndarray
    eigenvalues: np.ndarray  # descending
    eigenvectors: np.ndarray  # columns, orthonormal eigenvectors of S
    gap: float

    def deviation(self, t: int) -> float:
        """max_{u,v} |q_t(u, v)/pi(v) - 1|."""
        return float(np.max(np.abs(self._ratio_minus_one(t))))

    def _ratio_minus_one(self, t: int) -> np.ndarray:
        lam = self.eigenvalues[1:]
        phi = self.eigenvectors[:, 1:] / np.sqrt(self.pi)[:, None]
        with np.errstate(under="ignore"):
            return (phi * lam**t) @ phi.T

    def return_probs(self, t: int) -> np.ndarray:
        """q_t(v, v) for every v."""
        with np.errstate(under="ignore"):
            return (self.eigenvectors**2) @ (self.eigenvalues**t)


def chain_spectrum(g: LogWeightGraph) -> ChainSpectrum:
    if g.n > SPECTRUM_MAX_N:
        raise SizeCapError(f"spectrum is capped at n <= {SPECTRUM_MAX_N}")
    lmat = g.dense_log_matrix()
    lw = g.log_vertex_weights()
    sym = 0.5 * np.exp(lmat - 0.5 * (lw[:, None] + lw[None, :]))
    sym[np.diag_indices(g.n)] += 0.5
    vals, vecs = np.linalg.eigh(sym)
    vals, vecs = vals[::-1], vecs[:, ::-1]
    pi = np.exp(lw - logsumexp(lw))
    # fix the top eigenvector exactly: it is sqrt(pi)
    vecs[:, 0] = np.sqrt(pi)
    vals[0] = 1.0
    gap = 1.0 - float(np.max(np.abs(vals[1:]))) if g.n > 1 else 1.0
    return ChainSpectrum(pi, vals, vecs, gap)


def mixing_time(g: LogWeightGraph, spec: ChainSpectrum | None = None) -> int | None:
    """Smallest t with deviation(t) <= 1/2; None if beyond 2^53."""
    spec = chain_spectrum(g) if spec is None else spec
    if spec.deviation(0) <= MIX_THRESHOLD:
        return 0
    hi = 1
    while spec.deviation(hi) > MIX_THRESHOLD:
        hi *= 2
        if hi > T_CAP:
            return None
    lo = hi // 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if spec.deviation(mid) <= MIX_THRESHOLD:
            hi = mid
        else:
            lo = mid
    return hi


def escaping_sum(g: LogWeightGraph, spec: ChainSpectrum | None = None, tmix=None, limit: float = math.inf) -> float:
    """Sum over t <= tmix of (t+1) max_v Q^t(v, v); inf once the partial sum passes `limit`.

    Every term is at least (t+1)/n, so a finite limit stops the loop after
    O(sqrt(n * limit)) terms even when tmix is astronomically large.
    """
    spec = chain_spectrum(g) if spec is None else spec
    tmix = mixing_time(g, spec) if tmix is None else tmix
    if tmix is None and limit == math.inf:
        return math.inf
    terms = []
    t = 0
    while tmix is None or t <= tmix:
        terms.append((t + 1) * float(spec.return_probs(t).max()))
        if math.fsum(terms) > limit:
            return math.inf
        t += 1
    return math.fsum(terms)


@dataclass
class ConditionReport:
    n: int
    D: float
    tmix: int | None
    alpha: float
    alpha_slack: float
    theta: float
    balanced: bool
    mixing: bool
    escaping: bool

    @property
    def verdict(self) -> bool:
        return self.balanced and self.mixing and self.escaping

    def to_json(self) -> str:
        out = asdict(self)
        out["verdict"] = self.verdict
        for key in ("alpha_slack", "theta"):
            if not math.isfinite(out[key]):
                out[key] = None
        return json.dumps(out, sort_keys=True)


def check_conditions(g: LogWeightGraph, alpha: float, theta_max: float = 8.0, d_max: float = 9.0) -> ConditionReport:
    """Balanced (pi_max/pi_min <= d_max), mixing (tmix <= n^(1/2 - alpha)) and
    escaping (escaping sum <= theta_max). theta is reported as inf when the
    sum exceeds theta_max, since it is then only summed far enough to decide."""
    spec = chain_spectrum(g)
    lw = g.log_vertex_weights()
    D = math.exp(float(lw.max() - lw.min()))
    tmix = mixing_time(g, spec)
    theta = escaping_sum(g, spec, tmix, limit=theta_max)
    n = g.n
    if tmix is None:
        slack = -math.inf
    elif tmix == 0:
        slack = math.inf
    else:
        slack = 0.5 - math.log(tmix) / math.log(n)
    mixing = tmix is not None and tmix <= n ** (0.5 - alpha)
    return ConditionReport(n, D, tmix, alpha, slack, theta, D <= d_max, mixing, theta <= theta_max)


def bottleneck_bounds(g: LogWeightGraph, candidates=(), p_grid=None) -> tuple[float, float]:
    """(gap/2, min Phi over candidate sets).

    Candidates: the ones passed in, every singleton, the largest p-cluster
    for each p in p_grid (needs an environment-backed view) and the sweep
    cuts of the second eigenvector. Sets with pi(S) > 1/2 are replaced by
    their complement.
    """
    spec = chain_spectrum(g)
    pi = spec.pi
    sets = [_as_mask(g.n, c) for c in candidates]
    sets += [_as_mask(g.n, [v]) for v in range(g.n)]
    if g.env is not None and p_grid is not None:
        from .er_coupling import clusters_at

        for p in p_grid:
            dec = clusters_at(g.env, p)
            if dec.sizes[0] < g.n:
                sets.append(_as_mask(g.n, dec.members(0)))
    if g.n > 2:
        f = spec.eigenvectors[:, 1] / np.sqrt(pi)
        order = np.argsort(f, kind="stable")
        for k in range(1, g.n):
            sets.append(_as_mask(g.n, order[:k]))
    upper = math.inf
    for mask in sets:
        if mask.all() or not mask.any():
            continue
        if pi[mask].sum() > 0.5 + 1e-12:
            mask = ~mask
        upper = min(upper, bottleneck_of_set(g, np.flatnonzero(mask)))
    return spec.gap / 2.0, upper


# -- walks to the giant cluster -------------------------------------------------------------


@dataclass(frozen=True)
class WalkToGiantStats:
    """ran: distinct vertices visited before hitting C_1(p), including v0.
    clusters_visited: distinct p-clusters other than C_1(p) entered before
    the hit, the starting one included (1 when v0 is already in C_1(p)).
    steps: jump-chain steps in mode "jump"; vertex discoveries in mode "exit"
    (the exit mode skips the individual steps). Lazy-chain step counts are
    about twice the jump-chain ones."""

    ran: int
    clusters_visited: int
    steps: int
    hit: bool
    mode: str


@numba.njit(cache=True)
def _omega_row(omega, n, z, out):
    for y in range(n):
        if y == z:
            out[y] = np.inf
        else:
            a, b = (z, y) if z < y else (y, z)
            out[y] = omega[a * n - a * (a + 1) // 2 + (b - a - 1)]


@numba.njit(cache=True)
def _jump_walk(omega, n, beta, comp, v0, rng, budget):
    row = np.empty(n)
    seen = np.zeros(n, dtype=np.bool_)
    seen_comp = np.zeros(n, dtype=np.bool_)
    x = v0
    seen[x] = True
    seen_comp[comp[x]] = True
    ran, clusters, steps = 1, 1, 0
    while comp[x] != 0:
        if steps >= budget:
            return ran, clusters, steps, False
        _omega_row(omega, n, x, row)
        best, arg = -np.inf, -1
        for y in range(n):
            if y == x:
                continue
            val = -beta * row[y] - math.log(rng.standard_exponential())
            if val > best:
                best, arg = val, y
        x = arg
        steps += 1
        if comp[x] == 0:
            break
        if not seen[x]:
            seen[x] = True
            ran += 1
        if not seen_comp[comp[x]]:
            seen_comp[comp[x]] = True
            clusters += 1
    return ran, clusters, steps, True


@numba.njit(cache=True)
def _exit_conductance(omega, n, beta, z, inside, row):
    """z's total conductance to the vertices outside `inside`, as (log scale, sum)
    with every term divided by exp(scale), the largest one."""
    _omega_row(omega, n, z, row)
    top = -np.inf
    for y in range(n):
        if not inside[y]:
            top = max(top, -beta * row[y])
    acc = 0.0
    for y in range(n):
        if not inside[y]:
            acc += math.exp(-beta * row[y] - top)
    return top, acc


@numba.njit(cache=True)
def _exit_weights(cm, ce, x_pos, log_exit):
    """Log-weights of "the walk leaves the visited set from z", per visited z.

    `cm`, `ce` hold the conductances among the visited vertices as XFloat
    mantissas and exponents. The exit law from x is proportional to
    g(z) * c(z), where c(z) is z's conductance to the unvisited vertices and g
    the potential of the visited network with every c(z) wired to one ground
    node and unit current injected at x. Eliminating all vertices but x and
    back-substituting only ever adds positive quantities.
    """
    s = log_exit.shape[0]
    mm = np.zeros((s + 1, s + 1))
    me = np.zeros((s + 1, s + 1), dtype=np.int64)
    mm[:s, :s] = cm[:s, :s]
    me[:s, :s] = ce[:s, :s]
    for a in range(s):
        mm[a, s], me[a, s] = xfrom_log(log_exit[a])
        mm[s, a], me[s, a] = mm[a, s], me[a, s]
    order = np.empty(s, dtype=np.int64)
    t = 0
    for a in range(s):
        if a != x_pos:
            order[t] = a
            t += 1
    order[s - 1] = x_pos
    alive = np.ones(s + 1, dtype=np.bool_)
    # multipliers c(k, i) / (total conductance of k) at k's elimination
    tm = np.zeros((s, s + 1))
    te = np.zeros((s, s + 1), dtype=np.int64)
    idx = np.empty(s + 1, dtype=np.int64)
    gm = np.zeros(s + 1)
    ge = np.zeros(s + 1, dtype=np.int64)
    for t in range(s):
        k = order[t]
        alive[k] = False
        cnt = 0
        dm, de = 0.0, np.int64(0)
        for j in range(s + 1):
            if alive[j] and mm[k, j] != 0.0:
                dm, de = xadd(dm, de, mm[k, j], me[k, j])
                idx[cnt] = j
                cnt += 1
        if t == s - 1:
            # only the ground is left: unit current at x gives potential 1/C(x)
            gm[k], ge[k] = xdiv(1.0, np.int64(0), dm, de)
            break
        for a in range(cnt):
            i = idx[a]
            tm[k, i], te[k, i] = xdiv(mm[k, i], me[k, i], dm, de)
        for a in range(cnt):
            i = idx[a]
            for b in range(a + 1, cnt):
                j = idx[b]
                fm, fe = xmul(tm[k, i], te[k, i], mm[k, j], me[k, j])
                rm, re = xadd(mm[i, j], me[i, j], fm, fe)
                mm[i, j], me[i, j] = rm, re
                mm[j, i], me[j, i] = rm, re
    for t in range(s - 2, -1, -1):
        k = order[t]
        am, ae = 0.0, np.int64(0)
        for i in range(s):
            if tm[k, i] != 0.0 and gm[i] != 0.0:
                fm, fe = xmul(tm[k, i], te[k, i], gm[i], ge[i])
                am, ae = xadd(am, ae, fm, fe)
        gm[k], ge[k] = am, ae
    out = np.empty(s)
    for a in range(s):
        out[a] = xlog(gm[a], ge[a]) + log_exit[a]
    return out


def run_to_giant(env: Environment, p: float, beta: float, v0: int, rng, budget: int = 10**7,
                 mode: str = "exit", dec=None) -> WalkToGiantStats:
    """Walk on the weighted K_n from v0 until it enters C_1(p).

    mode "jump" simulates every step of the jump chain. Mode "exit" samples,
    from the exact exit law of the visited set, only the moments a new vertex
    is found; ran and clusters_visited have the same law in both modes, but
    "exit" stays fast when the walk is trapped (for example between two
    mutually nearest vertices at large beta). `budget` bounds steps or
    discoveries respectively.
    """
    from .er_coupling import clusters_at

    dec = clusters_at(env, p) if dec is None else dec
    comp = dec.comp
    n = env.n
    if comp[v0] == 0:
        return WalkToGiantStats(1, 1, 0, True, mode)
    if mode == "jump":
        ran, clusters, steps, hit = _jump_walk(env.omega, n, float(beta), comp, v0, rng, budget)
        return WalkToGiantStats(int(ran), int(clusters), int(steps), bool(hit), mode)
    if mode != "exit":
        raise InvalidParameter(f"unknown mode {mode!r}")
    visited = [v0]
    in_set = np.zeros(n, dtype=bool)
    in_set[v0] = True
    comps = {int(comp[v0])}
    x_pos = 0
    row = np.empty(n)
    beta = float(beta)
    # exit conductance of each visited z: exp(scale) * acc, updated by
    # subtracting the newly visited vertex and recomputed once acc halves
    scale, acc = map(list, zip(_exit_conductance(env.omega, n, beta, v0, in_set, row)))
    # conductances among visited vertices, one row added per discovery
    cm = np.zeros((64, 64))
    ce = np.zeros((64, 64), dtype=np.int64)
    for steps in range(1, budget + 1):
        log_exit = np.array(scale) + np.log(acc)
        logw = _exit_weights(cm, ce, x_pos, log_exit)
        z_pos = int(np.argmax(logw - np.log(rng.standard_exponential(len(visited)))))
        _omega_row(env.omega, n, visited[z_pos], row)
        scores = -beta * row - np.log(rng.standard_exponential(n))
        scores[in_set] = -np.inf
        y = int(np.argmax(scores))
        if comp[y] == 0:
            return WalkToGiantStats(len(visited), len(comps), steps, True, mode)
        in_set[y] = True
        _omega_row(env.omega, n, y, row)
        for a, z in enumerate(visited):
            acc[a] -= math.exp(-beta * row[z] - scale[a])
            if acc[a] < 0.5:
                scale[a], acc[a] = _exit_conductance(env.omega, n, beta, z, in_set, row)
                _omega_row(env.omega, n, y, row)
        k = len(visited)
        if k == cm.shape[0]:
            cm = np.pad(cm, (0, k))
            ce = np.pad(ce, (0, k))
        mant, expo = xfrom_log_array(-beta * row[visited])
        cm[k, :k] = cm[:k, k] = mant
        ce[k, :k] = ce[:k, k] = expo
        visited.append(y)
        top, total = _exit_conductance(env.omega, n, beta, y, in_set, row)
        scale.append(top)
        acc.append(total)
        comps.add(int(comp[y]))
        x_pos = len(visited) - 1
    return WalkToGiantStats(len(visited), len(comps), budget, False, mode)
