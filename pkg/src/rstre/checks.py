"""Verification checks, shared by ``rstre verify`` and the acceptance tests.

Every check takes its sizes as keyword arguments (defaults are the full
sizes) and returns a CheckResult carrying the numbers it looked at.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from . import er_coupling as er
from .experiments import fit_exponent, parse_config, records_to_csv, run_sweep
from .graph_env import complete_graph, gen_environment, graph_from_edges, log_weight_view, sample_lower_tail
from .oracle import edge_inclusion_xprob, effective_resistance, tree_edge_indices
from .samplers import (
    enumerate_spanning_trees,
    loop_erase,
    matrix_tree_count,
    mst_kruskal,
    sequential_exact_run,
    sequential_tree_log_prob,
    wilson_parents,
    wilson_sample,
)
from .trees import SpanningTree
from .walk_stats import MIX_THRESHOLD, bottleneck_exact, chain_spectrum, lazy_kernel, mixing_time, stationary_distribution


@dataclass
class CheckResult:
    name: str
    passed: bool
    metrics: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: " + ", ".join(
            f"{k}={_fmt(v)}" for k, v in self.metrics.items())

    def as_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "seconds": round(self.seconds, 3),
                "metrics": {k: _jsonable(v) for k, v in self.metrics.items()}}


def _fmt(v):
    return f"{v:.6g}" if isinstance(v, float) else str(v)


def _jsonable(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    return v


def _timed(fn):
    def run(**kwargs):
        start = time.perf_counter()
        res = fn(**kwargs)
        res.seconds = time.perf_counter() - start
        return res

    run.__name__ = fn.__name__
    run.__doc__ = fn.__doc__
    return run


def random_connected_graph(n: int, rng, density: float, beta: float):
    """Random spanning tree plus each other pair with probability `density`;
    log-weights -beta * uniform."""
    perm = rng.permutation(n)
    edges = {(min(perm[i], perm[j]), max(perm[i], perm[j]))
             for i, j in ((k, int(rng.integers(0, k))) for k in range(1, n))}
    for a in range(n):
        for b in range(a + 1, n):
            if rng.random() < density:
                edges.add((a, b))
    edges = sorted((int(a), int(b)) for a, b in edges)
    omega = rng.random(len(edges))
    return graph_from_edges(n, edges, -beta * omega)


def _tree_masks(parents: np.ndarray, n: int) -> np.ndarray:
    """Bitmask of canonical edge ids for each row of parent arrays (K_n, n <= 11)."""
    child = np.arange(n)[None, :]
    par = parents
    a = np.minimum(child, par)
    b = np.maximum(child, par)
    ids = a * n - a * (a + 1) // 2 + (b - a - 1)
    bits = np.where(par >= 0, np.left_shift(1, np.where(par >= 0, ids, 0)), 0)
    return bits.sum(axis=1)


# -- 1 --------------------------------------------------------------------------------------


@_timed
def exact_distribution(instances=20, samples=100_000, betas=(0.0, 1.0, 5.0), seed=1, tv_max=0.02, rel_max=1e-9):
    """Wilson and the sequential sampler against enumeration on weighted K_5."""
    worst_tv, worst_rel = 0.0, 0.0
    for k in range(instances):
        beta = betas[k % len(betas)]
        env = gen_environment(5, seed * 1000 + k)
        g = log_weight_view(env, beta)
        dist = enumerate_spanning_trees(g)
        probs = dist.probs
        masks = np.array([int(sum(1 << int(i) for i in t.edge_ids())) for t in dist.trees])
        parents = wilson_parents(g, 0, np.random.default_rng([seed, k]), samples)
        drawn = _tree_masks(parents, 5)
        lookup = {m: i for i, m in enumerate(masks.tolist())}
        counts = np.bincount([lookup[m] for m in drawn.tolist()], minlength=len(masks))
        worst_tv = max(worst_tv, 0.5 * float(np.abs(counts / samples - probs).sum()))
        for t, lw in zip(dist.trees, dist.log_weights):
            lp = sequential_tree_log_prob(g, t)
            worst_rel = max(worst_rel, abs(math.expm1(lp - (lw - dist.log_z))))
    return CheckResult("exact-distribution", worst_tv <= tv_max and worst_rel <= rel_max,
                       {"instances": instances, "samples": samples, "max_tv": worst_tv, "max_rel_err": worst_rel})


# -- 2 --------------------------------------------------------------------------------------


@_timed
def kirchhoff_foster(graphs=100, max_n=12, betas=(0.0, 1.0, 10.0, 1000.0), seed=2,
                     foster_tol=1e-8, kirchhoff_tol=1e-9, max_trees=4000):
    """Foster's sum rule and Kirchhoff's formula against enumerated marginals."""
    rng = np.random.default_rng(seed)
    worst_sum, worst_rel = 0.0, 0.0
    done = 0
    while done < graphs:
        n = int(rng.integers(3, max_n + 1))
        beta = betas[done % len(betas)]
        g = random_connected_graph(n, rng, float(rng.uniform(0.05, 0.6)), beta)
        if matrix_tree_count(g) > max_trees:
            continue
        done += 1
        dist = enumerate_spanning_trees(g, max_n=max_n)
        member = np.zeros((len(dist.trees), g.m), dtype=bool)
        for row, t in enumerate(dist.trees):
            member[row, tree_edge_indices(g, t)] = True
        total = 0.0
        for i in range(g.m):
            p_in, _ = edge_inclusion_xprob(g, i)
            total += float(p_in)
            ref = logsumexp(dist.log_weights[member[:, i]]) - dist.log_z
            # w(e) * R_eff(e) over the whole graph, a separate elimination route
            w_r = float(g.log_w[i]) + effective_resistance(g, int(g.u[i]), int(g.v[i])).r_eff.log()
            worst_rel = max(worst_rel, abs(math.expm1(p_in.log() - ref)), abs(math.expm1(w_r - ref)))
        worst_sum = max(worst_sum, abs(total - (n - 1)))
    return CheckResult("kirchhoff-foster", worst_sum <= foster_tol and worst_rel <= kirchhoff_tol,
                       {"graphs": graphs, "max_foster_err": worst_sum, "max_kirchhoff_rel_err": worst_rel})


# -- 3, 4 --------------------------------------------------------------------------------------


@_timed
def low_disorder(n_list=(250, 500, 1000, 2000, 4000), replicates=100, seed=3, window=(0.42, 0.58)):
    """Wilson sweep at beta = n/(8 log n); slope of log mean diameter."""
    cfg = parse_config(f"master_seed={seed}\nn_list={','.join(map(str, n_list))}\n"
                       f"beta_rule=low:0.125\nsampler=wilson\nreplicates={replicates}\n")
    fit = fit_exponent(run_sweep(cfg))
    return CheckResult("low-disorder-slope", window[0] <= fit.slope <= window[1],
                       {"slope": fit.slope, "stderr": fit.stderr, "means": fit.means})


@_timed
def high_disorder(n_list=(4000, 8000, 16000, 32000, 64000), replicates=20, exact_n=(32, 64, 96),
                  draws=100, seed=4, window=(0.27, 0.40), factor=1.5):
    """(a) MST slope; (b) exact sampler at beta = n^(4/3) log n against the MST."""
    cfg = parse_config(f"master_seed={seed}\nn_list={','.join(map(str, n_list))}\n"
                       f"beta_rule=high\nsampler=mst\nreplicates={replicates}\n")
    fit = fit_exponent(run_sweep(cfg))
    ratios = {}
    for n in exact_n:
        beta = n ** (4 / 3) * math.log(n)
        exact, mst = [], []
        for k in range(draws):
            env = gen_environment(n, seed * 100_000 + n * 1000 + k)
            tree, _ = sequential_exact_run(log_weight_view(env, beta), np.random.default_rng([seed, n, k]))
            exact.append(tree.diameter())
            mst.append(mst_kruskal(env).diameter())
        ratios[n] = float(np.mean(exact) / np.mean(mst))
    ok_b = all(1 / factor <= r <= factor for r in ratios.values())
    return CheckResult("high-disorder", window[0] <= fit.slope <= window[1] and ok_b,
                       {"mst_slope": fit.slope, "stderr": fit.stderr, "exact_over_mst": ratios})


# -- 5 ---------------------------------------------------------------------------------------


@_timed
def collapse(n_list=(8, 16, 32), draws=1000, seed=5, min_frac=0.99):
    """At beta = 10 m^2 n log n the exact sampler returns the MST."""
    fracs = {}
    for n in n_list:
        m = n * (n - 1) // 2
        beta = 10 * m**2 * n * math.log(n)
        hits = 0
        for k in range(draws):
            env = gen_environment(n, seed * 1_000_000 + n * 10_000 + k)
            tree, _ = sequential_exact_run(log_weight_view(env, beta), np.random.default_rng([seed, n, k]))
            hits += tree == mst_kruskal(env)
        fracs[n] = hits / draws
    return CheckResult("collapse-to-mst", all(f >= min_frac for f in fracs.values()), {"fraction_mst": fracs})


# -- 6 ---------------------------------------------------------------------------------------


def _critical_ratio(n: int, seed: int) -> tuple[float, int, float]:
    eps = n ** -0.25
    tail = sample_lower_tail(n, seed, (1 + eps) / n)
    size = int(er.clusters_at(tail, (1 + eps) / n).sizes[0])
    diam, _ = er.graph_diameter(er.clusters_at(tail, 1 / n).component(0))
    return diam / n ** (1 / 3), size, eps


@_timed
def er_laws(n=100_000, seeds=200, calib_n=10_000, calib_seeds=200, seed=6, size_frac=0.95, diam_frac=0.90):
    """Supercritical giant size band and the calibrated critical-diameter band."""
    calib = [abs(math.log(_critical_ratio(calib_n, seed * 10**6 + s)[0])) for s in range(calib_seeds)]
    A = math.exp(float(np.quantile(calib, 0.95)))
    in_size = in_diam = 0
    for s in range(seeds):
        ratio, size, eps = _critical_ratio(n, seed * 10**7 + s)
        in_size += 1.5 * eps * n <= size <= 2.5 * eps * n
        in_diam += 1 / A <= ratio <= A
    return CheckResult("er-component-laws", in_size / seeds >= size_frac and in_diam / seeds >= diam_frac,
                       {"size_band_frac": in_size / seeds, "calibrated_A": A, "diam_band_frac": in_diam / seeds})


# -- 7 ---------------------------------------------------------------------------------------


@_timed
def concentration(n=2000, seeds=50, seed=7, band_min=49, breakdown_frac=0.9):
    """pi within [1/(3n), 3/n] at beta = n/(72 log n); D > 9 at beta = n^1.2."""
    in_band = broken = 0
    for s in range(seeds):
        env = gen_environment(n, seed * 10**6 + s)
        pi = stationary_distribution(log_weight_view(env, n / (72 * math.log(n))))
        in_band += bool(pi.min() >= 1 / (3 * n) and pi.max() <= 3 / n)
        lw = log_weight_view(env, n**1.2).log_vertex_weights()
        broken += bool(lw.max() - lw.min() > math.log(9))
    return CheckResult("concentration-breakdown", in_band >= band_min and broken / seeds >= breakdown_frac,
                       {"band_seeds": in_band, "seeds": seeds, "breakdown_frac": broken / seeds})


# -- 8 ---------------------------------------------------------------------------------------


@_timed
def gap_events(n=200, seeds=100, seed=8, p_factors=(0.5, 1.0, 2.0, 4.0)):
    """No p-cluster's minimal subtree uses an edge with omega > p + 6 log n / beta."""
    beta = n * math.log(n) ** 2
    gap = 6 * math.log(n) / beta
    violations = 0
    for s in range(seeds):
        env = gen_environment(n, seed * 10**6 + s)
        tree, _ = sequential_exact_run(log_weight_view(env, beta), np.random.default_rng([seed, s]), max_n=256)
        for c in p_factors:
            violations += er.gap_violations(tree, env, c / n, c / n + gap)
    return CheckResult("gap-events", violations == 0,
                       {"violations": violations, "seeds": seeds, "p_values": [c / n for c in p_factors],
                        "bound_per_seed": n**5 * math.exp(-beta * gap)})


# -- 9 ---------------------------------------------------------------------------------------


def brute_mixing_time(g) -> int:
    """Matrix-power scan for the first t with max |Q^t(u, v)/pi(v) - 1| <= 1/2."""
    q = lazy_kernel(g)
    pi = stationary_distribution(g)
    power = np.eye(g.n)
    t = 0
    while np.max(np.abs(power / pi[None, :] - 1)) > MIX_THRESHOLD:
        power = power @ q
        t += 1
    return t


@_timed
def spectral(instances=1000, max_n=16, betas=(0.0, 1.0, 3.0, 10.0), seed=9):
    """Sandwich Phi^2/2 <= gap <= 2 Phi and spectral vs brute-force mixing time."""
    rng = np.random.default_rng(seed)
    sandwich_bad = mix_bad = 0
    worst = 0.0
    for k in range(instances):
        n = int(rng.integers(2, max_n + 1))
        g = random_connected_graph(n, rng, float(rng.uniform(0.1, 0.9)), betas[k % len(betas)])
        phi = bottleneck_exact(g)
        gap = chain_spectrum(g).gap
        tol = 1e-12
        if not (phi**2 / 2 <= gap * (1 + tol) and gap <= 2 * phi * (1 + tol)):
            sandwich_bad += 1
        worst = max(worst, phi**2 / 2 / gap)
        if mixing_time(g) != brute_mixing_time(g):
            mix_bad += 1
    return CheckResult("spectral-sandwich-mixing", sandwich_bad == 0 and mix_bad == 0,
                       {"instances": instances, "sandwich_failures": sandwich_bad,
                        "mixing_mismatches": mix_bad, "max_lower_ratio": worst})


# -- 10 --------------------------------------------------------------------------------------


def edit_bound_holds(t1: SpanningTree, t2: SpanningTree) -> bool:
    k = len(set(t2.edge_ids().tolist()) - set(t1.edge_ids().tolist()))
    d1, d2 = t1.diameter(), t2.diameter()
    return d2 / (k + 1) - 1 <= d1 <= (k + 1) * d2 + k


def random_edge_swaps(t: SpanningTree, g, rng, swaps: int) -> SpanningTree:
    """Apply random edge exchanges (add a graph edge, drop one on the cycle)."""
    edges = {tuple(e) for e in t.edges().tolist()}
    pairs = list(zip(g.u.tolist(), g.v.tolist()))
    for _ in range(swaps):
        a, b = pairs[int(rng.integers(len(pairs)))]
        key = (min(a, b), max(a, b))
        if key in edges:
            continue
        cur = SpanningTree.from_edges(t.n, sorted(edges))
        path = cur.path(a, b)
        drop = int(rng.integers(len(path) - 1))
        x, y = path[drop], path[drop + 1]
        edges.discard((min(x, y), max(x, y)))
        edges.add(key)
    return SpanningTree.from_edges(t.n, sorted(edges))


@_timed
def properties(seed=10, paths=500, refine_pairs=1000, subtree_cases=200, tree_pairs=10_000,
               rayleigh_cases=100, series_cases=50, sweep_threads=8):
    """Loop erasure, cluster refinement, minimal subtrees, the edit bound,
    Rayleigh monotonicity, the series law and thread-independent CSV."""
    rng = np.random.default_rng(seed)
    bad = {}

    def fail(name):
        bad[name] = bad.get(name, 0) + 1

    for _ in range(paths):
        path = rng.integers(0, 6, size=int(rng.integers(1, 30))).tolist()
        once = loop_erase(path)
        if loop_erase(once) != once or once[0] != path[0] or once[-1] != path[-1] or len(set(once)) != len(once):
            fail("loop_erase")

    envs = {}
    for _ in range(refine_pairs):
        n = int(rng.integers(2, 201))
        env = envs.setdefault(n, gen_environment(n, int(rng.integers(2**32))))
        p, q = sorted(rng.random(2) * 3 / n)
        fine, coarse = er.clusters_at(env, p), er.clusters_at(env, q)
        # each p-component sits inside one q-component
        if np.unique(np.column_stack([fine.comp, coarse.comp]), axis=0).shape[0] != fine.num_components:
            fail("refinement")

    for _ in range(subtree_cases):
        n = int(rng.integers(2, 60))
        t = wilson_sample(complete_graph(n), 0, rng)
        b = rng.choice(n, size=int(rng.integers(1, n + 1)), replace=False)
        a = b[: int(rng.integers(1, b.size + 1))]
        ta, tb = er.minimal_subtree(t, a), er.minimal_subtree(t, b)
        ea = {tuple(e) for e in ta.edges.tolist()}
        eb = {tuple(e) for e in tb.edges.tolist()}
        again = er.minimal_subtree(SpanningTree.from_edges(n, t.edges()), ta.vertices)
        if not ea <= eb or {tuple(e) for e in again.edges.tolist()} != ea:
            fail("minimal_subtree")

    for k in range(tree_pairs):
        n = int(rng.integers(2, 65))
        g = random_connected_graph(n, rng, float(rng.uniform(0.05, 0.5)), 0.0)
        t1 = wilson_sample(g, 0, rng)
        t2 = wilson_sample(g, int(rng.integers(n)), rng) if k % 2 else random_edge_swaps(t1, g, rng, int(rng.integers(1, 6)))
        if not edit_bound_holds(t1, t2):
            fail("edit_bound")

    for _ in range(rayleigh_cases):
        n = int(rng.integers(3, 12))
        g = random_connected_graph(n, rng, 0.4, float(rng.choice([1.0, 10.0, 100.0])))
        a, b = rng.choice(n, size=2, replace=False)
        r0 = float(effective_resistance(g, int(a), int(b)))
        lw = g.log_w.copy()
        lw[int(rng.integers(g.m))] += float(rng.exponential(2.0))
        r1 = float(effective_resistance(g.with_log_w(lw), int(a), int(b)))
        if r1 > r0 * (1 + 1e-12):
            fail("rayleigh")

    for _ in range(series_cases):
        n = int(rng.integers(3, 10))
        g = random_connected_graph(n, rng, 0.5, 3.0)
        if not _series_law_holds(g, rng):
            fail("series_law")

    cfg_text = "master_seed=77\nn_list=30,40,50\nbeta_rule=low\nsampler=wilson\nreplicates=6\np0_rule=1/n\noverlap=1\n"
    one = records_to_csv(run_sweep(parse_config(cfg_text), threads=1))
    many = records_to_csv(run_sweep(parse_config(cfg_text), threads=sweep_threads))
    if one != many:
        fail("csv_determinism")
    return CheckResult("property-suite", not bad, {"failures": bad or "none", "tree_pairs": tree_pairs})


def _series_law_holds(g, rng) -> bool:
    """Subdivide a random edge with a new vertex; replacing the two halves by one
    edge of summed resistance must leave every other pair's resistance alone."""
    i = int(rng.integers(g.m))
    a, b, lw = int(g.u[i]), int(g.v[i]), float(g.log_w[i])
    r1, r2 = rng.uniform(0.1, 2.0, size=2) * math.exp(-lw)
    n = g.n
    edges = [(int(x), int(y)) for k, (x, y) in enumerate(zip(g.u, g.v)) if k != i] + [(a, n), (n, b)]
    logs = [float(x) for k, x in enumerate(g.log_w) if k != i] + [-math.log(r1), -math.log(r2)]
    split = graph_from_edges(n + 1, edges, logs)
    merged_logs = g.log_w.copy()
    merged_logs[i] = -math.log(r1 + r2)
    merged = g.with_log_w(merged_logs)
    for x in range(n):
        for y in range(x + 1, n):
            ra = float(effective_resistance(split, x, y))
            rb = float(effective_resistance(merged, x, y))
            if abs(ra - rb) > 1e-10 * max(1.0, rb):
                return False
    return True


# -- suite -------------------------------------------------------------------------------------


FAST = {
    "exact_distribution": dict(instances=3),
    "kirchhoff_foster": dict(graphs=30),
    "collapse": dict(n_list=(8, 16), draws=100),
    "concentration": dict(n=500, seeds=10, band_min=10),
    "gap_events": dict(n=60, seeds=5),
    "spectral": dict(instances=100),
    "properties": dict(paths=100, refine_pairs=100, subtree_cases=50, tree_pairs=500, rayleigh_cases=20,
                       series_cases=10),
}

FULL = ["exact_distribution", "kirchhoff_foster", "low_disorder", "high_disorder", "collapse", "er_laws",
        "concentration", "gap_events", "spectral", "properties"]


def verify_suite(level: str = "fast", emit=None) -> dict:
    """Run the checks for `level`. "fast" runs the exact identities and
    scaled-down concentration and gap checks in about a minute; "full" runs
    everything at acceptance size."""
    if level not in ("fast", "full"):
        raise ValueError(f"level must be fast or full, got {level!r}")
    names = list(FAST) if level == "fast" else FULL
    results = []
    for name in names:
        res = globals()[name](**(FAST.get(name, {}) if level == "fast" else {}))
        results.append(res)
        if emit:
            emit(res.line())
    return {"level": level, "passed": all(r.passed for r in results), "checks": [r.as_dict() for r in results]}


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True)

