import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rstre.errors import InvalidParameter
from rstre.experiments import (
    CSV_COLUMNS,
    beta_rule,
    compile_expression,
    emit_report,
    fit_exponent,
    mix64,
    parse_config,
    parse_filter,
    read_records,
    records_to_csv,
    replicate_seed,
    run_replicate,
    run_sweep,
)
from rstre.graph_env import complete_graph
from rstre.samplers import wilson_sample
from rstre.trees import edge_overlap

BASE = "master_seed = 5\nn_list = 20, 30, 40\nbeta_rule = low\nsampler = wilson\nreplicates = 4\n"


def test_mix64_reference_vector():
    # first outputs of the reference splitmix64 generator seeded with 1234567
    assert mix64(1234567) == 6457827717110365317
    assert mix64(1234567 + 0x9E3779B97F4A7C15) == 3203168211198807973


def test_replicate_seeds_are_distinct_and_stable():
    seeds = {replicate_seed(7, i, r) for i in range(20) for r in range(200)}
    assert len(seeds) == 4000
    assert replicate_seed(7, 2, 3) == mix64(mix64(mix64(7) ^ 2) ^ 3)
    assert all(0 <= s < 2**64 for s in seeds)


def test_expressions():
    f = compile_expression("n**(4/3)*log(n)")
    assert f(64) == pytest.approx(64 ** (4 / 3) * math.log(64))
    assert compile_expression("10*m**2*n*log(n)")(8) == pytest.approx(10 * 28**2 * 8 * math.log(8))
    assert compile_expression("sqrt(n) + exp(0) - pi + e")(4) == pytest.approx(3 - math.pi + math.e)
    for bad in ("__import__('os')", "n.real", "lambda: 1", "log(n, 2)", "n +", "open('x')"):
        with pytest.raises(InvalidParameter):
            compile_expression(bad)


def test_beta_presets():
    n = 1000
    assert beta_rule("zero")(n) == 0.0
    assert beta_rule("low")(n) == pytest.approx(0.125 * n / math.log(n))
    assert beta_rule("low:0.5")(n) == pytest.approx(0.5 * n / math.log(n))
    assert beta_rule("boundary")(n) == pytest.approx(n)
    assert beta_rule("intermediate")(n) == pytest.approx(n ** (7 / 6))
    assert beta_rule("intermediate:0.2")(n) == pytest.approx(n**1.2)
    assert beta_rule("high")(n) == pytest.approx(n ** (4 / 3) * math.log(n))
    assert beta_rule("collapse")(10) == pytest.approx(10 * 45**2 * 10 * math.log(10))
    assert beta_rule("3*n")(n) == 3000
    with pytest.raises(InvalidParameter):
        beta_rule("high:2")


def test_parse_config():
    cfg = parse_config(BASE + "# comment\np0_rule = 1/n  # trailing\noverlap = yes\nlabel = demo\n")
    assert cfg.n_list == [20, 30, 40] and cfg.overlap and cfg.label == "demo"
    assert cfg.p0(20) == pytest.approx(0.05)
    assert parse_config(BASE).label == "low"
    assert parse_config(BASE.replace("low", "2*n")).label == "custom"
    assert parse_config(BASE, threads=3).threads == 3
    bad = [
        BASE + "colour = red\n",
        BASE.replace("replicates = 4\n", ""),
        BASE.replace("replicates = 4", "replicates = four"),
        BASE.replace("replicates = 4", "replicates = 0"),
        BASE.replace("sampler = wilson", "sampler = aldous"),
        BASE.replace("20, 30, 40", "1, 30"),
        BASE.replace("beta_rule = low", "beta_rule = -n"),
        BASE + "label = a-b\n",
        BASE + "p0_rule = 2\n",
        BASE + "just words\n",
    ]
    for text in bad:
        with pytest.raises(InvalidParameter):
            parse_config(text)


def test_sweep_rows_and_csv(tmp_path):
    out = tmp_path / "sweep.csv"
    cfg = parse_config(BASE + f"p0_rule = 1.5/n\noverlap = 1\noutput = {out}\n")
    recs = run_sweep(cfg)
    assert [(r["n"], r["run_id"]) for r in recs] == [(n, f"low-{n}-{k}") for n in (20, 30, 40) for k in range(4)]
    for r in recs:
        assert r["status"] == "ok" and 1 <= r["diam"] <= r["n"] - 1
        assert 0 <= r["diam_c1p0"] <= r["diam"]
        assert 0 <= r["overlap"] <= r["n"] - 1
        assert r["wall_ms"] is None and r["steps"] > 0
    text = out.read_text()
    assert text.splitlines()[0] == ",".join(CSV_COLUMNS)
    back = read_records(out)
    assert records_to_csv(back) == text


def test_same_seed_same_bytes_any_thread_count():
    cfg = parse_config(BASE + "p0_rule = 1/n\noverlap = 1\n")
    one = records_to_csv(run_sweep(cfg, threads=1))
    eight = records_to_csv(run_sweep(cfg, threads=8))
    assert one == eight
    other = records_to_csv(run_sweep(parse_config(BASE.replace("= 5", "= 6"))))
    assert other != one


def test_timing_fills_wall_ms():
    cfg = parse_config(BASE + "timing = true\n")
    assert all(r["wall_ms"] >= 0 for r in run_sweep(cfg))


def test_status_tags():
    cap = parse_config("master_seed=1\nn_list=150\nbeta_rule=1\nsampler=exact\nreplicates=2\n")
    assert [r["status"] for r in run_sweep(cap)] == ["cap", "cap"]
    trapped = parse_config("master_seed=1\nn_list=60\nbeta_rule=n**2\nsampler=wilson\nreplicates=2\n"
                           "wilson_budget=50\n")
    recs = run_sweep(trapped)
    assert all(r["status"] == "budget" and r["diam"] is None and r["steps"] > 50 for r in recs)


def test_mst_sweep_through_lower_tail():
    cfg = parse_config("master_seed=2\nn_list=300,400\nbeta_rule=high\nsampler=mst\nreplicates=3\n"
                       "dense_max_n=100\np0_rule=1/n\n")
    recs = run_sweep(cfg)
    assert all(r["status"] == "ok" and r["diam"] >= 2 for r in recs)


def test_exact_sweep_small():
    cfg = parse_config("master_seed=3\nn_list=12,16\nbeta_rule=high\nsampler=exact\nreplicates=2\n")
    recs = run_sweep(cfg)
    assert all(r["status"] == "ok" for r in recs)
    rec = run_replicate(cfg, 1, 1)
    assert rec == recs[-1]


@pytest.mark.slow
def test_uniform_tree_diameter_scale():
    cfg = parse_config("master_seed=9\nn_list=1000\nbeta_rule=zero\nsampler=wilson\nreplicates=200\n")
    diam = np.mean([r["diam"] for r in run_sweep(cfg)])
    assert 1.5 * math.sqrt(1000) <= diam <= 3.5 * math.sqrt(1000)


def synthetic(fn, ns=(100, 200, 400, 800), reps=10):
    return [{"run_id": f"syn-{n}-{k}", "n": n, "diam": fn(n), "status": "ok"} for n in ns for k in range(reps)]


def test_fit_synthetic_power_laws():
    fit = fit_exponent(synthetic(lambda n: 2 * n**0.5))
    assert fit.slope == pytest.approx(0.5, abs=1e-12) and fit.stderr < 1e-10
    assert fit.intercept == pytest.approx(math.log(2))
    assert fit.n_range == (100, 800) and fit.means[400] == pytest.approx(40.0)
    assert fit_exponent(synthetic(lambda n: 7 * n ** (1 / 3))).slope == pytest.approx(1 / 3, abs=1e-12)


def test_fit_needs_enough_cells():
    recs = synthetic(lambda n: n, ns=(10, 20), reps=10) + synthetic(lambda n: n, ns=(40,), reps=4)
    with pytest.raises(InvalidParameter, match="n=40: 4 ok rows"):
        fit_exponent(recs)
    recs = synthetic(lambda n: n) + [{"run_id": "syn-100-99", "n": 100, "diam": None, "status": "budget"}]
    assert fit_exponent(recs).slope == pytest.approx(1.0)


@given(st.floats(-0.5, 1.5), st.floats(0.1, 100))
def test_fit_recovers_any_exponent(gamma, c):
    assert fit_exponent(synthetic(lambda n: c * n**gamma)).slope == pytest.approx(gamma, abs=1e-9)


def test_filters():
    recs = synthetic(lambda n: n, ns=(10, 20, 40)) + [
        {"run_id": f"other-{n}-0", "n": n, "diam": 1, "status": "ok"} for n in (10, 20, 40)]
    keep = parse_filter("label=syn,n=20")
    assert sum(map(keep, recs)) == 10
    assert fit_exponent(recs, "label=syn").slope == pytest.approx(1.0)
    with pytest.raises(InvalidParameter):
        parse_filter("colour=red")
    with pytest.raises(InvalidParameter):
        parse_filter("n")


def test_emit_report(tmp_path):
    recs = synthetic(lambda n: n**0.5, ns=(100, 400)) + [
        {"run_id": f"high-{n}-{k}", "n": n, "diam": n ** (1 / 3) + k, "status": "ok"} for n in (100, 400)
        for k in range(3)]
    paths = emit_report(recs, tmp_path)
    assert sorted(p.name for p in paths) == ["report_high.tsv", "report_syn.tsv"]
    lines = (tmp_path / "report_high.tsv").read_text().splitlines()
    assert lines[0].split("\t") == ["n", "count", "mean", "lo", "hi"]
    n, count, mean, lo, hi = lines[1].split("\t")
    assert (int(n), int(count)) == (100, 3)
    assert float(lo) < float(mean) < float(hi)
    assert float(mean) == pytest.approx(100 ** (1 / 3) + 1, rel=1e-5)
    only = emit_report(recs, tmp_path / "sub", "label=syn")
    assert [p.name for p in only] == ["report_syn.tsv"]
    with pytest.raises(InvalidParameter):
        emit_report(recs, tmp_path, "label=none")
    with pytest.raises(InvalidParameter):
        emit_report([], tmp_path)


@pytest.mark.slow
def test_mean_overlap_of_independent_uniform_trees():
    n, pairs = 30, 3000
    rng = np.random.default_rng(8)
    g = complete_graph(n)
    overlaps = [edge_overlap(wilson_sample(g, 0, rng), wilson_sample(g, 0, rng)) for _ in range(pairs)]
    expected = 2 * (n - 1) / n
    assert abs(np.mean(overlaps) - expected) <= 4 * np.std(overlaps) / math.sqrt(pairs)
