"""Command line entry point: ``rstre <subcommand> ...``.

Exit codes: 0 success, 1 check failure, 2 invalid input, 3 budget or size cap.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import er_coupling as er
from .errors import InvalidParameter, RstreError
from .experiments import (
    _mst_tail,
    beta_rule,
    compile_expression,
    emit_report,
    fit_exponent,
    load_config,
    read_records,
    records_to_csv,
    run_sweep,
)
from .graph_env import gen_environment, log_weight_view, read_environment, sample_lower_tail, write_environment
from .samplers import EXACT_MAX_N, mst_kruskal, sequential_exact_run, wilson_run
from .walk_stats import check_conditions

DENSE_MAX_N = 6000


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_gen(args) -> int:
    if args.n > DENSE_MAX_N:
        raise InvalidParameter(f"gen writes the full environment; n must be <= {DENSE_MAX_N}")
    write_environment(gen_environment(args.n, args.seed), args.out)
    return 0


def cmd_sample(args) -> int:
    rng = np.random.default_rng([args.seed, 1])
    beta = 0.0
    if args.env:
        env = read_environment(args.env)
    elif args.sampler == "mst" and args.n > DENSE_MAX_N:
        env = None
    else:
        if args.n is None:
            raise InvalidParameter("either --n or --env is required")
        env = gen_environment(args.n, args.seed)
    n = env.n if env is not None else args.n
    if args.sampler != "mst":
        beta = float(beta_rule(args.beta)(n))
    if env is None:
        tree, steps = _mst_tail(n, args.seed, 0.0)[0], 0
    elif args.sampler == "mst":
        tree, steps = mst_kruskal(env), 0
    elif args.sampler == "wilson":
        tree, steps = wilson_run(log_weight_view(env, beta), args.root, rng, args.budget)
    else:
        tree, steps = sequential_exact_run(log_weight_view(env, beta), rng, args.max_n)
    _emit(tree.to_text(), args.out)
    summary = {"n": n, "beta": beta, "sampler": args.sampler, "seed": args.seed, "diam": tree.diameter(),
               "steps": int(steps)}
    print(json.dumps(summary), file=sys.stderr if not args.out else sys.stdout)
    return 0


def cmd_sweep(args) -> int:
    cfg = load_config(args.config, threads=args.threads, output=args.output)
    progress = None
    if args.verbose:
        progress = lambda rec: print(rec["run_id"], rec["status"], rec["diam"], file=sys.stderr)  # noqa: E731
    records = run_sweep(cfg, progress=progress)
    if not cfg.output:
        sys.stdout.write(records_to_csv(records))
    bad = sum(r["status"] != "ok" for r in records)
    if bad:
        print(f"{bad} of {len(records)} rows not ok", file=sys.stderr)
    return 0


def cmd_fit(args) -> int:
    fit = fit_exponent(read_records(args.csv), args.filter, args.column)
    print(json.dumps({"slope": fit.slope, "intercept": fit.intercept, "stderr": fit.stderr,
                      "n_range": list(fit.n_range), "means": {str(k): v for k, v in fit.means.items()}},
                     indent=2))
    return 0


def cmd_report(args) -> int:
    for path in emit_report(read_records(args.csv), args.out_dir, args.filter, args.column):
        print(path)
    return 0


def cmd_er_stats(args) -> int:
    p = float(compile_expression(args.p)(args.n))
    if not 0 <= p <= 1:
        raise InvalidParameter(f"p = {p} is not a probability")
    print("seed\tp\tcomponents\tc1\tc2\tc1_excess\tc1_diam\tc1_diam_exact")
    for k in range(args.seeds):
        seed = args.seed + k
        env = gen_environment(args.n, seed) if args.n <= DENSE_MAX_N else sample_lower_tail(args.n, seed, p)
        dec = er.clusters_at(env, p)
        sub = dec.component(0)
        diam, exact = er.graph_diameter(sub)
        c2 = int(dec.sizes[1]) if dec.num_components > 1 else 0
        print(f"{seed}\t{p:.6g}\t{dec.num_components}\t{sub.size}\t{c2}\t{sub.excess}\t{diam}\t{int(exact)}")
    return 0


def cmd_walk_stats(args) -> int:
    env = gen_environment(args.n, args.seed)
    beta = float(beta_rule(args.beta)(args.n))
    report = check_conditions(log_weight_view(env, beta), args.alpha, args.theta_max, args.d_max)
    print(report.to_json())
    return 0


def cmd_verify(args) -> int:
    from .checks import report_json, verify_suite

    report = verify_suite(args.level, emit=lambda line: print(line, file=sys.stderr, flush=True))
    _emit(report_json(report) + "\n", args.out)
    return 0 if report["passed"] else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rstre", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write an environment to a file")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("sample", help="sample one spanning tree")
    p.add_argument("--sampler", choices=("wilson", "exact", "mst"), default="wilson")
    p.add_argument("--beta", default="0", help="number, preset (low, high, ...) or expression in n")
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--env", help="read the environment from this file instead of generating it")
    p.add_argument("--root", type=int, default=0)
    p.add_argument("--budget", type=int, default=None, help="Wilson step budget")
    p.add_argument("--max-n", type=int, default=EXACT_MAX_N, help="size cap of the exact sampler")
    p.add_argument("--out", help="tree file (default: stdout)")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("sweep", help="run a configured sweep and write CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--output", default=None, help="override the config's output path")
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("fit", help="fit the diameter exponent from a sweep CSV")
    p.add_argument("--csv", required=True)
    p.add_argument("--filter", default=None, help="comma separated key=value conditions")
    p.add_argument("--column", default="diam")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("report", help="write per-regime aggregate tables for plotting elsewhere")
    p.add_argument("--csv", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--filter", default=None)
    p.add_argument("--column", default="diam")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("er-stats", help="p-cluster statistics of the environment")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", required=True, help="number or expression in n, e.g. (1+n**-0.25)/n")
    p.add_argument("--seeds", type=int, default=1)
    p.add_argument("--seed", type=int, default=0, help="first seed")
    p.set_defaults(func=cmd_er_stats)

    p = sub.add_parser("walk-stats", help="balanced / mixing / escaping conditions as JSON")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--beta", required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--theta-max", type=float, default=8.0)
    p.add_argument("--d-max", type=float, default=9.0)
    p.set_defaults(func=cmd_walk_stats)

    p = sub.add_parser("verify", help="run the verification suite")
    p.add_argument("--level", choices=("fast", "full"), default="fast")
    p.add_argument("--out", help="JSON report path (default: stdout)")
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BrokenPipeError:
        return 0
    except RstreError as exc:
        print(f"rstre: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ValueError, OSError) as exc:
        print(f"rstre: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
