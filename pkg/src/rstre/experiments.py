"""Sweep harness: configuration, seeding, per-replicate runs, CSV, fits and
aggregate report tables.

Replicate seeds are ``mix64(mix64(mix64(master_seed) ^ n_index) ^ replicate)``
where mix64 is the splitmix64 finaliser. A replicate's environment is drawn
from its seed; its sampler uses ``default_rng([seed, 1])`` (and
``[seed, 3]`` for the second tree of an overlap measurement).
"""

from __future__ import annotations

import ast
import csv
import io
import math
import operator
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from .er_coupling import clusters_at, minimal_subtree, tree_diameter
from .errors import BudgetExceeded, InvalidParameter, SizeCapError
from .graph_env import extend_lower_tail, gen_environment, log_weight_view, num_edges, sample_lower_tail
from .samplers import EXACT_MAX_N, mst_kruskal, mst_of_tail, sequential_exact_run, wilson_run
from .trees import edge_overlap

CSV_COLUMNS = ["run_id", "n", "beta", "seed", "sampler", "diam", "diam_c1p0", "overlap", "steps", "wall_ms", "status"]
MASK64 = (1 << 64) - 1


def mix64(x: int) -> int:
    z = (x + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def replicate_seed(master_seed: int, n_index: int, replicate: int) -> int:
    return mix64(mix64(mix64(master_seed & MASK64) ^ n_index) ^ replicate)


# -- beta and p expressions -------------------------------------------------------------

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_FUNCS = {"log": math.log, "exp": math.exp, "sqrt": math.sqrt}


def _eval_node(node, env):
    if isinstance(node, ast.Expression):
        return _eval_node(node.body, env)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return float(node.value)
    if isinstance(node, ast.Name) and node.id in env:
        return env[node.id]
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_eval_node(node.left, env), _eval_node(node.right, env))
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        val = _eval_node(node.operand, env)
        return -val if isinstance(node.op, ast.USub) else val
    if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS
            and len(node.args) == 1 and not node.keywords):
        return _FUNCS[node.func.id](_eval_node(node.args[0], env))
    raise InvalidParameter(f"unsupported expression element: {ast.dump(node)}")


def compile_expression(text: str):
    """Arithmetic in n (and m = n(n-1)/2) with log, exp, sqrt, pi, e."""
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as exc:
        raise InvalidParameter(f"cannot parse expression {text!r}") from exc

    def rule(n):
        return _eval_node(tree, {"n": float(n), "m": float(num_edges(int(n))), "pi": math.pi, "e": math.e})

    rule(4)  # surface unsupported syntax now, not mid-sweep
    return rule


PRESETS = {
    "zero": ("0", None),
    "low": ("{c}*n/log(n)", 0.125),
    "boundary": ("n", None),
    "intermediate": ("n**(1+{c})", 1 / 6),
    "high": ("n**(4/3)*log(n)", None),
    "collapse": ("10*m**2*n*log(n)", None),
}


def beta_rule(spec: str):
    """A preset name (``low``, ``low:0.1``, ``intermediate:0.2``, ...) or an expression."""
    name, _, arg = spec.partition(":")
    if name in PRESETS:
        template, default = PRESETS[name]
        if arg and default is None:
            raise InvalidParameter(f"preset {name!r} takes no parameter")
        text = template.format(c=float(arg) if arg else default)
        return compile_expression(text)
    return compile_expression(spec)


# -- config -------------------------------------------------------------------------------


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off", ""):
        return False
    raise InvalidParameter(f"not a boolean: {text!r}")


@dataclass
class SweepConfig:
    master_seed: int
    n_list: list
    beta_rule: str
    sampler: str
    replicates: int
    p0_rule: str = ""
    output: str = ""
    label: str = ""
    threads: int = 1
    overlap: bool = False
    timing: bool = False
    wilson_budget: int = 0  # 0 = default 10^4 n log n
    wilson_transitions: str = "gumbel"
    exact_max_n: int = EXACT_MAX_N
    dense_max_n: int = 6000
    _beta: object = field(default=None, repr=False, compare=False)
    _p0: object = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.sampler not in ("wilson", "exact", "mst"):
            raise InvalidParameter(f"sampler must be wilson, exact or mst, got {self.sampler!r}")
        if not self.n_list or any(int(n) < 2 for n in self.n_list):
            raise InvalidParameter("n_list must be nonempty with every n >= 2")
        self.n_list = [int(n) for n in self.n_list]
        if self.replicates < 1:
            raise InvalidParameter("replicates must be >= 1")
        if self.threads < 1:
            raise InvalidParameter("threads must be >= 1")
        self._beta = beta_rule(self.beta_rule)
        self._p0 = compile_expression(self.p0_rule) if self.p0_rule else None
        for n in self.n_list:
            b = self._beta(n)
            if not (math.isfinite(b) and b >= 0):
                raise InvalidParameter(f"beta_rule gives {b} at n={n}")
            if self._p0 is not None and not 0 <= self._p0(n) <= 1:
                raise InvalidParameter(f"p0_rule leaves [0, 1] at n={n}")
        if not self.label:
            self.label = self.beta_rule.partition(":")[0] if self.beta_rule.partition(":")[0] in PRESETS else "custom"
        if "-" in self.label or "," in self.label:
            raise InvalidParameter("label may not contain '-' or ','")

    def beta(self, n: int) -> float:
        return float(self._beta(n))

    def p0(self, n: int):
        return None if self._p0 is None else float(self._p0(n))


_INT_KEYS = {"master_seed", "replicates", "threads", "wilson_budget", "exact_max_n", "dense_max_n"}
_BOOL_KEYS = {"overlap", "timing"}


def parse_config(text: str, **overrides) -> SweepConfig:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if not sep or not key:
            raise InvalidParameter(f"line {lineno}: expected key = value")
        if key not in SweepConfig.__dataclass_fields__ or key.startswith("_"):
            raise InvalidParameter(f"line {lineno}: unknown key {key!r}")
        try:
            if key in _INT_KEYS:
                values[key] = int(val)
            elif key in _BOOL_KEYS:
                values[key] = _bool(val)
            elif key == "n_list":
                values[key] = [int(x) for x in val.replace(" ", "").split(",") if x]
            else:
                values[key] = val
        except ValueError as exc:
            raise InvalidParameter(f"line {lineno}: bad value for {key}: {val!r}") from exc
    values.update({k: v for k, v in overrides.items() if v is not None})
    missing = {"master_seed", "n_list", "beta_rule", "sampler", "replicates"} - values.keys()
    if missing:
        raise InvalidParameter(f"config is missing {sorted(missing)}")
    return SweepConfig(**values)


def load_config(path, **overrides) -> SweepConfig:
    return parse_config(Path(path).read_text(), **overrides)


# -- one replicate --------------------------------------------------------------------------


def _mst_tail(n: int, seed: int, p_needed: float):
    """MST from a sampled lower tail, widening the threshold until it spans."""
    p = min(1.0, max(3.0 * math.log(n) / n, p_needed))
    tail = sample_lower_tail(n, seed, p)
    rng = np.random.default_rng([seed, 2])
    while True:
        tree = mst_of_tail(tail)
        if tree is not None:
            return tree, tail
        tail = extend_lower_tail(tail, min(1.0, 2 * tail.p), rng)


def run_replicate(cfg: SweepConfig, n_index: int, rep: int) -> dict:
    n = cfg.n_list[n_index]
    seed = replicate_seed(cfg.master_seed, n_index, rep)
    beta = cfg.beta(n)
    rec = {"run_id": f"{cfg.label}-{n}-{rep}", "n": n, "beta": beta, "seed": seed, "sampler": cfg.sampler,
           "diam": None, "diam_c1p0": None, "overlap": None, "steps": None, "wall_ms": None, "status": "ok"}
    start = time.perf_counter()
    p0 = cfg.p0(n)
    rng = np.random.default_rng([seed, 1])
    second = None
    try:
        if cfg.sampler == "mst" and n > cfg.dense_max_n:
            tree, env = _mst_tail(n, seed, p0 or 0.0)
            steps = 0
            second = tree if cfg.overlap else None
        else:
            env = gen_environment(n, seed)
            if cfg.sampler == "mst":
                tree, steps = mst_kruskal(env), 0
                second = tree if cfg.overlap else None
            elif cfg.sampler == "wilson":
                g = log_weight_view(env, beta)
                budget = cfg.wilson_budget or None
                tree, steps = wilson_run(g, 0, rng, budget, cfg.wilson_transitions)
                if cfg.overlap:
                    second = wilson_run(g, 0, np.random.default_rng([seed, 3]), budget, cfg.wilson_transitions)[0]
            else:
                g = log_weight_view(env, beta)
                tree, steps = sequential_exact_run(g, rng, cfg.exact_max_n)
                if cfg.overlap:
                    second = sequential_exact_run(g, np.random.default_rng([seed, 3]), cfg.exact_max_n)[0]
    except BudgetExceeded as exc:
        rec["status"] = "budget"
        rec["steps"] = exc.diagnostics.get("steps")
        return _finish(cfg, rec, start)
    except SizeCapError:
        rec["status"] = "cap"
        return _finish(cfg, rec, start)
    rec["steps"] = int(steps)
    rec["diam"] = tree.diameter()
    if p0 is not None:
        dec = clusters_at(env, p0)
        rec["diam_c1p0"] = tree_diameter(minimal_subtree(tree, dec.members(0)))
    if second is not None:
        rec["overlap"] = edge_overlap(tree, second)
    return _finish(cfg, rec, start)


def _finish(cfg, rec, start):
    if cfg.timing:
        rec["wall_ms"] = round((time.perf_counter() - start) * 1000.0, 3)
    return rec


# -- sweeps and CSV -----------------------------------------------------------------------------


def run_sweep(cfg: SweepConfig, threads: int | None = None, progress=None) -> list:
    """Run every (n, replicate) cell; records come back sorted by (n, replicate).

    Writes cfg.output as CSV when it is set. Seeds depend only on the cell,
    so the output does not depend on `threads` (wall_ms is only filled in
    when cfg.timing is on).
    """
    threads = cfg.threads if threads is None else threads
    cells = [(i, r) for i in range(len(cfg.n_list)) for r in range(cfg.replicates)]
    if threads == 1:
        out = []
        for i, r in cells:
            out.append(run_replicate(cfg, i, r))
            if progress:
                progress(out[-1])
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            out = list(pool.map(lambda c: run_replicate(cfg, *c), cells))
    out.sort(key=lambda rec: (rec["n"], int(rec["run_id"].rsplit("-", 1)[1])))
    if cfg.output:
        Path(cfg.output).write_text(records_to_csv(out))
    return out


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def records_to_csv(records) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for rec in records:
        writer.writerow([_cell(rec.get(col)) for col in CSV_COLUMNS])
    return buf.getvalue()


_INT_COLUMNS = {"n", "seed", "diam", "diam_c1p0", "overlap", "steps"}
_FLOAT_COLUMNS = {"beta", "wall_ms"}


def read_records(path) -> list:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_COLUMNS:
            raise InvalidParameter(f"unexpected CSV header {reader.fieldnames}")
        out = []
        for row in reader:
            rec = {}
            for key, val in row.items():
                if val == "":
                    rec[key] = None
                elif key in _INT_COLUMNS:
                    rec[key] = int(val)
                elif key in _FLOAT_COLUMNS:
                    rec[key] = float(val)
                else:
                    rec[key] = val
            out.append(rec)
    return out


# -- fits and reports ----------------------------------------------------------------------------


def parse_filter(text):
    """``key=value[,key=value...]`` into a predicate over records; '' keeps everything.

    Keys are CSV columns, plus ``label`` which matches the run_id prefix.
    """
    if callable(text):
        return text
    conds = []
    for part in (text or "").split(","):
        part = part.strip()
        if not part:
            continue
        key, sep, val = part.partition("=")
        if not sep or key.strip() not in CSV_COLUMNS + ["label"]:
            raise InvalidParameter(f"bad filter clause {part!r}")
        conds.append((key.strip(), val.strip()))

    def keep(rec):
        return all((_label(rec) if k == "label" else _cell(rec.get(k))) == v for k, v in conds)

    return keep


def _label(rec) -> str:
    return str(rec["run_id"]).rsplit("-", 2)[0]


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    stderr: float
    n_range: tuple
    means: dict


def _cells(records, column, filt):
    keep = parse_filter(filt)
    groups = {}
    for rec in records:
        if rec.get("status") == "ok" and keep(rec) and rec.get(column) is not None:
            groups.setdefault(int(rec["n"]), []).append(float(rec[column]))
    return groups


def fit_exponent(records, filter=None, column: str = "diam", min_replicates: int = 10) -> FitResult:
    """Least-squares slope of log(mean column) against log n."""
    groups = _cells(records, column, filter)
    short = {n: len(v) for n, v in groups.items() if len(v) < min_replicates}
    good = sorted(n for n in groups if n not in short)
    if len(good) < 3:
        detail = ", ".join(f"n={n}: {k} ok rows" for n, k in sorted(short.items())) or "no rows"
        raise InvalidParameter(f"need >= 3 n values with >= {min_replicates} ok rows ({detail})")
    means = {n: float(np.mean(groups[n])) for n in good}
    x = np.log(np.array(good, dtype=float))
    y = np.log(np.array([means[n] for n in good]))
    res = stats.linregress(x, y)
    return FitResult(float(res.slope), float(res.intercept), float(res.stderr), (good[0], good[-1]), means)


def emit_report(records, out_dir, filter=None, column: str = "diam") -> list:
    """One ``report_<label>.tsv`` per regime label with columns n, count, mean, lo, hi.

    lo/hi are mean -/+ 1.96 standard errors. Returns the written paths.
    """
    keep = parse_filter(filter)
    chosen = [r for r in records if keep(r) and r.get("status") == "ok" and r.get(column) is not None]
    if not chosen:
        raise InvalidParameter("no records left after filtering")
    by_label = {}
    for rec in chosen:
        label = _label(rec)
        by_label.setdefault(label, {}).setdefault(int(rec["n"]), []).append(float(rec[column]))
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for label in sorted(by_label):
        lines = ["n\tcount\tmean\tlo\thi"]
        for n in sorted(by_label[label]):
            vals = np.array(by_label[label][n])
            mean = float(vals.mean())
            half = 1.96 * float(vals.std(ddof=1)) / math.sqrt(vals.size) if vals.size > 1 else 0.0
            lines.append(f"{n}\t{vals.size}\t{mean:.6g}\t{mean - half:.6g}\t{mean + half:.6g}")
        path = out_dir / f"report_{label}.tsv"
        path.write_text("\n".join(lines) + "\n")
        paths.append(path)
    return paths

