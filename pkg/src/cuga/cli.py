"""``cuga`` command line: PoA bound sweeps, maximization comparisons and verification suites.

Configs are flat ``key = value`` text files whose first non-comment line is
``cuga-config 1``.  Lists are comma separated.  Unknown keys, missing
values and out-of-range values are reported with the field name and exit
code 2.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import svg
from .dynamics import RunConfig, d_no_regret, frank_wolfe_iterates, random_baseline, to_distribution
from .functions import (
    ABS_TOL,
    PropertyReport,
    check_curvature_inequality,
    check_dr,
    check_group_dr,
    check_monotone,
    check_playerwise_dr,
    check_weak_dr,
    generalized_submodularity_ratio,
    gradient_check,
    submodularity_ratio,
)
from .games import (
    ContinuousGame,
    cce_epsilon,
    check_payoff_sum_bound,
    poa_bound,
    smoothness_check,
    validate_valid_utility,
)
from .instances import (
    affine_sensor_eta,
    budget_curvature_bound,
    random_affine_sensor,
    random_budget_game,
    random_sensor,
    sensor_alpha,
)
from .vectorspace import child_seeds

CONFIG_HEADER = "cuga-config 1"
EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
GRAD_REL_TOL = 1e-5


class ConfigError(ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


# config schema ---------------------------------------------------------------


@dataclass(frozen=True)
class Field:
    kind: type
    default: Any = None
    is_list: bool = False
    check: Callable[[Any], bool] | None = None
    rule: str = ""


def _pos(v):
    return v > 0


def _prob(v):
    return 0 < v <= 1


def _at_least_one(v):
    return v >= 1


COMMON = {
    "kind": Field(str),
    "seeds": Field(int, [0], True, lambda v: v >= 0, "nonnegative"),
    "out": Field(str, "results"),
}

SCHEMAS: dict[str, dict[str, Field]] = {
    "bounds_sweep": {
        "N": Field(int, 10, check=_at_least_one, rule=">= 1"),
        "d": Field(int, 100, check=_at_least_one, rule=">= 1"),
        "T": Field(int, 10000, check=_at_least_one, rule=">= 1"),
        "b": Field(float, 1.0, check=_pos, rule="> 0"),
        "p_max": Field(float, [0.005, 0.01, 0.015, 0.02], True, _prob, "in (0, 1]"),
        "edges": Field(int, [5, 10, 15, 20, 25, 30], True, _at_least_one, ">= 1"),
    },
    "maximize_compare": {
        "N": Field(int, 5, check=_at_least_one, rule=">= 1"),
        "d": Field(int, 30, check=_at_least_one, rule=">= 1"),
        "p": Field(float, 0.05, check=lambda v: 0 < v < 1, rule="in (0, 1)"),
        "b": Field(float, 1.0, check=_pos, rule="> 0"),
        "K": Field(int, [10, 20, 50, 100, 500, 3000], True, _at_least_one, ">= 1"),
        "budgets": Field(float, [1.0, 1.25, 1.5, 1.75, 2.0], True, _pos, "> 0"),
        "budget_K": Field(int, 3000, check=_at_least_one, rule=">= 1"),
        "random_samples": Field(int, 10000, check=_at_least_one, rule=">= 1"),
        "dnr_step_scale": Field(float, 1.0, check=_pos, rule="> 0"),
        "fw_step_scale": Field(float, 1.0, check=_prob, rule="in (0, 1]"),
        "snapshot_every": Field(int, 0, check=lambda v: v >= 0, rule=">= 0"),
    },
    "verify": {
        "instance": Field(str, "sensor", check=lambda v: v in ("sensor", "budget", "affine"),
                          rule="one of sensor, budget, affine"),
        "N": Field(int, 5, check=_at_least_one, rule=">= 1"),
        "d": Field(int, 30, check=_at_least_one, rule=">= 1"),
        "b": Field(float, 1.0, check=_pos, rule="> 0"),
        "p": Field(float, 0.05, check=lambda v: 0 < v < 1, rule="in (0, 1)"),
        "T": Field(int, 50, check=_at_least_one, rule=">= 1"),
        "edges": Field(int, 3, check=_at_least_one, rule=">= 1"),
        "p_max": Field(float, 0.1, check=_prob, rule="in (0, 1]"),
        "affine_a": Field(float, 0.05, check=lambda v: v >= 0, rule=">= 0"),
        "affine_b": Field(float, 1.0, check=_pos, rule="> 0"),
        "samples": Field(int, 1000, check=_at_least_one, rule=">= 1"),
        "payoff_scale": Field(float, 1.0, check=_pos, rule="> 0"),
        "regret_K": Field(int, 250, check=lambda v: v >= 0, rule=">= 0 (0 skips the CCE suite)"),
        "expect_fail": Field(str, [], True),
    },
}


def _convert(name: str, fld: Field, raw: str):
    try:
        val = fld.kind(raw)
    except ValueError:
        raise ConfigError(name, f"expected {fld.kind.__name__}, got {raw!r}") from None
    if fld.check is not None and not fld.check(val):
        raise ConfigError(name, f"value {raw!r} out of range ({fld.rule})")
    return val


def parse_config(text: str) -> dict:
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines or lines[0] != CONFIG_HEADER:
        raise ConfigError("header", f"first line must be {CONFIG_HEADER!r}")
    raw: dict[str, str] = {}
    for ln in lines[1:]:
        if "=" not in ln:
            raise ConfigError(ln.split()[0], "expected 'key = value'")
        key, val = (part.strip() for part in ln.split("=", 1))
        if key in raw:
            raise ConfigError(key, "given twice")
        raw[key] = val
    if "kind" not in raw:
        raise ConfigError("kind", "missing")
    kind = raw["kind"]
    if kind not in SCHEMAS:
        raise ConfigError("kind", f"unknown experiment kind {kind!r}; expected one of {sorted(SCHEMAS)}")
    schema = {**COMMON, **SCHEMAS[kind]}
    cfg = {}
    for key, val in raw.items():
        if key not in schema:
            raise ConfigError(key, f"unknown field for kind {kind}")
        fld = schema[key]
        if fld.is_list:
            items = [v.strip() for v in val.split(",") if v.strip()]
            if not items and key != "expect_fail":
                raise ConfigError(key, "list must not be empty")
            cfg[key] = [_convert(key, fld, v) for v in items]
        else:
            cfg[key] = _convert(key, fld, val)
    for key, fld in schema.items():
        cfg.setdefault(key, list(fld.default) if fld.is_list else fld.default)
    if kind == "bounds_sweep" and max(cfg["edges"]) > cfg["d"]:
        raise ConfigError("edges", f"edges per customer cannot exceed d = {cfg['d']}")
    if kind == "verify" and cfg["instance"] == "budget" and cfg["edges"] > cfg["d"]:
        raise ConfigError("edges", f"edges per customer cannot exceed d = {cfg['d']}")
    return cfg


def load_config(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text)


# parallel jobs ---------------------------------------------------------------


def thread_cap() -> int:
    raw = os.environ.get("CUGA_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError("CUGA_THREADS", f"expected a positive integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError("CUGA_THREADS", "must be at least 1")
    return n


def run_jobs(fn, jobs: list) -> list:
    workers = min(thread_cap(), len(jobs))
    if workers <= 1:
        return [fn(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def write_csv(path: Path, header: list[str], rows: list) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _num(v) -> str:
    return repr(float(v))


# bounds ----------------------------------------------------------------------

BOUNDS_COLUMNS = ["p_max", "edges", "seed", "alpha", "bound"]


def _bounds_job(job):
    N, d, T, b, p_max, edges, seed = job
    game = random_budget_game(N, d, T, edges, p_max, seed, b)
    alpha = budget_curvature_bound(game)
    return (p_max, edges, seed, alpha, poa_bound("curvature", alpha).bound)


def cmd_bounds(cfg: dict, out: Path) -> int:
    jobs = [
        (cfg["N"], cfg["d"], cfg["T"], cfg["b"], p, e, s)
        for p in cfg["p_max"] for e in cfg["edges"] for s in cfg["seeds"]
    ]
    rows = sorted(run_jobs(_bounds_job, jobs))
    write_csv(out / "bounds.csv", BOUNDS_COLUMNS, [(_num(p), e, s, _num(a), _num(bd)) for p, e, s, a, bd in rows])

    ps, es = sorted(set(cfg["p_max"])), sorted(set(cfg["edges"]))
    mean = np.array([[np.mean([r[4] for r in rows if r[0] == p and r[1] == e]) for p in ps] for e in es])
    (out / "bounds_heatmap.svg").write_text(
        svg.heatmap(mean, ps, es, "p_max", "edges per customer", "PoA_CCE bound 1 + alpha (mean over seeds)")
    )
    series = {f"{e} edges": (ps, mean[j]) for j, e in enumerate(es)}
    (out / "bounds_lines.svg").write_text(
        svg.line_plot(series, "p_max", "bound", "PoA_CCE bound vs p_max", hlines={"generic bound 2": 2.0})
    )
    return EXIT_OK


# maximize --------------------------------------------------------------------

MAXIMIZE_COLUMNS = ["K", "seed", "method", "gamma_final", "gamma_mean_trace", "time_ms_per_iter"]
BUDGET_COLUMNS = ["b", "seed", "method", "gamma_final", "gamma_mean_trace", "time_ms_per_iter"]


def _run_fw(sc, K, scale):
    gamma = sc.social
    vals = []
    t0 = time.perf_counter()
    for x in frank_wolfe_iterates(gamma, sc.sets, RunConfig(K, 0, "fw_1_over_K", scale)):
        vals.append(gamma(x))
    elapsed = 1e3 * (time.perf_counter() - t0) / K
    return vals[-1], float(np.mean(vals)), elapsed


def compare_methods(sc, K: int, seed: int, dnr_scale: float, fw_scale: float, snapshot=None):
    """``(method, gamma_final, gamma_mean_trace, time_ms_per_iter)`` for FW and D-noRegret."""
    fw = _run_fw(sc, K, fw_scale)
    trace = d_no_regret(sc.game, RunConfig(K, seed, "oga_1_over_sqrtK", dnr_scale))
    if snapshot is not None:
        folder, every = snapshot
        trace.write_csv(folder / f"dnr_K{K}_seed{seed}.csv")
        trace.write_snapshots(folder / f"dnr_K{K}_seed{seed}.profiles", every)
    dnr = (float(trace.gamma[-1]), trace.mean_gamma, float(trace.time_ms.mean()))
    return [("dnoregret",) + dnr, ("frank_wolfe",) + fw]


def _random_row(sc, n, seed):
    t0 = time.perf_counter()
    _, best = random_baseline(sc.social, sc.sets, n, seed)
    return ("random",  best, best, 1e3 * (time.perf_counter() - t0) / n)


def _maximize_job(job):
    cfg, seed, out = job
    snapshot = None
    if cfg["snapshot_every"] > 0:
        folder = out / "traces"
        folder.mkdir(exist_ok=True)
        snapshot = (folder, cfg["snapshot_every"])
    sc = random_sensor(cfg["N"], cfg["d"], cfg["p"], seed, cfg["b"])
    rand = _random_row(sc, cfg["random_samples"], seed)
    k_rows = []
    for K in cfg["K"]:
        for row in compare_methods(sc, K, seed, cfg["dnr_step_scale"], cfg["fw_step_scale"], snapshot) + [rand]:
            k_rows.append((K, seed) + row)
    b_rows = []
    for b in cfg["budgets"]:
        sb = sc.with_budget(b)
        for row in compare_methods(sb, cfg["budget_K"], seed, cfg["dnr_step_scale"], cfg["fw_step_scale"]):
            b_rows.append((b, seed) + row)
        b_rows.append((b, seed) + _random_row(sb, cfg["random_samples"], seed))
    return k_rows, b_rows


def _fmt_rows(rows):
    return [(a, s, m, _num(g), _num(gm), f"{t:.4f}") for a, s, m, g, gm, t in rows]


def cmd_maximize(cfg: dict, out: Path) -> int:
    results = run_jobs(_maximize_job, [(cfg, s, out) for s in cfg["seeds"]])
    k_rows = sorted(r for kr, _ in results for r in kr)
    b_rows = sorted(r for _, br in results for r in br)
    write_csv(out / "maximize.csv", MAXIMIZE_COLUMNS, _fmt_rows(k_rows))
    write_csv(out / "maximize_budget.csv", BUDGET_COLUMNS, _fmt_rows(b_rows))

    def mean_series(rows, axis_vals):
        series = {}
        for method in ("frank_wolfe", "dnoregret", "random"):
            ys = [np.mean([r[3] for r in rows if r[0] == v and r[2] == method]) for v in axis_vals]
            series[method] = (axis_vals, ys)
        return series

    Ks = sorted(set(cfg["K"]))
    (out / "maximize_K.svg").write_text(
        svg.line_plot(mean_series(k_rows, Ks), "iterations K", "final gamma (mean over seeds)",
                      "Sensor coverage: gamma vs K", logx=True)
    )
    bs = sorted(set(cfg["budgets"]))
    (out / "maximize_budget.svg").write_text(
        svg.line_plot(mean_series(b_rows, bs), "budget b", "final gamma (mean over seeds)",
                      f"Sensor coverage: gamma vs budget (K={cfg['budget_K']})")
    )
    return EXIT_OK


# verify ----------------------------------------------------------------------


def scaled_payoffs(game: ContinuousGame, factor: float) -> ContinuousGame:
    """Copy of ``game`` whose payoffs (and their gradients) are multiplied by ``factor``."""
    if factor == 1.0:
        return game

    def scale(fn):
        return None if fn is None else (lambda *args: factor * np.asarray(fn(*args)))

    return replace(
        game,
        payoff=lambda i, s: factor * game.payoff(i, s),
        payoff_grad=scale(game.payoff_grad),
        payoff_batch=scale(game.payoff_batch),
        payoff_grads=scale(game.payoff_grads),
        name=f"{game.name}*{factor:g}",
    )


def build_instance(cfg: dict, seed: int):
    kind = cfg["instance"]
    if kind == "sensor":
        return random_sensor(cfg["N"], cfg["d"], cfg["p"], seed, cfg["b"])
    if kind == "budget":
        return random_budget_game(cfg["N"], cfg["d"], cfg["T"], cfg["edges"], cfg["p_max"], seed, cfg["b"])
    return random_affine_sensor(cfg["N"], cfg["d"], cfg["p"], cfg["affine_a"], cfg["affine_b"], seed, cfg["b"])


def _threshold_report(name: str, value: float, floor: float, samples: int) -> PropertyReport:
    margin = value - floor
    holds = margin >= -ABS_TOL
    witness = None if holds else {"value": value, "floor": floor}
    return PropertyReport(name, holds, samples, margin, witness)


def cce_decay_report(game: ContinuousGame, K: int, seed: int) -> PropertyReport:
    """CCE violation of the D-noRegret iterate distribution must not grow from ``K`` to ``4K``."""
    eps = []
    for k in (K, 4 * K):
        trace = d_no_regret(game, RunConfig(k, seed))
        eps.append(cce_epsilon(game, to_distribution(trace), seed=seed))
    rep = _threshold_report("cce_decay", -eps[1], -eps[0], 2)
    if rep.witness is not None:
        rep.witness = {"eps_K": eps[0], "eps_4K": eps[1], "K": K}
    return rep


def verify_suite(cfg: dict, seed: int) -> list[PropertyReport]:
    inst = build_instance(cfg, seed)
    game = scaled_payoffs(inst.game, cfg["payoff_scale"])
    gamma, Z, m = game.social, game.s_tilde(), cfg["samples"]
    s = child_seeds(seed, 10)
    reports = []
    if cfg["instance"] in ("sensor", "budget"):
        alpha = sensor_alpha(inst) if cfg["instance"] == "sensor" else budget_curvature_bound(inst)
        reports += [
            validate_valid_utility(game, m, s[0]),
            smoothness_check(game, 1.0, alpha, m, s[1]),
            check_curvature_inequality(gamma, Z, alpha, m, s[2]),
            check_group_dr(gamma, Z, m, s[3]),
            check_weak_dr(gamma, Z, m, s[4]),
            _threshold_report("submodularity_ratio", submodularity_ratio(gamma, Z, min(m, 200), s[5]), 1.0, min(m, 200)),
        ]
    else:
        eta = affine_sensor_eta(inst)
        reports += [
            check_monotone(gamma, Z, m, s[0]),
            check_dr(gamma, Z, m, s[1]),
            check_playerwise_dr(gamma, game.N, game.d, Z, m, s[2]),
            _threshold_report("generalized_ratio", generalized_submodularity_ratio(game, m, s[3]), eta, m),
            check_payoff_sum_bound(game, 2.0, m, s[4]),
        ]
    if gamma.has_gradient:
        err = gradient_check(gamma, Z, 100, s[6])
        reports.append(_threshold_report("gradient_fd", -err, -GRAD_REL_TOL, 100))
    if cfg["regret_K"] > 0 and (game.payoff_grad is not None or game.payoff_grads is not None):
        reports.append(cce_decay_report(game, cfg["regret_K"], s[7]))
    return reports


VERIFY_COLUMNS = ["seed", "property", "verdict", "expected", "margin"]


def _names(rep: PropertyReport) -> set[str]:
    return {rep.name}.union(*(_names(ch) for ch in rep.children))


def expectation_rows(rep: PropertyReport, expected_fail: set[str], free: bool = False):
    """``(name, verdict, expected, margin)`` for ``rep`` and its descendants.

    A node is expected to fail when it or a descendant is listed; other
    descendants of an expected failure are not constrained (``any``).
    """
    if _names(rep) & expected_fail:
        expected = "fail"
    else:
        expected = "any" if free else "pass"
    verdict = "pass" if rep.holds else "fail"
    rows = [(rep.name, verdict, expected, rep.margin)]
    for ch in rep.children:
        rows += expectation_rows(ch, expected_fail, free or expected == "fail")
    return rows


def cmd_verify(cfg: dict, out: Path) -> int:
    expected_fail = set(cfg["expect_fail"])
    rows, records, seen = [], [], set()
    for seed in cfg["seeds"]:
        for rep in verify_suite(cfg, seed):
            seen |= _names(rep)
            records.append(f"# seed {seed}\n{rep.to_record()}")
            rows += [(seed,) + row for row in expectation_rows(rep, expected_fail)]
    unknown = expected_fail - seen
    if unknown:
        raise ConfigError("expect_fail", f"no such property: {', '.join(sorted(unknown))}")
    rows.sort(key=lambda r: (r[0], r[1]))
    write_csv(out / "verify.csv", VERIFY_COLUMNS, [r[:4] + (f"{r[4]:.6g}",) for r in rows])
    (out / "verify.txt").write_text("\n\n".join(records) + "\n")
    mismatch = False
    for seed, name, verdict, expected, margin in rows:
        ok = expected in ("any", verdict)
        mismatch |= not ok
        print(f"seed={seed} {name}: {verdict} (expected {expected}, margin {margin:.3g}){'' if ok else '  MISMATCH'}")
    return EXIT_FAIL if mismatch else EXIT_OK


# entry point -----------------------------------------------------------------

COMMANDS = {
    "bounds": ("bounds_sweep", cmd_bounds),
    "maximize": ("maximize_compare", cmd_maximize),
    "verify": ("verify", cmd_verify),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cuga", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="experiment config file")
        p.add_argument("--seed", type=int, help="run this single seed instead of the config's list")
        p.add_argument("--out", help="output directory (overrides the config)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    kind, fn = COMMANDS[args.command]
    try:
        cfg = load_config(args.config)
        if cfg["kind"] != kind:
            raise ConfigError("kind", f"'cuga {args.command}' needs kind = {kind}, got {cfg['kind']}")
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("seed", "must be nonnegative")
            cfg["seeds"] = [args.seed]
        out = Path(args.out or cfg["out"])
        out.mkdir(parents=True, exist_ok=True)
        return fn(cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
