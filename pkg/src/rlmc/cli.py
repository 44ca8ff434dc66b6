"""Command-line experiment runner.

Every run reads one JSON configuration (``--config``; flags override its
fields), writes the fully resolved configuration to ``config.json`` in the
output directory, and lists every emitted file in ``manifest.json``.
Failures exit nonzero after writing ``error.json``.
"""
import argparse
import copy
import csv
import logging
import math
import os
import sys
import time

import numpy as np

from . import __version__
from .basis import CondExpEvaluator, gram_matrix, make_basis
from .evaluate import evaluate_policy
from .exceptions import ConfigurationError, RLMCError
from .io import jsonable, read_json, write_csv, write_json
from .kernels import BACKEND
from .measures import Schedule, UniformBox, estimate_r_bar, measure_from_dict, schedule_density_factor
from .model import Box
from .optimize import ControlOptimizer
from .problems import build_problem
from .problems import doorways as _doorways
from .problems import lq as _lq
from .problems import two_period as _two_period
from .projection import CoefficientMatrix, projection_error
from .solver_perf import PerfSolveConfig, solve_perf
from .solver_value import ValueSolveConfig, solve_value

log = logging.getLogger("rlmc")

SUBCOMMANDS = ("solve", "evaluate", "bench-lq", "bench-doorways", "measure-tradeoff", "diagnose")

DEFAULTS = {
    "problem": {"name": "lq1", "overrides": {}},
    "basis": {"kind": "monomial", "parameters": {"degree": 2}},
    "measure": None,
    "evaluator": {"strategy": None, "order": 16, "samples": 512},
    "solver": "both",
    "budgets": {"M": 10000, "eval_paths": 10000, "gamma": None,
                "optimizer": {"grid": None, "refine_steps": 2, "shrink": 4}},
    "x0": None,
    "seed": None,
    "threads": 1,
    "out": None,
    "coefficients": None,
    "doorways": {"seeds": [1, 2, 3, 4, 5], "measure_seed": 0, "measure_iters": 5, "measure_tol": 0.05},
    "tradeoff": {},
    "r_bar_grid": {"x": 101, "u": 61, "y": 401},
}

SUBCOMMAND_DEFAULTS = {
    "bench-doorways": {"problem": {"name": "doorways", "overrides": {}}, "budgets": {"M": 5000}},
    "measure-tradeoff": {"problem": {"name": "two_period", "overrides": {}}},
}


def _merge(base, extra):
    out = copy.deepcopy(base)
    for k, v in (extra or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def resolve_config(command, raw=None, seed=None, out=None, threads=None):
    """Defaults, then subcommand defaults, then the file, then flags; validated."""
    cfg = _merge(_merge(DEFAULTS, SUBCOMMAND_DEFAULTS.get(command, {})), raw or {})
    unknown = sorted(set(raw or {}) - set(DEFAULTS))
    if seed is not None:
        cfg["seed"] = seed
    if out is not None:
        cfg["out"] = out
    if threads is not None:
        cfg["threads"] = threads
    errors = [f"{k}: unknown field" for k in unknown]
    if cfg["seed"] is None:
        errors.append("seed: mandatory (use --seed or the config file)")
    elif not isinstance(cfg["seed"], int) or cfg["seed"] < 0 or cfg["seed"] >= 2 ** 64:
        errors.append("seed: must be an integer in [0, 2^64)")
    if not cfg["out"]:
        errors.append("out: output directory required (use --out)")
    if not isinstance(cfg["threads"], int) or cfg["threads"] < 1:
        errors.append("threads: must be a positive integer")
    if cfg["solver"] not in ("value", "performance", "both"):
        errors.append("solver: must be one of value, performance, both")
    b = cfg["budgets"]
    for key in ("M", "eval_paths"):
        if not isinstance(b.get(key), int) or b[key] < 1:
            errors.append(f"budgets.{key}: must be a positive integer")
    if b.get("gamma") is not None and not (isinstance(b["gamma"], (int, float)) and b["gamma"] > 0):
        errors.append("budgets.gamma: must be > 0")
    opt = b.get("optimizer", {})
    if opt.get("grid") is not None and (not isinstance(opt["grid"], int) or opt["grid"] < 2):
        errors.append("budgets.optimizer.grid: must be an integer >= 2")
    if not isinstance(opt.get("refine_steps"), int) or opt["refine_steps"] < 0:
        errors.append("budgets.optimizer.refine_steps: must be a nonnegative integer")
    if not isinstance(opt.get("shrink"), int) or opt["shrink"] < 2:
        errors.append("budgets.optimizer.shrink: must be an integer >= 2")
    if command == "evaluate" and not cfg.get("coefficients"):
        errors.append("coefficients: path to a coefficients.csv is required for evaluate")
    if errors:
        raise ConfigurationError("invalid configuration", errors=errors)
    return cfg


class Run:
    """Output directory bookkeeping: every written file lands in the manifest."""

    def __init__(self, out):
        self.out = out
        self.files = []
        os.makedirs(out, exist_ok=True)

    def path(self, name):
        full = os.path.join(self.out, name)
        os.makedirs(os.path.dirname(full), exist_ok=True)
        self.files.append(name)
        return full

    def csv(self, name, header, rows):
        write_csv(self.path(name), header, rows)

    def json(self, name, obj):
        write_json(self.path(name), obj)

    def manifest(self, command, status):
        files = sorted(set(self.files))
        write_json(os.path.join(self.out, "manifest.json"),
                   {"command": command, "status": status, "files": files, "version": __version__})


def _optimizer(cfg):
    o = cfg["budgets"]["optimizer"]
    return ControlOptimizer(grid=o.get("grid"), refine_steps=o["refine_steps"], shrink=o["shrink"],
                            threads=cfg["threads"])


def _setup(cfg):
    model, spec = build_problem(cfg["problem"]["name"], cfg["problem"].get("overrides"))
    bcfg = cfg["basis"]
    params = dict(bcfg.get("parameters") or {})
    domain = params.pop("domain", None)
    domain = Box(*domain) if domain is not None else model.state_domain
    try:
        basis = make_basis(bcfg["kind"], params, domain)
    except RLMCError as exc:
        raise ConfigurationError(str(exc), errors=[f"basis: {exc}"]) from exc
    measure = _measure(cfg, model, spec)
    ecfg = cfg["evaluator"]
    evaluator = CondExpEvaluator(model, basis, ecfg.get("strategy"), ecfg.get("order", 16),
                                 ecfg.get("samples", 512), cfg["seed"])
    return model, spec, basis, measure, evaluator


def _measure(cfg, model, spec):
    mcfg = cfg.get("measure")
    if mcfg is None:
        if model.name == "lq1":
            return _lq.default_measure(spec)
        return UniformBox(model.state_domain)
    return measure_from_dict(mcfg, default_box=model.state_domain)


def _solvers(cfg):
    return ("value", "performance") if cfg["solver"] == "both" else (cfg["solver"],)


def _solve(kind, model, basis, evaluator, measure, cfg, seed=None):
    seed = cfg["seed"] if seed is None else seed
    M = cfg["budgets"]["M"]
    if kind == "value":
        conf = ValueSolveConfig(M, seed, cfg["budgets"].get("gamma"), _optimizer(cfg))
        return solve_value(model, basis, evaluator, measure, conf)
    return solve_perf(model, basis, evaluator, measure, PerfSolveConfig(M, seed, _optimizer(cfg)))


def _coef_rows(results, extra=None):
    rows = []
    for label, coeffs in results:
        for n, row in enumerate(coeffs.alpha, start=1):
            rows.append([*label, n, *row])
    return rows


def _coef_header(K, labels=("solver",)):
    return [*labels, "n", *[f"alpha_{k}" for k in range(1, K + 1)]]


def read_coefficients(path, solver=None):
    """Read a ``coefficients.csv`` written by ``solve``; picks one solver's rows."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if header[0] == "solver":
        solvers = sorted({r[0] for r in body})
        if solver is None:
            if len(solvers) != 1:
                raise ConfigurationError("coefficients file holds several solvers",
                                         errors=[f"solver: choose one of {solvers}"])
            solver = solvers[0]
        body = [r[1:] for r in body if r[0] == solver]
        if not body:
            raise ConfigurationError(f"no coefficients for solver {solver!r}", errors=["solver"])
    alpha = np.array([[float(v) for v in r[1:]] for r in sorted(body, key=lambda r: int(r[0]))])
    return CoefficientMatrix(alpha, {"solver": solver, "source": path})


def _x0(cfg, model):
    x0 = cfg.get("x0")
    if x0 is None:
        return np.zeros(model.d) if model.state_domain.contains(np.zeros(model.d)) else \
            0.5 * (model.state_domain.lo + model.state_domain.hi)
    return np.atleast_1d(np.asarray(x0, dtype=float))


def cmd_solve(cfg, run):
    model, _, basis, measure, evaluator = _setup(cfg)
    results, diags = [], {}
    for kind in _solvers(cfg):
        res = _solve(kind, model, basis, evaluator, measure, cfg)
        results.append(((kind,), res.coefficients))
        diags[kind] = res.diagnostics
        diags[kind]["metadata"] = res.coefficients.meta
    run.csv("coefficients.csv", _coef_header(basis.size), _coef_rows(results))
    run.json("diagnostics.json", diags)


def cmd_evaluate(cfg, run):
    model, _, basis, _, evaluator = _setup(cfg)
    solver = None if cfg["solver"] == "both" else cfg["solver"]
    coeffs = read_coefficients(cfg["coefficients"], solver)
    if coeffs.alpha.shape != (model.N, basis.size):
        raise ConfigurationError("coefficients do not match the problem and basis",
                                 errors=[f"coefficients: expected shape {(model.N, basis.size)}, "
                                         f"got {coeffs.alpha.shape}"])
    rep = evaluate_policy(model, coeffs, evaluator, _x0(cfg, model), cfg["budgets"]["eval_paths"],
                          cfg["seed"], optimizer=_optimizer(cfg), keep_paths=True)
    run.json("eval_report.json", rep.to_dict())
    rep.histogram_csv(run.path("histogram.csv"))
    rep.cross_sections_csv(run.path("curves/cross_sections.csv"))


def cmd_bench_lq(cfg, run):
    model, spec, basis, measure, _ = _setup(cfg)
    if model.name != "lq1":
        raise ConfigurationError("bench-lq runs the lq1 problem", errors=["problem.name: must be lq1"])
    budgets = _lq.LqBudgets(cfg["budgets"]["M"], cfg["budgets"]["eval_paths"], cfg["seed"], _optimizer(cfg))
    x0s, ref, runs = _lq.run_lq_experiment(spec, _solvers(cfg), basis, measure, budgets)
    header, rows = _lq.error_curve_rows(x0s, ref, runs)
    run.csv("error_curve.csv", header, rows)
    run.csv("coefficients.csv", _coef_header(basis.size), _coef_rows([((r.solver,), r.coefficients) for r in runs]))
    run.json("diagnostics.json", {r.solver: r.diagnostics for r in runs})


def cmd_bench_doorways(cfg, run):
    model, spec, basis, _, _ = _setup(cfg)
    if model.name != "doorways":
        raise ConfigurationError("bench-doorways runs the doorways problem", errors=["problem.name: must be doorways"])
    d = cfg["doorways"]
    budgets = _doorways.DoorwaysBudgets(cfg["budgets"]["M"], cfg["budgets"]["eval_paths"], tuple(d["seeds"]),
                                        d["measure_seed"], d["measure_iters"], d["measure_tol"], _optimizer(cfg))
    report, model, evaluator = _doorways.run_doorways_experiment(spec, budgets, _solvers(cfg))
    run.csv("coefficients.csv", _coef_header(basis.size, ("solver", "seed")),
            _coef_rows([((r.solver, r.seed), r.coefficients) for r in report.runs]))
    summary, misses = [], []
    for r in report.runs:
        m = r.misses
        summary.append([r.solver, r.seed, r.report.mean, r.report.standard_error, float(np.mean(m >= 2))])
        counts = np.bincount(m, minlength=len(spec.door_times) + 1)
        misses += [[r.solver, r.seed, k, int(c)] for k, c in enumerate(counts)]
        tag = f"{r.solver}_seed{r.seed}"
        r.report.histogram_csv(run.path(f"curves/histogram_{tag}.csv"))
        loc = _doorways.argmin_locations(model, evaluator, r.coefficients)
        run.csv(f"curves/argmin_{tag}.csv", ["n", "argmin"], enumerate(loc))
        r.report.cross_sections_csv(run.path(f"curves/cross_sections_{tag}.csv"))
    run.csv("summary.csv", ["solver", "seed", "mean", "standard_error", "miss_ge2_frequency"], summary)
    run.csv("door_misses.csv", ["solver", "seed", "doors_missed", "paths"], misses)
    for solver in report.measures:
        first = report.by_solver(solver)[0]
        xs, grid = _doorways.control_map_grid(model, evaluator, first.coefficients, budgets.optimizer)
        run.csv(f"curves/control_map_{solver}.csv", ["n", *[f"x={x:.4f}" for x in xs]],
                ([n, *row] for n, row in enumerate(grid)))
        sched = report.measures[solver]
        run.csv(f"curves/schedule_{solver}.csv", ["n", "mean", "sd"],
                ([n, c.mean[0], c.sd[0]] for n, c in enumerate(sched.components, start=1)))
    run.json("eval_report.json", {f"{r.solver}_seed{r.seed}": r.report.to_dict() for r in report.runs})
    run.json("diagnostics.json", {"measure_iteration": report.measure_info,
                                  "runs": {f"{r.solver}_seed{r.seed}": r.diagnostics for r in report.runs}})


def cmd_measure_tradeoff(cfg, run):
    _, spec = build_problem("two_period", cfg["problem"].get("overrides"))
    extra = cfg.get("tradeoff") or {}
    if extra:
        spec = _two_period.with_overrides(spec, extra)
    table, curves = _two_period.run_measure_tradeoff(spec)
    run.csv("tradeoff.csv", _two_period.TABLE_HEADER, _two_period.table_rows(table))
    keys = list(curves)
    run.csv("curves/cost_curves.csv", keys, zip(*[curves[k] for k in keys]))


def cmd_diagnose(cfg, run):
    model, _, basis, measure, _ = _setup(cfg)
    gram = gram_matrix(basis, measure, 1)
    gram.to_csv(run.path("gram.csv"))
    out = {"gram": gram.summary(), "basis": basis.describe(), "measure": measure.to_dict()}
    try:
        eps = projection_error(model.terminal_reward, basis, measure, gram, 1)
    except RLMCError as exc:
        eps = None
        out["epsilon_K_error"] = exc.record()
    out["epsilon_K"] = {"target": "terminal_reward", "value": eps}
    if model.transition_density is not None:
        r = estimate_r_bar(model, measure, cfg["r_bar_grid"])
        out["r_bar"] = r if math.isfinite(r) else "inf"
    else:
        out["r_bar"] = None
    if isinstance(measure, Schedule):
        out["schedule_factor"] = schedule_density_factor(measure)
    run.json("diagnose.json", out)


COMMANDS = {
    "solve": cmd_solve,
    "evaluate": cmd_evaluate,
    "bench-lq": cmd_bench_lq,
    "bench-doorways": cmd_bench_doorways,
    "measure-tradeoff": cmd_measure_tradeoff,
    "diagnose": cmd_diagnose,
}


def parser():
    p = argparse.ArgumentParser(prog="rlmc", description="Regress-later Monte Carlo experiments")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="JSON configuration file")
        s.add_argument("--seed", type=int, help="master seed (mandatory here or in the config)")
        s.add_argument("--out", help="output directory")
        s.add_argument("--threads", type=int, help="worker threads for the compiled kernel")
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    args = parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    out = args.out
    try:
        raw = read_json(args.config) if args.config else {}
        out = args.out or raw.get("out")
        cfg = resolve_config(args.command, raw, args.seed, args.out, args.threads)
    except (OSError, ValueError) as exc:
        return _fail(args.command, exc, out)
    run = Run(cfg["out"])
    cfg_out = dict(cfg, backend=BACKEND, command=args.command)
    run.json("config.json", cfg_out)
    t0 = time.perf_counter()
    try:
        COMMANDS[args.command](cfg, run)
    except (RLMCError, ValueError, FloatingPointError) as exc:
        run.manifest(args.command, "error")
        return _fail(args.command, exc, cfg["out"], run)
    run.manifest(args.command, "ok")
    log.info("%s finished in %.1fs", args.command, time.perf_counter() - t0)
    return 0


def _fail(command, exc, out, run=None):
    record = exc.record() if isinstance(exc, RLMCError) else {"kind": "error", "type": type(exc).__name__,
                                                               "message": str(exc)}
    if isinstance(exc, ConfigurationError):
        record["errors"] = exc.errors
    record["command"] = command
    if out:
        try:
            os.makedirs(out, exist_ok=True)
            write_json(os.path.join(out, "error.json"), record)
            if run is not None:
                run.files.append("error.json")
                run.manifest(command, "error")
        except OSError:
            pass
    print(jsonable_line(record), file=sys.stderr)
    return 2 if record.get("kind") == "configuration" else 1


def jsonable_line(record):
    import json

    return json.dumps(jsonable(record), sort_keys=True)


if __name__ == "__main__":
    sys.exit(main())
