"""Steering a particle through a sequence of doorways.

Dynamics ``X_{n+1} = clip(X_n + u_n/100 + xi_n/10, -2, 2)``; running cost
``b u^2`` plus ``c`` whenever the state is outside the open door at a door
time. The last door time equals ``N`` and is charged as terminal cost.
"""
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from ..basis import CondExpEvaluator, MonomialBasis
from ..evaluate import control_map_from, evaluate_policy
from ..exceptions import ConfigurationError
from ..measures import UniformBox, iterate_measure, schedule_density_factor
from ..model import (MINIMIZE, ControlSet, LinearGaussianStep, SeparableReward, StateDomain,
                     TimeGrid, linear_gaussian_model)
from ..optimize import ControlOptimizer
from ..solver_perf import PerfSolveConfig, solve_perf
from ..solver_value import ValueSolveConfig, solve_value

log = logging.getLogger(__name__)

DEFAULT_DOORS = ((-0.3, 0.3), (0.2, 0.8), (-0.8, -0.2), (-0.3, 0.3))


@dataclass(frozen=True)
class DoorwaysSpec:
    N: int = 100
    door_times: tuple = (25, 50, 75, 100)
    doors: tuple = DEFAULT_DOORS
    b: float = 1.0
    c: float = 100.0
    domain: tuple = (-2.0, 2.0)
    control: tuple = (-30.0, 30.0)
    control_scale: float = 0.01
    noise_sd: float = 0.1

    def validate(self):
        errors = []
        t = list(self.door_times)
        if len(t) != len(self.doors):
            errors.append("door_times and doors must have equal length")
        if any(b <= a for a, b in zip(t, t[1:])):
            errors.append("door_times must be strictly increasing")
        if t and (t[0] < 1 or t[-1] > self.N):
            errors.append("door_times must lie in [1, N]")
        for i, (lo, hi) in enumerate(self.doors):
            if not (self.domain[0] <= lo < hi <= self.domain[1]):
                errors.append(f"door {i + 1} must be a proper interval inside the domain")
        if self.b < 0 or self.c < 0:
            errors.append("b and c must be nonnegative")
        if not self.control[0] < self.control[1]:
            errors.append("control must be a proper interval")
        return errors


def door_penalty(spec, n, x):
    """``c * 1{x outside door i}`` at door times ``t_i = n``, else 0."""
    x = np.asarray(x, dtype=float)[..., 0]
    out = np.zeros(x.shape)
    for t, (lo, hi) in zip(spec.door_times, spec.doors):
        if t == n:
            out = out + spec.c * ((x < lo) | (x > hi))
    return out


def build_doorways(spec=None):
    spec = spec or DoorwaysSpec()
    errors = spec.validate()
    if errors:
        raise ConfigurationError("invalid doorways spec", errors=errors)
    N = spec.N
    u_max2 = max(spec.control[0] ** 2, spec.control[1] ** 2)
    running_penalty = spec.c if any(t < N for t in spec.door_times) else 0.0
    terminal_penalty = spec.c if N in spec.door_times else 0.0

    def state_cost(n, x):
        return door_penalty(spec, n, x)

    def terminal(x):
        return door_penalty(spec, N, x)

    step = LinearGaussianStep.scalar(1.0, spec.control_scale, 0.0, spec.noise_sd)
    return linear_gaussian_model(
        "doorways",
        TimeGrid(N),
        StateDomain([spec.domain[0]], [spec.domain[1]]),
        ControlSet([spec.control[0]], [spec.control[1]]),
        step,
        SeparableReward(state_cost, quad=spec.b),
        terminal,
        (spec.b * u_max2 + running_penalty, terminal_penalty),
        sense=MINIMIZE,
        params={"spec": spec.__dict__},
    )


def door_misses(spec, states):
    """Number of doors missed along each path; ``states`` is ``(M, N + 1[, 1])``."""
    states = np.asarray(states, dtype=float)
    if states.ndim == 2:
        states = states[..., None]
    misses = np.zeros(len(states), dtype=int)
    for t, (lo, hi) in zip(spec.door_times, spec.doors):
        x = states[:, t, 0]
        misses += (x < lo) | (x > hi)
    return misses


def argmin_locations(model, evaluator, coeffs, resolution=2001):
    """Minimiser over ``x`` of ``alpha_2 phi_hat_2(x, 0) + alpha_3 phi_hat_3(x, 0)`` for each epoch.

    Returned per ``n = 0 .. N-1`` using the row ``alpha^{n+1}``; the
    minimum over a fine state grid is refined by a parabola through the
    neighbouring grid values.
    """
    lo, hi = model.state_domain.lo[0], model.state_domain.hi[0]
    xs = np.linspace(lo, hi, resolution)[:, None]
    u0 = np.zeros((resolution, model.q))
    out = np.empty(model.N)
    for n in range(model.N):
        a = coeffs.alpha[n].copy()
        a[0] = 0.0
        vals = evaluator(n, xs, u0) @ a
        i = int(np.argmin(vals))
        x = xs[i, 0]
        if 0 < i < resolution - 1:
            y0, y1, y2 = vals[i - 1], vals[i], vals[i + 1]
            den = y0 - 2 * y1 + y2
            if den > 0:
                x += 0.5 * (y0 - y2) / den * (xs[1, 0] - xs[0, 0])
        out[n] = x
    return out


def control_map_grid(model, evaluator, coeffs, optimizer, x_points=81):
    """Controls on an ``(n, x)`` grid: rows ``n = 0..N-1``, columns the state grid."""
    lo, hi = model.state_domain.lo[0], model.state_domain.hi[0]
    xs = np.linspace(lo, hi, x_points)
    grid = np.empty((model.N, x_points))
    for n in range(model.N):
        grid[n] = control_map_from(coeffs, evaluator, model, n, xs[:, None], optimizer)[:, 0]
    return xs, grid


@dataclass
class DoorwaysBudgets:
    M: int = 5000
    eval_paths: int = 10000
    seeds: tuple = (1, 2, 3, 4, 5)
    measure_seed: int = 0
    measure_iters: int = 5
    measure_tol: float = 0.05
    optimizer: ControlOptimizer = field(default_factory=ControlOptimizer)


@dataclass
class SolverRun:
    solver: str
    seed: int
    coefficients: object
    diagnostics: dict
    report: object
    misses: np.ndarray


@dataclass
class DoorwaysReport:
    spec: DoorwaysSpec
    measures: dict
    measure_info: dict
    runs: list
    measure_solves: dict = field(default_factory=dict)  # diagnostics of the measure-fitting solves

    def by_solver(self, solver):
        return [r for r in self.runs if r.solver == solver]


SOLVERS = {"value": (solve_value, ValueSolveConfig), "performance": (solve_perf, PerfSolveConfig)}


def converged_measure(model, basis, evaluator, solver, budgets, x0=0.0):
    """Iterate the schedule measure for one solver, starting from uniform."""
    _, cfg_cls = SOLVERS[solver]
    cfg = cfg_cls(M=budgets.M, seed=budgets.measure_seed, optimizer=budgets.optimizer)
    return iterate_measure(model, basis, cfg, UniformBox(model.state_domain),
                           max_iters=budgets.measure_iters, tol=budgets.measure_tol, x0=[x0],
                           evaluator=evaluator, eval_paths=budgets.M, solver=solver)


def run_doorways_experiment(spec=None, budgets=None, solvers=("value", "performance"), x0=0.0):
    """Both solvers with basis ``{1, x, x^2}`` on their own converged schedule measures."""
    spec = spec or DoorwaysSpec()
    budgets = budgets or DoorwaysBudgets()
    model = build_doorways(spec)
    basis = MonomialBasis(model.state_domain, 2)
    evaluator = CondExpEvaluator(model, basis)
    measures, info, runs, fitting = {}, {}, [], {}
    for solver in solvers:
        it = converged_measure(model, basis, evaluator, solver, budgets, x0)
        # the schedule fitted after the last solve is the converged one
        measures[solver] = it.measure
        info[solver] = {"iterations": it.iterations, "converged": it.converged, "mean_changes": it.mean_changes,
                        "schedule_factor": schedule_density_factor(it.measure)}
        fitting[solver] = it.solve_diagnostics
        log.info("%s: measure iteration %d rounds, converged=%s", solver, it.iterations, it.converged)
        solve, cfg_cls = SOLVERS[solver]
        for seed in budgets.seeds:
            cfg = cfg_cls(M=budgets.M, seed=seed, optimizer=budgets.optimizer)
            res = solve(model, basis, evaluator, it.measure, cfg)
            rep = evaluate_policy(model, res.coefficients, evaluator, [x0], budgets.eval_paths, seed,
                                  optimizer=budgets.optimizer, keep_paths=True)
            runs.append(SolverRun(solver, seed, res.coefficients, res.diagnostics, rep,
                                  door_misses(spec, rep.states)))
    return DoorwaysReport(spec, measures, info, runs, fitting), model, evaluator


def with_overrides(spec, overrides):
    fixed = {}
    for k, v in overrides.items():
        if k == "doors":
            v = tuple(tuple(float(e) for e in d) for d in v)
        elif isinstance(v, list):
            v = tuple(v)
        fixed[k] = v
    return replace(spec, **fixed)
