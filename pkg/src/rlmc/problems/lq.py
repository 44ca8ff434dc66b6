"""One-dimensional linear-quadratic benchmark.

Discretised dynamics ``X_{n+1} = X_n + (c + X_n + u_n)/N + xi_n/sqrt(N)``
clamped to the domain, cost ``sum (X_s^2 + u_s^2)/N + X_N^2`` (minimised),
``c = 1`` by default.
"""
import functools
import math
from dataclasses import dataclass, field, replace

import numpy as np

from ..basis import CondExpEvaluator, MonomialBasis
from ..evaluate import evaluate_policy
from ..measures import UniformBox
from ..model import (MINIMIZE, ControlSet, LinearGaussianStep, SeparableReward, StateDomain,
                     TimeGrid, linear_gaussian_model)
from ..optimize import ControlOptimizer
from ..solver_perf import PerfSolveConfig, solve_perf
from ..solver_value import ValueSolveConfig, solve_value

# Training points cover where paths from x0 in [-1, 1] travel while staying
# clear of the clamping walls, where the value is no longer quadratic.
DEFAULT_MEASURE_HALF_WIDTH = 2.5


@dataclass(frozen=True)
class LqSpec:
    N: int = 100
    domain: tuple = (-5.0, 5.0)
    control: tuple = (-10.0, 10.0)
    x0_range: tuple = (-1.0, 1.0)
    x0_points: int = 21
    drift_constant: float = 1.0

    def validate(self):
        errors = []
        if self.N < 2:
            errors.append("N must be >= 2")
        if not self.domain[0] < self.domain[1]:
            errors.append("domain must be a proper interval")
        if not self.control[0] < self.control[1]:
            errors.append("control must be a proper interval")
        return errors

    def x0_grid(self):
        return np.linspace(self.x0_range[0], self.x0_range[1], self.x0_points)


def build_lq(spec=None):
    spec = spec or LqSpec()
    N = spec.N
    lo, hi = spec.domain
    x_max2 = max(lo * lo, hi * hi)
    u_max2 = max(spec.control[0] ** 2, spec.control[1] ** 2)

    def state_cost(n, x):
        return x[..., 0] ** 2 / N

    def terminal(x):
        return np.asarray(x, dtype=float)[..., 0] ** 2

    step = LinearGaussianStep.scalar(1.0 + 1.0 / N, 1.0 / N, spec.drift_constant / N, 1.0 / math.sqrt(N))
    return linear_gaussian_model(
        "lq1",
        TimeGrid(N, 1.0),
        StateDomain([lo], [hi]),
        ControlSet([spec.control[0]], [spec.control[1]]),
        step,
        SeparableReward(state_cost, quad=1.0 / N),
        terminal,
        ((x_max2 + u_max2) / N, x_max2),
        sense=MINIMIZE,
        params={"spec": spec.__dict__},
    )


@functools.lru_cache(maxsize=64)
def _riccati(t, drift_constant, h_max=1e-4):
    """Coefficients ``(a, b, c)`` of ``V(t, x) = a x^2 + b x + c`` (``T = 1``)."""

    def rhs(y):
        a, b, _ = y
        return np.array([a * a - 2.0 * a - 1.0,
                         a * b - b - 2.0 * a * drift_constant,
                         0.25 * b * b - b * drift_constant - a])

    steps = max(1, math.ceil((1.0 - t) / h_max))
    h = (1.0 - t) / steps
    y = np.array([1.0, 0.0, 0.0])
    # backward in time: dy/d(-t) = -rhs
    for _ in range(steps):
        k1 = -rhs(y)
        k2 = -rhs(y + 0.5 * h * k1)
        k3 = -rhs(y + 0.5 * h * k2)
        k4 = -rhs(y + h * k3)
        y = y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    if not np.all(np.isfinite(y)):
        from ..exceptions import NumericalError

        raise NumericalError("Riccati integration diverged", module="problems.lq", t=t)
    return tuple(float(v) for v in y)


def riccati_coefficients(spec, t):
    return _riccati(float(t), float(spec.drift_constant))


def lq_reference_value(spec, t, x):
    """Continuous-time optimal cost ``V(t, x)`` on ``[0, 1]``."""
    if not 0.0 <= t <= 1.0:
        raise ValueError("t must lie in [0, 1]")
    a, b, c = riccati_coefficients(spec, t)
    x = np.asarray(x, dtype=float)
    return a * x * x + b * x + c


def riccati_feedback(spec, t):
    """Continuous-time optimal control ``u*(x) = -a(t) x - b(t)/2`` as ``(slope, intercept)``."""
    a, b, _ = riccati_coefficients(spec, t)
    return -a, -0.5 * b


def discrete_lq_value(spec, N=None):
    """Exact backward induction for the unclamped discrete problem.

    Returns ``(P, Q, R)`` arrays with ``V_n(x) = P_n x^2 + Q_n x + R_n``.
    """
    N = N or spec.N
    a, bu, c, s2 = 1.0 + 1.0 / N, 1.0 / N, spec.drift_constant / N, 1.0 / N
    P = np.empty(N + 1)
    Q = np.empty(N + 1)
    R = np.empty(N + 1)
    P[N], Q[N], R[N] = 1.0, 0.0, 0.0
    for n in range(N - 1, -1, -1):
        p, q, r = P[n + 1], Q[n + 1], R[n + 1]
        # minimise u^2/N + p m^2 + q m with m = a x + bu u + c
        denom = 1.0 / N + p * bu * bu
        # u = -(p bu (a x + c) + q bu / 2) / denom
        k1 = -p * bu * a / denom
        k0 = -(p * bu * c + 0.5 * q * bu) / denom
        ma, mc = a + bu * k1, c + bu * k0  # mean = ma x + mc
        P[n] = 1.0 / N + k1 * k1 / N + p * ma * ma
        Q[n] = 2 * k1 * k0 / N + 2 * p * ma * mc + q * ma
        R[n] = k0 * k0 / N + p * (mc * mc + s2) + q * mc + r
    return P, Q, R


def default_measure(spec):
    h = min(DEFAULT_MEASURE_HALF_WIDTH, -spec.domain[0], spec.domain[1])
    return UniformBox(StateDomain([-h], [h]))


@dataclass
class LqBudgets:
    M: int = 10000
    eval_paths: int = 10000
    seed: int = 20240917
    optimizer: ControlOptimizer = field(default_factory=ControlOptimizer)


@dataclass
class LqRun:
    solver: str
    coefficients: object
    diagnostics: dict
    means: np.ndarray
    standard_errors: np.ndarray


def run_lq_experiment(spec=None, solvers=("value", "performance"), basis=None, measure=None, budgets=None):
    """Relative error of each solver's policy against the continuous-time value.

    Returns ``(x0_grid, reference, runs)``; every policy is evaluated at every
    grid point with the same evaluation seed.
    """
    spec = spec or LqSpec()
    budgets = budgets or LqBudgets()
    model = build_lq(spec)
    basis = basis or MonomialBasis(model.state_domain, 2)
    measure = measure or default_measure(spec)
    evaluator = CondExpEvaluator(model, basis)
    x0s = spec.x0_grid()
    reference = lq_reference_value(spec, 0.0, x0s)
    runs = []
    for solver in solvers:
        if solver == "value":
            res = solve_value(model, basis, evaluator, measure,
                              ValueSolveConfig(budgets.M, budgets.seed, optimizer=budgets.optimizer))
        elif solver == "performance":
            res = solve_perf(model, basis, evaluator, measure,
                             PerfSolveConfig(budgets.M, budgets.seed, optimizer=budgets.optimizer))
        else:
            raise ValueError(f"unknown solver {solver!r}")
        means, ses = [], []
        for x0 in x0s:
            rep = evaluate_policy(model, res.coefficients, evaluator, [x0], budgets.eval_paths,
                                  budgets.seed, optimizer=budgets.optimizer)
            means.append(rep.mean)
            ses.append(rep.standard_error)
        runs.append(LqRun(solver, res.coefficients, res.diagnostics, np.array(means), np.array(ses)))
    return x0s, reference, runs


def error_curve_rows(x0s, reference, runs):
    """Rows ``x0, reference, <solver>_mean, <solver>_se, <solver>_rel_error, ...``."""
    header = ["x0", "reference"]
    for r in runs:
        header += [f"{r.solver}_mean", f"{r.solver}_se", f"{r.solver}_rel_error"]
    rows = []
    for i, x0 in enumerate(x0s):
        row = [x0, reference[i]]
        for r in runs:
            row += [r.means[i], r.standard_errors[i], abs(r.means[i] - reference[i]) / abs(reference[i])]
        rows.append(row)
    return header, rows


def with_overrides(spec, overrides):
    return replace(spec, **{k: tuple(v) if isinstance(v, list) else v for k, v in overrides.items()})
