"""One-step problem used to study the choice of training measure.

``X_1 = clip(X_0 + u + xi, -5, 5)`` with ``xi ~ N(0, 1)``, cost
``u^2/2 + min(1, X_1^2)``. Training measures are truncated Gaussians
``N(0, sigma^2)`` on the domain; narrower ones fit ``g`` better on their bulk
but bound the transition density more poorly.
"""
import math
from dataclasses import dataclass, replace

import numpy as np

from ..basis import MonomialBasis, gram_matrix
from ..measures import TruncatedGaussian, estimate_r_bar
from ..model import (MINIMIZE, ControlSet, LinearGaussianStep, SeparableReward, StateDomain,
                     TimeGrid, linear_gaussian_model)
from ..moments import partial_moments
from ..projection import project_exact, projection_error

KINKS = [[-1.0, 1.0]]


@dataclass(frozen=True)
class TwoPeriodSpec:
    sigmas: tuple = (2.0, 1.0, 0.5, 0.25, 0.1)
    domain: tuple = (-5.0, 5.0)
    control: tuple = (-3.0, 3.0)
    probe_x0: float = 0.5
    curve_points: int = 121
    r_bar_grid: dict = None

    def validate(self):
        errors = []
        if not self.sigmas:
            errors.append("sigmas must be nonempty")
        if any(not s > 0 for s in self.sigmas):
            errors.append("sigmas must be positive")
        if not self.domain[0] < self.probe_x0 < self.domain[1]:
            errors.append("probe_x0 must lie inside the domain")
        return errors


def terminal_cost(x):
    x = np.asarray(x, dtype=float)[..., 0]
    return np.minimum(1.0, x * x)


def build_two_period(spec=None):
    spec = spec or TwoPeriodSpec()
    u_max2 = max(spec.control[0] ** 2, spec.control[1] ** 2)
    return linear_gaussian_model(
        "two_period",
        TimeGrid(1),
        StateDomain([spec.domain[0]], [spec.domain[1]]),
        ControlSet([spec.control[0]], [spec.control[1]]),
        LinearGaussianStep.scalar(1.0, 1.0, 0.0, 1.0),
        SeparableReward(lambda n, x: np.zeros(np.shape(x)[:-1]), quad=0.5),
        terminal_cost,
        (0.5 * u_max2, 1.0),
        sense=MINIMIZE,
        params={"spec": spec.__dict__},
    )


def expected_cost(x0, u):
    """Exact ``u^2/2 + E[min(1, X_1^2)]``; clamping at +-5 never changes ``g``."""
    u = np.asarray(u, dtype=float)
    m = x0 + u
    pm = partial_moments(m, 1.0, -1.0, 1.0, 2)
    inside_mass, second = pm[..., 0], pm[..., 2]
    return 0.5 * u * u + (1.0 - inside_mass) + second


def measure_for(spec, sigma):
    box = StateDomain([spec.domain[0]], [spec.domain[1]])
    return TruncatedGaussian([0.0], [sigma], box)


def run_measure_tradeoff(spec=None):
    """Per ``sigma``: ``epsilon_3``, ``R_bar`` and projection coefficients; plus cost curves.

    Returns ``(table, curves)``. ``table`` rows are dicts with keys
    ``sigma, epsilon_3, r_bar, alpha``; ``curves`` has the control grid
    ``u``, the exact expected cost and one projected curve per sigma.
    """
    spec = spec or TwoPeriodSpec()
    model = build_two_period(spec)
    basis = MonomialBasis(model.state_domain, 2)
    u = np.linspace(spec.control[0], spec.control[1], spec.curve_points)
    x0 = np.full((len(u), 1), spec.probe_x0)
    from ..basis import CondExpEvaluator

    evaluator = CondExpEvaluator(model, basis)
    phi_hat = evaluator(0, x0, u[:, None])
    table = []
    curves = {"u": u, "exact": expected_cost(spec.probe_x0, u)}
    grid = {"x": 101, "u": 61, "y": 2001}
    grid.update(spec.r_bar_grid or {})
    for sigma in spec.sigmas:
        mu = measure_for(spec, sigma)
        gram = gram_matrix(basis, mu)
        alpha = project_exact(terminal_cost, basis, mu, gram, breakpoints=KINKS).alpha
        eps = projection_error(terminal_cost, basis, mu, gram, breakpoints=KINKS)
        r_bar = estimate_r_bar(model, mu, grid)
        table.append({"sigma": float(sigma), "epsilon_3": eps, "r_bar": r_bar, "alpha": alpha})
        curves[f"sigma={sigma:g}"] = 0.5 * u * u + phi_hat @ alpha
    return table, curves


def table_rows(table):
    for row in table:
        r = row["r_bar"]
        yield [row["sigma"], row["epsilon_3"], "inf" if math.isinf(r) else r, *row["alpha"]]


TABLE_HEADER = ["sigma", "epsilon_3", "r_bar", "alpha_1", "alpha_2", "alpha_3"]


def with_overrides(spec, overrides):
    return replace(spec, **{k: tuple(v) if isinstance(v, list) else v for k, v in overrides.items()})
