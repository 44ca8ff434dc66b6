"""Three-step problem small enough for exhaustive backward induction.

``X_{n+1} = clip(X_n + u_n + 0.2 z, -1, 1)`` with five admissible controls
``{-0.4, -0.2, 0, 0.2, 0.4}``, reward ``-u^2/2 - x^2/10`` per step and
terminal reward ``2 - (x - 0.3)^2`` (maximised).
"""
from dataclasses import dataclass, replace

import numpy as np

from ..model import (MAXIMIZE, ControlSet, LinearGaussianStep, SeparableReward, StateDomain,
                     TimeGrid, linear_gaussian_model)


@dataclass(frozen=True)
class SmallDpSpec:
    N: int = 3
    domain: tuple = (-1.0, 1.0)
    control: tuple = (-0.4, 0.4)
    n_controls: int = 5
    noise_sd: float = 0.2
    target: float = 0.3

    def validate(self):
        errors = []
        if self.N < 1:
            errors.append("N must be >= 1")
        if self.n_controls < 2:
            errors.append("need at least two controls")
        if not self.noise_sd > 0:
            errors.append("noise_sd must be > 0")
        return errors

    def controls(self):
        return np.linspace(self.control[0], self.control[1], self.n_controls)


def _state_reward(n, x):
    return -0.1 * x[..., 0] ** 2


def build_small_dp(spec=None):
    spec = spec or SmallDpSpec()
    lo, hi = spec.domain
    x_max2 = max(lo * lo, hi * hi)
    u_max2 = max(spec.control[0] ** 2, spec.control[1] ** 2)
    g_max = max(abs(2.0 - (lo - spec.target) ** 2), abs(2.0 - (hi - spec.target) ** 2), 2.0)

    def terminal(x):
        x = np.asarray(x, dtype=float)[..., 0]
        return 2.0 - (x - spec.target) ** 2

    return linear_gaussian_model(
        "small_dp",
        TimeGrid(spec.N),
        StateDomain([lo], [hi]),
        ControlSet([spec.control[0]], [spec.control[1]], resolution=spec.n_controls, discrete=True),
        LinearGaussianStep.scalar(1.0, 1.0, 0.0, spec.noise_sd),
        SeparableReward(_state_reward, quad=-0.5),
        terminal,
        (0.5 * u_max2 + 0.1 * x_max2, g_max),
        sense=MAXIMIZE,
        params={"spec": spec.__dict__},
    )


def brute_force_values(spec=None, points=2001, z_points=4001, z_max=9.0):
    """Backward induction on a state grid; returns ``(grid, [V_0, ..., V_N])``.

    Expectations integrate the clamped Gaussian step on a dense trapezoid
    rule in ``z``, with linear interpolation of the next value function
    (``np.interp`` holds the end values, which is exactly the clamping).
    """
    spec = spec or SmallDpSpec()
    xs = np.linspace(spec.domain[0], spec.domain[1], points)
    z = np.linspace(-z_max, z_max, z_points)
    w = np.exp(-0.5 * z * z)
    w[0] *= 0.5
    w[-1] *= 0.5
    w /= w.sum()
    us = spec.controls()
    V = 2.0 - (xs - spec.target) ** 2
    values = [V]
    for _ in range(spec.N):
        best = np.full(points, -np.inf)
        for u in us:
            ev = np.empty(points)
            for i in range(0, points, 256):
                y = xs[i:i + 256, None] + u + spec.noise_sd * z[None, :]
                ev[i:i + 256] = np.interp(y, xs, V) @ w
            best = np.maximum(best, -0.5 * u * u + ev)
        V = best - 0.1 * xs ** 2
        values.append(V)
    values.reverse()
    return xs, values


def with_overrides(spec, overrides):
    return replace(spec, **{k: tuple(v) if isinstance(v, list) else v for k, v in overrides.items()})
