"""Controlled Markov decision problems on a compact box.

States are arrays of shape ``(..., d)`` and controls ``(..., q)``; every
callable on a model broadcasts over the leading axes. Noise enters the
dynamics as i.i.d. uniform(0, 1) vectors of length ``noise_dim`` and each
model maps them to its own noise law.
"""
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import ndtri

from .exceptions import ArgumentError, ConstructionError

MAXIMIZE = "maximize"
MINIMIZE = "minimize"


@dataclass(frozen=True)
class TimeGrid:
    num_steps: int
    horizon: Optional[float] = None

    def __post_init__(self):
        if int(self.num_steps) < 1:
            raise ConstructionError("num_steps must be >= 1", num_steps=self.num_steps)
        if self.horizon is not None and not self.horizon > 0:
            raise ConstructionError("horizon must be > 0", horizon=self.horizon)

    @property
    def dt(self):
        return (self.horizon if self.horizon is not None else 1.0) / self.num_steps


class Box:
    """Closed axis-aligned box ``[lo_i, hi_i]``."""

    def __init__(self, lo, hi):
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ConstructionError("lo and hi must be 1-d and of equal length")
        if not np.all(np.isfinite(lo)) or not np.all(np.isfinite(hi)):
            raise ConstructionError("box bounds must be finite")
        if not np.all(lo < hi):
            raise ConstructionError("box needs lo < hi in every coordinate", lo=lo.tolist(), hi=hi.tolist())
        lo.setflags(write=False)
        hi.setflags(write=False)
        self.lo = lo
        self.hi = hi

    @property
    def dim(self):
        return self.lo.size

    @property
    def volume(self):
        return float(np.prod(self.hi - self.lo))

    def contains(self, x, atol=1e-12):
        x = np.asarray(x, dtype=float)
        return np.all((x >= self.lo - atol) & (x <= self.hi + atol), axis=-1)

    def clip(self, x):
        return np.clip(x, self.lo, self.hi)

    def to_dict(self):
        return {"lo": self.lo.tolist(), "hi": self.hi.tolist()}

    def __eq__(self, other):
        return isinstance(other, Box) and np.array_equal(self.lo, other.lo) and np.array_equal(self.hi, other.hi)

    def __hash__(self):
        return hash((tuple(self.lo), tuple(self.hi)))

    def __repr__(self):
        return f"{type(self).__name__}(lo={self.lo.tolist()}, hi={self.hi.tolist()})"


class StateDomain(Box):
    pass


class ControlSet(Box):
    """Compact control box, optionally a discrete grid.

    ``resolution`` is the default number of grid points per coordinate used
    by the control search; with ``discrete=True`` the set *is* that grid.
    """

    def __init__(self, lo, hi, resolution=None, discrete=False):
        super().__init__(lo, hi)
        if resolution is not None and int(resolution) < 2:
            raise ConstructionError("control grid resolution must be >= 2", resolution=resolution)
        if discrete and resolution is None:
            raise ConstructionError("a discrete control set needs a resolution")
        self.resolution = None if resolution is None else int(resolution)
        self.discrete = bool(discrete)

    def to_dict(self):
        out = super().to_dict()
        out.update(resolution=self.resolution, discrete=self.discrete)
        return out


@dataclass(frozen=True)
class SeparableReward:
    """Running reward ``state(n, x) + quad * |u|^2 + lin . u``.

    The solvers recognise this form and can hand the control search to the
    compiled kernel.
    """

    state: Callable
    quad: float = 0.0
    lin: float = 0.0

    def control_part(self, u):
        u = np.asarray(u, dtype=float)
        return self.quad * np.sum(u * u, axis=-1) + self.lin * np.sum(u, axis=-1)

    def __call__(self, n, x, u):
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        return self.state(n, x) + self.control_part(u)


@dataclass(frozen=True)
class LinearGaussianStep:
    """Pre-clamp step ``x' = A x + B u + c + sd * z`` with ``z ~ N(0, I)``."""

    state_coef: np.ndarray
    control_coef: np.ndarray
    drift: np.ndarray
    sd: np.ndarray

    @classmethod
    def scalar(cls, state_coef, control_coef, drift, sd):
        return cls(
            np.array([[float(state_coef)]]),
            np.array([[float(control_coef)]]),
            np.array([float(drift)]),
            np.array([float(sd)]),
        )

    def mean(self, x, u):
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        return x @ self.state_coef.T + u @ self.control_coef.T + self.drift

    def is_scalar(self):
        return self.state_coef.shape == (1, 1) and self.control_coef.shape == (1, 1)


@dataclass(frozen=True)
class ControlledModel:
    """A finite-horizon controlled Markov problem.

    ``transition(n, x, xi, u)`` is the raw dynamics; :meth:`step` clamps its
    output into ``state_domain``. ``gaussian``, when set, declares that the
    raw dynamics are :class:`LinearGaussianStep` driven by ``ndtri(xi)``, which
    enables closed-form conditional expectations and the compiled kernel.
    """

    name: str
    time_grid: TimeGrid
    state_domain: StateDomain
    control_set: ControlSet
    noise_dim: int
    transition: Callable
    running_reward: Callable
    terminal_reward: Callable
    reward_bounds: tuple
    sense: str = MAXIMIZE
    gaussian: Optional[LinearGaussianStep] = None
    transition_density: Optional[Callable] = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.sense not in (MAXIMIZE, MINIMIZE):
            raise ConstructionError("sense must be 'maximize' or 'minimize'", sense=self.sense)
        f_inf, g_inf = self.reward_bounds
        if f_inf < 0 or g_inf < 0:
            raise ConstructionError("reward bounds must be nonnegative")

    @property
    def N(self):
        return self.time_grid.num_steps

    @property
    def d(self):
        return self.state_domain.dim

    @property
    def q(self):
        return self.control_set.dim

    @property
    def sign(self):
        """+1 for maximisation, -1 for minimisation."""
        return 1.0 if self.sense == MAXIMIZE else -1.0

    def step(self, n, x, xi, u):
        return self.state_domain.clip(self.transition(n, x, xi, u))

    def gaussian_step(self, n, x, z, u):
        """Dynamics driven directly by standard normal ``z`` (Gaussian models only)."""
        if self.gaussian is None:
            raise ArgumentError(f"model {self.name!r} has no Gaussian step")
        x = np.asarray(x, dtype=float)
        return self.state_domain.clip(self.gaussian.mean(x, u) + self.gaussian.sd * z)


def linear_gaussian_model(name, time_grid, state_domain, control_set, step, running_reward,
                          terminal_reward, reward_bounds, sense=MAXIMIZE, params=None):
    """Build a model whose raw dynamics are a :class:`LinearGaussianStep`."""

    def transition(n, x, xi, u):
        x = np.asarray(x, dtype=float)
        return step.mean(x, u) + step.sd * ndtri(np.asarray(xi, dtype=float))

    lo, hi = state_domain.lo, state_domain.hi

    def density(n, x, u, y):
        # continuous part of the clamped law; the atoms on the boundary have no density
        y = np.asarray(y, dtype=float)
        z = (y - step.mean(np.asarray(x, dtype=float), u)) / step.sd
        dens = np.prod(np.exp(-0.5 * z * z) / (np.sqrt(2 * np.pi) * step.sd), axis=-1)
        inside = np.all((y > lo) & (y < hi), axis=-1)
        return np.where(inside, dens, 0.0)

    return ControlledModel(
        name=name,
        time_grid=time_grid,
        state_domain=state_domain,
        control_set=control_set,
        noise_dim=state_domain.dim,
        transition=transition,
        running_reward=running_reward,
        terminal_reward=terminal_reward,
        reward_bounds=tuple(float(b) for b in reward_bounds),
        sense=sense,
        gaussian=step,
        transition_density=density,
        params=dict(params or {}),
    )


def _check_time(model, n):
    if not (0 <= n < model.N):
        raise ArgumentError(f"time index {n} outside [0, {model.N})", n=n)


def step(model, n, x, xi, u):
    """One clamped transition ``x -> x'``; validates ``n`` and ``u``."""
    _check_time(model, n)
    u = np.asarray(u, dtype=float)
    if not np.all(model.control_set.contains(u)):
        raise ArgumentError("control outside the control set", n=n)
    x = np.asarray(x, dtype=float)
    if not np.all(model.state_domain.contains(x)):
        raise ArgumentError("state outside the state domain", n=n)
    return model.step(n, x, np.asarray(xi, dtype=float), u)


def pathwise_performance(model, n, states, controls):
    """``sum_{s=n}^{N-1} f(s, x_s, u_s) + g(x_N)`` for one path (or a batch).

    ``states`` has shape ``(N - n + 1, ..., d)`` and ``controls``
    ``(N - n, ..., q)``; leading batch axes after the time axis are kept.
    """
    states = np.asarray(states, dtype=float)
    controls = np.asarray(controls, dtype=float)
    if states.ndim == 1:
        states = states[:, None]
    if controls.ndim == 1:
        controls = controls[:, None]
    if states.shape[0] != model.N - n + 1 or controls.shape[0] != model.N - n:
        raise ArgumentError(
            f"expected {model.N - n + 1} states and {model.N - n} controls, "
            f"got {states.shape[0]} and {controls.shape[0]}",
            n=n,
        )
    total = np.asarray(model.terminal_reward(states[-1]), dtype=float)
    for i, s in enumerate(range(n, model.N)):
        total = total + model.running_reward(s, states[i], controls[i])
    return total


def value_bound(model):
    """Trivial bound ``(N - 1) * ||f|| + ||g||`` on the value function."""
    f_inf, g_inf = model.reward_bounds
    return (model.N - 1) * f_inf + g_inf
