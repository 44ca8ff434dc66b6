"""Training measures, their diagnostics and the schedule-fitting heuristic."""
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import log_ndtr, ndtr, ndtri

from . import rng as _rng
from .exceptions import ArgumentError, CapabilityError, ConfigurationError, ConstructionError
from .model import Box
from .moments import partial_moments, truncated_power_moments

log = logging.getLogger(__name__)

_LOG_SQRT_2PI = 0.5 * math.log(2 * math.pi)
_LOG_MAX = math.log(np.finfo(float).max)


class TrainingMeasure:
    """Base class. Product measures on ``box``; ``n`` selects the time component."""

    kind = None

    def __init__(self, box):
        if not isinstance(box, Box):
            box = Box(*box)
        self.box = box

    @property
    def dim(self):
        return self.box.dim

    def component(self, n):
        return self

    def sample(self, n, M, generator):
        raise NotImplementedError

    def log_density(self, n, x):
        raise NotImplementedError

    def density(self, n, x):
        return np.exp(self.log_density(n, x))

    def axis_cdf(self, n, axis, t):
        raise NotImplementedError

    def power_moments(self, n, pmax):
        """``E[x_j^p]`` as a ``(d, pmax + 1)`` array."""
        raise NotImplementedError

    def interval_moments(self, n, axis, a, b, pmax):
        """``E[x_j^p 1{a <= x_j < b}]`` for ``p = 0..pmax``."""
        raise NotImplementedError

    def breakpoints(self, n):
        return [[] for _ in range(self.dim)]

    def to_dict(self):
        raise NotImplementedError


class UniformBox(TrainingMeasure):
    kind = "uniform_box"

    def sample(self, n, M, generator):
        u = generator.random((M, self.dim))
        return self.box.lo + (self.box.hi - self.box.lo) * u

    def log_density(self, n, x):
        x = np.asarray(x, dtype=float)
        inside = self.box.contains(x)
        return np.where(inside, -math.log(self.box.volume), -np.inf)

    def axis_cdf(self, n, axis, t):
        lo, hi = self.box.lo[axis], self.box.hi[axis]
        return np.clip((np.asarray(t, dtype=float) - lo) / (hi - lo), 0.0, 1.0)

    def power_moments(self, n, pmax):
        p = np.arange(pmax + 1)
        lo, hi = self.box.lo[:, None], self.box.hi[:, None]
        return (np.float_power(hi, p + 1) - np.float_power(lo, p + 1)) / ((p + 1) * (hi - lo))

    def interval_moments(self, n, axis, a, b, pmax):
        p = np.arange(pmax + 1)
        lo, hi = self.box.lo[axis], self.box.hi[axis]
        a, b = max(a, lo), min(b, hi)
        return (np.float_power(b, p + 1) - np.float_power(a, p + 1)) / ((p + 1) * (hi - lo))

    def to_dict(self):
        return {"kind": self.kind, "box": self.box.to_dict()}


class TruncatedGaussian(TrainingMeasure):
    """Independent normals ``N(mean_j, sd_j^2)`` truncated to the box."""

    kind = "truncated_gaussian"

    def __init__(self, mean, sd, box):
        super().__init__(box)
        mean = np.broadcast_to(np.asarray(mean, dtype=float), (self.dim,)).copy()
        sd = np.broadcast_to(np.asarray(sd, dtype=float), (self.dim,)).copy()
        if not np.all(sd > 0):
            raise ConstructionError("truncated_gaussian needs sd > 0", sd=sd.tolist())
        self.mean = mean
        self.sd = sd
        self._alpha = (self.box.lo - mean) / sd
        self._beta = (self.box.hi - mean) / sd
        # log of the normalising mass, computed on the side that keeps precision
        self._log_mass = np.array([_log_mass(a, b) for a, b in zip(self._alpha, self._beta)])

    def sample(self, n, M, generator):
        u = generator.random((M, self.dim))
        out = np.empty((M, self.dim))
        for j in range(self.dim):
            a, b = self._alpha[j], self._beta[j]
            if a > 0:
                # upper tail: invert the survival function instead
                sa, sb = ndtr(-a), ndtr(-b)
                z = -ndtri(sa - u[:, j] * (sa - sb))
            else:
                ca, cb = ndtr(a), ndtr(b)
                z = ndtri(ca + u[:, j] * (cb - ca))
            out[:, j] = np.clip(self.mean[j] + self.sd[j] * z, self.box.lo[j], self.box.hi[j])
        return out

    def log_density(self, n, x):
        x = np.asarray(x, dtype=float)
        z = (x - self.mean) / self.sd
        per_axis = -0.5 * z * z - _LOG_SQRT_2PI - np.log(self.sd) - self._log_mass
        inside = self.box.contains(x)
        return np.where(inside, np.sum(per_axis, axis=-1), -np.inf)

    def axis_cdf(self, n, axis, t):
        t = np.clip(np.asarray(t, dtype=float), self.box.lo[axis], self.box.hi[axis])
        z = (t - self.mean[axis]) / self.sd[axis]
        return (ndtr(z) - ndtr(self._alpha[axis])) / math.exp(self._log_mass[axis])

    def power_moments(self, n, pmax):
        return np.stack([
            truncated_power_moments(self.mean[j], self.sd[j], self.box.lo[j], self.box.hi[j], pmax)
            for j in range(self.dim)
        ])

    def interval_moments(self, n, axis, a, b, pmax):
        lo, hi = self.box.lo[axis], self.box.hi[axis]
        a, b = max(a, lo), min(b, hi)
        part = partial_moments(self.mean[axis], self.sd[axis], a, b, pmax)
        return part / math.exp(self._log_mass[axis])

    def breakpoints(self, n):
        out = []
        for j in range(self.dim):
            pts = [self.mean[j] + k * self.sd[j] for k in (-8, -4, -2, -1, 0, 1, 2, 4, 8)]
            out.append([p for p in pts if self.box.lo[j] < p < self.box.hi[j]])
        return out

    def to_dict(self):
        return {"kind": self.kind, "mean": self.mean.tolist(), "sd": self.sd.tolist(), "box": self.box.to_dict()}


def _log_mass(a, b):
    if a > 0:
        return float(log_ndtr(-a) + np.log1p(-math.exp(log_ndtr(-b) - log_ndtr(-a))))
    if b < 0:
        return float(log_ndtr(b) + np.log1p(-math.exp(log_ndtr(a) - log_ndtr(b))))
    return float(math.log(ndtr(b) - ndtr(a)))


class Schedule(TrainingMeasure):
    """Time-dependent measure: component ``n`` (1-based) is used at layer ``n``.

    Layer 0 reuses component 1; its draws never enter a regression.
    """

    kind = "schedule"

    def __init__(self, components, flags=None):
        if not components:
            raise ConstructionError("schedule needs at least one component")
        box = components[0].box
        for c in components:
            if c.box != box:
                raise ConstructionError("schedule components must share one box")
            if isinstance(c, Schedule):
                raise ConstructionError("schedules cannot be nested")
        super().__init__(box)
        self.components = list(components)
        self.flags = dict(flags or {})

    def __len__(self):
        return len(self.components)

    def component(self, n):
        idx = min(max(int(n), 1), len(self.components)) - 1
        return self.components[idx]

    def sample(self, n, M, generator):
        return self.component(n).sample(n, M, generator)

    def log_density(self, n, x):
        return self.component(n).log_density(n, x)

    def axis_cdf(self, n, axis, t):
        return self.component(n).axis_cdf(n, axis, t)

    def power_moments(self, n, pmax):
        return self.component(n).power_moments(n, pmax)

    def interval_moments(self, n, axis, a, b, pmax):
        return self.component(n).interval_moments(n, axis, a, b, pmax)

    def breakpoints(self, n):
        return self.component(n).breakpoints(n)

    def means(self):
        return np.array([c.mean if hasattr(c, "mean") else 0.5 * (c.box.lo + c.box.hi) for c in self.components])

    def radon_nikodym_bound(self, reference=None, resolution=201):
        """``max_n sup_x dmu_n/dmu`` against ``reference`` (uniform on the box by default)."""
        reference = reference or UniformBox(self.box)
        axes = [np.linspace(lo, hi, resolution) for lo, hi in zip(self.box.lo, self.box.hi)]
        grid = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=-1)
        best = -np.inf
        for n in range(1, len(self) + 1):
            best = max(best, float(np.max(self.log_density(n, grid) - reference.log_density(n, grid))))
        return math.exp(best) if best < _LOG_MAX else math.inf

    def to_dict(self):
        out = {"kind": self.kind, "components": [c.to_dict() for c in self.components]}
        if self.flags:
            out["flags"] = self.flags
        return out


def measure_from_dict(spec, default_box=None):
    """Build a measure from its JSON form (as written by ``to_dict``)."""
    kind = spec.get("kind")
    allowed = {"uniform_box": {"box"}, "truncated_gaussian": {"box", "mean", "sd"},
               "schedule": {"components", "flags"}}.get(kind, set()) | {"kind"}
    unknown = sorted(set(spec) - allowed)
    if unknown and kind in ("uniform_box", "truncated_gaussian", "schedule"):
        raise ConfigurationError(f"unknown fields for a {kind} measure",
                                 errors=[f"measure.{k}: unknown field" for k in unknown])
    box = spec.get("box")
    box = Box(box["lo"], box["hi"]) if box is not None else default_box
    if kind != "schedule" and box is None:
        raise ConfigurationError("measure needs a box", errors=["measure.box"])
    if kind == "uniform_box":
        return UniformBox(box)
    if kind == "truncated_gaussian":
        return TruncatedGaussian(spec.get("mean", 0.0), spec["sd"], box)
    if kind == "schedule":
        comps = [measure_from_dict(c, default_box) for c in spec["components"]]
        return Schedule(comps, flags=spec.get("flags"))
    raise ConfigurationError(f"unknown measure kind {kind!r}", errors=["measure.kind"])


def sample_layer(measure, n, M, seed):
    """The ``M`` i.i.d. training points of layer ``n`` (deterministic in ``seed, n, M``)."""
    if M < 1:
        raise ArgumentError("M must be >= 1", M=M)
    return measure.sample(n, int(M), _rng.generator(seed, _rng.TRAIN, n))


def density(measure, n, x):
    x = np.asarray(x, dtype=float)
    if not np.all(measure.box.contains(x)):
        raise ArgumentError("point outside the measure's box", n=n)
    return measure.density(n, x)


@dataclass
class MeasureDiagnostics:
    epsilon_K: float
    r_bar: float
    grid_resolution: dict
    schedule_factor: float = None

    def to_dict(self):
        return {k: (None if v is None else (v if not isinstance(v, float) or math.isfinite(v) else "inf"))
                for k, v in self.__dict__.items()}


def _grid(box, points):
    axes = [np.linspace(lo, hi, points) for lo, hi in zip(box.lo, box.hi)]
    return np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=-1)


def estimate_r_bar(model, measure, grid_spec=None):
    """Grid estimate of ``R = sqrt(sup p(y | n, x, u) / mu_{n+1}(y))``.

    ``grid_spec`` keys: ``x``, ``u``, ``y`` (points per axis, default 201) and
    ``times`` (decision epochs, default all). Returns ``math.inf`` when the
    supremum overflows double precision.
    """
    if model.transition_density is None:
        raise CapabilityError(f"model {model.name!r} exposes no transition density")
    spec = {"x": 201, "u": 201, "y": 201, "times": None}
    spec.update(grid_spec or {})
    times = spec["times"] if spec["times"] is not None else range(model.N)
    xs = _grid(model.state_domain, spec["x"])
    us = _grid(model.control_set, spec["u"])
    ys = _grid(model.state_domain, spec["y"])
    best = -np.inf
    for n in times:
        log_mu = measure.log_density(n + 1, ys)
        for x in xs:
            xx = np.broadcast_to(x, (len(us), x.size))
            with np.errstate(divide="ignore", invalid="ignore"):
                log_p = np.log(model.transition_density(n, xx[:, None, :], us[:, None, :], ys[None, :, :]))
                # mass where mu vanishes makes the ratio infinite; no mass contributes nothing
                ratio = log_p - log_mu[None, :]
            ratio = np.where(np.isneginf(log_p), -np.inf, ratio)
            best = max(best, float(np.max(ratio)))
    if best >= _LOG_MAX or math.isnan(best):
        return math.inf
    return math.exp(0.5 * best)


def schedule_density_factor(measure, reference=None, points=2001):
    """``max_n sup_y mu_n(y) / reference(y)``, by default against the uniform law on the box.

    This is the factor by which ``R_bar`` grows when a schedule replaces a
    single training measure. Evaluated on a grid plus each component's mode
    (its mean clamped to the box), where a truncated Gaussian peaks.
    """
    reference = reference or UniformBox(measure.box)
    comps = measure.components if isinstance(measure, Schedule) else [measure]
    ys = _grid(measure.box, points)
    best = -np.inf
    for n, comp in enumerate(comps, start=1):
        pts = ys
        if isinstance(comp, TruncatedGaussian):
            pts = np.vstack([ys, np.clip(comp.mean, comp.box.lo, comp.box.hi)[None, :]])
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = comp.log_density(n, pts) - reference.log_density(n, pts)
        best = max(best, float(np.nanmax(ratio)))
    return math.inf if best >= _LOG_MAX else math.exp(best)


def fit_schedule(trajectories, box, sd_floor=None):
    """Per-time truncated Gaussians fitted to the cross-sections ``n = 1..N``.

    ``trajectories`` is ``(M, N + 1)`` or ``(M, N + 1, d)``. The default sd
    floor is 5% of the box half-width; floored times are listed in
    ``schedule.flags['sd_floored']``.
    """
    if not isinstance(box, Box):
        box = Box(*box)
    traj = np.asarray(trajectories, dtype=float)
    if traj.ndim == 2:
        traj = traj[..., None]
    if traj.size == 0:
        raise ArgumentError("no trajectories to fit")
    if not np.all(box.contains(traj)):
        raise ArgumentError("trajectories leave the box")
    floor = 0.05 * 0.5 * (box.hi - box.lo) if sd_floor is None else np.broadcast_to(sd_floor, (box.dim,))
    comps = []
    floored = []
    for n in range(1, traj.shape[1]):
        section = traj[:, n, :]
        mean = section.mean(axis=0)
        sd = section.std(axis=0, ddof=1) if len(section) > 1 else np.zeros(box.dim)
        if np.any(sd < floor):
            floored.append(n)
        comps.append(TruncatedGaussian(mean, np.maximum(sd, floor), box))
    return Schedule(comps, flags={"sd_floored": floored, "sd_floor": np.asarray(floor).tolist()})


@dataclass
class MeasureIteration:
    measure: TrainingMeasure
    coefficients: object
    measure_used: TrainingMeasure
    iterations: int
    converged: bool
    mean_changes: list = field(default_factory=list)
    solve_diagnostics: list = field(default_factory=list)  # one entry per solve


def iterate_measure(model, basis, solver_config, initial_measure, max_iters=5, tol=0.05,
                    x0=None, evaluator=None, eval_paths=None, seed=None, solver="value"):
    """Alternate solve -> forward simulation -> :func:`fit_schedule`.

    Stops when successive schedule means differ by less than ``tol`` in sup
    norm, or after ``max_iters`` solves.
    """
    from .basis import CondExpEvaluator
    from .evaluate import evaluate_policy
    from .solver_perf import solve_perf
    from .solver_value import solve_value

    if max_iters < 1:
        raise ArgumentError("max_iters must be >= 1")
    evaluator = evaluator or CondExpEvaluator(model, basis)
    x0 = np.zeros(model.d) if x0 is None else np.atleast_1d(np.asarray(x0, dtype=float))
    seed = solver_config.seed if seed is None else seed
    eval_paths = eval_paths or solver_config.M
    solve = {"value": solve_value, "performance": solve_perf}[solver]

    measure = initial_measure
    prev_means = None
    changes = []
    diagnostics = []
    result = None
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        used = measure
        result = solve(model, basis, evaluator, measure, solver_config)
        diagnostics.append(result.diagnostics)
        report = evaluate_policy(model, result.coefficients, evaluator, x0, eval_paths,
                                 seed=_derived_seed(seed, it), optimizer=solver_config.optimizer,
                                 keep_paths=True)
        measure = fit_schedule(report.states, model.state_domain)
        means = measure.means()
        if prev_means is not None:
            change = float(np.max(np.abs(means - prev_means)))
            changes.append(change)
            log.info("measure iteration %d: schedule mean change %.4g", it, change)
            if change < tol:
                converged = True
                break
        prev_means = means
    return MeasureIteration(measure, result.coefficients, used, it, converged, changes, diagnostics)


def _derived_seed(seed, it):
    return int(np.random.SeedSequence(entropy=int(seed), spawn_key=(_rng.FIT, it)).generate_state(1, np.uint64)[0])
