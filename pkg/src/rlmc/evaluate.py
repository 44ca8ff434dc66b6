"""Forward Monte Carlo evaluation of the policy induced by a coefficient matrix."""
from dataclasses import dataclass, field

import numpy as np

from . import rng as _rng
from .exceptions import ArgumentError, NumericalError
from .io import write_csv, write_json
from .optimize import ControlOptimizer


def control_map_from(coeffs, evaluator, model, s, x, optimizer=None):
    """``argmax_u {f(s, x, u) + alpha^{s+1} . phi_hat^s(x, u)}`` (``argmin`` for costs)."""
    if not 0 <= s < model.N:
        raise ArgumentError(f"time index {s} outside [0, {model.N})", n=s)
    optimizer = optimizer or ControlOptimizer()
    alpha = coeffs.row(s + 1) if hasattr(coeffs, "row") else np.asarray(coeffs)[s]
    x = np.atleast_2d(np.asarray(x, dtype=float))
    u, _ = optimizer.argmax(model, evaluator, s, x, alpha, module="control_map")
    return u


def simulate(model, alpha, evaluator, optimizer, start, x, generator, keep_paths=False, module="evaluate"):
    """Run controlled paths from epoch ``start`` to ``N``.

    ``alpha`` is the ``(N, K)`` coefficient array (row ``s`` is ``alpha^{s+1}``).
    Noise for step ``s`` is one ``(M, noise_dim)`` uniform draw from
    ``generator``. Returns pathwise performances and, optionally, the states
    ``(M, N - start + 1, d)`` and controls ``(M, N - start, q)``.
    """
    x = np.array(x, dtype=float)
    M = len(x)
    total = np.zeros(M)
    states = controls = None
    if keep_paths:
        states = np.empty((M, model.N - start + 1, model.d))
        controls = np.empty((M, model.N - start, model.q))
        states[:, 0] = x
    for s in range(start, model.N):
        try:
            u, _ = optimizer.argmax(model, evaluator, s, x, alpha[s], module=module)
        except NumericalError as exc:
            exc.context.setdefault("n", s)
            raise
        total += model.running_reward(s, x, u)
        xi = generator.random((M, model.noise_dim))
        x = model.step(s, x, xi, u)
        if keep_paths:
            controls[:, s - start] = u
            states[:, s - start + 1] = x
    total += model.terminal_reward(x)
    return total, states, controls


@dataclass
class EvaluationReport:
    mean: float
    standard_error: float
    paths: int
    bin_edges: np.ndarray
    counts: np.ndarray
    seed: int
    x0: np.ndarray
    samples: np.ndarray = field(repr=False)
    states: np.ndarray = field(default=None, repr=False)
    controls: np.ndarray = field(default=None, repr=False)

    def to_dict(self):
        return {
            "mean": self.mean,
            "standard_error": self.standard_error,
            "paths": self.paths,
            "seed": self.seed,
            "x0": self.x0,
            "histogram": {"bin_edges": self.bin_edges, "counts": self.counts},
        }

    def to_json(self, path):
        write_json(path, self.to_dict())

    def histogram_csv(self, path):
        rows = zip(self.bin_edges[:-1], self.bin_edges[1:], self.counts)
        write_csv(path, ["left", "right", "count"], rows)

    def cross_sections_csv(self, path, axis=0):
        if self.states is None:
            raise ArgumentError("paths were not retained")
        sec = self.states[..., axis]
        write_csv(path, ["n", "mean", "sd", "min", "max"],
                  ((n, c.mean(), c.std(), c.min(), c.max()) for n, c in enumerate(sec.T)))


def histogram(samples, bins="fd"):
    samples = np.asarray(samples, dtype=float)
    if np.ptp(samples) == 0:
        v = samples[0]
        return np.array([v - 0.5, v + 0.5]), np.array([len(samples)])
    counts, edges = np.histogram(samples, bins=bins)
    return edges, counts


def evaluate_policy(model, coeffs, evaluator, x0, paths, seed, optimizer=None, bins="fd", keep_paths=False):
    """Mean pathwise performance of ``paths`` controlled trajectories from ``x0``."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if x0.shape != (model.d,):
        raise ArgumentError(f"x0 must have dimension {model.d}")
    if not model.state_domain.contains(x0):
        raise ArgumentError("x0 outside the state domain")
    if int(paths) < 1:
        raise ArgumentError("need at least one path")
    optimizer = optimizer or ControlOptimizer()
    alpha = coeffs.alpha if hasattr(coeffs, "alpha") else np.asarray(coeffs)
    gen = _rng.generator(seed, _rng.EVAL, 0)
    start = np.broadcast_to(x0, (int(paths), model.d))
    perf, states, controls = simulate(model, alpha, evaluator, optimizer, 0, start, gen, keep_paths)
    mean = float(perf.mean())
    se = float(perf.std(ddof=1) / np.sqrt(len(perf))) if len(perf) > 1 else 0.0
    edges, counts = histogram(perf, bins)
    return EvaluationReport(mean, se, int(paths), edges, counts, int(seed), x0, perf, states, controls)
