"""Regress-later value iteration with truncation at +-Gamma."""
import logging
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .basis import GramCache
from .exceptions import ConfigurationError
from .measures import sample_layer
from .model import value_bound
from .optimize import ControlOptimizer, bellman_target
from .projection import CoefficientMatrix, project_mc

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ValueSolveConfig:
    M: int
    seed: int
    gamma: float = None
    optimizer: ControlOptimizer = field(default_factory=ControlOptimizer)

    def validate(self, K):
        errors = []
        if int(self.M) < 1:
            errors.append("M must be >= 1")
        if self.gamma is not None and not self.gamma > 0:
            errors.append("gamma must be > 0")
        if self.seed is None:
            errors.append("seed is mandatory")
        if errors:
            raise ConfigurationError("invalid solver configuration", errors=errors)
        if self.M < K:
            warnings.warn(f"M={self.M} < K={K}: coefficients will be high-variance", stacklevel=3)


@dataclass
class SolveResult:
    coefficients: CoefficientMatrix
    diagnostics: dict
    layer0: tuple = None  # (points, stored values) of the last layer drawn


def run_metadata(kind, model, basis, measure, evaluator, config, **extra):
    meta = {
        "solver": kind,
        "problem": model.name,
        "sense": model.sense,
        "basis": basis.describe(),
        "measure": measure.to_dict(),
        "evaluator": evaluator.describe(),
        "seed": int(config.seed),
        "M": int(config.M),
        "K": int(basis.size),
        "N": int(model.N),
        "optimizer": config.optimizer.to_dict(),
    }
    meta.update(extra)
    return meta


def solve_value(model, basis, evaluator, measure, config):
    """Backward value iteration; returns coefficients ``alpha^1..alpha^N`` and diagnostics."""
    config.validate(basis.size)
    t0 = time.perf_counter()
    N, M = model.N, int(config.M)
    gamma = float(config.gamma) if config.gamma is not None else value_bound(model)
    grams = GramCache(basis, measure)
    alpha = np.zeros((N, basis.size))
    layers = []

    x_next = sample_layer(measure, N, M, config.seed)
    v_next = np.asarray(model.terminal_reward(x_next), dtype=float)
    layers.append(_layer_stats(N, v_next, 0.0, gamma))
    for n in range(N - 1, -1, -1):
        coef = project_mc(x_next, v_next, grams(n + 1), n=n + 1).alpha
        alpha[n] = coef
        x = sample_layer(measure, n, M, config.seed)
        raw, u = bellman_target(n, x, coef, model, evaluator, config.optimizer)
        clamped = np.clip(raw, -gamma, gamma)
        hit = float(np.mean(clamped != raw))
        stats = _layer_stats(n, clamped, hit, gamma, raw)
        stats["control_at_bound_fraction"] = control_at_bound(model, u)
        layers.append(stats)
        x_next, v_next = x, clamped
    layers.reverse()
    elapsed = time.perf_counter() - t0
    diagnostics = {
        "solver": "value",
        "gamma": gamma,
        "wall_time": elapsed,
        "layers": layers,
        "gram": grams(1).summary(),
    }
    meta = run_metadata("value", model, basis, measure, evaluator, config, gamma=gamma)
    log.info("value iteration finished in %.2fs", elapsed)
    return SolveResult(CoefficientMatrix(alpha, meta), diagnostics, (x_next, v_next))


def control_at_bound(model, u):
    cs = model.control_set
    return float(np.mean(np.any((u <= cs.lo) | (u >= cs.hi), axis=-1)))


def _layer_stats(n, values, hit, gamma, raw=None):
    raw = values if raw is None else raw
    return {
        "n": n,
        "truncation_fraction": hit,
        "value_min": float(values.min()),
        "value_max": float(values.max()),
        "raw_min": float(raw.min()),
        "raw_max": float(raw.max()),
        "target_variance": float(values.var()),
        "within_gamma": bool(np.all(np.abs(values) <= gamma)),
    }
