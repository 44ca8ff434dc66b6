"""Regress-later performance iteration.

Each backward layer regresses the realised pathwise performance of paths
resimulated from the fresh training points under the control maps already
estimated for later epochs. No truncation is applied.
"""
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import rng as _rng
from .basis import GramCache
from .evaluate import simulate
from .exceptions import ConfigurationError
from .measures import sample_layer
from .model import value_bound
from .optimize import ControlOptimizer
from .projection import CoefficientMatrix, project_mc
from .solver_value import SolveResult, run_metadata

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PerfSolveConfig:
    M: int
    seed: int
    optimizer: ControlOptimizer = field(default_factory=ControlOptimizer)
    gamma: float = None  # unused; accepted so the two configs are interchangeable

    def validate(self, K):
        errors = []
        if int(self.M) < 1:
            errors.append("M must be >= 1")
        if self.seed is None:
            errors.append("seed is mandatory")
        if errors:
            raise ConfigurationError("invalid solver configuration", errors=errors)


def solve_perf(model, basis, evaluator, measure, config):
    """Backward performance iteration; returns coefficients and per-layer variance."""
    config.validate(basis.size)
    t0 = time.perf_counter()
    N, M = model.N, int(config.M)
    bound = value_bound(model)
    grams = GramCache(basis, measure)
    alpha = np.zeros((N, basis.size))
    layers = []

    x_next = sample_layer(measure, N, M, config.seed)
    j_next = np.asarray(model.terminal_reward(x_next), dtype=float)
    layers.append(_stats(N, j_next, bound))
    for n in range(N - 1, -1, -1):
        alpha[n] = project_mc(x_next, j_next, grams(n + 1), n=n + 1).alpha
        x = sample_layer(measure, n, M, config.seed)
        gen = _rng.generator(config.seed, _rng.RESIM, n)
        perf, _, _ = simulate(model, alpha, evaluator, config.optimizer, n, x, gen, module="solver_perf")
        layers.append(_stats(n, perf, bound))
        x_next, j_next = x, perf
    layers.reverse()
    elapsed = time.perf_counter() - t0
    diagnostics = {
        "solver": "performance",
        "value_bound": bound,
        "wall_time": elapsed,
        "layers": layers,
        "gram": grams(1).summary(),
    }
    meta = run_metadata("performance", model, basis, measure, evaluator, config)
    log.info("performance iteration finished in %.2fs", elapsed)
    return SolveResult(CoefficientMatrix(alpha, meta), diagnostics, (x_next, j_next))


def _stats(n, perf, bound):
    return {
        "n": n,
        "target_variance": float(perf.var()),
        "value_min": float(perf.min()),
        "value_max": float(perf.max()),
        "max_abs": float(np.abs(perf).max()),
        "within_bound": bool(np.all(np.abs(perf) <= bound)),
    }
