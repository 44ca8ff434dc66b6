"""Control search: uniform grid over the control box plus local refinement.

Ties go to the lexicographically smallest control. Problems with a
one-dimensional linear-Gaussian step, a polynomial basis and a
:class:`~rlmc.model.SeparableReward` run through the compiled kernel; all
others use the vectorised numpy search below, which follows the same rules.
"""
import itertools
from dataclasses import dataclass

import numpy as np

from . import kernels
from .exceptions import NumericalError
from .model import SeparableReward

DEFAULT_GRID = 33
_CHUNK_ELEMENTS = 4_000_000


@dataclass(frozen=True)
class ControlOptimizer:
    grid: int = None
    refine_steps: int = 2
    shrink: int = 4
    threads: int = 1
    use_kernel: bool = True

    def settings(self, control_set):
        if control_set.discrete:
            return control_set.resolution, 0
        grid = self.grid or control_set.resolution or DEFAULT_GRID
        return int(grid), int(self.refine_steps)

    def to_dict(self):
        return {"grid": self.grid, "refine_steps": self.refine_steps, "shrink": self.shrink}

    def argmax(self, model, evaluator, n, x, alpha, module="optimize"):
        """Best control and attained objective ``f(n, x, u) + alpha . phi_hat^n(x, u)``.

        ``x`` is ``(M, d)``; returns ``u`` of shape ``(M, q)`` and values ``(M,)``.
        """
        x = np.asarray(x, dtype=float)
        alpha = np.asarray(alpha, dtype=float)
        if self.use_kernel and kernel_eligible(model, evaluator):
            u, val = self._kernel_argmax(model, evaluator, n, x, alpha)
        else:
            u, val = self._numpy_argmax(model, evaluator, n, x, alpha)
        bad = np.flatnonzero(~np.isfinite(val))
        if bad.size:
            raise NumericalError("non-finite optimal objective", module=module, n=n, m=int(bad[0]))
        return u, val

    def _kernel_argmax(self, model, evaluator, n, x, alpha):
        g = model.gaussian
        reward = model.running_reward
        n_grid, n_refine = self.settings(model.control_set)
        gamma = np.ascontiguousarray(evaluator.basis.power_series(alpha))
        mean0 = np.ascontiguousarray(x[:, 0] * g.state_coef[0, 0] + g.drift[0])
        u = np.empty(len(x))
        obj = np.empty(len(x))
        kernels.argmax_poly(mean0, float(g.control_coef[0, 0]), float(g.sd[0]),
                            float(model.state_domain.lo[0]), float(model.state_domain.hi[0]),
                            gamma, float(reward.quad), float(reward.lin), model.sign,
                            float(model.control_set.lo[0]), float(model.control_set.hi[0]),
                            n_grid, n_refine, int(self.shrink), u, obj, int(self.threads))
        return u[:, None], reward.state(n, x) + obj

    def _numpy_argmax(self, model, evaluator, n, x, alpha):
        cs = model.control_set
        n_grid, n_refine = self.settings(cs)
        q = model.q
        h = (cs.hi - cs.lo) / (n_grid - 1)
        axes = []
        for j in range(q):
            a = cs.lo[j] + np.arange(n_grid) * h[j]
            a[-1] = cs.hi[j]
            axes.append(a)
        grid = np.array(list(itertools.product(*axes)))  # lexicographic order
        offsets = np.array(list(itertools.product(range(-self.shrink, self.shrink + 1), repeat=q)), dtype=float)
        M = len(x)
        u_best = np.empty((M, q))
        v_best = np.empty(M)
        per_point = max(len(grid), len(offsets)) * max(evaluator.K, 1) * _evaluator_width(evaluator)
        chunk = max(1, _CHUNK_ELEMENTS // per_point)
        for s in range(0, M, chunk):
            xs = x[s : s + chunk]
            cand = np.broadcast_to(grid, (len(xs),) + grid.shape)
            ub, vb = self._pick(model, evaluator, n, xs, cand, alpha)
            step = h.copy()
            for _ in range(n_refine):
                step = step / self.shrink
                cand = np.clip(ub[:, None, :] + offsets * step, cs.lo, cs.hi)
                ub, vb = self._pick(model, evaluator, n, xs, cand, alpha)
            u_best[s : s + chunk] = ub
            v_best[s : s + chunk] = vb
        return u_best, v_best

    @staticmethod
    def _pick(model, evaluator, n, x, cand, alpha):
        xb = x[:, None, :]
        val = model.running_reward(n, xb, cand) + evaluator(n, xb, cand) @ alpha
        signed = model.sign * val
        signed = np.where(np.isnan(signed), -np.inf, signed)
        # lexicographic tie-break: among maximisers take the smallest candidate
        best = signed.max(axis=1, keepdims=True)
        ties = signed == best
        cand_order = np.lexsort(cand.transpose(2, 0, 1)[::-1], axis=-1) if cand.shape[-1] > 1 else np.argsort(cand[..., 0], axis=1, kind="stable")
        ranked = np.take_along_axis(ties, cand_order, axis=1)
        first = np.take_along_axis(cand_order, np.argmax(ranked, axis=1)[:, None], axis=1)[:, 0]
        rows = np.arange(len(x))
        return cand[rows, first], val[rows, first]


def _evaluator_width(evaluator):
    if evaluator.strategy == "gauss_hermite":
        return len(evaluator._weights)
    if evaluator.strategy == "inner_monte_carlo":
        return evaluator.samples
    return 1


def kernel_eligible(model, evaluator):
    return (evaluator.kernel_ready and isinstance(model.running_reward, SeparableReward)
            and evaluator.model is model)


def bellman_target(n, x, alpha_next, model, evaluator, optimizer=None):
    """Pre-truncation ``sup_u {f(n, x, u) + alpha_next . phi_hat^n(x, u)}`` and its maximiser."""
    optimizer = optimizer or ControlOptimizer()
    x = np.atleast_2d(np.asarray(x, dtype=float))
    u, val = optimizer.argmax(model, evaluator, n, x, alpha_next, module="bellman_target")
    return val, u
