"""Pure-numpy twin of the compiled ``_kernels`` extension."""
import numpy as np
from scipy.special import erfc

INTERIOR_Z = 8.5
_INV_SQRT_2PI = 0.3989422804014327
_INV_SQRT2 = 0.7071067811865476


def _clamped_poly(m, s, lo, hi, gamma):
    alpha = (lo - m) / s
    beta = (hi - m) / s
    interior = (alpha < -INTERIOR_Z) & (beta > INTERIOR_Z)
    with np.errstate(over="ignore", under="ignore"):
        tail_lo = np.where(interior, 0.0, 0.5 * erfc(-alpha * _INV_SQRT2))
        tail_hi = np.where(interior, 0.0, 0.5 * erfc(beta * _INV_SQRT2))
        pdf_lo = np.where(interior, 0.0, np.exp(-0.5 * alpha * alpha) * _INV_SQRT_2PI / s)
        pdf_hi = np.where(interior, 0.0, np.exp(-0.5 * beta * beta) * _INV_SQRT_2PI / s)
    inner = np.where(interior, 1.0, 1.0 - tail_lo - tail_hi)
    s2 = s * s
    total = np.full(np.shape(m), gamma[0])
    i_prev2 = 0.0
    i_prev = inner
    lo_pow = 1.0
    hi_pow = 1.0
    for p in range(1, len(gamma)):
        i_cur = m * i_prev + (p - 1) * s2 * i_prev2 - s2 * (hi_pow * pdf_hi - lo_pow * pdf_lo)
        lo_pow = lo_pow * lo
        hi_pow = hi_pow * hi
        total = total + gamma[p] * (i_cur + lo_pow * tail_lo + hi_pow * tail_hi)
        i_prev2 = i_prev
        i_prev = i_cur
    return total


def _objective(u, m0, slope, sd, lo, hi, gamma, quad, lin):
    return quad * u * u + lin * u + _clamped_poly(m0 + slope * u, sd, lo, hi, gamma)


def _pick(vals, cand):
    vals = np.where(np.isnan(vals), -np.inf, vals)
    idx = np.argmax(vals, axis=1)
    rows = np.arange(len(idx))
    return cand[rows, idx] if cand.ndim == 2 else cand[idx], vals[rows, idx]


def argmax_poly(mean0, slope, sd, lo, hi, gamma, quad, lin, sign, u_lo, u_hi,
                n_grid, n_refine, shrink, u_out, obj_out, threads=1):
    mean0 = np.asarray(mean0, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    h = (u_hi - u_lo) / (n_grid - 1)
    grid = u_lo + np.arange(n_grid) * h
    grid[-1] = u_hi
    vals = sign * _objective(grid[None, :], mean0[:, None], slope, sd, lo, hi, gamma, quad, lin)
    best_u, best = _pick(vals, grid)
    steps = np.arange(-shrink, shrink + 1)
    for _ in range(n_refine):
        h = h / shrink
        cand = np.clip(best_u[:, None] + steps * h, u_lo, u_hi)
        vals = sign * _objective(cand, mean0[:, None], slope, sd, lo, hi, gamma, quad, lin)
        best_u, best = _pick(vals, cand)
    u_out[:] = best_u
    obj_out[:] = sign * best


def clamped_poly(mean, sd, lo, hi, gamma, out):
    out[:] = _clamped_poly(np.asarray(mean, dtype=float), sd, lo, hi, np.asarray(gamma, dtype=float))
