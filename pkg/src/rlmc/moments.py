"""Moments of clamped and truncated normal variables.

For ``Y ~ N(m, s^2)`` and a clamp to ``[lo, hi]`` the power moments
``E[clip(Y, lo, hi)^p]`` are the two boundary atoms plus the partial moments
``I_p = int_lo^hi y^p pdf(y) dy``, which obey

    I_p = m I_{p-1} + (p - 1) s^2 I_{p-2} - s^2 (hi^{p-1} pdf(hi) - lo^{p-1} pdf(lo)).

When both boundaries sit more than ``INTERIOR_Z`` standard deviations away
the atoms and pdf terms are below double precision and are dropped; the
compiled kernel applies the identical rule.
"""
import numpy as np
from scipy.special import ndtr

INTERIOR_Z = 8.5
_INV_SQRT_2PI = 0.3989422804014327


def partial_moments(m, s, a, b, pmax):
    """``int_a^b y^p N(y; m, s^2) dy`` for ``p = 0..pmax``; shape ``(..., pmax + 1)``.

    ``a`` and ``b`` may be infinite.
    """
    m, s, a, b = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (m, s, a, b)))
    alpha = (a - m) / s
    beta = (b - m) / s
    cdf_b = ndtr(beta)
    cdf_a = ndtr(alpha)
    # prefer the tail that keeps precision
    mass = np.where(alpha > 0, ndtr(-alpha) - ndtr(-beta), cdf_b - cdf_a)
    pdf_a = np.where(np.isfinite(alpha), np.exp(-0.5 * np.where(np.isfinite(alpha), alpha, 0.0) ** 2) * _INV_SQRT_2PI / s, 0.0)
    pdf_b = np.where(np.isfinite(beta), np.exp(-0.5 * np.where(np.isfinite(beta), beta, 0.0) ** 2) * _INV_SQRT_2PI / s, 0.0)
    a_fin = np.where(np.isfinite(a), a, 0.0)
    b_fin = np.where(np.isfinite(b), b, 0.0)
    out = np.empty(m.shape + (pmax + 1,))
    out[..., 0] = mass
    s2 = s * s
    a_pow = np.ones_like(a_fin)
    b_pow = np.ones_like(b_fin)
    for p in range(1, pmax + 1):
        prev2 = out[..., p - 2] if p >= 2 else 0.0
        out[..., p] = m * out[..., p - 1] + (p - 1) * s2 * prev2 - s2 * (b_pow * pdf_b - a_pow * pdf_a)
        a_pow = a_pow * a_fin
        b_pow = b_pow * b_fin
    return out


def clamped_power_moments(m, s, lo, hi, pmax):
    """``E[clip(Y, lo, hi)^p]`` for ``Y ~ N(m, s^2)``, ``p = 0..pmax``."""
    m = np.asarray(m, dtype=float)
    s = np.broadcast_to(np.asarray(s, dtype=float), m.shape)
    lo = np.broadcast_to(np.asarray(lo, dtype=float), m.shape)
    hi = np.broadcast_to(np.asarray(hi, dtype=float), m.shape)
    alpha = (lo - m) / s
    beta = (hi - m) / s
    interior = (alpha < -INTERIOR_Z) & (beta > INTERIOR_Z)
    tail_lo = np.where(interior, 0.0, ndtr(alpha))
    tail_hi = np.where(interior, 0.0, ndtr(-beta))
    pdf_lo = np.where(interior, 0.0, np.exp(-0.5 * alpha * alpha) * _INV_SQRT_2PI / s)
    pdf_hi = np.where(interior, 0.0, np.exp(-0.5 * beta * beta) * _INV_SQRT_2PI / s)
    inner = np.where(interior, 1.0, 1.0 - tail_lo - tail_hi)
    out = np.empty(m.shape + (pmax + 1,))
    out[..., 0] = 1.0
    s2 = s * s
    i_prev2 = np.zeros_like(m)
    i_prev = inner
    lo_pow = np.ones_like(m)  # lo^{p-1}
    hi_pow = np.ones_like(m)
    for p in range(1, pmax + 1):
        i_cur = m * i_prev + (p - 1) * s2 * i_prev2 - s2 * (hi_pow * pdf_hi - lo_pow * pdf_lo)
        lo_pow = lo_pow * lo
        hi_pow = hi_pow * hi
        out[..., p] = i_cur + lo_pow * tail_lo + hi_pow * tail_hi
        i_prev2, i_prev = i_prev, i_cur
    return out


def gaussian_power_moments(m, s, pmax):
    """Raw moments ``E[Y^p]`` of an unclamped normal."""
    m = np.asarray(m, dtype=float)
    s2 = np.broadcast_to(np.asarray(s, dtype=float) ** 2, m.shape)
    out = np.empty(m.shape + (pmax + 1,))
    out[..., 0] = 1.0
    if pmax >= 1:
        out[..., 1] = m
    for p in range(2, pmax + 1):
        out[..., p] = m * out[..., p - 1] + (p - 1) * s2 * out[..., p - 2]
    return out


def clamped_interval_moments(m, s, lo, hi, a, b, pmax):
    """``E[clip(Y)^p 1{clip(Y) in [a, b)}]`` with the atoms at ``lo``/``hi``
    credited to the cells that contain them (``a == lo`` or ``b == hi``)."""
    part = partial_moments(m, s, a, b, pmax)
    m, a, b = np.broadcast_arrays(np.asarray(m, dtype=float), np.asarray(a, dtype=float),
                                  np.asarray(b, dtype=float))
    powers = np.arange(pmax + 1)
    tail_lo = ndtr((lo - m) / s)
    tail_hi = ndtr((m - hi) / s)
    at_lo = (a <= lo)[..., None] * (tail_lo[..., None] * np.float_power(lo, powers))
    at_hi = (b >= hi)[..., None] * (tail_hi[..., None] * np.float_power(hi, powers))
    return part + at_lo + at_hi


def truncated_power_moments(mean, sd, lo, hi, pmax):
    """Moments of ``N(mean, sd^2)`` conditioned on ``[lo, hi]``."""
    part = partial_moments(mean, sd, lo, hi, pmax)
    return part / part[..., :1]
