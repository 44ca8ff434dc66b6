# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled control-search kernel.

Maximises ``sign * (quad u^2 + lin u + sum_p gamma_p E[clip(Y)^p])`` with
``Y ~ N(mean0 + slope u, sd^2)`` over a uniform control grid followed by
local refinement. Mirrors ``_kernels_py`` operation for operation.
"""
from cython.parallel cimport prange
from libc.math cimport erfc, exp, INFINITY

cdef double INTERIOR_Z = 8.5
cdef double INV_SQRT_2PI = 0.3989422804014327
cdef double INV_SQRT2 = 0.7071067811865476


cdef inline double _clamped_poly(double m, double s, double lo, double hi,
                                 const double* gamma, int P) noexcept nogil:
    cdef double alpha = (lo - m) / s
    cdef double beta = (hi - m) / s
    cdef double tail_lo, tail_hi, pdf_lo, pdf_hi, inner
    if alpha < -INTERIOR_Z and beta > INTERIOR_Z:
        tail_lo = 0.0
        tail_hi = 0.0
        pdf_lo = 0.0
        pdf_hi = 0.0
        inner = 1.0
    else:
        tail_lo = 0.5 * erfc(-alpha * INV_SQRT2)
        tail_hi = 0.5 * erfc(beta * INV_SQRT2)
        pdf_lo = exp(-0.5 * alpha * alpha) * INV_SQRT_2PI / s
        pdf_hi = exp(-0.5 * beta * beta) * INV_SQRT_2PI / s
        inner = 1.0 - tail_lo - tail_hi
    cdef double s2 = s * s
    cdef double total = gamma[0]
    cdef double i_prev2 = 0.0
    cdef double i_prev = inner
    cdef double i_cur
    cdef double lo_pow = 1.0
    cdef double hi_pow = 1.0
    cdef int p
    for p in range(1, P + 1):
        i_cur = m * i_prev + (p - 1) * s2 * i_prev2 - s2 * (hi_pow * pdf_hi - lo_pow * pdf_lo)
        lo_pow = lo_pow * lo
        hi_pow = hi_pow * hi
        total = total + gamma[p] * (i_cur + lo_pow * tail_lo + hi_pow * tail_hi)
        i_prev2 = i_prev
        i_prev = i_cur
    return total


cdef inline double _objective(double u, double m0, double slope, double sd, double lo, double hi,
                              const double* gamma, int P, double quad, double lin) noexcept nogil:
    return quad * u * u + lin * u + _clamped_poly(m0 + slope * u, sd, lo, hi, gamma, P)


cdef inline void _argmax_one(double m0, double slope, double sd, double lo, double hi,
                             const double* gamma, int P, double quad, double lin, double sign,
                             double u_lo, double u_hi, int n_grid, int n_refine, int shrink,
                             double* u_out, double* obj_out) noexcept nogil:
    cdef double h = (u_hi - u_lo) / (n_grid - 1)
    cdef double best = -INFINITY
    cdef double best_u = u_lo
    cdef double u, v, center, cur, cur_u
    cdef int g, r, k
    for g in range(n_grid):
        if g == n_grid - 1:
            u = u_hi
        else:
            u = u_lo + g * h
        v = sign * _objective(u, m0, slope, sd, lo, hi, gamma, P, quad, lin)
        if v > best:
            best = v
            best_u = u
    for r in range(n_refine):
        h = h / shrink
        center = best_u
        cur = -INFINITY
        cur_u = center
        for k in range(-shrink, shrink + 1):
            u = center + k * h
            if u < u_lo:
                u = u_lo
            elif u > u_hi:
                u = u_hi
            v = sign * _objective(u, m0, slope, sd, lo, hi, gamma, P, quad, lin)
            if v > cur:
                cur = v
                cur_u = u
        best = cur
        best_u = cur_u
    u_out[0] = best_u
    obj_out[0] = sign * best


def argmax_poly(const double[::1] mean0, double slope, double sd, double lo, double hi,
                const double[::1] gamma, double quad, double lin, double sign,
                double u_lo, double u_hi, int n_grid, int n_refine, int shrink,
                double[::1] u_out, double[::1] obj_out, int threads=1):
    cdef Py_ssize_t M = mean0.shape[0]
    cdef Py_ssize_t i
    cdef int P = gamma.shape[0] - 1
    cdef const double* gp = &gamma[0]
    if threads < 1:
        threads = 1
    for i in prange(M, nogil=True, num_threads=threads, schedule="static"):
        _argmax_one(mean0[i], slope, sd, lo, hi, gp, P, quad, lin, sign,
                    u_lo, u_hi, n_grid, n_refine, shrink, &u_out[i], &obj_out[i])


def clamped_poly(const double[::1] mean, double sd, double lo, double hi, const double[::1] gamma,
                 double[::1] out):
    cdef Py_ssize_t i
    cdef int P = gamma.shape[0] - 1
    for i in range(mean.shape[0]):
        out[i] = _clamped_poly(mean[i], sd, lo, hi, &gamma[0], P)
