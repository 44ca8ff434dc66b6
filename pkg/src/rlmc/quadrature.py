"""Composite tensor Gauss-Legendre quadrature over a box."""
import itertools

import numpy as np

from .exceptions import NumericalError

DEFAULT_ORDER = 16


def _panel_nodes(edges, order):
    x, w = np.polynomial.legendre.leggauss(order)
    a = edges[:-1, None]
    b = edges[1:, None]
    half = 0.5 * (b - a)
    nodes = (a + b) * 0.5 + half * x
    weights = half * w
    return nodes.ravel(), weights.ravel()


def _axis_edges(lo, hi, breaks, level):
    pts = [lo, hi]
    if breaks is not None:
        pts.extend(float(b) for b in breaks if lo < b < hi)
    base = np.unique(np.asarray(pts, dtype=float))
    if level == 0:
        return base
    k = 2 ** level
    frac = np.arange(k) / k
    fine = (base[:-1, None] + (base[1:] - base[:-1])[:, None] * frac).ravel()
    return np.append(fine, base[-1])


def tensor_rule(box, level=0, breakpoints=None, order=DEFAULT_ORDER):
    """Nodes ``(P, d)`` and weights ``(P,)`` integrating against Lebesgue measure."""
    axes_nodes = []
    axes_weights = []
    for j in range(box.dim):
        br = None if breakpoints is None else breakpoints[j]
        edges = _axis_edges(box.lo[j], box.hi[j], br, level)
        nodes, weights = _panel_nodes(edges, order)
        axes_nodes.append(nodes)
        axes_weights.append(weights)
    if box.dim == 1:
        return axes_nodes[0][:, None], axes_weights[0]
    grids = np.meshgrid(*axes_nodes, indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=-1)
    w = axes_weights[0]
    for wj in axes_weights[1:]:
        w = np.multiply.outer(w, wj)
    return nodes, w.ravel()


def integrate(fn, box, breakpoints=None, rtol=1e-8, atol=1e-14, order=DEFAULT_ORDER,
              min_level=1, max_level=None, chunk=200_000):
    """Adaptive ``int_box fn(x) dx``; ``fn`` maps ``(P, d)`` to ``(P, ...)``.

    The panel count doubles until two successive levels agree. Returns
    ``(value, node_count)``.
    """
    if max_level is None:
        max_level = 10 if box.dim == 1 else 5
    prev = None
    for level in range(min_level, max_level + 1):
        nodes, weights = tensor_rule(box, level, breakpoints, order)
        total = None
        for start in range(0, len(weights), chunk):
            vals = np.asarray(fn(nodes[start:start + chunk]), dtype=float)
            part = np.tensordot(weights[start:start + chunk], vals, axes=(0, 0))
            total = part if total is None else total + part
        if prev is not None:
            err = np.max(np.abs(total - prev))
            scale = np.max(np.abs(total))
            if err <= max(rtol * scale, atol):
                return total, len(weights)
        prev = total
    raise NumericalError(
        "quadrature did not converge",
        module="quadrature",
        level=max_level,
        last_change=float(np.max(np.abs(total - prev))) if prev is not None else None,
    )


def product_breakpoints(*sources):
    """Merge per-axis breakpoint lists (``None`` entries are skipped)."""
    sources = [s for s in sources if s is not None]
    if not sources:
        return None
    dim = len(sources[0])
    out = []
    for j in range(dim):
        out.append(sorted(set(itertools.chain.from_iterable(s[j] for s in sources))))
    return out
