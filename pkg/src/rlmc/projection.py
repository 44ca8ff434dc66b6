"""Exact and Monte Carlo projections onto the span of a basis."""
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ArgumentError, DataError
from .io import read_csv, read_json, write_json, write_matrix_csv
from .quadrature import integrate, product_breakpoints


@dataclass
class CoefficientVector:
    alpha: np.ndarray
    M: int
    n: int = None


@dataclass
class CoefficientMatrix:
    """Regression coefficients per epoch; row ``n - 1`` holds ``alpha^n``, ``n = 1..N``.

    ``alpha^{n+1}`` is the row used when deciding at epoch ``n``.
    """

    alpha: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def N(self):
        return self.alpha.shape[0]

    @property
    def K(self):
        return self.alpha.shape[1]

    def row(self, n):
        """``alpha^n`` for ``n = 1..N``."""
        if not 1 <= n <= self.N:
            raise ArgumentError(f"coefficient row {n} outside 1..{self.N}")
        return self.alpha[n - 1]

    def to_csv(self, path):
        header = [f"alpha_{k + 1}" for k in range(self.K)]
        write_matrix_csv(path, self.alpha, header, index=range(1, self.N + 1), index_name="n")

    def to_json(self, path):
        write_json(path, {"alpha": self.alpha, "meta": self.meta})

    @classmethod
    def from_json(cls, path):
        doc = read_json(path)
        return cls(np.asarray(doc["alpha"], dtype=float), doc.get("meta", {}))

    @classmethod
    def from_csv(cls, path, meta=None):
        _, rows = read_csv(path)
        alpha = np.array([[float(v) for v in r[1:]] for r in rows])
        return cls(alpha, dict(meta or {}))


def moment_vector(points, values, basis):
    """``(1/M) sum_m values_m phi(points_m)`` in a fixed summation order."""
    phi = basis(points)
    return (phi * values[:, None]).sum(axis=0) / len(values)


def project_mc(points, values, gram, n=None):
    """Monte Carlo projection ``alpha_hat = A^{-1} (1/M) sum h(x_m) phi(x_m)``."""
    points = np.asarray(points, dtype=float)
    values = np.asarray(values, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    if len(values) < 1 or len(values) != len(points):
        raise ArgumentError("need M >= 1 points with one value each")
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise DataError("non-finite regression target", module="projection", n=n, m=int(bad[0]))
    b = moment_vector(points, values, gram.basis)
    return CoefficientVector(gram.solve(b), len(values), n)


def _breaks(basis, measure, n, extra):
    return product_breakpoints(basis.breakpoints(), measure.breakpoints(n), extra)


def inner_products(h, basis, measure, n=1, breakpoints=None, rtol=1e-10):
    """``<h, phi>_mu`` by adaptive quadrature."""

    def integrand(x):
        return basis(x) * (np.asarray(h(x), dtype=float) * measure.density(n, x))[:, None]

    val, _ = integrate(integrand, measure.box, breakpoints=_breaks(basis, measure, n, breakpoints), rtol=rtol)
    return val


def project_exact(h, basis, measure, gram, n=1, breakpoints=None):
    """``alpha = A^{-1} <h, phi>_mu``; ``breakpoints`` lists kinks of ``h`` per axis."""
    return CoefficientVector(gram.solve(inner_products(h, basis, measure, n, breakpoints)), 0, n)


def projection_error(h, basis, measure, gram, n=1, breakpoints=None):
    """``|| Pi_K h - h ||`` in ``L^2(mu)``."""
    alpha = project_exact(h, basis, measure, gram, n, breakpoints).alpha

    def integrand(x):
        r = basis(x) @ alpha - np.asarray(h(x), dtype=float)
        return r * r * measure.density(n, x)

    val, _ = integrate(integrand, measure.box, breakpoints=_breaks(basis, measure, n, breakpoints),
                       rtol=1e-10, atol=1e-30)
    return float(np.sqrt(max(float(val), 0.0)))
