"""Basis families, Gram matrices and the regress-later conditional expectations.

Four families are provided: monomials up to a total degree, orthonormal
(shifted, scaled) Legendre polynomials, affine functions on the cells of a
hypercube partition, and a truncated Gaussian radial family.
"""
import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Legendre, Polynomial
from scipy.linalg import cho_factor, cho_solve, eigvalsh, LinAlgError

from . import rng as _rng
from .exceptions import (ArgumentError, BasisConditioningError, ConfigurationError,
                         ConstructionError)
from .model import Box
from .moments import clamped_interval_moments, clamped_power_moments
from .quadrature import integrate, product_breakpoints

JITTER_THRESHOLD = 1e-12
SPARSITY_THRESHOLD = 1e-14


class BasisFamily:
    kind = None

    def __init__(self, domain):
        if not isinstance(domain, Box):
            domain = Box(*domain)
        self.domain = domain

    @property
    def d(self):
        return self.domain.dim

    @property
    def size(self):
        raise NotImplementedError

    @property
    def K(self):
        return self.size

    def __len__(self):
        return self.size

    def __call__(self, x):
        """Evaluate all basis functions; ``(..., d) -> (..., K)``."""
        raise NotImplementedError

    def clamped_gaussian_cond_exp(self, mean, sd, lo, hi):
        """``E[phi(clip(Y))]`` for independent ``Y_j ~ N(mean_j, sd_j^2)``."""
        raise NotImplementedError

    def breakpoints(self):
        return None

    def params(self):
        raise NotImplementedError

    def describe(self):
        return {"kind": self.kind, "K": self.size, "domain": self.domain.to_dict(), **self.params()}


class PolynomialBasis(BasisFamily):
    """Products of univariate polynomials, stored as power coefficients.

    ``factors[k, j]`` holds the power coefficients (in ``x_j``) of the
    ``j``-th factor of basis function ``k``.
    """

    def __init__(self, domain, degree, factors, exponents):
        super().__init__(domain)
        self.degree = int(degree)
        self.factors = np.asarray(factors, dtype=float)
        self.exponents = [tuple(e) for e in exponents]

    @property
    def size(self):
        return self.factors.shape[0]

    def _axis_powers(self, x):
        p = np.arange(self.degree + 1)
        return np.asarray(x, dtype=float)[..., None] ** p  # (..., d, P+1)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.d:
            raise ArgumentError(f"expected states of dimension {self.d}")
        return self.from_axis_moments(self._axis_powers(x))

    def from_axis_moments(self, moments):
        """Combine per-axis power moments ``(..., d, P+1)`` into ``(..., K)``."""
        per_axis = np.einsum("...jp,kjp->...kj", moments, self.factors)
        return np.prod(per_axis, axis=-1)

    def clamped_gaussian_cond_exp(self, mean, sd, lo, hi):
        mean = np.asarray(mean, dtype=float)
        mom = clamped_power_moments(mean, sd, lo, hi, self.degree)
        return self.from_axis_moments(mom)

    def power_series(self, alpha):
        """Collapse ``sum_k alpha_k phi_k`` into one power series (1-d only)."""
        if self.d != 1:
            raise ArgumentError("power_series is defined for one-dimensional bases")
        return np.asarray(alpha, dtype=float) @ self.factors[:, 0, :]

    def params(self):
        return {"degree": self.degree}


def _total_degree_exponents(d, degree):
    out = []
    for total in range(degree + 1):
        for e in itertools.product(range(total + 1), repeat=d):
            if sum(e) == total:
                out.append(e)
    # graded order; within a degree, reverse-lexicographic so x_1 leads
    return sorted(out, key=lambda e: (sum(e), tuple(-v for v in e)))


class MonomialBasis(PolynomialBasis):
    kind = "monomial"

    def __init__(self, domain, degree):
        if int(degree) < 0:
            raise ConstructionError("degree must be >= 0", degree=degree)
        if not isinstance(domain, Box):
            domain = Box(*domain)
        exps = _total_degree_exponents(domain.dim, int(degree))
        factors = np.zeros((len(exps), domain.dim, int(degree) + 1))
        for k, e in enumerate(exps):
            for j, p in enumerate(e):
                factors[k, j, p] = 1.0
        super().__init__(domain, degree, factors, exps)


class LegendreBasis(PolynomialBasis):
    """Legendre polynomials mapped to the domain, orthonormal under the uniform law on it."""

    kind = "orthonormal_polynomial"

    def __init__(self, domain, degree):
        if int(degree) < 0:
            raise ConstructionError("degree must be >= 0", degree=degree)
        if not isinstance(domain, Box):
            domain = Box(*domain)
        degree = int(degree)
        exps = _total_degree_exponents(domain.dim, degree)
        factors = np.zeros((len(exps), domain.dim, degree + 1))
        for k, e in enumerate(exps):
            for j, p in enumerate(e):
                leg = Legendre.basis(p, domain=[domain.lo[j], domain.hi[j]])
                coef = leg.convert(kind=Polynomial).coef * math.sqrt(2 * p + 1)
                factors[k, j, : coef.size] = coef
        super().__init__(domain, degree, factors, exps)


class PiecewiseAffineBasis(BasisFamily):
    """``1{x in H_i}, x_1 1{x in H_i}, ..., x_d 1{x in H_i}`` per cell.

    Cells are the tensor product of per-axis ``edges``; each cell is
    half-open ``[a, b)`` except on the upper domain boundary.
    """

    kind = "piecewise_affine"

    def __init__(self, domain, edges):
        super().__init__(domain)
        if len(edges) != self.d:
            raise ConstructionError("need one edge list per axis")
        clean = []
        for j, e in enumerate(edges):
            e = np.asarray(e, dtype=float)
            if e.ndim != 1 or e.size < 2:
                raise ConstructionError("each axis needs at least two edges", axis=j)
            if not np.all(np.diff(e) > 0):
                raise ConstructionError("partition cells overlap or are empty (edges must increase)", axis=j)
            if not (np.isclose(e[0], self.domain.lo[j]) and np.isclose(e[-1], self.domain.hi[j])):
                raise ConstructionError("partition must cover the domain", axis=j)
            e = e.copy()
            e[0], e[-1] = self.domain.lo[j], self.domain.hi[j]
            clean.append(e)
        self.edges = clean
        self.cells_per_axis = tuple(e.size - 1 for e in clean)

    @classmethod
    def uniform(cls, domain, cells):
        if not isinstance(domain, Box):
            domain = Box(*domain)
        cells = np.broadcast_to(np.asarray(cells, dtype=int), (domain.dim,))
        edges = [np.linspace(lo, hi, c + 1) for lo, hi, c in zip(domain.lo, domain.hi, cells)]
        return cls(domain, edges)

    @property
    def n_cells(self):
        return int(np.prod(self.cells_per_axis))

    @property
    def size(self):
        return self.n_cells * (self.d + 1)

    def cell_index(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.zeros(x.shape[:-1], dtype=int)
        for j, e in enumerate(self.edges):
            c = np.searchsorted(e, x[..., j], side="right") - 1
            c = np.clip(c, 0, e.size - 2)
            idx = idx * (e.size - 1) + c
        return idx

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.d:
            raise ArgumentError(f"expected states of dimension {self.d}")
        if not np.all(self.domain.contains(x)):
            raise ArgumentError("state outside the basis domain")
        out = np.zeros(x.shape[:-1] + (self.size,))
        cell = self.cell_index(x)
        base = cell * (self.d + 1)
        np.put_along_axis(out, base[..., None], 1.0, axis=-1)
        for j in range(self.d):
            np.put_along_axis(out, (base + 1 + j)[..., None], x[..., j : j + 1], axis=-1)
        return out

    def _cell_axes(self):
        return list(itertools.product(*[range(c) for c in self.cells_per_axis]))

    def clamped_gaussian_cond_exp(self, mean, sd, lo, hi):
        mean = np.asarray(mean, dtype=float)
        sd = np.broadcast_to(np.asarray(sd, dtype=float), (self.d,))
        lo = np.broadcast_to(np.asarray(lo, dtype=float), (self.d,))
        hi = np.broadcast_to(np.asarray(hi, dtype=float), (self.d,))
        # per-axis, per-interval (mass, first moment): (..., cells_j, 2)
        axis_mom = []
        for j, e in enumerate(self.edges):
            m = mean[..., j : j + 1]
            axis_mom.append(clamped_interval_moments(m, sd[j], lo[j], hi[j], e[:-1], e[1:], 1))
        out = np.empty(mean.shape[:-1] + (self.size,))
        for c, cell in enumerate(self._cell_axes()):
            mass = [axis_mom[j][..., cell[j], 0] for j in range(self.d)]
            first = [axis_mom[j][..., cell[j], 1] for j in range(self.d)]
            total = np.prod(np.stack(mass, axis=-1), axis=-1)
            out[..., c * (self.d + 1)] = total
            for j in range(self.d):
                others = np.prod(np.stack([mass[i] for i in range(self.d) if i != j] + [np.ones_like(total)], axis=-1), axis=-1)
                out[..., c * (self.d + 1) + 1 + j] = first[j] * others
        return out

    def breakpoints(self):
        return [list(e[1:-1]) for e in self.edges]

    def params(self):
        return {"edges": [e.tolist() for e in self.edges]}


class GaussianRadialBasis(BasisFamily):
    """``phi_k(x) = sqrt(prod w_k) / (2 pi)^{d/2} exp(-1/2 sum_i w_ki (x_i - c_ki)^2)``."""

    kind = "gaussian_radial"

    def __init__(self, domain, centers, weights):
        super().__init__(domain)
        centers = np.atleast_2d(np.asarray(centers, dtype=float))
        if centers.shape[-1] != self.d:
            centers = centers.reshape(-1, self.d)
        weights = np.broadcast_to(np.asarray(weights, dtype=float), centers.shape).copy()
        if not np.all(weights > 0):
            raise ConstructionError("radial weights must be positive")
        if not np.all(self.domain.contains(centers, atol=0.0)):
            raise ConstructionError("radial centres must lie inside the domain")
        self.centers = centers
        self.weights = weights
        self.norm = np.sqrt(np.prod(weights, axis=-1)) / (2 * np.pi) ** (self.d / 2)

    @property
    def size(self):
        return self.centers.shape[0]

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.d:
            raise ArgumentError(f"expected states of dimension {self.d}")
        diff = x[..., None, :] - self.centers
        return self.norm * np.exp(-0.5 * np.sum(self.weights * diff * diff, axis=-1))

    def clamped_gaussian_cond_exp(self, mean, sd, lo, hi):
        from scipy.special import ndtr

        mean = np.asarray(mean, dtype=float)[..., None, :]  # (..., 1, d)
        sd = np.broadcast_to(np.asarray(sd, dtype=float), (self.d,))
        lo = np.broadcast_to(np.asarray(lo, dtype=float), (self.d,))
        hi = np.broadcast_to(np.asarray(hi, dtype=float), (self.d,))
        w, c = self.weights, self.centers
        s2 = sd * sd
        # interior part: Gaussian kernel against the normal density over [lo, hi]
        prec = w + 1.0 / s2
        m_star = (w * c + mean / s2) / prec
        s_star = 1.0 / np.sqrt(prec)
        scale = np.exp(-0.5 * w * (mean - c) ** 2 / (1.0 + w * s2)) / np.sqrt(1.0 + w * s2)
        inner = scale * (ndtr((hi - m_star) / s_star) - ndtr((lo - m_star) / s_star))
        atoms = (np.exp(-0.5 * w * (lo - c) ** 2) * ndtr((lo - mean) / sd)
                 + np.exp(-0.5 * w * (hi - c) ** 2) * ndtr((mean - hi) / sd))
        return self.norm * np.prod(inner + atoms, axis=-1)

    def params(self):
        return {"centers": self.centers.tolist(), "weights": self.weights.tolist()}


def make_basis(kind, parameters, domain):
    """Construct a basis family from its kind and parameter dictionary."""
    if not isinstance(domain, Box):
        domain = Box(*domain)
    parameters = dict(parameters or {})
    if kind == "monomial":
        return MonomialBasis(domain, parameters.get("degree", 2))
    if kind in ("orthonormal_polynomial", "legendre"):
        return LegendreBasis(domain, parameters.get("degree", 2))
    if kind == "piecewise_affine":
        if "edges" in parameters:
            return PiecewiseAffineBasis(domain, parameters["edges"])
        return PiecewiseAffineBasis.uniform(domain, parameters.get("cells", 4))
    if kind == "gaussian_radial":
        if "centers" not in parameters:
            raise ConstructionError("gaussian_radial needs 'centers'")
        return GaussianRadialBasis(domain, parameters["centers"], parameters.get("weights", 1.0))
    raise ConstructionError(f"unknown basis kind {kind!r}")


def eval_basis(basis, x):
    x = np.asarray(x, dtype=float)
    if not np.all(basis.domain.contains(x)):
        raise ArgumentError("state outside the basis domain")
    return basis(x)


@dataclass
class GramMatrix:
    """``A_K = E_mu[phi phi^T]`` with a stored Cholesky factor."""

    matrix: np.ndarray
    factor: tuple
    jitter: float
    min_eigenvalue: float
    max_eigenvalue: float
    method: str
    basis: BasisFamily = field(repr=False)
    nodes: int = 0

    @property
    def K(self):
        return self.matrix.shape[0]

    @property
    def condition_number(self):
        return self.max_eigenvalue / self.min_eigenvalue if self.min_eigenvalue > 0 else math.inf

    def solve(self, b):
        return cho_solve(self.factor, np.asarray(b, dtype=float))

    def to_csv(self, path):
        from .io import write_matrix_csv

        write_matrix_csv(path, self.matrix, [f"phi_{k + 1}" for k in range(self.K)])

    def summary(self):
        return {
            "K": self.K,
            "method": self.method,
            "jitter": self.jitter,
            "min_eigenvalue": self.min_eigenvalue,
            "max_eigenvalue": self.max_eigenvalue,
            "condition_number": self.condition_number,
            "quadrature_nodes": self.nodes,
        }


def _poly_product_moments(basis, measure, n):
    P = basis.degree
    mom = measure.power_moments(n, 2 * P)  # (d, 2P+1)
    K, d = basis.size, basis.d
    A = np.ones((K, K))
    for j in range(d):
        f = basis.factors[:, j, :]
        # coefficients of phi_k,j * phi_l,j in x_j
        prod = np.zeros((K, K, 2 * P + 1))
        for p in range(P + 1):
            for r in range(P + 1):
                prod[:, :, p + r] += np.multiply.outer(f[:, p], f[:, r])
        A *= prod @ mom[j]
    return A


def _piecewise_affine_moments(basis, measure, n):
    d = basis.d
    A = np.zeros((basis.size, basis.size))
    for c, cell in enumerate(basis._cell_axes()):
        mom = [measure.interval_moments(n, j, basis.edges[j][cell[j]], basis.edges[j][cell[j] + 1], 2)
               for j in range(d)]
        block = np.empty((d + 1, d + 1))
        mass = np.prod([m[0] for m in mom])
        block[0, 0] = mass
        for i in range(d):
            rest = np.prod([mom[t][0] for t in range(d) if t != i]) if d > 1 else 1.0
            block[0, i + 1] = block[i + 1, 0] = mom[i][1] * rest
            block[i + 1, i + 1] = mom[i][2] * rest
            for k in range(i + 1, d):
                rest2 = np.prod([mom[t][0] for t in range(d) if t not in (i, k)]) if d > 2 else 1.0
                block[i + 1, k + 1] = block[k + 1, i + 1] = mom[i][1] * mom[k][1] * rest2
        s = c * (d + 1)
        A[s : s + d + 1, s : s + d + 1] = block
    return A


def gram_matrix(basis, measure, n=None):
    """Gram matrix of ``basis`` under ``measure`` (component ``n`` for schedules)."""
    from .measures import TruncatedGaussian, UniformBox

    n = 1 if n is None else n
    if not (np.all(measure.box.lo >= basis.domain.lo - 1e-12) and np.all(measure.box.hi <= basis.domain.hi + 1e-12)):
        raise ConfigurationError("measure support leaves the basis domain",
                                 errors=[f"measure.box: [{measure.box.lo.tolist()}, {measure.box.hi.tolist()}] is not "
                                         f"inside the basis domain [{basis.domain.lo.tolist()}, "
                                         f"{basis.domain.hi.tolist()}]"])
    nodes = 0
    comp = measure.component(n)
    if isinstance(basis, PolynomialBasis) and isinstance(comp, UniformBox):
        A = _uniform_poly_gram(basis, comp)
        method = "closed_form"
    elif isinstance(basis, PolynomialBasis) and hasattr(comp, "power_moments"):
        A = _poly_product_moments(basis, comp, n)
        method = "closed_form"
    elif isinstance(basis, PiecewiseAffineBasis) and isinstance(comp, (UniformBox, TruncatedGaussian)):
        A = _piecewise_affine_moments(basis, comp, n)
        method = "closed_form"
    else:
        A, nodes = _quadrature_gram(basis, comp, n)
        method = "quadrature"
        if isinstance(basis, GaussianRadialBasis):
            A = np.where(np.abs(A) < SPARSITY_THRESHOLD, 0.0, A)
    A = 0.5 * (A + A.T)
    return _factorise(A, basis, method, nodes)


def _uniform_poly_gram(basis, measure):
    """Tensor Gauss-Legendre with ``degree + 1`` nodes per axis: exact for the products.

    Avoids the cancellation of Hankel power moments on wide boxes.
    """
    z, w = np.polynomial.legendre.leggauss(basis.degree + 1)
    lo, hi = measure.box.lo, measure.box.hi
    axes = [0.5 * (lo[j] + hi[j]) + 0.5 * (hi[j] - lo[j]) * z for j in range(basis.d)]
    x = np.array(list(itertools.product(*axes)))
    wt = np.prod(np.array(list(itertools.product(*[0.5 * w] * basis.d))), axis=1)
    phi = basis(x)
    return phi.T @ (phi * wt[:, None])


def _quadrature_gram(basis, measure, n):
    K = basis.size

    def integrand(x):
        phi = basis(x)
        w = measure.density(n, x)
        return (phi[:, :, None] * phi[:, None, :]) * w[:, None, None]

    bps = product_breakpoints(basis.breakpoints(), measure.breakpoints(n))
    A, nodes = integrate(integrand, measure.box, breakpoints=bps, rtol=1e-12, atol=1e-15)
    return A.reshape(K, K), nodes


def _factorise(A, basis, method, nodes):
    eig = eigvalsh(A)
    lo_eig, hi_eig = float(eig[0]), float(eig[-1])
    jitter = 0.0
    if lo_eig < JITTER_THRESHOLD * hi_eig:
        jitter = JITTER_THRESHOLD * float(np.trace(A)) / A.shape[0]
        A_use = A + jitter * np.eye(A.shape[0])
    else:
        A_use = A
    try:
        factor = cho_factor(A_use, lower=True)
    except LinAlgError:
        raise BasisConditioningError(
            "Gram matrix is numerically singular even after jitter",
            min_eigenvalue=lo_eig, max_eigenvalue=hi_eig, jitter=jitter,
        ) from None
    return GramMatrix(A, factor, jitter, lo_eig, hi_eig, method, basis, nodes)


class GramCache:
    """Gram matrices per layer; computed once when the measure is time-invariant."""

    def __init__(self, basis, measure):
        from .measures import Schedule

        self.basis = basis
        self.measure = measure
        self._varies = isinstance(measure, Schedule)
        self._cache = {}

    def __call__(self, n):
        key = measure_index(self.measure, n) if self._varies else 0
        if key not in self._cache:
            self._cache[key] = gram_matrix(self.basis, self.measure, n)
        return self._cache[key]


def measure_index(measure, n):
    return min(max(int(n), 1), len(measure))


class CondExpEvaluator:
    """``phi_hat_k^n(x, u) = E[phi_k(X_{n+1}) | X_n = x, u_n = u]``.

    Strategies: ``closed_form`` (linear-Gaussian models), ``gauss_hermite``
    (Gaussian noise, quadrature through the clamped step) and
    ``inner_monte_carlo`` (any model; one fixed set of uniform draws).
    """

    STRATEGIES = ("closed_form", "gauss_hermite", "inner_monte_carlo")

    def __init__(self, model, basis, strategy=None, order=16, samples=512, seed=0):
        if strategy is None:
            strategy = "closed_form" if model.gaussian is not None else "inner_monte_carlo"
        if strategy not in self.STRATEGIES:
            raise ConfigurationError(f"unknown strategy {strategy!r}", errors=["evaluator.strategy"])
        if basis.d != model.d:
            raise ConfigurationError("basis and model dimensions differ")
        if strategy in ("closed_form", "gauss_hermite") and model.gaussian is None:
            raise ConfigurationError(f"strategy {strategy!r} needs a Gaussian model; use inner_monte_carlo")
        self.model = model
        self.basis = basis
        self.strategy = strategy
        self.order = int(order)
        self.samples = int(samples)
        self.seed = int(seed)
        if strategy == "gauss_hermite":
            z, w = np.polynomial.hermite_e.hermegauss(self.order)
            w = w / math.sqrt(2 * math.pi)
            nd = model.noise_dim
            grids = np.meshgrid(*([z] * nd), indexing="ij")
            self._nodes = np.stack([g.ravel() for g in grids], axis=-1)
            wg = w
            for _ in range(nd - 1):
                wg = np.multiply.outer(wg, w).ravel()
            self._weights = wg
        elif strategy == "inner_monte_carlo":
            gen = _rng.generator(self.seed, _rng.INNER_MC, 0)
            self._xi = gen.random((self.samples, model.noise_dim))

    @property
    def K(self):
        return self.basis.size

    def describe(self):
        out = {"strategy": self.strategy}
        if self.strategy == "gauss_hermite":
            out["order"] = self.order
        if self.strategy == "inner_monte_carlo":
            out.update(samples=self.samples, seed=self.seed)
        return out

    @property
    def kernel_ready(self):
        """True when the compiled argmax kernel can evaluate this evaluator."""
        m = self.model
        return (self.strategy == "closed_form" and isinstance(self.basis, PolynomialBasis)
                and self.basis.d == 1 and m.q == 1 and m.gaussian.is_scalar())

    def __call__(self, n, x, u):
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        m = self.model
        if self.strategy == "closed_form":
            mean = m.gaussian.mean(x, u)
            return self.basis.clamped_gaussian_cond_exp(mean, m.gaussian.sd, m.state_domain.lo, m.state_domain.hi)
        shape = np.broadcast_shapes(x.shape[:-1], u.shape[:-1])
        xb = np.broadcast_to(x, shape + (m.d,))[..., None, :]
        ub = np.broadcast_to(u, shape + (m.q,))[..., None, :]
        if self.strategy == "gauss_hermite":
            nxt = m.gaussian_step(n, xb, self._nodes, ub)
            return np.tensordot(self.basis(nxt), self._weights, axes=(-2, 0))
        nxt = m.step(n, xb, self._xi, ub)
        return self.basis(nxt).mean(axis=-2)


def cond_exp_basis(evaluator, n, x, u):
    m = evaluator.model
    if not (0 <= n < m.N):
        raise ArgumentError(f"time index {n} outside [0, {m.N})", n=n)
    if not np.all(m.state_domain.contains(x)):
        raise ArgumentError("state outside the domain", n=n)
    if not np.all(m.control_set.contains(u)):
        raise ArgumentError("control outside the control set", n=n)
    return evaluator(n, x, u)
