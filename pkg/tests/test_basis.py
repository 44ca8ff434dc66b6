import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate as sci
from scipy.stats import norm

from rlmc.basis import (CondExpEvaluator, GaussianRadialBasis, LegendreBasis, MonomialBasis, PiecewiseAffineBasis,
                        cond_exp_basis, eval_basis, gram_matrix, make_basis)
from rlmc.exceptions import ArgumentError, ConfigurationError, ConstructionError
from rlmc.measures import TruncatedGaussian, UniformBox
from rlmc.model import Box, SeparableReward
from rlmc.problems.doorways import build_doorways

from conftest import walk_model

UNIT = Box([0.0], [1.0])


def hilbert(K):
    i = np.arange(1, K + 1)
    return 1.0 / (i[:, None] + i[None, :] - 1)


def test_eval_examples():
    np.testing.assert_allclose(eval_basis(MonomialBasis(UNIT, 2), [0.5]), [1, 0.5, 0.25])
    pw = PiecewiseAffineBasis.uniform(UNIT, 2)
    np.testing.assert_allclose(eval_basis(pw, [0.25]), [1, 0.25, 0, 0])
    np.testing.assert_allclose(eval_basis(LegendreBasis(UNIT, 1), [0.5]), [1, 0], atol=1e-15)


def test_eval_rejects_outside_domain():
    with pytest.raises(ArgumentError):
        eval_basis(MonomialBasis(UNIT, 2), [1.5])


def test_make_basis_sizes():
    dom = Box([-2.0], [2.0])
    assert make_basis("piecewise_affine", {"cells": 4}, dom).K == 8
    assert make_basis("monomial", {"degree": 2}, dom).K == 3
    dom2 = Box([0.0, 0.0], [1.0, 1.0])
    rbf = make_basis("gaussian_radial", {"centers": np.random.default_rng(0).uniform(0, 1, (5, 2)).tolist(),
                                         "weights": 4.0}, dom2)
    assert rbf.K == 5
    with pytest.raises(ConstructionError):
        make_basis("wavelet", {}, dom)


def test_monomial_gram_is_hilbert():
    for K in range(1, 7):
        g = gram_matrix(MonomialBasis(UNIT, K - 1), UniformBox(UNIT))
        np.testing.assert_allclose(g.matrix, hilbert(K), rtol=1e-13)


def test_hilbert_min_eigenvalue_decreases():
    mins = [gram_matrix(MonomialBasis(UNIT, K - 1), UniformBox(UNIT)).min_eigenvalue for K in range(2, 7)]
    assert all(b < a for a, b in zip(mins, mins[1:]))
    assert mins[-1] < 1e-6


@pytest.mark.parametrize("K", [1, 2, 3, 4, 5, 6])
def test_legendre_gram_identity(K):
    for dom in (UNIT, Box([-2.0], [5.0])):
        g = gram_matrix(LegendreBasis(dom, K - 1), UniformBox(dom))
        np.testing.assert_allclose(g.matrix, np.eye(K), atol=1e-10)


def test_constant_basis_gram_is_one():
    dom = Box([-5.0], [5.0])
    for mu in (UniformBox(dom), TruncatedGaussian([0.3], [0.7], dom)):
        assert gram_matrix(MonomialBasis(dom, 0), mu).matrix == pytest.approx(np.ones((1, 1)))


def test_piecewise_gram_block_diagonal_and_matches_quadrature():
    dom = Box([-1.0], [1.0])
    basis = PiecewiseAffineBasis.uniform(dom, 4)
    for mu in (UniformBox(dom), TruncatedGaussian([0.2], [0.5], dom)):
        g = gram_matrix(basis, mu)
        mask = np.kron(np.eye(4), np.ones((2, 2))) == 0
        assert np.all(g.matrix[mask] == 0.0)
        for i in range(basis.K):
            for j in range(basis.K):
                ref, _ = sci.quad(lambda x: basis(np.array([[x]]))[0, i] * basis(np.array([[x]]))[0, j]
                                  * mu.density(1, np.array([[x]]))[0], -1, 1, points=[-0.5, 0, 0.5], epsabs=1e-13)
                assert g.matrix[i, j] == pytest.approx(ref, abs=1e-11)


def test_monomial_gram_under_truncated_gaussian_matches_quadrature():
    dom = Box([-5.0], [5.0])
    mu = TruncatedGaussian([0.5], [1.5], dom)
    g = gram_matrix(MonomialBasis(dom, 2), mu)
    for i in range(3):
        for j in range(3):
            ref, _ = sci.quad(lambda x: x ** (i + j) * mu.density(1, np.array([[x]]))[0], -5, 5, epsabs=1e-13)
            assert g.matrix[i, j] == pytest.approx(ref, rel=1e-10)


def test_radial_gram_sparsity_and_symmetry():
    dom = Box([0.0], [10.0])
    basis = GaussianRadialBasis(dom, [[0.5], [5.0], [9.5]], 50.0)
    g = gram_matrix(basis, UniformBox(dom))
    assert g.method == "quadrature"
    assert g.matrix[0, 2] == 0.0 and g.matrix[0, 1] == 0.0
    np.testing.assert_array_equal(g.matrix, g.matrix.T)
    ref, _ = sci.quad(lambda x: basis(np.array([[x]]))[0, 1] ** 2 / 10.0, 0, 10, points=[5.0], epsabs=1e-14)
    assert g.matrix[1, 1] == pytest.approx(ref, rel=1e-8)


def test_gram_rejects_measure_outside_domain():
    with pytest.raises(ConfigurationError):
        gram_matrix(MonomialBasis(UNIT, 1), UniformBox(Box([0.0], [2.0])))


def test_jitter_only_when_needed():
    assert gram_matrix(MonomialBasis(UNIT, 3), UniformBox(UNIT)).jitter == 0.0
    g = gram_matrix(MonomialBasis(UNIT, 14), UniformBox(UNIT))
    assert g.jitter > 0.0
    assert np.all(np.isfinite(g.solve(np.ones(g.K))))


def test_cond_exp_linear_and_quadratic_examples():
    model = walk_model(sd=0.3)
    basis = MonomialBasis(model.state_domain, 2)
    ev = CondExpEvaluator(model, basis)
    gh = CondExpEvaluator(model, basis, strategy="gauss_hermite", order=4)
    x, u = np.array([[0.7]]), np.array([[-0.4]])
    for e in (ev, gh):
        phi = cond_exp_basis(e, 0, x, u)[0]
        assert phi[0] == pytest.approx(1.0)
        assert phi[1] == pytest.approx(0.3, abs=1e-12)
        assert phi[2] == pytest.approx(0.09 + 0.09, abs=1e-12)


def test_cond_exp_strategies_agree_with_clamping():
    model = build_doorways()
    for basis in (MonomialBasis(model.state_domain, 3), PiecewiseAffineBasis.uniform(model.state_domain, 8),
                  GaussianRadialBasis(model.state_domain, [[-1.5], [0.0], [1.9]], 3.0)):
        closed = CondExpEvaluator(model, basis)
        gh = CondExpEvaluator(model, basis, strategy="gauss_hermite", order=16)
        x = np.array([[1.95], [0.0], [-1.9], [0.4]])
        u = np.array([[20.0], [0.0], [-5.0], [-30.0]])
        phi = closed(0, x, u)
        # direct quadrature of the clamped integrand
        for i in range(len(x)):
            m = x[i, 0] + u[i, 0] / 100
            for k in range(basis.K):
                f = lambda z: basis(np.clip(np.array([[m + 0.1 * z]]), -2, 2))[0, k] * norm.pdf(z)
                kinks = [(-2 - m) / 0.1, (2 - m) / 0.1]
                ref = sum(sci.quad(f, a, b, epsabs=1e-13, limit=200)[0]
                          for a, b in zip([-12] + kinks, kinks + [12]))
                assert phi[i, k] == pytest.approx(ref, abs=1e-9)
        if isinstance(basis, MonomialBasis):
            # Gauss-Hermite ignores the clamping kink, so compare only away from the walls
            np.testing.assert_allclose(gh(0, x, u)[[1, 3]], phi[[1, 3]], atol=1e-10)


def test_gauss_hermite_order_convergence_on_smooth_model():
    model = walk_model(sd=0.2, lo=-3.0, hi=3.0)
    basis = GaussianRadialBasis(model.state_domain, [[-1.0], [0.0], [1.0]], 2.0)
    x, u = np.array([[0.3], [-0.5]]), np.array([[0.1], [0.0]])
    a = CondExpEvaluator(model, basis, strategy="gauss_hermite", order=8)(0, x, u)
    b = CondExpEvaluator(model, basis, strategy="gauss_hermite", order=16)(0, x, u)
    np.testing.assert_allclose(a, b, atol=1e-6)


def test_inner_monte_carlo_is_fixed_and_close():
    model = walk_model(sd=0.3, lo=-3, hi=3)
    basis = MonomialBasis(model.state_domain, 2)
    mc = CondExpEvaluator(model, basis, strategy="inner_monte_carlo", samples=20000, seed=3)
    ex = CondExpEvaluator(model, basis)
    x, u = np.array([[0.2]]), np.array([[0.5]])
    np.testing.assert_array_equal(mc(0, x, u), mc(0, x, u))
    np.testing.assert_allclose(mc(0, x, u), ex(0, x, u), atol=0.02)


def test_cond_exp_validates_inputs():
    model = walk_model()
    ev = CondExpEvaluator(model, MonomialBasis(model.state_domain, 1))
    with pytest.raises(ArgumentError):
        cond_exp_basis(ev, 0, np.array([[0.0]]), np.array([[5.0]]))
    with pytest.raises(ArgumentError):
        cond_exp_basis(ev, model.N, np.array([[0.0]]), np.array([[0.0]]))


@given(m=st.floats(-3, 3), s=st.floats(0.01, 2), k=st.integers(1, 6))
def test_constant_function_has_unit_conditional_expectation(m, s, k):
    dom = Box([-2.0], [2.0])
    for basis in (MonomialBasis(dom, k), PiecewiseAffineBasis.uniform(dom, k)):
        phi = basis.clamped_gaussian_cond_exp(np.array([[m]]), s, dom.lo, dom.hi)
        assert phi[0, 0] + (phi[0, 2] if isinstance(basis, PiecewiseAffineBasis) and k > 1 else 0) <= 1 + 1e-12
        if isinstance(basis, MonomialBasis):
            assert phi[0, 0] == pytest.approx(1.0, abs=1e-14)
        else:
            assert phi[0, ::2].sum() == pytest.approx(1.0, abs=1e-12)
