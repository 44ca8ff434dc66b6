import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate as sci
from scipy.stats import norm

from rlmc.model import Box
from rlmc.moments import clamped_interval_moments, clamped_power_moments, partial_moments, truncated_power_moments
from rlmc.quadrature import integrate


@given(m=st.floats(-3, 3), s=st.floats(0.05, 3), a=st.floats(-4, 0), w=st.floats(0.01, 4))
def test_partial_moments_match_scipy_quad(m, s, a, w):
    b = a + w
    got = partial_moments(m, s, a, b, 4)
    for p in range(5):
        ref, _ = sci.quad(lambda y: y ** p * norm.pdf(y, m, s), a, b, epsabs=1e-13, epsrel=1e-11)
        assert got[p] == pytest.approx(ref, rel=1e-7, abs=1e-10)


@given(m=st.floats(-6, 6), s=st.floats(0.05, 2))
def test_clamped_moments_match_quadrature(m, s):
    lo, hi = -2.0, 2.0
    got = clamped_power_moments(m, s, lo, hi, 3)
    for p in range(4):
        inner, _ = sci.quad(lambda y: y ** p * norm.pdf(y, m, s), lo, hi, epsabs=1e-13)
        ref = inner + lo ** p * norm.cdf(lo, m, s) + hi ** p * norm.sf(hi, m, s)
        assert got[p] == pytest.approx(ref, rel=1e-8, abs=1e-11)


def test_clamped_interval_moments_sum_to_power_moments():
    edges = np.linspace(-1, 1, 9)
    m = np.array([[-0.8], [0.0], [0.95]])
    cells = clamped_interval_moments(m, 0.3, -1.0, 1.0, edges[:-1], edges[1:], 2)
    total = cells.sum(axis=-2)
    ref = clamped_power_moments(m[:, 0], 0.3, -1.0, 1.0, 2)
    np.testing.assert_allclose(total, ref, rtol=1e-12, atol=1e-14)


def test_truncated_moments_match_scipy():
    from scipy.stats import truncnorm

    mean, sd, lo, hi = 0.4, 1.3, -1.0, 2.0
    got = truncated_power_moments(mean, sd, lo, hi, 2)
    dist = truncnorm((lo - mean) / sd, (hi - mean) / sd, loc=mean, scale=sd)
    assert got[1] == pytest.approx(dist.mean(), rel=1e-12)
    assert got[2] == pytest.approx(dist.moment(2), rel=1e-10)


def test_integrate_polynomial_exactly():
    box = Box([0.0, -1.0], [1.0, 2.0])
    val, _ = integrate(lambda x: x[:, 0] ** 3 * x[:, 1] ** 2, box)
    assert val == pytest.approx(0.25 * 3.0, rel=1e-12)


def test_integrate_kink_with_breakpoints():
    box = Box([-2.0], [2.0])
    val, _ = integrate(lambda x: np.minimum(1.0, x[:, 0] ** 2), box, breakpoints=[[-1.0, 1.0]])
    assert val == pytest.approx(2 / 3 + 2.0, rel=1e-12)
