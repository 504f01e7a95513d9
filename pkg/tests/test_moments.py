import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from thinspec.errors import InvalidInputError
from thinspec.moments import MonomialPolynomial, gaussian_moment, hermite_inner, polynomial_inner
from thinspec.oscillator import hermite_eigenfunction, ladder_spectrum
from thinspec.width_models import ellipsoid_taylor


def quad_moment_1d(power, theta):
    dens = lambda x: x ** power * math.sqrt(theta / math.pi) * math.exp(-theta * x * x)
    val, _ = integrate.quad(dens, -np.inf, np.inf, epsabs=0, epsrel=1e-13, limit=200)
    return val


def test_moment_examples():
    assert gaussian_moment([1.0], [2]) == pytest.approx(0.5, abs=1e-15)
    assert gaussian_moment([1.0], [4]) == pytest.approx(0.75, abs=1e-15)
    assert gaussian_moment([2.0, 3.0], [2, 2]) == pytest.approx(1 / 24, rel=1e-14)
    assert gaussian_moment([0.7, 1.3], [3, 2]) == 0.0
    assert gaussian_moment([0.7, 1.3], [0, 0]) == 1.0


@pytest.mark.parametrize("theta", [0.5, 1.0, math.pi / 2, 3.0])
@pytest.mark.parametrize("power", range(0, 9))
def test_moment_matches_quadrature(theta, power):
    exact = gaussian_moment([theta], [power])
    ref = quad_moment_1d(power, theta)
    assert exact == pytest.approx(ref, rel=1e-10, abs=1e-14)


@pytest.mark.parametrize("theta", [(0.5, 3.0), (1.0, math.pi / 2)])
def test_moment_2d_matches_quadrature(theta):
    t1, t2 = theta
    for a, b in [(2, 2), (4, 2), (0, 6), (2, 4)]:
        f = lambda y, x: x ** a * y ** b * math.sqrt(t1 * t2) / math.pi * math.exp(-t1 * x * x - t2 * y * y)
        lim = 12.0
        ref, _ = integrate.dblquad(f, -lim, lim, -lim, lim, epsabs=0, epsrel=1e-12)
        assert gaussian_moment(theta, (a, b)) == pytest.approx(ref, rel=1e-10)


def test_moment_rejects_bad_input():
    with pytest.raises(InvalidInputError):
        gaussian_moment([1.0, 2.0], [2])
    with pytest.raises(InvalidInputError):
        gaussian_moment([-1.0], [2])


def test_polynomial_inner_examples():
    one = MonomialPolynomial.constant(1.0, 1)
    x = MonomialPolynomial.coordinate(0, 1)
    assert polynomial_inner([0.9], one, one) == 1.0
    assert polynomial_inner([math.pi / 2], x, x) == pytest.approx(1 / math.pi, rel=1e-15)
    jet = ellipsoid_taylor((1.0, 1.0))
    H2, H4 = jet.H2_poly(), jet.H4_poly()
    val = polynomial_inner(jet.theta(), 3 * H2 * H2 - 2 * jet.H0 * H4, one) * math.pi ** 2 / jet.H0 ** 4
    assert val == pytest.approx(0.75, abs=1e-14)


def test_polynomial_inner_dimension_mismatch():
    with pytest.raises(InvalidInputError):
        polynomial_inner([1.0], MonomialPolynomial.constant(1.0, 2), MonomialPolynomial.constant(1.0, 2))


def test_wick_brute_force():
    """<xi_a xi_b xi_c xi_d> as a sum over pairings of the covariance."""
    theta = np.array([0.8, 1.7, 2.5])
    cov = np.diag(1 / (2 * theta))
    for idx in itertools.product(range(3), repeat=4):
        key = [0, 0, 0]
        for i in idx:
            key[i] += 1
        a, b, c, d = idx
        wick = cov[a, b] * cov[c, d] + cov[a, c] * cov[b, d] + cov[a, d] * cov[b, c]
        assert gaussian_moment(theta, key) == pytest.approx(wick, rel=1e-14, abs=1e-16)


coeff = st.floats(-5, 5, allow_nan=False, allow_infinity=False)


@st.composite
def polys(draw, dim=2, max_deg=4):
    n = draw(st.integers(0, 6))
    terms = {}
    for _ in range(n):
        key = tuple(draw(st.integers(0, max_deg)) for _ in range(dim))
        terms[key] = draw(coeff)
    return MonomialPolynomial(terms, dim)


thetas = st.tuples(st.floats(0.2, 4.0), st.floats(0.2, 4.0))


@given(thetas, polys(), polys())
def test_inner_symmetric_bit_exact(theta, a, b):
    assert polynomial_inner(theta, a, b) == polynomial_inner(theta, b, a)


@given(thetas, polys(), polys(), polys())
def test_inner_linear(theta, a, a2, b):
    lhs = polynomial_inner(theta, a + a2, b)
    rhs = polynomial_inner(theta, a, b) + polynomial_inner(theta, a2, b)
    scale = 1.0 + abs(polynomial_inner(theta, a, b)) + abs(polynomial_inner(theta, a2, b))
    assert abs(lhs - rhs) <= 1e-14 * scale * 100


@given(polys())
def test_polynomial_never_stores_zeros(p):
    assert all(v != 0.0 for v in p.terms.values())
    assert (p - p).is_zero()


def test_polynomial_algebra():
    x = MonomialPolynomial.coordinate(0, 2)
    y = MonomialPolynomial.coordinate(1, 2)
    p = (x + 2 * y) ** 2
    assert p.terms == {(0, 2): 4.0, (1, 1): 4.0, (2, 0): 1.0}
    assert p.derivative(1) == 4 * x + 8 * y
    assert p.laplacian() == MonomialPolynomial.constant(10.0, 2)
    assert p([[1.0, 1.0]])[0] == 9.0
    assert p.degree() == 2
    assert MonomialPolynomial.from_tensor(np.ones((2, 2))) == (x + y) ** 2


def test_hermite_inner_examples():
    spec = ladder_spectrum([1.0], 4)
    g0 = hermite_eigenfunction(spec, (0,))
    g1 = hermite_eigenfunction(spec, (1,))
    one = MonomialPolynomial.constant(1.0, 1)
    x3 = MonomialPolynomial({(3,): 1.0}, 1)
    assert hermite_inner(spec.theta, one, g0, g0) == pytest.approx(1.0, abs=1e-15)
    assert hermite_inner(spec.theta, one, g0, g1) == 0.0
    assert hermite_inner(spec.theta, x3, g0, g0) == 0.0


def test_hermite_inner_theta_mismatch():
    s1 = ladder_spectrum([1.0], 2)
    s2 = ladder_spectrum([2.0], 2)
    f = hermite_eigenfunction(s1, (0,))
    g = hermite_eigenfunction(s2, (0,))
    with pytest.raises(InvalidInputError):
        hermite_inner(s1.theta, MonomialPolynomial.constant(1.0, 1), f, g)
