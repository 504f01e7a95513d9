import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from thinspec.errors import (
    BoxTooSmallError,
    InvalidInputError,
    InvalidPotentialError,
    NumericPathRequired,
)
from thinspec.moments import MonomialPolynomial
from thinspec.oscillator import (
    hermite_eigenfunction,
    ladder_spectrum,
    oscillator_spectrum,
    schrodinger_solve_numeric,
)
from thinspec.width_models import TaylorWidthData, ellipsoid_taylor

PI = math.pi


def test_ellipse_ladder():
    spec = oscillator_spectrum(ellipsoid_taylor((1.0, 1.0)), 1, 2)
    assert np.allclose(spec.values, [PI / 2, 3 * PI / 2], rtol=1e-14)
    assert spec.levels[0].multi_index == (0,)


def test_sphere_ladder_degeneracy():
    spec = oscillator_spectrum(ellipsoid_taylor((1.0, 1.0, 1.0)), 1, 3)
    assert spec.values[0] == pytest.approx(PI, rel=1e-14)
    assert spec.values[1] == pytest.approx(2 * PI, rel=1e-14)
    assert [lv.multi_index for lv in spec.levels[1:]] == [(0, 1), (1, 0)]
    assert spec.levels[1].group == spec.levels[2].group


def test_mode_n_doubles_theta():
    jet = ellipsoid_taylor((1.0, 1.0))
    s1 = oscillator_spectrum(jet, 1, 3)
    s2 = oscillator_spectrum(jet, 2, 3)
    assert np.allclose(s2.values, 2 * s1.values, rtol=1e-14)


def test_ladder_theta_11():
    spec = ladder_spectrum([1.0, 1.0], 3)
    assert np.allclose(spec.values, [2.0, 4.0, 4.0])


def test_ladder_brute_force():
    theta = np.array([0.7, 1.3, 2.9])
    spec = ladder_spectrum(theta, 25)
    brute = sorted(
        sum((2 * m + 1) * t for m, t in zip((a, b, c), theta))
        for a in range(30) for b in range(30) for c in range(30)
    )[:25]
    assert np.allclose(spec.values, brute, rtol=1e-13)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.2, 5.0), min_size=1, max_size=3), st.integers(1, 15), st.integers(1, 10))
def test_ladder_prefix_stable(theta, k, extra):
    a = ladder_spectrum(theta, k)
    b = ladder_spectrum(theta, k + extra)
    assert [lv.multi_index for lv in b.levels[:k]] == [lv.multi_index for lv in a.levels]
    assert np.all(np.diff(b.values) >= -1e-12)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.2, 5.0), min_size=1, max_size=3), st.floats(0.1, 10.0))
def test_ladder_scaling_covariance(theta, c):
    a = ladder_spectrum(theta, 8)
    b = ladder_spectrum(np.asarray(theta) * c, 8)
    assert np.allclose(b.values, c * a.values, rtol=1e-12)


def test_ladder_invalid():
    with pytest.raises(InvalidInputError):
        ladder_spectrum([1.0, -1.0], 3)
    with pytest.raises(InvalidInputError):
        ladder_spectrum([1.0], 0)
    with pytest.raises(InvalidInputError):
        oscillator_spectrum(ellipsoid_taylor((1.0, 1.0)), 0, 1)


def test_numeric_path_required_for_quartic_well():
    jet = TaylorWidthData(d=2, x_bar=[0.0], H0=1.0, alpha=[0.0], basis=np.eye(1), beta=np.zeros((1, 1, 1)),
                          H4_coeffs={(4,): -1.0}, grad_h1=[0.0], k=2)
    with pytest.raises(NumericPathRequired):
        oscillator_spectrum(jet, 1, 1)


@pytest.mark.parametrize("m", [0, 1, 2, 5])
def test_hermite_normalisation_1d(m):
    spec = ladder_spectrum([1.7], 1)
    psi = hermite_eigenfunction(spec, (m,))
    norm = quad(lambda x: psi(np.array([x]))[()] ** 2, -20, 20, limit=200)[0]
    assert norm == pytest.approx(1.0, abs=1e-10)


def test_hermite_orthogonality_and_parity():
    spec = ladder_spectrum([0.8], 1)
    fs = [hermite_eigenfunction(spec, (m,)) for m in range(5)]
    for i in range(5):
        for j in range(i):
            v = quad(lambda x: fs[i](np.array([x]))[()] * fs[j](np.array([x]))[()], -25, 25, limit=200)[0]
            assert abs(v) < 1e-10
    x = np.linspace(0.1, 3, 7)[:, None]
    for m, f in enumerate(fs):
        assert np.allclose(f(-x), (-1) ** m * f(x))


def test_hermite_eigen_equation():
    # -psi'' + theta^2 x^2 psi = (2m+1) theta psi, by finite differences
    theta = 1.3
    spec = ladder_spectrum([theta], 1)
    h = 1e-3
    x = np.linspace(-2, 2, 9)[:, None]
    for m in range(4):
        f = hermite_eigenfunction(spec, (m,))
        lap = (f(x + h) - 2 * f(x) + f(x - h)) / h ** 2
        lhs = -lap + theta ** 2 * x[:, 0] ** 2 * f(x)
        assert np.allclose(lhs, (2 * m + 1) * theta * f(x), atol=1e-5)


def test_relative_polynomial():
    spec = ladder_spectrum([1.1, 0.6], 1)
    f = hermite_eigenfunction(spec, (1, 2))
    g = hermite_eigenfunction(spec, (0, 0))
    pts = np.array([[0.3, -0.4], [1.0, 0.2]])
    assert np.allclose(f.relative_polynomial()(pts) * g(pts), f(pts))


def _harmonic_well(theta=1.0):
    # 2 pi^2 / H0^3 * well = -theta^2 xi^2 at H0 = 1
    return MonomialPolynomial({(2,): -theta ** 2 / (2 * PI ** 2)}, 1)


def test_numeric_harmonic():
    res = schrodinger_solve_numeric(_harmonic_well(), 1.0, box_halfwidth=8.0, grid_points=801, count=3)
    assert np.allclose(res.values, [1.0, 3.0, 5.0], atol=1e-6)


def test_numeric_harmonic_2d():
    well = MonomialPolynomial({(2, 0): -1.0 / (2 * PI ** 2), (0, 2): -4.0 / (2 * PI ** 2)}, 2)
    res = schrodinger_solve_numeric(well, 1.0, count=3)
    assert np.allclose(res.values, [3.0, 5.0, 7.0], rtol=1e-4)


def test_numeric_quartic_against_literature():
    # -u'' + x^4 u: 1.0603620904, 3.7996730298, 7.4556979380 (tabulated anharmonic levels)
    well = MonomialPolynomial({(4,): -1.0 / (2 * PI ** 2)}, 1)
    res = schrodinger_solve_numeric(well, 1.0, box_halfwidth=6.0, grid_points=801, count=3)
    assert np.allclose(res.values, [1.0603620904, 3.7996730298, 7.4556979380], rtol=1e-6)


def test_numeric_rejects_non_confining():
    well = MonomialPolynomial({(2,): 1.0}, 1)
    with pytest.raises(InvalidPotentialError):
        schrodinger_solve_numeric(well, 1.0, box_halfwidth=4.0)


def test_numeric_box_too_small():
    with pytest.raises(BoxTooSmallError):
        schrodinger_solve_numeric(_harmonic_well(), 1.0, box_halfwidth=1.5, grid_points=101)


def test_numeric_grid_validation():
    with pytest.raises(InvalidInputError):
        schrodinger_solve_numeric(_harmonic_well(), 1.0, box_halfwidth=8.0, grid_points=100)
