"""Spectrum of the effective operator ``G_n = -Lap - 2 pi^2 n^2 H_2k(xi) / H0^3``.

For a quadratic well (k = 1) ``G_n`` is a tensor harmonic oscillator with
frequencies ``theta_j = pi n alpha_j / H0^(3/2)`` and levels
``sum_j (2 m_j + 1) theta_j``.  General polynomial wells go through a
finite-difference Schroedinger solve on a truncated box.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as sla
from numpy.polynomial import hermite as npherm

from ._validation import check_multi_index, check_positive_scalar, check_vector
from .errors import (
    BoxTooSmallError,
    CapExceededError,
    InvalidInputError,
    InvalidPotentialError,
    NumericPathRequired,
)
from .moments import MonomialPolynomial
from .width_models import TaylorWidthData

TIE_RTOL = 1e-9
MAX_DEGREE_CAP = 400


class Level(NamedTuple):
    value: float
    multi_index: tuple
    group: int


@dataclass(frozen=True)
class OscillatorSpectrum:
    n: int
    theta: np.ndarray
    levels: tuple
    H0: float = 1.0

    @property
    def values(self) -> np.ndarray:
        return np.array([lv.value for lv in self.levels])

    def group(self, group_id: int) -> list:
        return [lv.multi_index for lv in self.levels if lv.group == group_id]

    def groups(self) -> dict:
        out: dict = {}
        for lv in self.levels:
            out.setdefault(lv.group, []).append(lv.multi_index)
        return out

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "theta": self.theta.tolist(),
            "levels": [
                {"value": lv.value, "multi_index": list(lv.multi_index), "group": lv.group}
                for lv in self.levels
            ],
        }


@dataclass(frozen=True)
class HermiteEigenfunction:
    """``Psi_m = normalization * prod_j H_{m_j}(sqrt(theta_j) xi_j) * exp(-sum theta_j xi_j^2 / 2)``.

    ``polynomial_part`` is the (physicists') Hermite product expanded in
    monomials of ``xi``.
    """

    multi_index: tuple
    theta: np.ndarray
    polynomial_part: MonomialPolynomial
    normalization: float

    def relative_polynomial(self) -> MonomialPolynomial:
        """Polynomial ``P`` with ``Psi_m = P * Psi_0``."""
        ground = math.prod((t / math.pi) ** 0.25 for t in self.theta)
        return self.polynomial_part * (self.normalization / ground)

    def __call__(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if self.theta.size == 1 and (pts.ndim == 0 or pts.shape[-1] != 1):
            pts = pts[..., None]
        gauss = np.exp(-0.5 * np.sum(self.theta * pts ** 2, axis=-1))
        return self.normalization * self.polynomial_part(pts) * gauss


def level_value(theta, m) -> float:
    return float(sum((2 * mj + 1) * tj for mj, tj in zip(m, theta)))


def _group_levels(pairs):
    """Group near-equal values; inside a group multi-indices are lexicographic."""
    groups = []
    for value, m in pairs:
        if groups and abs(value - groups[-1][0][0]) <= TIE_RTOL * (1.0 + abs(groups[-1][0][0])):
            groups[-1].append((value, m))
        else:
            groups.append([(value, m)])
    levels = []
    for gid, members in enumerate(groups):
        for value, m in sorted(members, key=lambda p: p[1]):
            levels.append(Level(value, m, gid))
    return tuple(levels)


def ladder_spectrum(theta, count: int, n: int = 1, H0: float = 1.0) -> OscillatorSpectrum:
    """First ``count`` levels of the tensor oscillator with frequencies ``theta``.

    Multi-indices are enumerated by total degree; the degree cap grows until
    every index of the next degree lies strictly above the ``count``-th level,
    which certifies that nothing below it was missed.  Ties are ordered
    lexicographically by multi-index.
    """
    theta = check_vector(theta, "theta", positive=True)
    count = int(count)
    if count < 1:
        raise InvalidInputError("count must be >= 1")
    dim = theta.size
    base = float(np.sum(theta))
    tmin = float(np.min(theta))
    degree = 0
    while True:
        pairs = []
        for total in range(degree + 1):
            for combo in itertools.combinations_with_replacement(range(dim), total):
                m = [0] * dim
                for c in combo:
                    m[c] += 1
                pairs.append((level_value(theta, m), tuple(m)))
        if len(pairs) >= count:
            pairs.sort()
            cutoff = pairs[count - 1][0]
            next_floor = base + 2.0 * (degree + 1) * tmin
            if next_floor > cutoff * (1.0 + TIE_RTOL) + TIE_RTOL:
                break
        degree += 1
        if degree > MAX_DEGREE_CAP:
            raise CapExceededError(f"could not certify {count} levels below degree {MAX_DEGREE_CAP}")
    # group before truncating so rounding inside a tie cannot reorder it
    levels = _group_levels(pairs)[:count]
    return OscillatorSpectrum(n=int(n), theta=theta, levels=levels, H0=float(H0))


def oscillator_spectrum(jet: TaylorWidthData, n: int = 1, count: int = 1) -> OscillatorSpectrum:
    """Analytic spectrum of ``G_n`` for a quadratic well."""
    if jet.k != 1:
        raise NumericPathRequired("no closed ladder for k > 1; use schrodinger_solve_numeric")
    n = int(n)
    if n < 1:
        raise InvalidInputError("transverse mode n must be >= 1")
    return ladder_spectrum(jet.theta(n), count, n=n, H0=jet.H0)


def hermite_eigenfunction(spec: OscillatorSpectrum, m) -> HermiteEigenfunction:
    theta = np.asarray(spec.theta, dtype=float)
    m = check_multi_index(m, theta.size)
    dim = theta.size
    poly = MonomialPolynomial.constant(1.0, dim)
    norm = 1.0
    for j, (mj, tj) in enumerate(zip(m, theta)):
        coeffs = npherm.herm2poly([0] * mj + [1])  # H_m(y) in powers of y
        s = math.sqrt(tj)
        terms = {}
        for p, c in enumerate(coeffs):
            if c:
                key = [0] * dim
                key[j] = p
                terms[tuple(key)] = c * s ** p
        poly = poly * MonomialPolynomial(terms, dim)
        norm *= (tj / math.pi) ** 0.25 / math.sqrt(2.0 ** mj * math.factorial(mj))
    return HermiteEigenfunction(multi_index=m, theta=theta, polynomial_part=poly, normalization=norm)


# ---------------------------------------------------------------------------
# numeric path
# ---------------------------------------------------------------------------

class NumericSpectrum(NamedTuple):
    values: np.ndarray
    box_delta: float
    raw: np.ndarray


def _fd_levels(potential, halfwidth, points, count, dim):
    x = np.linspace(-halfwidth, halfwidth, points)
    h = x[1] - x[0]
    inner = x[1:-1]
    m = inner.size
    lap1 = sp.diags([np.full(m - 1, -1.0), np.full(m, 2.0), np.full(m - 1, -1.0)], [-1, 0, 1]) / h ** 2
    eye = sp.identity(m, format="csr")
    op = sp.csr_matrix((m ** dim, m ** dim))
    for axis in range(dim):
        factors = [lap1 if a == axis else eye for a in range(dim)]
        term = factors[0]
        for f in factors[1:]:
            term = sp.kron(term, f, format="csr")
        op = op + term
    grids = np.meshgrid(*([inner] * dim), indexing="ij")
    pts = np.stack(grids, axis=-1).reshape(-1, dim)
    V = potential(pts)
    op = (op + sp.diags(V)).tocsc()
    shift = float(np.min(V)) - 1.0
    v0 = np.ones(op.shape[0])
    vals = sla.eigsh(op, k=count, sigma=shift, which="LM", v0=v0, return_eigenvectors=False)
    return np.sort(vals)


def schrodinger_solve_numeric(
    well,
    H0: float,
    n: int = 1,
    box_halfwidth: float | None = None,
    grid_points: int | None = None,
    count: int = 1,
    box_tol: float = 1e-6,
    richardson: bool = True,
) -> NumericSpectrum:
    """Lowest Dirichlet eigenvalues of ``-Lap - 2 pi^2 n^2 well / H0^3`` on a box.

    ``well`` is a :class:`MonomialPolynomial` (or vectorised callable with a
    ``dim`` attribute) that is negative away from the origin.  The solve uses
    the second-order 2*dim+1 point Laplacian; with ``richardson`` the grid
    spacing is halved once and the two results are extrapolated.  The box is
    also enlarged by 25 % at the coarse spacing and the largest relative
    level change is reported as ``box_delta``.
    """
    H0 = check_positive_scalar(H0, "H0")
    dim = int(getattr(well, "dim", 1))
    count = int(count)
    if count < 1:
        raise InvalidInputError("count must be >= 1")
    scale = 2.0 * math.pi ** 2 * n ** 2 / H0 ** 3

    def potential(pts):
        return -scale * well(pts)

    if box_halfwidth is None:
        # curvature of the well along each axis gives theta_min
        theta_min = _theta_min_estimate(potential, dim)
        box_halfwidth = 8.0 / math.sqrt(theta_min)
    if grid_points is None:
        grid_points = 201 if dim <= 2 else 61
    box_halfwidth = check_positive_scalar(box_halfwidth, "box_halfwidth")
    grid_points = int(grid_points)
    if grid_points < 5 or grid_points % 2 == 0:
        raise InvalidInputError("grid_points must be odd and >= 5")
    _check_confining(well, box_halfwidth, dim)

    coarse = _fd_levels(potential, box_halfwidth, grid_points, count, dim)
    if richardson:
        raw = _fd_levels(potential, box_halfwidth, 2 * grid_points - 1, count, dim)
        values = (4.0 * raw - coarse) / 3.0
    else:
        raw = values = coarse
    # truncation check: same spacing, box 25 % wider, no refinement
    h = 2 * box_halfwidth / (grid_points - 1)
    cells = int(math.ceil(1.25 * (grid_points - 1) / 2)) * 2
    big = _fd_levels(potential, h * cells / 2, cells + 1, count, dim)
    delta = float(np.max(np.abs(big - coarse) / np.maximum(1.0, np.abs(coarse))))
    if delta > box_tol:
        raise BoxTooSmallError(f"box sensitivity {delta:.3e} exceeds tolerance {box_tol:g}")
    return NumericSpectrum(values=values, box_delta=delta, raw=raw)


def _theta_min_estimate(potential: Callable, dim: int) -> float:
    h = 1e-3
    curv = []
    for i in range(dim):
        e = np.zeros(dim)
        e[i] = h
        v = (potential(e[None])[0] - 2 * potential(np.zeros((1, dim)))[0] + potential(-e[None])[0]) / h ** 2
        curv.append(v)
    curv = np.asarray(curv)
    if np.all(curv > 0):
        return float(np.sqrt(np.min(curv) / 2.0))  # V ~ theta^2 xi^2
    # flat at the origin (k > 1): use the potential scale at unit radius
    vals = [potential(np.eye(dim)[i][None] * 1.0)[0] for i in range(dim)]
    return float(max(min(vals), 1e-3) ** 0.5)


def _check_confining(well, halfwidth, dim):
    probe = np.linspace(-halfwidth, halfwidth, 41)
    pts = np.stack(np.meshgrid(*([probe] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
    pts = pts[np.linalg.norm(pts, axis=1) > 1e-12]
    if np.any(well(pts) >= 0):
        raise InvalidPotentialError("well must be negative away from the origin (non-confining potential)")
