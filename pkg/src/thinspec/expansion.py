"""Eigenvalue expansion coefficients for thin domains.

For the lowest eigenvalue with a non-degenerate quadratic maximum (k = 1)::

    lambda(eps) = c0/eps^2 + c2/eps + c3/eps^(1/2) + c4 + O(eps^(1/2))

with c3 = 0 for the simple ground state.  Degenerate excited levels of the
effective oscillator split at order eta^(2k+1); the splitting is given by
the eigenvalues of a symmetric matrix built from H_(2k+1).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._validation import check_vector
from .errors import InvalidInputError, InvalidLevelError
from .moments import MonomialPolynomial, hermite_inner, polynomial_inner
from .oscillator import (
    TIE_RTOL,
    OscillatorSpectrum,
    hermite_eigenfunction,
    level_value,
    oscillator_spectrum,
)
from .width_models import TaylorWidthData

PI2 = math.pi ** 2


@dataclass(frozen=True)
class Psi1Corrector:
    """First eigenfunction corrector ``R * Psi0`` with ``R`` cubic plus linear.

    ``R = sum C[p,q,j] xi_p xi_q xi_j + sum C_lin[j] xi_j`` solves
    ``(G_1 - Lambda) (R Psi0) = (2 pi^2 / H0^3) H3 Psi0``.
    """

    R: MonomialPolynomial
    theta: np.ndarray
    cubic: np.ndarray
    linear: np.ndarray
    H0: float

    def weak_residual(self, H3: MonomialPolynomial, max_degree: int = 5) -> float:
        """Max over monomial test functions ``phi Psi0`` of the weak-form residual.

        The bilinear form is evaluated via the gradient identity
        ``grad(P Psi0) = (grad P - theta xi P) Psi0`` and the potential
        ``sum theta_j^2 xi_j^2``; it does not reuse the ladder algebra that
        produced the coefficients.
        """
        return max(abs(v) for v in weak_residuals(self, H3, max_degree).values())


def _gradient_form(theta, u: MonomialPolynomial, v: MonomialPolynomial) -> float:
    """``<grad(u Psi0), grad(v Psi0)> + <(V - Lambda) u Psi0, v Psi0>`` with V = sum theta^2 xi^2."""
    dim = theta.size
    total = 0.0
    for j in range(dim):
        xj = MonomialPolynomial.coordinate(j, dim)
        du = u.derivative(j) - theta[j] * xj * u
        dv = v.derivative(j) - theta[j] * xj * v
        total += polynomial_inner(theta, du, dv)
    pot = MonomialPolynomial({}, dim)
    for j in range(dim):
        xj = MonomialPolynomial.coordinate(j, dim)
        pot = pot + theta[j] ** 2 * xj * xj
    pot = pot - float(np.sum(theta))
    return total + polynomial_inner(theta, pot * u, v)


def _test_monomials(dim: int, max_degree: int):
    from .width_models import _multi_indices

    for m in _multi_indices(dim, max_degree):
        yield m, MonomialPolynomial({m: 1.0}, dim)


def weak_residuals(corr: Psi1Corrector, H3: MonomialPolynomial, max_degree: int = 5) -> dict:
    theta = corr.theta
    rhs = H3 * (2.0 * PI2 / corr.H0 ** 3)
    out = {}
    for m, phi in _test_monomials(theta.size, max_degree):
        out[m] = _gradient_form(theta, corr.R, phi) - polynomial_inner(theta, rhs, phi)
    return out


@dataclass(frozen=True)
class ExpansionResult:
    """Coefficients of ``eps^-2 (c0 + c_2k eta^2k + c_2k+1 eta^2k+1 + c_2k+2 eta^2k+2)``, eta = eps^(1/(k+1))."""

    n: int
    m: int
    k: int
    c0: float
    c2k: float
    c2k1: Optional[float]
    c2k2: Optional[float]
    remainder_order: float = 0.5
    provenance: dict = field(default_factory=dict)

    @property
    def eta_exponent(self) -> float:
        return 1.0 / (self.k + 1)

    @property
    def c2(self) -> float:
        return self.c2k

    @property
    def c3(self):
        return self.c2k1

    @property
    def c4(self):
        return self.c2k2

    def coefficients(self) -> dict:
        return {"c0": self.c0, "c2": self.c2k, "c3": self.c2k1, "c4": self.c2k2}

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "k": self.k,
            "coefficients": self.coefficients(),
            "eta_exponent": self.eta_exponent,
            "remainder_order": self.remainder_order,
            "provenance": dict(self.provenance),
        }


@dataclass(frozen=True)
class SplittingMatrix:
    level: int
    multi_indices: tuple
    T: np.ndarray
    tau: np.ndarray
    rotation: np.ndarray
    repeated: bool

    @property
    def c3_candidates(self) -> np.ndarray:
        return np.sort(-self.tau)


def build_psi1(jet: TaylorWidthData, spec: OscillatorSpectrum | None = None) -> Psi1Corrector:
    """Solve for the first corrector of the ground state.

    Matching monomials in ``(G_1 - Lambda)(R Psi0) = (2 pi^2/H0^3) H3 Psi0``
    gives, with ``s = 2 pi^2 / H0^3``::

        C[p,q,j]  = (s/2) beta[p,q,j] / (theta_p + theta_q + theta_j)
        C_lin[j]  = 3 sum_p C[p,p,j] / theta_j
    """
    if jet.k != 1:
        raise InvalidInputError("corrector requires k = 1")
    if spec is None:
        spec = oscillator_spectrum(jet, 1, 1)
    if spec.n != 1:
        raise InvalidInputError("corrector is defined for the n = 1 spectrum")
    theta = np.asarray(spec.theta, dtype=float)
    dim = theta.size
    s = 2.0 * PI2 / jet.H0 ** 3
    beta = jet.beta
    tsum = theta[:, None, None] + theta[None, :, None] + theta[None, None, :]
    cubic = 0.5 * s * beta / tsum
    linear = 3.0 * np.einsum("ppj->j", cubic) / theta
    R = MonomialPolynomial.from_tensor(cubic) + MonomialPolynomial.from_tensor(linear)
    corr = Psi1Corrector(R=R, theta=theta, cubic=cubic, linear=linear, H0=jet.H0)
    return corr


def _check_k1(jet: TaylorWidthData):
    if jet.k != 1:
        raise InvalidInputError("closed-form coefficients need k = 1")


def first_eigenvalue_coeffs(jet: TaylorWidthData) -> ExpansionResult:
    """c0, c2, c3 = 0 and c4 of the lowest eigenvalue."""
    _check_k1(jet)
    spec = oscillator_spectrum(jet, 1, 1)
    theta = spec.theta
    H0 = jet.H0
    H2, H3, H4 = jet.H2_poly(), jet.H3_poly(), jet.H4_poly()
    one = MonomialPolynomial.constant(1.0, jet.base_dim)

    quartic = PI2 / H0 ** 4 * polynomial_inner(theta, 3.0 * H2 * H2 - 2.0 * H0 * H4, one)
    shear = PI2 / H0 ** 2 * float(np.dot(jet.grad_h1, jet.grad_h1))
    if H3.is_zero():
        cubic = 0.0
    else:
        corr = build_psi1(jet, spec)
        cubic = -2.0 * PI2 / H0 ** 3 * polynomial_inner(theta, H3 * corr.R, one)
    return ExpansionResult(
        n=1,
        m=1,
        k=1,
        c0=PI2 / H0 ** 2,
        c2k=float(np.sum(theta)),
        c2k1=0.0,
        c2k2=float(quartic + shear + cubic),
        remainder_order=0.5,
        provenance={
            "c0": "analytic",
            "c2": "analytic-oscillator",
            "c3": "parity (ground state)",
            "c4": "analytic-moments",
        },
    )


def degenerate_c3_matrix(
    jet: TaylorWidthData,
    spec: OscillatorSpectrum,
    level_group,
    n: int | None = None,
) -> SplittingMatrix:
    """Splitting matrix ``T[m,l] = 2 pi^2 n^2 H0^-3 <H3 Psi_m, Psi_l>`` on one degenerate level."""
    n = spec.n if n is None else int(n)
    if n != spec.n:
        raise InvalidInputError(f"n={n} does not match the spectrum (n={spec.n})")
    members = [tuple(int(v) for v in m) for m in level_group]
    if not members:
        raise InvalidLevelError("empty level group")
    values = [level_value(spec.theta, m) for m in members]
    ref = values[0]
    if any(abs(v - ref) > TIE_RTOL * (1.0 + abs(ref)) for v in values):
        raise InvalidLevelError(f"multi-indices {members} do not share one oscillator level")
    group_ids = {lv.multi_index: lv.group for lv in spec.levels}
    level_id = group_ids.get(members[0], -1)

    H3 = jet.H3_poly()
    funcs = [hermite_eigenfunction(spec, m) for m in members]
    size = len(funcs)
    T = np.zeros((size, size))
    pref = 2.0 * PI2 * n ** 2 / jet.H0 ** 3
    for a in range(size):
        for b in range(a, size):
            T[a, b] = T[b, a] = pref * hermite_inner(spec.theta, H3, funcs[a], funcs[b])
    tau, rot = np.linalg.eigh(T)
    scale = max(1.0, float(np.max(np.abs(tau)))) if size else 1.0
    repeated = bool(np.any(np.diff(tau) <= 1e-9 * scale)) if size > 1 else False
    return SplittingMatrix(
        level=level_id,
        multi_indices=tuple(members),
        T=T,
        tau=tau,
        rotation=rot,
        repeated=repeated,
    )


def level_coeffs(jet: TaylorWidthData, spec: OscillatorSpectrum, group_id: int) -> list:
    """c0, c2 and c3 for every member of one oscillator level (no c4 beyond the ground state)."""
    members = spec.group(group_id)
    if not members:
        raise InvalidLevelError(f"no level group {group_id}")
    c0 = PI2 * spec.n ** 2 / jet.H0 ** 2
    lam = level_value(spec.theta, members[0])
    split = degenerate_c3_matrix(jet, spec, members)
    first = [lv for lv in spec.levels if lv.group == group_id][0]
    m0 = spec.levels.index(first) + 1
    out = []
    for i, c3 in enumerate(split.c3_candidates):
        out.append(
            ExpansionResult(
                n=spec.n,
                m=m0 + i,
                k=jet.k,
                c0=c0,
                c2k=lam,
                c2k1=float(c3),
                c2k2=None,
                remainder_order=0.5,
                provenance={
                    "c0": "analytic",
                    "c2": "analytic-oscillator",
                    "c3": "degenerate-matrix" + (" (repeated: higher order needed)" if split.repeated else ""),
                    "c4": "not available for excited levels",
                },
            )
        )
    return out


def evaluate_expansion(res: ExpansionResult, eps, terms: int | None = None):
    """Truncated series ``eps^-2 (c0 + c2k eta^2k + c2k1 eta^2k+1 + c2k2 eta^2k+2)``.

    ``terms`` limits how many of the four coefficients enter (default: all
    available).  Works elementwise on arrays.
    """
    e = np.asarray(eps, dtype=float)
    if np.any(~np.isfinite(e)) or np.any(e <= 0):
        raise InvalidInputError("eps must be positive")
    eta = e ** (1.0 / (res.k + 1))
    coeffs = [(res.c0, 0), (res.c2k, 2 * res.k), (res.c2k1, 2 * res.k + 1), (res.c2k2, 2 * res.k + 2)]
    if terms is not None:
        coeffs = coeffs[: int(terms)]
    total = np.zeros_like(e)
    for c, p in coeffs:
        if c is not None:
            total = total + c * eta ** p
    out = total / e ** 2
    return float(out) if out.ndim == 0 else out


ELLIPSOID_CROSS_WEIGHT = 2.0


def ellipsoid_expansion(a, cross_weight: float = ELLIPSOID_CROSS_WEIGHT) -> ExpansionResult:
    """Closed-form three-term expansion for the ellipsoid with semi-axes ``a``.

    ``c4 = (3 sum 1/a_i^2 + w sum_{i<j} 1/(a_i a_j)) / 4``.  Evaluating the
    Gaussian moments of ``4 a_d^2 s^2`` (``s = sum x_i^2/a_i^2``) gives
    ``w = 2``; ``cross_weight`` exists only to reproduce the printed
    variant ``w = 1/2`` for comparison.
    """
    a = check_vector(a, "a", positive=True)
    if a.size < 2:
        raise InvalidInputError("need at least two semi-axes")
    ax, ad = a[:-1], a[-1]
    inv = 1.0 / ax
    cross = sum(inv[i] * inv[j] for i in range(inv.size) for j in range(i + 1, inv.size))
    return ExpansionResult(
        n=1,
        m=1,
        k=1,
        c0=PI2 / (4.0 * ad ** 2),
        c2k=math.pi / (2.0 * ad) * float(np.sum(inv)),
        c2k1=0.0,
        c2k2=0.25 * (3.0 * float(np.sum(inv ** 2)) + float(cross_weight) * cross),
        remainder_order=0.5,
        provenance={"c0": "closed-form", "c2": "closed-form", "c3": "closed-form", "c4": "closed-form"},
    )


def ellipse_fourth_term(a1: float, a2: float) -> float:
    """Coefficient of the O(eps) term for the ellipse with semi-axes ``(a1, a2)``.

    For radii 1 and e the series continues ``... + 3/4 + (11/(8 pi) + pi/12) e``;
    scaling by ``a1`` maps semi-axes ``(a1, eps a2)`` to ``(1, eps a2/a1)``.
    """
    return (11.0 / (8.0 * math.pi) + math.pi / 12.0) * a2 / a1 ** 3


LEMNISCATE_FOURTH_TERM = 593.0 / (64.0 * math.sqrt(3.0) * math.pi) + math.sqrt(3.0) * math.pi / 4.0


def joseph_ellipse_eccentricity(lambda_disk: float, e: float) -> float:
    """Small-eccentricity series for the first eigenvalue of an ellipse.

    ``lambda_disk * (1 - e^2/2 - e^4/16 (3 - lambda/2) - e^6/32 (3 - lambda/2))``.
    """
    e = float(e)
    if not (0.0 <= e < 1.0):
        raise InvalidInputError(f"eccentricity must be in [0, 1), got {e}")
    lam = float(lambda_disk)
    g = 3.0 - lam / 2.0
    return lam * (1.0 - e ** 2 / 2.0 - e ** 4 / 16.0 * g - e ** 6 / 32.0 * g)


__all__ = [
    "ELLIPSOID_CROSS_WEIGHT",
    "LEMNISCATE_FOURTH_TERM",
    "ExpansionResult",
    "Psi1Corrector",
    "SplittingMatrix",
    "build_psi1",
    "degenerate_c3_matrix",
    "ellipse_fourth_term",
    "ellipsoid_expansion",
    "evaluate_expansion",
    "first_eigenvalue_coeffs",
    "joseph_ellipse_eccentricity",
    "level_coeffs",
    "weak_residuals",
]
