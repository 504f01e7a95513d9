"""Polynomial algebra and Gaussian moments against the oscillator ground state.

Every inner product needed by the expansion engine has the form
``<P Psi0, Q Psi0>`` where ``Psi0`` is the anisotropic Gaussian

    Psi0(xi) = prod_j (theta_j / pi)**(1/4) * exp(-theta_j * xi_j**2 / 2),

so ``Psi0**2`` is a centred normal density with variance ``1/(2 theta_j)``
per axis.  Moments are therefore exact products of double factorials
(Isserlis/Wick), which is what this module evaluates.
"""
from __future__ import annotations

import itertools
import math
from typing import Mapping

import numpy as np

from ._validation import check_vector
from .errors import InvalidInputError


class MonomialPolynomial:
    """Sparse real polynomial in ``dim`` variables, keyed by exponent tuples.

    Zero coefficients are never stored.  Instances are treated as immutable.
    """

    __slots__ = ("_terms", "dim")

    def __init__(self, terms: Mapping[tuple, float] | None = None, dim: int = 1):
        dim = int(dim)
        if dim < 1:
            raise InvalidInputError("polynomial dimension must be >= 1")
        clean: dict[tuple, float] = {}
        for key, coeff in (terms or {}).items():
            key = tuple(int(e) for e in key)
            if len(key) != dim or any(e < 0 for e in key):
                raise InvalidInputError(f"bad exponent {key} for dimension {dim}")
            coeff = float(coeff)
            if coeff != 0.0:
                clean[key] = clean.get(key, 0.0) + coeff
        self._terms = {k: v for k, v in sorted(clean.items()) if v != 0.0}
        self.dim = dim

    # -- constructors -------------------------------------------------------
    @classmethod
    def constant(cls, value: float, dim: int) -> "MonomialPolynomial":
        return cls({(0,) * dim: value}, dim)

    @classmethod
    def coordinate(cls, i: int, dim: int) -> "MonomialPolynomial":
        key = [0] * dim
        key[i] = 1
        return cls({tuple(key): 1.0}, dim)

    @classmethod
    def from_tensor(cls, tensor) -> "MonomialPolynomial":
        """Contract a (symmetric or not) tensor with ``xi`` in every slot."""
        tensor = np.asarray(tensor, dtype=float)
        dim = tensor.shape[0] if tensor.ndim else 1
        terms: dict[tuple, float] = {}
        for idx in itertools.product(range(dim), repeat=tensor.ndim):
            key = [0] * dim
            for i in idx:
                key[i] += 1
            terms[tuple(key)] = terms.get(tuple(key), 0.0) + tensor[idx]
        return cls(terms, dim)

    # -- inspection ---------------------------------------------------------
    @property
    def terms(self) -> dict[tuple, float]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def is_zero(self) -> bool:
        return not self._terms

    def degree(self) -> int:
        return max((sum(k) for k in self._terms), default=0)

    def homogeneous_part(self, degree: int) -> "MonomialPolynomial":
        return MonomialPolynomial({k: v for k, v in self._terms.items() if sum(k) == degree}, self.dim)

    def __call__(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if self.dim == 1 and (pts.ndim == 0 or pts.shape[-1] != 1):
            pts = pts[..., None]
        out = np.zeros(pts.shape[:-1])
        for key, coeff in self._terms.items():
            out = out + coeff * np.prod(pts ** np.asarray(key), axis=-1)
        return out

    def derivative(self, i: int) -> "MonomialPolynomial":
        terms = {}
        for key, coeff in self._terms.items():
            if key[i]:
                new = list(key)
                new[i] -= 1
                terms[tuple(new)] = coeff * key[i]
        return MonomialPolynomial(terms, self.dim)

    def laplacian(self) -> "MonomialPolynomial":
        out = MonomialPolynomial({}, self.dim)
        for i in range(self.dim):
            out = out + self.derivative(i).derivative(i)
        return out

    # -- arithmetic ---------------------------------------------------------
    def _coerce(self, other) -> "MonomialPolynomial":
        if isinstance(other, MonomialPolynomial):
            if other.dim != self.dim:
                raise InvalidInputError(f"dimension mismatch: {self.dim} vs {other.dim}")
            return other
        return MonomialPolynomial.constant(float(other), self.dim)

    def __add__(self, other):
        other = self._coerce(other)
        terms = dict(self._terms)
        for key, coeff in other._terms.items():
            terms[key] = terms.get(key, 0.0) + coeff
        return MonomialPolynomial(terms, self.dim)

    __radd__ = __add__

    def __neg__(self):
        return MonomialPolynomial({k: -v for k, v in self._terms.items()}, self.dim)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, MonomialPolynomial):
            other = float(other)
            return MonomialPolynomial({k: v * other for k, v in self._terms.items()}, self.dim)
        other = self._coerce(other)
        terms: dict[tuple, float] = {}
        for k1, c1 in self._terms.items():
            for k2, c2 in other._terms.items():
                key = tuple(a + b for a, b in zip(k1, k2))
                terms[key] = terms.get(key, 0.0) + c1 * c2
        return MonomialPolynomial(terms, self.dim)

    __rmul__ = __mul__

    def __pow__(self, power: int):
        out = MonomialPolynomial.constant(1.0, self.dim)
        for _ in range(int(power)):
            out = out * self
        return out

    def __eq__(self, other):
        return (
            isinstance(other, MonomialPolynomial)
            and other.dim == self.dim
            and other._terms == self._terms
        )

    def __hash__(self):
        return hash((self.dim, tuple(self._terms.items())))

    def __repr__(self):
        return f"MonomialPolynomial({self._terms!r}, dim={self.dim})"


def _moment_1d(power: int, theta: float) -> float:
    if power % 2:
        return 0.0
    r = power // 2
    # (2r-1)!! / (2 theta)^r
    return math.prod(range(1, 2 * r, 2)) / (2.0 * theta) ** r


def gaussian_moment(theta, alpha_idx) -> float:
    """Return ``integral xi**alpha_idx * Psi0(xi)**2 d xi`` in closed form."""
    theta = check_vector(theta, "theta", positive=True)
    alpha_idx = tuple(int(a) for a in np.atleast_1d(alpha_idx))
    if len(alpha_idx) != theta.size or any(a < 0 for a in alpha_idx):
        raise InvalidInputError(f"multi-index {alpha_idx} does not match theta of length {theta.size}")
    if any(a % 2 for a in alpha_idx):
        return 0.0
    return math.prod(_moment_1d(a, t) for a, t in zip(alpha_idx, theta))


def polynomial_inner(theta, a: MonomialPolynomial, b: MonomialPolynomial) -> float:
    """``<A Psi0, B Psi0>`` for polynomials ``A`` and ``B``."""
    theta = check_vector(theta, "theta", positive=True)
    if a.dim != theta.size or b.dim != theta.size:
        raise InvalidInputError(
            f"polynomial dimensions ({a.dim}, {b.dim}) do not match theta of length {theta.size}"
        )
    # accumulate per exponent first so that inner(A, B) == inner(B, A) bit-exactly
    weights: dict[tuple, list] = {}
    for (k1, c1), (k2, c2) in itertools.product(a.items(), b.items()):
        key = tuple(x + y for x, y in zip(k1, k2))
        if any(e % 2 for e in key):
            continue
        weights.setdefault(key, []).append(c1 * c2)
    total = 0.0
    for key in sorted(weights):
        total += math.fsum(sorted(weights[key])) * gaussian_moment(theta, key)
    return total


def hermite_inner(theta, a: MonomialPolynomial, f, g) -> float:
    """``<A f, g>`` for two oscillator eigenfunction descriptors sharing ``theta``."""
    theta = check_vector(theta, "theta", positive=True)
    if not (np.array_equal(f.theta, theta) and np.array_equal(g.theta, theta)):
        raise InvalidInputError("eigenfunctions and theta disagree")
    return polynomial_inner(theta, a * f.relative_polynomial(), g.relative_polynomial())
