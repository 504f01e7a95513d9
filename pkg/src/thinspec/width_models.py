"""Thin-domain geometries and the local Taylor jet of the width at its maximum.

A thin domain is the region ``-eps*h_minus(x') < x_d < eps*h_plus(x')`` over a
base domain ``omega`` in R^(d-1).  Everything downstream only needs the
width ``H = h_plus + h_minus`` and ``h_minus`` near the (unique) maximum of
``H``, plus pointwise values and gradients for the direct solver.
"""
from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy import optimize

from ._validation import check_points, check_vector
from .errors import (
    AccuracyError,
    DegenerateMaximumError,
    InvalidInputError,
    SearchFailureError,
    UnsupportedGeometryError,
)
from .moments import MonomialPolynomial

DEFAULT_STEP = 0.15
DEFAULT_LEVELS = 4
DEFAULT_FIT_TOL = 1e-6

ArrayFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class WidthModel:
    """Graph-of-function description of a thin domain.

    ``h_plus``/``h_minus`` and ``inside`` are vectorised: they take an array of
    shape ``(..., d-1)`` and return shape ``(...)``.  Gradients are optional;
    when absent they are estimated by central differences.
    """

    dimension: int
    lower: np.ndarray
    upper: np.ndarray
    h_plus: ArrayFn
    h_minus: ArrayFn
    inside: ArrayFn
    catalog_tag: str = "custom"
    params: dict = field(default_factory=dict)
    grad_h_plus: Optional[ArrayFn] = None
    grad_h_minus: Optional[ArrayFn] = None

    def __post_init__(self):
        if int(self.dimension) < 2:
            raise InvalidInputError("dimension must be >= 2")
        lower = check_vector(self.lower, "lower", size=self.dimension - 1)
        upper = check_vector(self.upper, "upper", size=self.dimension - 1)
        if np.any(upper <= lower):
            raise InvalidInputError("bounding box must have upper > lower")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def base_dim(self) -> int:
        return self.dimension - 1

    def widths(self, points):
        """Return ``(h_plus, h_minus, H, inside)`` arrays; values are 0 outside omega."""
        pts = check_points(points, self.base_dim)
        mask = np.asarray(self.inside(pts), dtype=bool)
        safe = np.where(mask[..., None], pts, self.center)
        hp = np.where(mask, self.h_plus(safe), 0.0)
        hm = np.where(mask, self.h_minus(safe), 0.0)
        return hp, hm, hp + hm, mask

    def width(self, points) -> np.ndarray:
        return self.widths(points)[2]

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def gradients(self, points, step: float = 1e-6):
        """Gradients of ``h_minus`` and ``H`` at points inside omega, shape (..., d-1)."""
        pts = check_points(points, self.base_dim)
        if self.grad_h_plus is not None and self.grad_h_minus is not None:
            mask = np.asarray(self.inside(pts), dtype=bool)
            safe = np.where(mask[..., None], pts, self.center)
            gm = np.where(mask[..., None], self.grad_h_minus(safe), 0.0)
            gp = np.where(mask[..., None], self.grad_h_plus(safe), 0.0)
            return gm, gm + gp
        gm = np.zeros(pts.shape)
        gH = np.zeros(pts.shape)
        for i in range(self.base_dim):
            e = np.zeros(self.base_dim)
            e[i] = step
            _, hm_p, H_p, _ = self.widths(pts + e)
            _, hm_m, H_m, _ = self.widths(pts - e)
            gm[..., i] = (hm_p - hm_m) / (2 * step)
            gH[..., i] = (H_p - H_m) / (2 * step)
        return gm, gH


class WidthSample(NamedTuple):
    h_plus: float
    h_minus: float
    H: float
    inside: bool


OUTSIDE = WidthSample(math.nan, math.nan, math.nan, False)


@dataclass(frozen=True, eq=False)
class TaylorWidthData:
    """Local jet of the width function at its maximum, in the Hessian eigenframe.

    In rotated coordinates ``xi`` (``x' - x_bar = basis @ xi``)::

        H  = H0 - 1/2 sum_i alpha_i**2 xi_i**2
                + sum_{pqj} beta[p,q,j] xi_p xi_q xi_j
                + sum_m H4_coeffs[m] xi**m + O(|xi|**5)
        h_minus = h0 + grad_h1 . xi + ...
    """

    d: int
    x_bar: np.ndarray
    H0: float
    alpha: np.ndarray
    basis: np.ndarray
    beta: np.ndarray
    H4_coeffs: dict
    grad_h1: np.ndarray
    fit_residual: float = 0.0
    k: int = 1

    def __post_init__(self):
        if self.H0 <= 0:
            raise InvalidInputError(f"H0 must be positive, got {self.H0}")
        alpha = check_vector(self.alpha, "alpha", size=self.d - 1, positive=self.k == 1)
        if np.any(alpha < 0):
            raise InvalidInputError(f"alpha must be non-negative, got {alpha}")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "x_bar", check_vector(self.x_bar, "x_bar", size=self.d - 1))
        object.__setattr__(self, "grad_h1", check_vector(self.grad_h1, "grad_h1", size=self.d - 1))
        basis = np.asarray(self.basis, dtype=float)
        if basis.shape != (self.d - 1, self.d - 1):
            raise InvalidInputError("basis must be (d-1)x(d-1)")
        if np.max(np.abs(basis.T @ basis - np.eye(self.d - 1))) > 1e-12:
            raise InvalidInputError("basis is not orthogonal")
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "beta", symmetrize(np.asarray(self.beta, dtype=float).reshape((self.d - 1,) * 3)))

    @property
    def base_dim(self) -> int:
        return self.d - 1

    def theta(self, n: int = 1) -> np.ndarray:
        return math.pi * n * self.alpha / self.H0 ** 1.5

    def H2_poly(self) -> MonomialPolynomial:
        return MonomialPolynomial.from_tensor(np.diag(-0.5 * self.alpha ** 2))

    def H3_poly(self) -> MonomialPolynomial:
        return MonomialPolynomial.from_tensor(self.beta)

    def H4_poly(self) -> MonomialPolynomial:
        return MonomialPolynomial(self.H4_coeffs, self.base_dim)

    def jet_poly(self) -> MonomialPolynomial:
        """Degree-4 Taylor polynomial of ``H`` in rotated coordinates."""
        return self.H0 + self.H2_poly() + self.H3_poly() + self.H4_poly()

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "k": self.k,
            "x_bar": self.x_bar.tolist(),
            "H0": self.H0,
            "alpha": self.alpha.tolist(),
            "basis": self.basis.tolist(),
            "beta": self.beta.tolist(),
            "H4_coeffs": {",".join(map(str, m)): c for m, c in sorted(self.H4_coeffs.items())},
            "grad_h1": self.grad_h1.tolist(),
            "fit_residual": self.fit_residual,
        }


def symmetrize(tensor: np.ndarray) -> np.ndarray:
    """Average a 3-tensor over all index permutations.

    Permuted entries come out bit-identical: each one is the same
    fixed-order sum of the same six numbers.
    """
    t = np.asarray(tensor, dtype=float)
    perms = sorted(itertools.permutations(range(3)))
    out = np.empty_like(t)
    for idx in itertools.product(range(t.shape[0]), repeat=3):
        vals = sorted(t[tuple(idx[p] for p in perm)] for perm in perms)
        out[idx] = math.fsum(vals) / 6.0
    return out


# ---------------------------------------------------------------------------
# catalog
# ---------------------------------------------------------------------------

def ellipsoid(a) -> WidthModel:
    """Ellipsoid with semi-axes ``a``; the last axis is the thin direction."""
    a = check_vector(a, "a", positive=True)
    if a.size < 2:
        raise InvalidInputError("ellipsoid needs at least two semi-axes")
    ax, ad = a[:-1], a[-1]

    def s(x):
        return np.sum((x / ax) ** 2, axis=-1)

    def h(x):
        return ad * np.sqrt(np.clip(1.0 - s(x), 0.0, None))

    def grad(x):
        root = np.sqrt(np.clip(1.0 - s(x), 1e-300, None))
        return -ad * (x / ax ** 2) / root[..., None]

    return WidthModel(
        dimension=a.size,
        lower=-ax,
        upper=ax,
        h_plus=h,
        h_minus=h,
        inside=lambda x: s(x) <= 1.0,
        catalog_tag="ellipsoid",
        params={"a": a.tolist()},
        grad_h_plus=grad,
        grad_h_minus=grad,
    )


def _lemniscate_y2(x):
    # y^2 from (x^2 + y^2)^2 = x^2 - y^2, upper root of the quadratic in y^2
    x2 = x * x
    return 0.5 * (np.sqrt(8.0 * x2 + 1.0) - (2.0 * x2 + 1.0))


def lemniscate() -> WidthModel:
    """Right lobe of the lemniscate ``(x1^2 + x2^2)^2 = x1^2 - x2^2``."""

    def h(x):
        return np.sqrt(np.clip(_lemniscate_y2(x[..., 0]), 0.0, None))

    def grad(x):
        x1 = x[..., 0]
        y = np.sqrt(np.clip(_lemniscate_y2(x1), 1e-300, None))
        dy2 = -2.0 * x1 + 4.0 * x1 / np.sqrt(8.0 * x1 * x1 + 1.0)
        return (dy2 / (2.0 * y))[..., None]

    return WidthModel(
        dimension=2,
        lower=[0.0],
        upper=[1.0],
        h_plus=h,
        h_minus=h,
        inside=lambda x: (x[..., 0] >= 0.0) & (x[..., 0] <= 1.0),
        catalog_tag="lemniscate",
        grad_h_plus=grad,
        grad_h_minus=grad,
    )


def rectangle(length: float = 1.0, height: float = 1.0) -> WidthModel:
    """``(0, length) x (-height/2, height/2)``: constant width, no isolated maximum."""
    length = float(length)
    height = float(height)
    if length <= 0 or height <= 0:
        raise InvalidInputError("rectangle sides must be positive")

    def h(x):
        return np.full(x.shape[:-1], 0.5 * height)

    def grad(x):
        return np.zeros(x.shape)

    return WidthModel(
        dimension=2,
        lower=[0.0],
        upper=[length],
        h_plus=h,
        h_minus=h,
        inside=lambda x: (x[..., 0] >= 0.0) & (x[..., 0] <= length),
        catalog_tag="rectangle",
        params={"length": length, "height": height},
        grad_h_plus=grad,
        grad_h_minus=grad,
    )


def from_functions(h_plus, h_minus, lower, upper, inside=None, grad_h_plus=None, grad_h_minus=None) -> WidthModel:
    """Custom model from vectorised callables over a box (or a sub-domain given by ``inside``)."""
    lower = check_vector(lower, "lower")
    upper = check_vector(upper, "upper", size=lower.size)
    if inside is None:
        def inside(x):
            return np.all((x >= lower) & (x <= upper), axis=-1)
    return WidthModel(
        dimension=lower.size + 1,
        lower=lower,
        upper=upper,
        h_plus=h_plus,
        h_minus=h_minus,
        inside=inside,
        catalog_tag="custom",
        grad_h_plus=grad_h_plus,
        grad_h_minus=grad_h_minus,
    )


def load_grid_csv(path) -> WidthModel:
    """Load a sampled width model (columns ``x1..x_{d-1}, h_plus, h_minus``).

    Samples must lie on a tensor grid; values are interpolated by quintic
    splines so that the jet extractor sees four continuous derivatives.
    Only ``d - 1`` in {1, 2} is supported.
    """
    from scipy.interpolate import RectBivariateSpline, make_interp_spline

    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader if row]
    data = np.asarray(rows, dtype=float)
    if data.ndim != 2 or data.shape[1] < 3 or data.shape[1] != len(header):
        raise InvalidInputError(f"{path}: expected columns x1..x_(d-1), h_plus, h_minus")
    if not np.all(np.isfinite(data)):
        raise InvalidInputError(f"{path}: non-finite samples")
    base_dim = data.shape[1] - 2
    coords, hp, hm = data[:, :base_dim], data[:, -2], data[:, -1]

    if base_dim == 1:
        order = np.argsort(coords[:, 0])
        x = coords[order, 0]
        sp_p = make_interp_spline(x, hp[order], k=5)
        sp_m = make_interp_spline(x, hm[order], k=5)
        dp, dm = sp_p.derivative(), sp_m.derivative()

        def fp(p):
            return sp_p(p[..., 0])

        def fm(p):
            return sp_m(p[..., 0])

        def gp(p):
            return dp(p[..., 0])[..., None]

        def gm(p):
            return dm(p[..., 0])[..., None]

        lower, upper = [x[0]], [x[-1]]
    elif base_dim == 2:
        xs = np.unique(coords[:, 0])
        ys = np.unique(coords[:, 1])
        if xs.size * ys.size != coords.shape[0]:
            raise InvalidInputError(f"{path}: samples are not on a tensor grid")
        order = np.lexsort((coords[:, 1], coords[:, 0]))
        P = hp[order].reshape(xs.size, ys.size)
        M = hm[order].reshape(xs.size, ys.size)
        kx, ky = min(5, xs.size - 1), min(5, ys.size - 1)
        sp_p = RectBivariateSpline(xs, ys, P, kx=kx, ky=ky)
        sp_m = RectBivariateSpline(xs, ys, M, kx=kx, ky=ky)

        def _ev(spl, p, dx=0, dy=0):
            flat = p.reshape(-1, 2)
            return spl.ev(flat[:, 0], flat[:, 1], dx=dx, dy=dy).reshape(p.shape[:-1])

        def fp(p):
            return _ev(sp_p, p)

        def fm(p):
            return _ev(sp_m, p)

        def gp(p):
            return np.stack([_ev(sp_p, p, 1, 0), _ev(sp_p, p, 0, 1)], axis=-1)

        def gm(p):
            return np.stack([_ev(sp_m, p, 1, 0), _ev(sp_m, p, 0, 1)], axis=-1)

        lower, upper = [xs[0], ys[0]], [xs[-1], ys[-1]]
    else:
        raise InvalidInputError("sampled widths are supported for d-1 in {1, 2} only")

    model = from_functions(fp, fm, lower, upper, grad_h_plus=gp, grad_h_minus=gm)
    object.__setattr__(model, "params", {"path": str(path)})
    return model


def rotate_model(model: WidthModel, rotation, center=None) -> WidthModel:
    """Return the model composed with an orthogonal map about ``center``.

    The new widths satisfy ``h_new(x) = h(center + R.T @ (x - center))``.
    """
    R = np.asarray(rotation, dtype=float)
    n = model.base_dim
    if R.shape != (n, n) or np.max(np.abs(R.T @ R - np.eye(n))) > 1e-12:
        raise InvalidInputError("rotation must be an orthogonal matrix of matching size")
    c = model.center if center is None else check_vector(center, "center", size=n)

    def pull(x):
        return c + (x - c) @ R  # row-vector form of R.T @ (x - c)

    def push_grad(g):
        return g @ R.T

    corners = np.array(list(itertools.product(*zip(model.lower, model.upper))))
    rotated = c + (corners - c) @ R.T
    radius = np.max(np.abs(rotated - c), axis=0)
    gp = gm = None
    if model.grad_h_plus is not None and model.grad_h_minus is not None:
        def gp(x):
            return push_grad(model.grad_h_plus(pull(x)))

        def gm(x):
            return push_grad(model.grad_h_minus(pull(x)))

    out = WidthModel(
        dimension=model.dimension,
        lower=c - radius,
        upper=c + radius,
        h_plus=lambda x: model.h_plus(pull(x)),
        h_minus=lambda x: model.h_minus(pull(x)),
        inside=lambda x: model.inside(pull(x)),
        catalog_tag="custom",
        params={"rotated": model.catalog_tag},
        grad_h_plus=gp,
        grad_h_minus=gm,
    )
    return out


CATALOG = {
    "ellipsoid": ellipsoid,
    "lemniscate": lemniscate,
    "rectangle": rectangle,
}


def make_model(name: str, **params) -> WidthModel:
    """Build a catalog model by name (``custom`` expects ``path=`` to a CSV grid)."""
    if name == "custom":
        return load_grid_csv(params["path"])
    try:
        factory = CATALOG[name]
    except KeyError:
        raise InvalidInputError(f"unknown model {name!r}; choose from {sorted(CATALOG) + ['custom']}") from None
    return factory(**params)


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def eval_width(model: WidthModel, x_prime) -> WidthSample:
    """Evaluate ``(h_plus, h_minus, H)`` at a single point; returns ``OUTSIDE`` off omega."""
    x = check_vector(x_prime, "x_prime", size=model.base_dim)
    hp, hm, H, inside = model.widths(x)
    if not bool(inside):
        return OUTSIDE
    return WidthSample(float(hp), float(hm), float(H), True)


def _central_gradient(f, x, step):
    g = np.empty(x.size)
    for i in range(x.size):
        e = np.zeros(x.size)
        e[i] = step
        g[i] = (f(x + e) - f(x - e)) / (2 * step)
    return g


def _central_hessian(f, x, step):
    n = x.size
    Hs = np.empty((n, n))
    f0 = f(x)
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = step
        Hs[i, i] = (f(x + ei) - 2 * f0 + f(x - ei)) / step ** 2
        for j in range(i + 1, n):
            ej = np.zeros(n)
            ej[j] = step
            Hs[i, j] = Hs[j, i] = (
                f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)
            ) / (4 * step ** 2)
    return Hs


def locate_max(model: WidthModel, seed=None, tol: float = 1e-8, max_iter: int = 50):
    """Locate the interior maximum of ``H`` starting from ``seed``.

    A Nelder-Mead search is polished by Newton steps on finite-difference
    derivatives until the central-difference gradient norm is below ``tol``.
    """
    seed = model.center if seed is None else check_vector(seed, "seed", size=model.base_dim)
    if not bool(model.inside(seed)):
        raise InvalidInputError(f"seed {seed} is outside omega")
    scale = float(np.max(model.upper - model.lower))

    def H(x):
        return float(model.width(x))

    def objective(x):
        return -H(x) if bool(model.inside(x)) else np.inf

    res = optimize.minimize(
        objective,
        seed,
        method="Nelder-Mead",
        options={"xatol": 1e-10 * scale, "fatol": 1e-15, "maxiter": 4000 * model.base_dim},
    )
    x = np.asarray(res.x, dtype=float)
    if not np.isfinite(res.fun):
        raise SearchFailureError("search left omega", best=seed)

    probe = 1e-3 * scale
    near = [x + s * probe * e for e in np.eye(model.base_dim) for s in (-1, 1)]
    if not all(bool(model.inside(p)) and H(p) > 0 for p in near):
        raise UnsupportedGeometryError(f"maximum of H lies on the boundary of omega (near {x})")
    ring = [x + s * 1e-2 * scale * e for e in np.eye(model.base_dim) for s in (-1, 1)]
    if max(H(p) for p in ring) >= H(x) - 1e-14 * max(1.0, abs(H(x))):
        raise UnsupportedGeometryError("H has no isolated maximum near the seed")

    gstep = 1e-5 * scale
    grad = _central_gradient(H, x, gstep)
    it = 0
    while np.linalg.norm(grad) > tol and it < max_iter:
        hess = _central_hessian(H, x, 1e-3 * scale)
        try:
            dx = -np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            break
        if np.linalg.norm(dx) > probe:
            dx *= probe / np.linalg.norm(dx)
        x = x + dx
        grad = _central_gradient(H, x, gstep)
        it += 1
    if np.linalg.norm(grad) > tol:
        raise SearchFailureError(f"gradient norm {np.linalg.norm(grad):.3e} above tol {tol:g}", best=x)
    return x


_STENCILS = {
    0: ({0: 1.0}, 0),
    1: ({-1: -0.5, 1: 0.5}, 1),
    2: ({-1: 1.0, 0: -2.0, 1: 1.0}, 2),
    3: ({-2: -0.5, -1: 1.0, 1: -1.0, 2: 0.5}, 3),
    4: ({-2: 1.0, -1: -4.0, 0: 6.0, 1: -4.0, 2: 1.0}, 4),
}


def _multi_indices(dim, max_order):
    for total in range(max_order + 1):
        for combo in itertools.combinations_with_replacement(range(dim), total):
            m = [0] * dim
            for c in combo:
                m[c] += 1
            yield tuple(m)


def _fd_partials(f, x0, max_order, h):
    """All partial derivatives up to ``max_order`` by tensor central differences, O(h^2)."""
    dim = x0.size
    plans = {}
    points = {}
    for m in _multi_indices(dim, max_order):
        terms = []
        for offs in itertools.product(*[sorted(_STENCILS[mi][0].items()) for mi in m]):
            shift = tuple(o for o, _ in offs)
            w = math.prod(c for _, c in offs)
            terms.append((shift, w))
            points.setdefault(shift, None)
        plans[m] = terms
    shifts = list(points)
    pts = x0 + h * np.asarray(shifts, dtype=float)
    vals = dict(zip(shifts, np.asarray(f(pts), dtype=float)))
    out = {}
    for m, terms in plans.items():
        out[m] = math.fsum(w * vals[s] for s, w in terms) / h ** sum(m)
    return out


def _richardson_partials(f, x0, max_order, h, levels=2):
    """Richardson table over steps h, h/2, ... assuming an even-power error expansion."""
    tabs = [_fd_partials(f, x0, max_order, h / 2 ** i) for i in range(levels)]
    for lev in range(1, levels):
        fac = 4.0 ** lev
        tabs = [
            {m: (fac * fine[m] - coarse[m]) / (fac - 1.0) for m in coarse}
            for coarse, fine in zip(tabs[:-1], tabs[1:])
        ]
    return tabs[0]


def _tensor_from_partials(partials, dim, order):
    T = np.zeros((dim,) * order)
    for idx in itertools.product(range(dim), repeat=order):
        m = [0] * dim
        for i in idx:
            m[i] += 1
        T[idx] = partials[tuple(m)]
    return T


def _fix_signs(B):
    """Flip columns so the first non-negligible component is positive, then re-orthonormalise."""
    B = np.array(B, dtype=float)
    for j in range(B.shape[1]):
        col = B[:, j]
        nz = np.flatnonzero(np.abs(col) > 1e-6 * np.max(np.abs(col)))
        if col[nz[0]] < 0:
            B[:, j] = -col
    q, r = np.linalg.qr(B)
    return q * np.sign(np.diag(r))


def _canonical_basis(hessian):
    evals, vecs = np.linalg.eigh(hessian)
    # alpha_i^2 = -eigenvalue; descending alpha means ascending eigenvalue
    order = np.argsort(evals, kind="stable")
    return evals[order], _fix_signs(vecs[:, order])


def _quartic_coeffs(D4):
    dim = D4.shape[0]
    coeffs = {}
    for m in _multi_indices(dim, 4):
        if sum(m) != 4:
            continue
        idx = tuple(i for i, c in enumerate(m) for _ in range(c))
        val = D4[idx] / math.prod(math.factorial(c) for c in m)
        if val != 0.0:
            coeffs[m] = val
    return coeffs


def extract_taylor(
    model: WidthModel,
    x_bar,
    order: int = 4,
    step: float = DEFAULT_STEP,
    fit_tol: float = DEFAULT_FIT_TOL,
    levels: int = DEFAULT_LEVELS,
) -> TaylorWidthData:
    """Numerically extract the degree-4 jet of ``H`` (and ``grad h_minus``) at ``x_bar``.

    Two passes.  A coarse pass (absolute step 1e-2, one Richardson level)
    finds the Hessian eigenframe and the local lengths
    ``l_i = sqrt(H0) / alpha_i``.  The second pass differentiates
    ``s -> H(x_bar + B diag(l) s)`` with tensor-product central differences
    at relative step ``step`` and ``levels`` Richardson levels, which keeps
    round-off in the fourth derivatives near 1e-9.  The Hessian is then
    re-diagonalised so that ``H2 = -1/2 sum alpha_i^2 xi_i^2`` with ``alpha``
    sorted descending.
    """
    if order != 4:
        raise InvalidInputError("only order=4 jets are supported")
    x_bar = check_vector(x_bar, "x_bar", size=model.base_dim)
    n = model.base_dim

    def H(p):
        return model.widths(p)[2]

    def hm(p):
        return model.widths(p)[1]

    def stencil_inside(M, h):
        corners = [s * 2 * h * M[:, i] for i in range(n) for s in (-1, 1)]
        return all(bool(model.inside(x_bar + c)) for c in corners)

    coarse_step = 1e-2
    if not stencil_inside(np.eye(n), coarse_step):
        raise UnsupportedGeometryError("finite-difference stencil leaves omega")
    dH = _richardson_partials(H, x_bar, 2, coarse_step)
    H0 = dH[(0,) * n]
    if H0 <= 0:
        raise UnsupportedGeometryError(f"H(x_bar) = {H0} is not positive")
    evals, B1 = _canonical_basis(_tensor_from_partials(dH, n, 2))
    if np.max(evals) >= -1e-6 * max(1.0, abs(H0)):
        raise DegenerateMaximumError(
            f"Hessian of H at x_bar is not negative definite (eigenvalues {evals}); k > 1 is unsupported here"
        )

    ell = np.sqrt(H0 / -evals)
    M = B1 * ell
    h = float(step)
    while not stencil_inside(M, h) and h > 1e-3:
        h *= 0.5
    if not stencil_inside(M, h):
        raise UnsupportedGeometryError("finite-difference stencil leaves omega")

    def scaled(fn):
        return lambda s: fn(x_bar + s @ M.T)

    zero = np.zeros(n)
    dg = _richardson_partials(scaled(H), zero, 4, h, levels)
    dgm = _richardson_partials(scaled(hm), zero, 1, h, levels)
    inv = 1.0 / ell
    D = {
        r: _tensor_from_partials(dg, n, r) * np.einsum(",".join("abcd"[:r]) + "->" + "abcd"[:r], *[inv] * r)
        for r in (2, 3, 4)
    }
    H0 = dg[(0,) * n]

    # rotate second-pass tensors (B1 frame) into the final canonical frame
    evals2, V = _canonical_basis(D[2])
    if np.max(evals2) >= 0:
        raise DegenerateMaximumError(f"Hessian of H at x_bar is not negative definite ({evals2})")
    B = _fix_signs(B1 @ V)
    V = B1.T @ B
    D3 = np.einsum("abc,ap,bq,cr->pqr", D[3], V, V, V)
    D4 = np.einsum("abcd,ap,bq,cr,ds->pqrs", D[4], V, V, V, V)
    grad_b1 = np.array([dgm[tuple(int(i == j) for i in range(n))] for j in range(n)]) * inv

    jet = TaylorWidthData(
        d=model.dimension,
        x_bar=x_bar,
        H0=float(H0),
        alpha=np.sqrt(-evals2),
        basis=B,
        beta=symmetrize(D3 / 6.0),
        H4_coeffs=_quartic_coeffs(D4),
        grad_h1=V.T @ grad_b1,
    )
    residual = jet_fit_residual(model, jet, radius=1e-2 * float(np.min(ell)))
    if residual > fit_tol * max(1.0, H0):
        raise AccuracyError(f"jet fit residual {residual:.3e} exceeds tolerance {fit_tol:g}")
    object.__setattr__(jet, "fit_residual", residual)
    return jet


def jet_deviation(model: WidthModel, jet: TaylorWidthData, xi) -> np.ndarray:
    """``H(x_bar + B xi) - jet(xi)`` for rotated displacements ``xi`` of shape (..., d-1)."""
    xi = check_points(xi, jet.base_dim)
    pts = jet.x_bar + xi @ jet.basis.T
    return model.width(pts) - jet.jet_poly()(xi)


def jet_fit_residual(model: WidthModel, jet: TaylorWidthData, radius: float) -> float:
    """Max jet deviation over axis and diagonal points at distance ``radius``."""
    n = jet.base_dim
    dirs = [s * e for e in np.eye(n) for s in (-1.0, 1.0)]
    for i, j in itertools.combinations(range(n), 2):
        for si, sj in itertools.product((-1.0, 1.0), repeat=2):
            v = np.zeros(n)
            v[i], v[j] = si, sj
            dirs.append(v / math.sqrt(2.0))
    return float(np.max(np.abs(jet_deviation(model, jet, radius * np.asarray(dirs)))))


def ellipsoid_taylor(a) -> TaylorWidthData:
    """Closed-form jet of an ellipsoid at the origin, in the canonical (alpha-descending) frame."""
    a = check_vector(a, "a", positive=True)
    if a.size < 2:
        raise InvalidInputError("ellipsoid needs at least two semi-axes")
    ax, ad = a[:-1], a[-1]
    n = ax.size
    alpha_axis = math.sqrt(2.0 * ad) / ax
    order = np.argsort(-alpha_axis, kind="stable")
    ax = ax[order]
    B = np.eye(n)[:, order]
    coeffs = {}
    for i in range(n):
        for j in range(i, n):
            m = [0] * n
            m[i] += 2
            m[j] += 2
            # -(a_d/4) sum_ij (x_i x_j / (a_i a_j))^2
            coeffs[tuple(m)] = -ad * (1.0 if i == j else 2.0) / (4.0 * ax[i] ** 2 * ax[j] ** 2)
    return TaylorWidthData(
        d=a.size,
        x_bar=np.zeros(n),
        H0=2.0 * ad,
        alpha=math.sqrt(2.0 * ad) / ax,
        basis=B,
        beta=np.zeros((n, n, n)),
        H4_coeffs=coeffs,
        grad_h1=np.zeros(n),
        fit_residual=0.0,
    )
