"""Reference eigenvalues of the Dirichlet Laplacian on a thin domain.

The domain ``-eps h_minus < x_d < eps h_plus`` is mapped onto the cylinder
``omega x (0, 1)`` with ``t = (x_d + eps h_minus) / (eps H)``.  With the
volume weight ``eps H`` the Dirichlet form becomes::

    int H |grad' psi + K psi_t|^2 + psi_t^2 / (eps^2 H) dx' dt,
    K_i = (d_i h_minus - t d_i H) / H,

and the mass is ``int H psi^2``.  Flux-form central differences on this
form give a symmetric stiffness ``S``; the standard symmetric matrix
``A = H^-1/2 S H^-1/2`` acts on ``sqrt(H) psi``.
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as sla

from .errors import (
    AccuracyRefusedError,
    ConvergenceError,
    DegenerateDomainError,
    FloorViolationError,
    InvalidInputError,
)
from .width_models import WidthModel

DEFAULT_TOL = 1e-8
SPLU_MAX_UNKNOWNS = 400_000


@dataclass(frozen=True)
class GridSpec:
    """Tensor grid: ``n_base`` cells per base axis, ``n_t`` cells across."""

    n_base: int
    n_t: int

    @classmethod
    def make(cls, resolution, n_t=None) -> "GridSpec":
        n = int(resolution)
        if n < 4:
            raise InvalidInputError("resolution must be >= 4")
        m = n if n_t is None else int(n_t)
        if m < 4:
            raise InvalidInputError("n_t must be >= 4")
        return cls(n, m)

    def refined(self, factor: int = 2) -> "GridSpec":
        return GridSpec(self.n_base * factor, self.n_t * factor)


@dataclass(frozen=True, eq=False)
class MappedOperatorCoefficients:
    """Nodal coefficient fields of the mapped operator (shape ``(n+1,)*nb + (n_t+1,)``).

    ``Kd = 1/H^2``, ``Ki = (d_i h_minus - t d_i H)/H`` and
    ``K0 = H^-1 Lap' H / 2 - |grad' H|^2 / (4 H^2)``: the potential that
    appears once ``sqrt(H) psi`` is taken as unknown.  ``K0`` is reported
    for inspection only; the assembly works on the weighted form and does
    not need it.
    """

    eps: float
    axes: tuple
    t: np.ndarray
    H: np.ndarray
    Kd: np.ndarray
    Ki: np.ndarray
    K0: np.ndarray
    mask: np.ndarray
    h_floor: float  # smallest width kept in the active set


@dataclass(eq=False)
class MappedOperator:
    A: sp.csr_matrix
    coefficients: MappedOperatorCoefficients
    grid: GridSpec
    index: np.ndarray  # full-grid node -> unknown, -1 if Dirichlet

    @property
    def size(self) -> int:
        return self.A.shape[0]

    def to_grid(self, vec) -> np.ndarray:
        """Scatter an unknown vector back onto the full node grid (zeros elsewhere)."""
        out = np.zeros(self.index.shape)
        sel = self.index >= 0
        out[sel] = np.asarray(vec)[self.index[sel]]
        return out


@dataclass
class DirectSolveResult:
    eps: float
    grids: list
    h_floor: list
    eigenvalues: np.ndarray
    residual_norms: np.ndarray
    iterations: int
    raw: list = field(default_factory=list)
    extrapolated: Optional[np.ndarray] = None
    error_estimate: Optional[np.ndarray] = None
    measured_order: Optional[np.ndarray] = None
    order_flag: bool = False
    seconds: float = 0.0
    vectors: Optional[np.ndarray] = None
    operator: Optional[MappedOperator] = None

    @property
    def best(self) -> np.ndarray:
        return self.extrapolated if self.extrapolated is not None else self.eigenvalues

    def to_dict(self) -> dict:
        def arr(v):
            return None if v is None else [float(x) for x in np.atleast_1d(v)]

        return {
            "eps": self.eps,
            "grids": [{"n_base": g.n_base, "n_t": g.n_t} for g in self.grids],
            "h_floor": list(self.h_floor),
            "eigenvalues": arr(self.eigenvalues),
            "residual_norms": arr(self.residual_norms),
            "iterations": self.iterations,
            "raw": [arr(r) for r in self.raw],
            "extrapolated": arr(self.extrapolated),
            "error_estimate": arr(self.error_estimate),
            "measured_order": arr(self.measured_order),
            "order_flag": self.order_flag,
        }


def _base_axes(model: WidthModel, n: int):
    return tuple(np.linspace(lo, hi, n + 1) for lo, hi in zip(model.lower, model.upper))


def mapped_coefficients(model: WidthModel, eps: float, grid: GridSpec) -> MappedOperatorCoefficients:
    eps = float(eps)
    if not (eps > 0 and math.isfinite(eps)):
        raise InvalidInputError("eps must be positive")
    nb = model.base_dim
    if nb not in (1, 2):
        raise InvalidInputError(f"direct solves support d in {{2, 3}}, got d={model.dimension}")
    axes = _base_axes(model, grid.n_base)
    t = np.linspace(0.0, 1.0, grid.n_t + 1)
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    _, hm, H, inside = model.widths(pts)
    with np.errstate(all="ignore"):
        g_hm, g_H = model.gradients(pts)
    steps = np.array([ax[1] - ax[0] for ax in axes])

    interior = np.zeros(H.shape, dtype=bool)
    interior[(slice(1, -1),) * nb] = True
    cand = interior & inside & (H > 0) & np.all(np.isfinite(g_H), axis=-1) & np.all(np.isfinite(g_hm), axis=-1)
    if not np.any(cand):
        raise DegenerateDomainError("no interior grid node has positive width")
    # pinch cutoff, applied node by node: keep x' only if the linearised width
    # stays positive two cells away (H >= 2 dx |grad H|)
    gnorm = np.linalg.norm(np.where(cand[..., None], g_H, 0.0), axis=-1)
    base_mask = cand & (H >= 2.0 * np.max(steps) * gnorm)
    if not np.any(base_mask):
        raise DegenerateDomainError("every node is below the pinch cutoff H >= 2 dx |grad H|")
    h_floor = float(np.min(H[base_mask]))

    with np.errstate(all="ignore"):
        Hs = np.where(H > 0, H, np.nan)
        Kd_b = 1.0 / Hs ** 2
        tt = t.reshape((1,) * nb + (-1,))
        Ki = np.stack(
            [(g_hm[..., i][..., None] - tt * g_H[..., i][..., None]) / Hs[..., None] for i in range(nb)],
            axis=0,
        )
        lap = np.zeros_like(H)
        for i in range(nb):
            sl_c = [slice(1, -1) if a == i else slice(None) for a in range(nb)]
            sl_p = [slice(2, None) if a == i else slice(None) for a in range(nb)]
            sl_m = [slice(None, -2) if a == i else slice(None) for a in range(nb)]
            part = np.full_like(H, np.nan)
            part[tuple(sl_c)] = (H[tuple(sl_p)] - 2 * H[tuple(sl_c)] + H[tuple(sl_m)]) / steps[i] ** 2
            lap = lap + part
        K0_b = 0.5 * lap / Hs - 0.25 * np.sum(g_H ** 2, axis=-1) / Hs ** 2
    shape_t = H.shape + (t.size,)
    Kd = np.broadcast_to(Kd_b[..., None], shape_t)
    K0 = np.broadcast_to(K0_b[..., None], shape_t)
    mask = np.zeros(shape_t, dtype=bool)
    mask[..., 1:-1] = base_mask[..., None]
    active_K = np.moveaxis(Ki, 0, -1)[mask]
    if not (np.all(np.isfinite(Kd[mask])) and np.all(np.isfinite(active_K))):
        raise FloorViolationError("non-finite mapped coefficient on an active node")
    return MappedOperatorCoefficients(
        eps=eps, axes=axes, t=t, H=H, Kd=Kd, Ki=Ki, K0=K0, mask=mask, h_floor=h_floor
    )


def _shift(arr, axis, off):
    """View of ``arr`` moved by ``off`` along ``axis`` over the interior block."""
    sl = []
    for a in range(arr.ndim):
        if a == axis:
            sl.append(slice(1 + off, arr.shape[a] - 1 + off))
        else:
            sl.append(slice(1, arr.shape[a] - 1))
    return arr[tuple(sl)]


def assemble_mapped_operator(model: WidthModel, eps: float, grid) -> MappedOperator:
    """Symmetric sparse matrix of the mapped eigenproblem on the active nodes."""
    if not isinstance(grid, GridSpec):
        grid = GridSpec.make(grid)
    co = mapped_coefficients(model, eps, grid)
    nb = model.base_dim
    ta = nb  # t axis index in the node arrays
    H = co.H
    t = co.t
    steps = [ax[1] - ax[0] for ax in co.axes]
    dt = t[1] - t[0]
    shape = co.mask.shape

    index = -np.ones(shape, dtype=np.int64)
    n_act = int(np.count_nonzero(co.mask))
    index[co.mask] = np.arange(n_act)

    Hn = np.broadcast_to(H[..., None], shape)
    with np.errstate(all="ignore"):
        HK = np.stack([np.nan_to_num(Hn * co.Ki[i], nan=0.0, posinf=0.0, neginf=0.0) for i in range(nb)])
        # t-direction coefficient at t midpoints: H sum K_i^2 + 1/(eps^2 H); K_i is linear in t
        Hb = np.where(H > 0, H, np.nan)[..., None]
        a = 1.0 / (co.eps ** 2 * Hb)
        for i in range(nb):
            k_mid = 0.5 * (co.Ki[i][..., :-1] + co.Ki[i][..., 1:])
            a = a + Hb * k_mid ** 2
    a = np.nan_to_num(a, nan=0.0)

    rows, cols, vals = [], [], []
    centre = index[(slice(1, -1),) * (nb + 1)]
    diag = np.zeros(centre.shape)

    def couple(nbr, w):
        rows.append(centre.ravel())
        cols.append(nbr.ravel())
        vals.append(-np.broadcast_to(w, centre.shape).ravel())

    # base directions: H at edge midpoints
    for i in range(nb):
        for off in (-1, 1):
            Hc = _shift(Hn, i, 0)
            Hnb = _shift(Hn, i, off)
            w = 0.5 * (Hc + Hnb) / steps[i] ** 2
            diag += w
            couple(_shift(index, i, off), w)
    # t direction
    inner = tuple(slice(1, -1) for _ in range(nb))
    a_lo = a[inner + (slice(0, -1),)]  # midpoint j-1/2 for j = 1..n_t-1
    a_hi = a[inner + (slice(1, None),)]
    w_lo = a_lo / dt ** 2
    w_hi = a_hi / dt ** 2
    diag += w_lo + w_hi
    couple(_shift(index, ta, -1), w_lo)
    couple(_shift(index, ta, 1), w_hi)
    # mixed d_i (HK_i d_t) + d_t (HK_i d_i): paired so that (p, q) and (q, p) match
    for i in range(nb):
        for di in (-1, 1):
            for dj in (-1, 1):
                sl = []
                for ax in range(nb + 1):
                    off = di if ax == i else (dj if ax == ta else 0)
                    sl.append(slice(1 + off, shape[ax] - 1 + off))
                nbr = index[tuple(sl)]
                c = di * dj * (_shift(HK[i], i, di) + _shift(HK[i], ta, dj)) / (4.0 * steps[i] * dt)
                couple(nbr, c)

    act = centre >= 0
    rows.append(centre[act])
    cols.append(centre[act])
    vals.append(diag[act])
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    v = np.concatenate(vals)
    keep = (r >= 0) & (c >= 0)
    S = sp.csr_matrix((v[keep], (r[keep], c[keep])), shape=(n_act, n_act))
    d = 1.0 / np.sqrt(Hn[co.mask])
    Dm = sp.diags(d)
    A = (Dm @ S @ Dm).tocsr()
    A = ((A + A.T) * 0.5).tocsr()
    A.sort_indices()
    if not np.all(np.isfinite(A.data)):
        raise FloorViolationError("non-finite entry in the assembled operator")
    return MappedOperator(A=A, coefficients=co, grid=grid, index=index)


# ---------------------------------------------------------------------------
# eigensolver
# ---------------------------------------------------------------------------

def _cg_inverse(A, shift, rtol, maxiter, trace):
    import pyamg

    M = (A - shift * sp.identity(A.shape[0], format="csr")).tocsr()
    ml = pyamg.smoothed_aggregation_solver(M, symmetry="symmetric")
    prec = ml.aspreconditioner(cycle="V")
    n = A.shape[0]

    def solve(b):
        its = [0]

        def cb(_):
            its[0] += 1

        x, info = sla.cg(M, b, rtol=rtol, atol=0.0, maxiter=maxiter, M=prec, callback=cb)
        trace.append(its[0])
        if info != 0:
            raise ConvergenceError(f"inner CG stagnated after {its[0]} iterations", trace=list(trace))
        return x

    return sla.LinearOperator((n, n), matvec=solve, dtype=float)


def smallest_eigenvalues(
    A,
    count: int = 1,
    shift: float = 0.0,
    tol: float = DEFAULT_TOL,
    method: str = "auto",
    return_info: bool = False,
):
    """Lowest ``count`` eigenpairs of symmetric ``A`` nearest above ``shift``.

    Shift-invert Lanczos (ARPACK).  ``method`` picks the inner solve:
    ``"splu"`` (sparse LU, exact), ``"cg"`` (AMG-preconditioned conjugate
    gradients) or ``"auto"`` (LU below a size threshold).  Every returned
    pair is certified by ``|A u - lambda u| / (|u| max(1, |lambda|)) <= tol``.
    """
    A = sp.csr_matrix(A)
    n = A.shape[0]
    count = int(count)
    if count < 1:
        raise InvalidInputError("count must be >= 1")
    if count >= n:
        raise InvalidInputError(f"count={count} exceeds the number of active unknowns ({n})")
    if method == "auto":
        method = "splu" if n <= SPLU_MAX_UNKNOWNS else "cg"
    trace: list = []
    v0 = np.ones(n)
    kw = dict(k=count, sigma=float(shift), which="LM", v0=v0, tol=0.0)
    if method == "cg":
        kw["OPinv"] = _cg_inverse(A, float(shift), 1e-13, 2000, trace)
    elif method != "splu":
        raise InvalidInputError(f"unknown method {method!r}")
    try:
        vals, vecs = sla.eigsh(A, **kw)
    except sla.ArpackNoConvergence as exc:
        raise ConvergenceError(f"shift-invert Lanczos did not converge: {exc}", trace=trace) from exc
    order = np.argsort(vals)
    vals = vals[order]
    vecs = vecs[:, order]
    res = np.linalg.norm(A @ vecs - vecs * vals, axis=0) / (
        np.linalg.norm(vecs, axis=0) * np.maximum(1.0, np.abs(vals))
    )
    if np.any(res > tol):
        raise ConvergenceError(f"residual {np.max(res):.3e} above tolerance {tol:g}", trace=trace)
    if return_info:
        return vals, vecs, res, {"method": method, "inner_iterations": trace}
    return vals, vecs, res


def default_shift(model: WidthModel, eps: float, grid: GridSpec | None = None) -> float:
    """``0.9 pi^2 / (eps H_max)^2``: just below the leading asymptotic term."""
    axes = _base_axes(model, 64 if grid is None else grid.n_base)
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    Hmax = float(np.max(model.width(pts)))
    return 0.9 * math.pi ** 2 / (eps * Hmax) ** 2


def solve_once(model, eps, grid, count=1, shift=None, tol=DEFAULT_TOL, method="auto", keep_vectors=False):
    if not isinstance(grid, GridSpec):
        grid = GridSpec.make(grid)
    op = assemble_mapped_operator(model, eps, grid)
    if method == "auto" and model.base_dim == 2:
        # 3D stencils fill in badly under LU; AMG-preconditioned CG wins at every size tried
        method = "cg"
    if shift is None:
        shift = default_shift(model, eps, grid)
    vals, vecs, res, info = smallest_eigenvalues(op.A, count, shift, tol, method, return_info=True)
    return op, vals, (vecs if keep_vectors else None), res, info


def solve_thin_domain(
    model: WidthModel,
    eps: float,
    resolution: int = 128,
    count: int = 1,
    levels: int = 2,
    n_t: int | None = None,
    shift: float | None = None,
    tol: float = DEFAULT_TOL,
    method: str = "auto",
    keep_vectors: bool = False,
    order_tol: float = 0.3,
) -> DirectSolveResult:
    """Mapped solve on ``levels`` nested grids (``N, 2N, 4N``) with Richardson extrapolation.

    Extrapolation assumes second order from the two finest grids.  With
    three levels the order is also measured; a deviation from 2 larger
    than ``order_tol`` sets ``order_flag``.
    """
    eps = float(eps)
    if not (0 < eps <= 1):
        raise InvalidInputError(f"eps must lie in (0, 1], got {eps}")
    if int(resolution) < 32:
        raise InvalidInputError("resolution must be >= 32")
    levels = int(levels)
    if levels not in (1, 2, 3):
        raise InvalidInputError("levels must be 1, 2 or 3")
    start = time.perf_counter()
    grid = GridSpec.make(resolution, n_t)
    grids, raw, floors, residuals = [], [], [], []
    iters = 0
    vecs = op = None
    for lev in range(levels):
        keep = keep_vectors and lev == levels - 1
        op, vals, v, res, info = solve_once(model, eps, grid, count, shift, tol, method, keep)
        grids.append(grid)
        raw.append(vals)
        floors.append(op.coefficients.h_floor)
        residuals.append(res)
        iters += int(sum(info["inner_iterations"])) if info["inner_iterations"] else 0
        if keep:
            vecs = v
        grid = grid.refined()
    out = DirectSolveResult(
        eps=eps,
        grids=grids,
        h_floor=floors,
        eigenvalues=raw[-1],
        residual_norms=residuals[-1],
        iterations=iters,
        raw=raw,
        vectors=vecs,
        operator=op if keep_vectors else None,
    )
    if levels >= 2:
        out.extrapolated = (4.0 * raw[-1] - raw[-2]) / 3.0
        out.error_estimate = np.abs(raw[-1] - raw[-2]) / 3.0
    if levels == 3:
        with np.errstate(all="ignore"):
            p = np.log2(np.abs((raw[1] - raw[0]) / (raw[2] - raw[1])))
        out.measured_order = p
        out.order_flag = bool(np.any(~np.isfinite(p)) or np.any(np.abs(p - 2.0) > order_tol))
    out.seconds = time.perf_counter() - start
    return out


def export_eigenvector(result: DirectSolveResult, path, which: int = 0) -> tuple:
    """Write eigenvector ``which`` as raw little-endian float64 plus a JSON sidecar.

    The array is the unknown ``sqrt(H) psi`` scattered onto the full node
    grid (base axes first, ``t`` last), zero on Dirichlet nodes.
    """
    if result.vectors is None or result.operator is None:
        raise InvalidInputError("solve with keep_vectors=True to export eigenvectors")
    op = result.operator
    field_ = op.to_grid(result.vectors[:, which])
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    field_.astype("<f8").tofile(path)
    meta = {
        "schema": 1,
        "dtype": "float64-le",
        "shape": list(field_.shape),
        "order": "C",
        "grid": {
            "axes": [[float(ax[0]), float(ax[-1]), int(ax.size)] for ax in op.coefficients.axes],
            "t": [0.0, 1.0, int(op.coefficients.t.size)],
        },
        "eps": result.eps,
        "eigenvalue": float(result.eigenvalues[which]),
        "h_floor": op.coefficients.h_floor,
    }
    side = path.with_suffix(path.suffix + ".json")
    side.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path, side


# ---------------------------------------------------------------------------
# unmapped cross-check
# ---------------------------------------------------------------------------

def solve_masked_2d(
    model: WidthModel,
    eps: float,
    resolution: int = 256,
    count: int = 1,
    tol: float = DEFAULT_TOL,
) -> DirectSolveResult:
    """5-point Laplacian on a uniform grid over the physical domain (staircase boundary).

    First-order accurate in the boundary; meant only to cross-check the
    mapped solver at moderate ``eps``.
    """
    if model.base_dim != 1:
        raise InvalidInputError("masked solver supports d = 2 only")
    eps = float(eps)
    if not (eps > 0):
        raise InvalidInputError("eps must be positive")
    if eps < 0.2:
        raise AccuracyRefusedError(f"staircase mask is unreliable for eps={eps} < 0.2")
    start = time.perf_counter()
    n = int(resolution)
    x = np.linspace(model.lower[0], model.upper[0], n + 1)
    h = x[1] - x[0]
    hp, hm, H, inside = model.widths(x[:, None])
    top = eps * float(np.max(hp))
    bot = -eps * float(np.max(hm))
    ny = int(math.ceil((top - bot) / h)) + 2
    y = bot - h + h * np.arange(ny + 1)
    X, Y = np.meshgrid(x, y, indexing="ij")
    mask = inside[:, None] & (Y > -eps * hm[:, None]) & (Y < eps * hp[:, None])
    mask[0, :] = mask[-1, :] = False
    if not np.any(mask):
        raise DegenerateDomainError("no grid node inside the domain")
    index = -np.ones(mask.shape, dtype=np.int64)
    m = int(np.count_nonzero(mask))
    index[mask] = np.arange(m)
    rows, cols = [], []
    I, J = np.nonzero(mask)
    for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        ii, jj = I + di, J + dj
        ok = (ii >= 0) & (ii < mask.shape[0]) & (jj >= 0) & (jj < mask.shape[1])
        nb = np.full(I.shape, -1)
        nb[ok] = index[ii[ok], jj[ok]]
        sel = nb >= 0
        rows.append(index[I[sel], J[sel]])
        cols.append(nb[sel])
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    A = sp.csr_matrix((-np.ones(r.size), (r, c)), shape=(m, m)) + 4.0 * sp.identity(m, format="csr")
    A = (A / h ** 2).tocsr()
    vals, vecs, res = smallest_eigenvalues(A, count, 0.0, tol, "splu")
    return DirectSolveResult(
        eps=eps,
        grids=[GridSpec(n, ny)],
        h_floor=[0.0],
        eigenvalues=vals,
        residual_norms=res,
        iterations=0,
        raw=[vals],
        seconds=time.perf_counter() - start,
    )
