"""eps-sweeps comparing the truncated expansion with direct solves."""
from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .direct_solver import solve_thin_domain
from .errors import ThinSpecError
from .expansion import (
    LEMNISCATE_FOURTH_TERM,
    ExpansionResult,
    ellipse_fourth_term,
    evaluate_expansion,
    first_eigenvalue_coeffs,
)
from .width_models import ellipsoid_taylor, extract_taylor, locate_max, make_model

CSV_COLUMNS = ("eps", "asym3", "asym4", "num", "num_rich", "diff3", "diff4", "order_fit", "residual", "seconds")


@dataclass
class SweepRow:
    eps: float
    asym3: Optional[float] = None
    asym4: Optional[float] = None
    num: Optional[float] = None
    num_rich: Optional[float] = None
    diff3: Optional[float] = None
    diff4: Optional[float] = None
    order_fit: Optional[float] = None
    residual: Optional[float] = None
    seconds: Optional[float] = None
    error: Optional[dict] = None


@dataclass
class SweepReport:
    model: dict
    expansion: Optional[ExpansionResult]
    rows: list
    order_fit3: Optional[float] = None
    order_fit4: Optional[float] = None
    solver: dict = field(default_factory=dict)
    expansion_error: Optional[dict] = None


def model_jet(model, params):
    """Jet for a catalog model: closed form for ellipsoids, numeric otherwise."""
    if model.catalog_tag == "ellipsoid":
        return ellipsoid_taylor(model.params["a"])
    return extract_taylor(model, locate_max(model))


def fourth_term(name: str, params: dict) -> Optional[float]:
    """Known coefficient of the O(eps) term, where one is available."""
    if name == "ellipsoid" and len(params.get("a", ())) == 2:
        a1, a2 = params["a"]
        return ellipse_fourth_term(float(a1), float(a2))
    if name == "lemniscate":
        return LEMNISCATE_FOURTH_TERM
    return None


def fit_order(eps, diffs) -> Optional[float]:
    """Least-squares slope of ``log|diff|`` against ``log eps``."""
    e = np.asarray(eps, dtype=float)
    d = np.abs(np.asarray(diffs, dtype=float))
    ok = np.isfinite(d) & (d > 0)
    if np.count_nonzero(ok) < 2:
        return None
    return float(np.polyfit(np.log(e[ok]), np.log(d[ok]), 1)[0])


def _solve_row(name, params, eps, solver):
    model = make_model(name, **params)
    start = time.perf_counter()
    res = solve_thin_domain(model, eps, **solver)
    return res.eigenvalues[0], res.best[0], float(np.max(res.residual_norms)), time.perf_counter() - start


def run_sweep(
    name: str,
    params: dict,
    eps_list,
    resolution: int = 256,
    n_t: Optional[int] = None,
    levels: int = 2,
    method: str = "auto",
    tol: float = 1e-8,
    jobs: int = 1,
) -> SweepReport:
    """Asymptotic versus mapped-solver eigenvalues for each ``eps`` (ordered as given).

    A failed solve is recorded on its row and does not stop the sweep.
    """
    model = make_model(name, **params)
    exp_error = None
    try:
        exp = first_eigenvalue_coeffs(model_jet(model, params))
    except ThinSpecError as exc:
        # e.g. constant width: no isolated maximum, numeric column only
        exp = None
        exp_error = {"code": exc.code, "message": str(exc)}
    k4 = fourth_term(name, params) if exp is not None else None
    solver = dict(resolution=resolution, n_t=n_t, levels=levels, method=method, tol=tol)
    eps_list = [float(e) for e in eps_list]
    rows = [SweepRow(eps=e) for e in eps_list]
    for row in rows:
        if exp is not None:
            row.asym3 = float(evaluate_expansion(exp, row.eps))
        if k4 is not None:
            row.asym4 = row.asym3 + k4 * row.eps

    def record(row, out):
        num, rich, resid, secs = out
        row.num, row.num_rich, row.residual, row.seconds = float(num), float(rich), resid, secs
        if row.asym3 is not None:
            row.diff3 = abs(row.num_rich - row.asym3)
        if row.asym4 is not None:
            row.diff4 = abs(row.num_rich - row.asym4)

    def fail(row, exc):
        row.error = {"code": getattr(exc, "code", "error"), "message": str(exc)}

    if jobs > 1 and len(rows) > 1:
        with ProcessPoolExecutor(max_workers=int(jobs)) as pool:
            futs = [pool.submit(_solve_row, name, params, r.eps, solver) for r in rows]
            for row, fut in zip(rows, futs):
                try:
                    record(row, fut.result())
                except ThinSpecError as exc:
                    fail(row, exc)
    else:
        for row in rows:
            try:
                record(row, _solve_row(name, params, row.eps, solver))
            except ThinSpecError as exc:
                fail(row, exc)

    good = [r for r in rows if r.error is None]
    o3 = None
    if exp is not None:
        o3 = fit_order([r.eps for r in good], [r.diff3 for r in good])
    o4 = None
    if k4 is not None:
        o4 = fit_order([r.eps for r in good], [r.diff4 for r in good])
    for r in good:
        r.order_fit = o3
    return SweepReport(
        model={"name": name, "params": params},
        expansion=exp,
        rows=rows,
        order_fit3=o3,
        order_fit4=o4,
        solver=solver,
        expansion_error=exp_error,
    )


def is_decreasing(values) -> bool:
    v = [x for x in values if x is not None and math.isfinite(x)]
    return all(b < a for a, b in zip(v, v[1:]))
