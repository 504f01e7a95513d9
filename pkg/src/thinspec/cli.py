"""Command-line front end: ``thinspec {expand,sweep,spectrum,validate}``.

Settings come from an optional flat ``key = value`` config file; command-line
flags override it.  Reports are JSON with ``schema: 1`` and sorted keys;
sweep tables are CSV with full double precision.  Errors are printed as
JSON on stdout with a nonzero exit code.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import InvalidInputError, ThinSpecError
from .expansion import degenerate_c3_matrix, first_eigenvalue_coeffs
from .oscillator import ladder_spectrum, oscillator_spectrum, schrodinger_solve_numeric
from .sweep import CSV_COLUMNS, model_jet, run_sweep
from .width_models import TaylorWidthData, make_model

SCHEMA = 1
EXIT_ERROR = 2
EXIT_FAILED = 1

DEFAULTS = {
    "model": "ellipsoid",
    "a": "1,1",
    "path": None,
    "eps": "0.2,0.1,0.05",
    "resolution": "256",
    "n_t": None,
    "levels": "2",
    "count": "4",
    "method": "auto",
    "tol": "1e-8",
    "jobs": "1",
    "out": None,
    "theta": None,
    "group": None,
    "numeric": "false",
    "timings_in_csv": "false",
    "only": None,
}


# ---------------------------------------------------------------------------
# config
# ---------------------------------------------------------------------------

def read_config(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidInputError(f"{path}:{lineno}: expected key = value")
        key, value = (p.strip() for p in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in DEFAULTS:
            raise InvalidInputError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = value
    return out


def merge_config(args) -> dict:
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        cfg.update(read_config(args.config))
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    return cfg


def _floats(text, name):
    try:
        vals = [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise InvalidInputError(f"{name}: expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise InvalidInputError(f"{name}: empty list")
    return vals


def _int(text, name):
    try:
        return int(str(text))
    except ValueError:
        raise InvalidInputError(f"{name}: expected an integer, got {text!r}") from None


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    return str(text).strip().lower() in ("1", "true", "yes", "on")


def model_spec(cfg) -> tuple:
    name = cfg["model"]
    if name == "ellipsoid":
        return name, {"a": _floats(cfg["a"], "a")}
    if name == "custom":
        if not cfg.get("path"):
            raise InvalidInputError("model=custom needs path")
        return name, {"path": cfg["path"]}
    return name, {}


def eps_list(cfg) -> list:
    eps = _floats(cfg["eps"], "eps")
    if any(not (e > 0 and math.isfinite(e)) for e in eps):
        raise InvalidInputError("eps values must be positive")
    # report rows are ordered by eps, largest first
    return sorted(set(eps), reverse=True)


def resolution(cfg) -> int:
    n = _int(cfg["resolution"], "resolution")
    if n < 32 or n > 1024 or n & (n - 1):
        raise InvalidInputError(f"resolution must be a power of two in [32, 1024], got {n}")
    return n


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False, default=_jsonable) + "\n"


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    raise TypeError(f"not JSON serialisable: {type(v).__name__}")


def fmt_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float) and not math.isfinite(v):
        return ""
    return "%.17g" % v


def emit(report: dict, out_dir, filename: str):
    text = dump_json(report)
    sys.stdout.write(text)
    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / filename).write_text(text, encoding="utf-8")


def error_report(exc: Exception) -> dict:
    code = getattr(exc, "code", "error")
    return {"schema": SCHEMA, "error": {"code": code, "message": str(exc), "type": type(exc).__name__}}


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_expand(cfg) -> int:
    name, params = model_spec(cfg)
    model = make_model(name, **params)
    jet = model_jet(model, params)
    res = first_eigenvalue_coeffs(jet)
    report = {
        "schema": SCHEMA,
        "command": "expand",
        "model": {"name": name, "params": params},
        "jet": jet.to_dict(),
        "expansion": res.to_dict(),
    }
    emit(report, cfg.get("out"), "expand.json")
    return 0


def cmd_sweep(cfg) -> int:
    name, params = model_spec(cfg)
    eps = eps_list(cfg)
    n_t = None if cfg.get("n_t") in (None, "") else _int(cfg["n_t"], "n_t")
    rep = run_sweep(
        name,
        params,
        eps,
        resolution=resolution(cfg),
        n_t=n_t,
        levels=_int(cfg["levels"], "levels"),
        method=cfg["method"],
        tol=float(cfg["tol"]),
        jobs=max(1, _int(cfg["jobs"], "jobs")),
    )
    with_time = _bool(cfg["timings_in_csv"])
    out_dir = Path(cfg["out"]) if cfg.get("out") else None
    rows = []
    for r in rep.rows:
        d = {c: getattr(r, c) for c in CSV_COLUMNS}
        if not with_time:
            d["seconds"] = None
        rows.append(d)
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "sweep.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for d in rows:
                w.writerow([fmt_cell(d[c]) for c in CSV_COLUMNS])
        with open(out_dir / "sweep_timings.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("eps", "seconds"))
            for r in rep.rows:
                w.writerow([fmt_cell(r.eps), fmt_cell(r.seconds)])
    report = {
        "schema": SCHEMA,
        "command": "sweep",
        "model": rep.model,
        "expansion": None if rep.expansion is None else rep.expansion.to_dict(),
        "expansion_error": rep.expansion_error,
        "solver": rep.solver,
        "order_fit3": rep.order_fit3,
        "order_fit4": rep.order_fit4,
        "rows": [dict(d, error=r.error) for d, r in zip(rows, rep.rows)],
        "version": __version__,
    }
    emit(report, out_dir, "sweep.json")
    return 0


def cmd_spectrum(cfg) -> int:
    count = _int(cfg["count"], "count")
    if cfg.get("theta"):
        theta = np.array(_floats(cfg["theta"], "theta"))
        spec = ladder_spectrum(theta, count)
        jet = None
        source = {"theta": theta.tolist()}
    else:
        name, params = model_spec(cfg)
        model = make_model(name, **params)
        jet = model_jet(model, params)
        spec = oscillator_spectrum(jet, 1, count)
        source = {"model": {"name": name, "params": params}}
    report = {"schema": SCHEMA, "command": "spectrum", **source, "spectrum": spec.to_dict()}
    groups = spec.groups()
    report["groups"] = [{"group": g, "multiplicity": len(m), "members": [list(x) for x in m]} for g, m in groups.items()]
    if _bool(cfg["numeric"]):
        if jet is None:
            raise InvalidInputError("numeric spectrum needs a model (not --theta)")
        num = schrodinger_solve_numeric(jet.H2_poly(), jet.H0, n=1, count=count)
        report["numeric"] = {"values": num.values.tolist(), "box_delta": num.box_delta}
    gid = cfg.get("group")
    if gid is None:
        multi = [g for g, m in groups.items() if len(m) > 1]
        gid = multi[0] if multi else None
    else:
        gid = _int(gid, "group")
        if gid not in groups:
            raise InvalidInputError(f"no level group {gid} among the first {count} levels")
    if gid is not None:
        if jet is None:
            dim = spec.theta.size
            # bare frequencies: zero cubic part, so the splitting vanishes
            jet = TaylorWidthData(
                d=dim + 1,
                x_bar=np.zeros(dim),
                H0=1.0,
                alpha=spec.theta / math.pi,
                basis=np.eye(dim),
                beta=np.zeros((dim,) * 3),
                H4_coeffs={},
                grad_h1=np.zeros(dim),
            )
        split = degenerate_c3_matrix(jet, spec, groups[gid])
        report["splitting"] = {
            "group": gid,
            "members": [list(m) for m in split.multi_indices],
            "T": split.T.tolist(),
            "tau": split.tau.tolist(),
            "c3": split.c3_candidates.tolist(),
            "repeated": split.repeated,
        }
    emit(report, cfg.get("out"), "spectrum.json")
    return 0


def cmd_validate(cfg) -> int:
    from .acceptance import CRITERIA, run_all

    keys = None
    if cfg.get("only"):
        keys = [k.strip().upper() for k in str(cfg["only"]).split(",") if k.strip()]
        bad = [k for k in keys if k not in CRITERIA]
        if bad:
            raise InvalidInputError(f"unknown criteria {bad}")
    results = run_all(keys, jobs=max(1, _int(cfg["jobs"], "jobs")), echo=lambda s: print(s, flush=True))
    failed = [c.key for c in results if not c.ok]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    if cfg.get("out"):
        out = Path(cfg["out"])
        out.mkdir(parents=True, exist_ok=True)
        report = {
            "schema": SCHEMA,
            "command": "validate",
            "criteria": [
                {"key": c.key, "title": c.title, "passed": c.passed, "in_budget": c.in_budget,
                 "detail": c.detail, "seconds": c.seconds, "budget": c.budget}
                for c in results
            ],
        }
        (out / "validate.json").write_text(dump_json(report), encoding="utf-8")
    return EXIT_FAILED if failed else 0


COMMANDS = {"expand": cmd_expand, "sweep": cmd_sweep, "spectrum": cmd_spectrum, "validate": cmd_validate}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="thinspec", description="Thin-domain eigenvalue asymptotics and checks.")
    p.add_argument("--version", action="version", version=f"thinspec {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, model=True):
        sp.add_argument("--config", help="flat key = value settings file")
        sp.add_argument("--out", help="output directory (created if missing)")
        if model:
            sp.add_argument("--model", help="ellipsoid | lemniscate | rectangle | custom")
            sp.add_argument("--a", help="ellipsoid semi-axes, comma separated (last is the thin axis)")
            sp.add_argument("--path", help="CSV width grid for model=custom")

    sp = sub.add_parser("expand", help="jet and expansion coefficients")
    common(sp)
    sp = sub.add_parser("sweep", help="asymptotics versus direct solves over eps")
    common(sp)
    sp.add_argument("--eps", help="comma-separated eps values")
    sp.add_argument("--resolution", help="base cells per axis (power of two, 32..1024)")
    sp.add_argument("--n-t", dest="n_t", help="cells across the thin direction (default: resolution)")
    sp.add_argument("--levels", help="grid levels for Richardson (1, 2 or 3)")
    sp.add_argument("--method", help="inner solve: auto | splu | cg")
    sp.add_argument("--tol", help="residual tolerance")
    sp.add_argument("--jobs", help="concurrent solves")
    sp.add_argument("--timings-in-csv", dest="timings_in_csv", action="store_const", const="true",
                    help="fill the seconds column (makes the CSV non-reproducible)")
    sp = sub.add_parser("spectrum", help="levels of the effective oscillator and splitting matrices")
    common(sp)
    sp.add_argument("--count", help="number of levels")
    sp.add_argument("--theta", help="use these oscillator frequencies instead of a model")
    sp.add_argument("--group", help="level group for the splitting matrix")
    sp.add_argument("--numeric", action="store_const", const="true", help="also run the grid Schroedinger solve")
    sp = sub.add_parser("validate", help="run the acceptance criteria")
    common(sp, model=False)
    sp.add_argument("--only", help="comma-separated criteria, e.g. A1,A3")
    sp.add_argument("--jobs", help="concurrent solves inside A6")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = merge_config(args)
        return COMMANDS[args.command](cfg)
    except (ThinSpecError, OSError) as exc:
        sys.stdout.write(dump_json(error_report(exc)))
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
