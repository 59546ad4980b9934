"""The fixed verification matrix behind ``curvflow verify``.

Each case is a small, independent job that returns table rows. Cases run at
one or more resolution scales; tolerances that are stated at the default
resolution are widened by ``(h / h_default)^2`` on coarser grids. Checks that
compare two scales are added once all cases are done.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import diagnostics as dg
from .flow import FlowConfig, fit_decay_rate, run, speed
from .geometry import compute_geometry, minkowski_terms
from .shapes import build_initial_shape
from .spaceform import space_form
from .sphere_grid import SphereGrid

SPACE_FORMS = ("euclidean", "sphere", "hyperbolic")
DUAL_T = 0.1
DUAL_TOL = 1e-5
SPEED_TOL = 1e-10
RADIUS_TOL = 1e-3
PINCH_TOL = 1e-3
MINK_TOL = 1e-3
DECAY_R2 = 0.99
VOLUME_RATIO = 3.0
MINK_RATIO = 3.5


@dataclass
class Row:
    case: str
    check: str
    status: str
    residual: float
    tolerance: float
    note: str = ""
    scale: float = 1.0


def _row(case, check, ok, residual, tol, note="", scale=1.0):
    return Row(case, check, dg.PASS if ok else dg.FAIL, float(residual), float(tol), note, scale)


def perturbed_shape(dim: int, eps: float = 0.2) -> dict:
    if dim == 1:
        return {"kind": "fourier", "r0": 1.0, "a": {"1": eps}}
    return {"kind": "harmonic", "r0": 1.0, "terms": [[1, 0, eps]]}


ELLIPSOID = {"kind": "ellipsoid", "a": 1.0, "b": 1.0, "c": 1.5}
ELLIPSE = {"kind": "ellipsoid", "a": 1.0, "b": 1.5}


def grid_config(dim: int, scale: float) -> dict:
    if dim == 1:
        return {"m": int(round(256 * scale))}
    return {"n_theta": int(round(96 * scale)), "n_phi": int(round(192 * scale))}


def tol_factor(scale: float) -> float:
    """How much an O(h^2) tolerance stated at the default grid widens at ``scale``."""
    return max(1.0, 1.0 / scale**2)


def ellipsoid_cfl(scale: float) -> float:
    # halving cfl with every doubling, so refinement pairs shrink dt by 8x
    return min(0.2, 0.1 / scale)


def _verdict_rows(case, verdicts, scale):
    return [Row(case, v.name, v.status, v.residual, v.tolerance, v.note, scale) for v in verdicts]


def _save(out_dir, case, result, verdicts):
    if out_dir is None:
        return
    from .outputs import write_timeseries, write_verdicts

    d = Path(out_dir) / case
    d.mkdir(parents=True, exist_ok=True)
    write_timeseries(d / "timeseries.csv", result.records, result.dim)
    write_verdicts(d / "verdicts.json", verdicts, {"run_verdict": result.verdict})


# -- cases --------------------------------------------------------------------


def case_fixed_point(K: str, dim: int, scale: float, out_dir=None) -> list[Row]:
    name = f"fixed_point_{K}_n{dim}"
    cfg = FlowConfig(space_form=K, dim=dim, initial_shape={"kind": "sphere", "r": 1.0}, t_end=1.0,
                     **grid_config(dim, scale))
    geom = compute_geometry(cfg.sf, cfg.make_grid(), np.ones(cfg.make_grid().shape))
    s = float(np.max(np.abs(speed(geom))))
    res = run(cfg)
    return [
        _row(name, "sphere_speed", s <= SPEED_TOL, s, SPEED_TOL, scale=scale),
        _row(name, "converged_at_step_0", res.converged and res.final.step_count == 0,
             res.final.step_count, 0, res.verdict, scale),
    ]


def case_perturbed(K: str, dim: int, scale: float, out_dir=None) -> list[Row]:
    name = f"perturbed_{K}_n{dim}"
    cfg = FlowConfig(space_form=K, dim=dim, initial_shape=perturbed_shape(dim), t_end=40.0,
                     record_every=50 if dim == 2 else 200, **grid_config(dim, scale))
    res = run(cfg)
    return _flow_rows(name, res, scale, out_dir)


def case_ellipsoid(scale: float, out_dir=None) -> list[Row]:
    name = "ellipsoid_euclidean_n2"
    cfg = FlowConfig(space_form="euclidean", dim=2, initial_shape=ELLIPSOID, t_end=40.0,
                     cfl_factor=ellipsoid_cfl(scale), record_every=20, **grid_config(2, scale))
    res = run(cfg)
    rows = _flow_rows(name, res, scale, out_dir)
    f = tol_factor(scale)
    # gap -> 0 monotonically, then equality at the limit sphere
    V = res.series("V")
    A = np.array([r.W[0] for r in res.records])
    gap = dg.af_gap(V, A, 2, 0)
    rise = float(max(np.max(np.diff(gap)), 0.0))
    slack = 1e-3 * gap[0]
    rows.append(_row(name, "af_gap_initial_positive", gap[0] > 0, gap[0], 0.0, scale=scale))
    rows.append(_row(name, "af_gap_monotone", rise <= slack, rise, slack, scale=scale))
    rows.append(_row(name, "af_equality_at_limit", abs(gap[-1]) <= 1e-6 * f, abs(gap[-1]), 1e-6 * f, scale=scale))
    r_inf = 1.5 ** (1 / 3)
    err = float(np.max(np.abs(res.final.rho - r_inf)))
    rows.append(_row(name, "limit_radius_exact", err <= RADIUS_TOL * f, err, RADIUS_TOL * f,
                     "against (abc)^(1/3)", scale))
    return rows


def _flow_rows(name, res, scale, out_dir) -> list[Row]:
    f = tol_factor(scale)
    traj = res.trajectory()
    verdicts = dg.evaluate_all(traj)
    for v in verdicts:
        if v.name == "pinching" and v.status != dg.INDETERMINATE:
            v.tolerance *= f
            v.status = dg.PASS if v.residual <= v.tolerance else dg.FAIL
    rows = _verdict_rows(name, verdicts, scale)
    rows.append(_row(name, "converged", res.converged, res.final.t, 0.0,
                     res.verdict, scale))
    fit = fit_decay_rate(res.records)
    ok = fit.status == "ok" and fit.alpha > 0 and fit.r_squared >= DECAY_R2
    rows.append(_row(name, "exponential_decay", ok, fit.r_squared, DECAY_R2, f"alpha={fit.alpha:.6g}", scale))
    if res.converged:
        err = float(np.max(np.abs(res.final.rho - res.r_inf)))
        rows.append(_row(name, "limit_sphere", err <= RADIUS_TOL * f, err, RADIUS_TOL * f,
                         f"r_inf={res.r_inf:.10g}", scale))
    rows.append(Row(name, "volume_drift_value", "info",
                    float(np.max(np.abs(res.series("V") - res.records[0].V)) / res.records[0].V), math.nan,
                    "used by refinement checks", scale))
    _save(out_dir, f"{name}_s{scale:g}", res, verdicts)
    return rows


def case_dual(K: str, dim: int, scale: float, canary: bool = False, out_dir=None) -> list[Row]:
    name = f"dual_{K}_n{dim}"
    shape = perturbed_shape(dim, 0.1)
    common = dict(space_form=K, dim=dim, initial_shape=shape, t_end=DUAL_T, grad_tol=1e-300,
                  **grid_config(dim, scale))
    a = run(FlowConfig(formulation="direct", **common))
    b = run(FlowConfig(formulation="divergence", **common), flip_lower_order=canary)
    if a.verdict != "t_end" or b.verdict != "t_end":
        return [_row(name, "dual_agreement", False, math.inf, DUAL_TOL, f"{a.verdict}/{b.verdict}", scale)]
    diff = float(np.max(np.abs(a.final.rho - b.final.rho)))
    tol = DUAL_TOL * tol_factor(scale)
    return [_row(name, "dual_agreement", diff <= tol, diff, tol, "canary" if canary else "", scale)]


def minkowski_shape(K: str, dim: int) -> dict:
    if K == "euclidean":
        return ELLIPSOID if dim == 2 else ELLIPSE
    return perturbed_shape(dim)


def minkowski_relative(K: str, dim: int, scale: float) -> list[float]:
    sf = space_form(K)
    grid = SphereGrid.default(dim, scale)
    geom = compute_geometry(sf, grid, build_initial_shape(minkowski_shape(K, dim), grid, sf))
    out = []
    for k in range(dim):
        lhs, rhs = minkowski_terms(geom, k)
        out.append(abs(lhs - rhs) / abs(rhs))
    return out


def case_minkowski(K: str, dim: int, scale: float, out_dir=None) -> list[Row]:
    """Static identities at ``scale`` plus the convergence order over three levels."""
    name = f"minkowski_{K}_n{dim}"
    levels = [scale, 2 * scale, 4 * scale]
    res = [minkowski_relative(K, dim, s) for s in levels]
    rows = []
    tol = MINK_TOL * tol_factor(scale)
    for k in range(dim):
        r = res[0][k]
        rows.append(_row(name, f"minkowski_k{k}", r <= tol, r, tol, scale=scale))
        ratios = [res[i][k] / res[i + 1][k] if res[i + 1][k] > 0 else math.inf for i in range(2)]
        # residuals at round-off cannot show an order, and need not
        floor = 1e-11
        ok = all(q >= MINK_RATIO or res[i + 1][k] < floor for i, q in enumerate(ratios))
        rows.append(_row(name, f"minkowski_k{k}_order", ok, min(ratios), MINK_RATIO,
                         "min ratio per doubling", scale))
    return rows


# -- driver -------------------------------------------------------------------


def build_jobs(scales, canary: bool = False, out_dir=None) -> list[tuple]:
    jobs = []
    for s in scales:
        for K in SPACE_FORMS:
            for dim in (1, 2):
                jobs.append((case_fixed_point, (K, dim, s, out_dir)))
                jobs.append((case_perturbed, (K, dim, s, out_dir)))
                jobs.append((case_dual, (K, dim, s, canary, out_dir)))
                jobs.append((case_minkowski, (K, dim, s, out_dir)))
        jobs.append((case_ellipsoid, (s, out_dir)))
    return jobs


def _call(job):
    fn, args = job
    return fn(*args)


def worker_count() -> int:
    """Process count from CURVFLOW_THREADS; 0 or unset means one per CPU."""
    raw = os.environ.get("CURVFLOW_THREADS", "0").strip() or "0"
    n = int(raw)
    if n < 0:
        raise ValueError("CURVFLOW_THREADS must be >= 0")
    return n or (os.cpu_count() or 1)


def refinement_rows(rows: list[Row]) -> list[Row]:
    """Checks that compare the same case across two scales a factor 2 apart."""
    out = []
    by_key = {(r.case, r.check, r.scale): r for r in rows}
    scales = sorted({r.scale for r in rows})
    for lo, hi in zip(scales, scales[1:]):
        if not math.isclose(hi, 2 * lo):
            continue
        case = "ellipsoid_euclidean_n2"
        a, b = by_key.get((case, "volume_drift_value", lo)), by_key.get((case, "volume_drift_value", hi))
        if a and b:
            q = a.residual / b.residual if b.residual > 0 else math.inf
            out.append(_row(case, "volume_drift_refinement", q >= VOLUME_RATIO, q, VOLUME_RATIO,
                            f"scales {lo:g} -> {hi:g}", hi))
        a, b = by_key.get((case, "dissipation_identity", lo)), by_key.get((case, "dissipation_identity", hi))
        if a and b:
            q = a.residual / b.residual if b.residual > 0 else math.inf
            out.append(_row(case, "dissipation_refinement", q > 1.0, q, 1.0, f"scales {lo:g} -> {hi:g}", hi))
        for K in SPACE_FORMS:
            for dim in (1, 2):
                case = f"dual_{K}_n{dim}"
                a, b = by_key.get((case, "dual_agreement", lo)), by_key.get((case, "dual_agreement", hi))
                if a and b and math.isfinite(a.residual):
                    q = a.residual / b.residual if b.residual > 0 else math.inf
                    out.append(_row(case, "dual_refinement", q >= MINK_RATIO, q, MINK_RATIO,
                                    f"scales {lo:g} -> {hi:g}", hi))
    return out


def run_suite(scales=(1.0, 0.5), canary: bool = False, out_dir=None, workers: int | None = None) -> list[Row]:
    jobs = build_jobs(scales, canary, out_dir)
    workers = worker_count() if workers is None else workers
    if workers <= 1:
        results = [_call(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_call, jobs))
    rows = [r for rs in results for r in rs]
    return rows + refinement_rows(rows)


def failing(rows: list[Row]) -> list[Row]:
    return [r for r in rows if r.status == dg.FAIL]


def format_table(rows: list[Row]) -> str:
    head = f"{'case':<32} {'check':<32} {'scale':>5} {'status':<13} {'residual':>12} {'tolerance':>12}  note"
    lines = [head, "-" * len(head)]
    for r in rows:
        lines.append(f"{r.case:<32} {r.check:<32} {r.scale:>5g} {r.status:<13} {r.residual:>12.4g} "
                     f"{r.tolerance:>12.4g}  {r.note}")
    return "\n".join(lines)


def rows_to_dicts(rows: list[Row]) -> list[dict]:
    return [asdict(r) for r in rows]
