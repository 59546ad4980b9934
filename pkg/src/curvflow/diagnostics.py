"""Per-record diagnostics and pass/fail audits of a flow trajectory.

Tolerances scale with the grid step ``h`` and the largest time step ``dt``,
since every audited statement is exact only for the continuum flow. Checks
whose hypotheses are not met return ``indeterminate`` rather than ``fail``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .geometry import SurfaceGeometry, area, enclosed_volume, minkowski_terms, quermassintegral, sigma_of_ones
from .spaceform import sphere_measure

PASS, FAIL, INDETERMINATE = "pass", "fail", "indeterminate"
KAPPA_TOL = 1e-6


@dataclass
class DiagnosticsRecord:
    t: float
    V: float
    A: float
    W: tuple[float, ...]
    maxgrad2: float
    min_kappa: float
    max_H: float
    max_pinch: float
    mink: tuple[float, ...]
    mink_rel: tuple[float, ...]
    dissipation_rhs: float
    rho_min: float
    rho_max: float
    max_phi_omega: float
    dAdt: float = math.nan


@dataclass
class Verdict:
    name: str
    status: str
    residual: float
    tolerance: float
    note: str = ""

    @property
    def passed(self) -> bool:
        return self.status == PASS

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Trajectory:
    """The minimal view of a run the audits need."""

    records: list[DiagnosticsRecord]
    curvature: int
    dim: int
    h: float
    dt: float = 0.0
    converged: bool = False
    grad_tol: float = 1e-8

    def series(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)


def area_rate(geom: SurfaceGeometry) -> float:
    """Right-hand side of the area evolution.

    For n >= 2 this is ``-(1/(n-1)) int sum_{i<j} (k_i - k_j)^2 u``. For curves
    the pair sum is empty and the first variation ``int f H`` is used instead.
    """
    n = geom.n
    if n == 1:
        f = geom.phi_prime - geom.H * geom.u
        return geom.integrate(f * geom.H)
    pair = (geom.kappa[1] - geom.kappa[0]) ** 2
    return -geom.integrate(pair * geom.u) / (n - 1)


def make_record(t: float, geom: SurfaceGeometry) -> DiagnosticsRecord:
    n = geom.n
    mink, rel = [], []
    for k in range(n):
        lhs, rhs = minkowski_terms(geom, k)
        mink.append(lhs - rhs)
        rel.append((lhs - rhs) / abs(rhs) if rhs else math.inf)
    return DiagnosticsRecord(
        t=float(t),
        V=enclosed_volume(geom.sf, geom.grid, geom.rho),
        A=area(geom),
        W=tuple(quermassintegral(geom, k) for k in range(n)),
        maxgrad2=float(np.max(geom.grad_gamma_sq)),
        min_kappa=float(np.min(geom.kappa[0])),
        max_H=float(np.max(geom.H)),
        max_pinch=float(np.max(geom.pinch)),
        mink=tuple(mink),
        mink_rel=tuple(rel),
        dissipation_rhs=area_rate(geom),
        rho_min=float(np.min(geom.rho)),
        rho_max=float(np.max(geom.rho)),
        max_phi_omega=float(np.max(geom.phi * geom.omega)),
    )


def fill_area_derivative(records: list[DiagnosticsRecord]) -> None:
    """Set ``dAdt`` on each record by differencing A at record spacing."""
    if len(records) < 2:
        return
    t = np.array([r.t for r in records])
    A = np.array([r.A for r in records])
    if len(records) == 2:
        d = np.full(2, (A[1] - A[0]) / (t[1] - t[0]))
    else:
        d = np.gradient(A, t)
    for r, v in zip(records, d):
        r.dAdt = float(v)


# -- tolerances ---------------------------------------------------------------


def tol_volume(h: float, dt: float) -> float:
    return 100 * h**2 + 10 * dt


tol_dissipation = tol_volume


def tol_area(h: float) -> float:
    """Relative slack for area monotonicity."""
    return 100 * h**2


def tol_H(h: float) -> float:
    return 100 * h**2


def tol_C0(h: float) -> float:
    return 10 * h**2


# -- checks -------------------------------------------------------------------


def check_volume_conservation(traj: Trajectory) -> Verdict:
    tol = tol_volume(traj.h, traj.dt)
    V = traj.series("V")
    if len(V) < 2:
        return Verdict("volume_conservation", INDETERMINATE, math.nan, tol, "fewer than 2 records")
    drift = float(np.max(np.abs(V - V[0])) / V[0])
    return Verdict("volume_conservation", PASS if drift <= tol else FAIL, drift, tol)


def check_area_monotone(traj: Trajectory) -> Verdict:
    tol = tol_area(traj.h)
    A = traj.series("A")
    if len(A) < 3:
        return Verdict("area_monotone", INDETERMINATE, math.nan, tol, "fewer than 3 records")
    rise = float(max(np.max(np.diff(A)), 0.0) / A[0])
    return Verdict("area_monotone", PASS if rise <= tol else FAIL, rise, tol, "largest relative increase")


def check_dissipation_identity(traj: Trajectory) -> Verdict:
    tol = tol_dissipation(traj.h, traj.dt)
    recs = traj.records
    if len(recs) < 3:
        return Verdict("dissipation_identity", INDETERMINATE, math.nan, tol, "fewer than 3 records")
    fill_area_derivative(recs)
    res = 0.0
    for r in recs[1:-1]:
        scale = max(abs(r.dissipation_rhs), r.A)
        res = max(res, abs(r.dAdt - r.dissipation_rhs) / scale)
    return Verdict("dissipation_identity", PASS if res <= tol else FAIL, res, tol, "interior records")


def check_quermass_monotone(traj: Trajectory) -> Verdict:
    """Monotone quermassintegrals and preserved convexity for convex Euclidean data."""
    tol = tol_area(traj.h)
    name = "quermass_monotone"
    if traj.curvature != 0 or traj.dim != 2:
        return Verdict(name, INDETERMINATE, math.nan, tol, "requires K=0 and n=2")
    if traj.records[0].min_kappa < 0.0:
        return Verdict(name, INDETERMINATE, math.nan, tol, "initial surface not convex")
    if len(traj.records) < 2:
        return Verdict(name, INDETERMINATE, math.nan, tol, "fewer than 2 records")
    W0 = np.array([r.W[0] for r in traj.records])
    rise = float(max(np.max(np.diff(W0)), 0.0) / W0[0])
    kmin = float(traj.series("min_kappa").min())
    ok = rise <= tol and kmin >= -KAPPA_TOL
    return Verdict(name, PASS if ok else FAIL, rise, tol, f"min kappa over run {kmin:.6g}")


def check_H_bound_hyperbolic(traj: Trajectory) -> Verdict:
    tol = tol_H(traj.h)
    if traj.curvature != -1:
        return Verdict("H_upper_bound", INDETERMINATE, math.nan, tol, "only applies for K=-1")
    H = traj.series("max_H")
    excess = float(np.max(H) - H[0])
    return Verdict("H_upper_bound", PASS if excess <= tol else FAIL, excess, tol)


def check_C0(traj: Trajectory) -> Verdict:
    tol = tol_C0(traj.h)
    lo = traj.series("rho_min")
    hi = traj.series("rho_max")
    excess = float(max(lo[0] - lo.min(), hi.max() - hi[0], 0.0))
    return Verdict("C0_bounds", PASS if excess <= tol else FAIL, excess, tol)


def check_gradient_monotone(traj: Trajectory) -> Verdict:
    """max |grad gamma|^2 may rise by at most 10 h^2 per unit time between records."""
    tol = 10 * traj.h**2
    if len(traj.records) < 2:
        return Verdict("gradient_monotone", INDETERMINATE, math.nan, tol, "fewer than two records")
    t = traj.series("t")
    g = traj.series("maxgrad2")
    dt = np.diff(t)
    rate = np.where(dt > 0, np.diff(g) / np.where(dt > 0, dt, 1.0), 0.0)
    rise = float(max(rate.max(), 0.0))
    return Verdict("gradient_monotone", PASS if rise <= tol else FAIL, rise, tol, "largest rise per unit time")


def check_pinching(traj: Trajectory) -> Verdict:
    tol = 10 * math.sqrt(traj.grad_tol)
    if traj.dim == 1:
        return Verdict("pinching", INDETERMINATE, 0.0, tol, "curves have a single principal curvature")
    if not traj.converged:
        return Verdict("pinching", INDETERMINATE, traj.records[-1].max_pinch, tol, "run did not converge")
    pinch = traj.records[-1].max_pinch
    return Verdict("pinching", PASS if pinch <= tol else FAIL, pinch, tol,
                   "threshold at t_final is an operational choice")


def check_C0_and_pinching(traj: Trajectory) -> tuple[Verdict, Verdict]:
    return check_C0(traj), check_pinching(traj)


def check_minkowski_trajectory(traj: Trajectory) -> Verdict:
    tol = 100 * traj.h**2
    res = max(abs(x) for r in traj.records for x in r.mink_rel)
    return Verdict("minkowski_identities", PASS if res <= tol else FAIL, res, tol, "max relative residual over records")


def af_constant(n: int, k: int) -> float:
    """Constant that makes the Alexandrov-Fenchel inequality an equality on the unit ball."""
    A_ball = sphere_measure(n)
    V_ball = A_ball / (n + 1)
    return V_ball ** (1 / (n + 1)) / (sigma_of_ones(n, k) * A_ball) ** (1 / (n - k))


def af_gap(V: float, Wk: float, n: int, k: int) -> float:
    """``c_{n,k} W_k^{1/(n-k)} - V^{1/(n+1)}``; nonnegative for convex bodies."""
    return af_constant(n, k) * Wk ** (1 / (n - k)) - V ** (1 / (n + 1))


def alexandrov_fenchel(V: float, Wk: float, min_kappa: float, curvature: int, n: int, k: int) -> Verdict:
    name = f"alexandrov_fenchel_k{k}"
    if curvature != 0 or not 0 <= k < n - 1:
        return Verdict(name, INDETERMINATE, math.nan, 1e-10, "requires K=0 and 0 <= k < n-1")
    if min_kappa < 0.0:
        return Verdict(name, INDETERMINATE, math.nan, 1e-10, "surface not convex")
    lhs = V ** (1 / (n + 1))
    rhs = af_constant(n, k) * Wk ** (1 / (n - k))
    ok = lhs <= rhs * (1 + 1e-10)
    return Verdict(name, PASS if ok else FAIL, rhs - lhs, 1e-10, "residual is the gap c W^(1/(n-k)) - V^(1/(n+1))")


def check_alexandrov_fenchel(geom: SurfaceGeometry, k: int) -> Verdict:
    return alexandrov_fenchel(
        enclosed_volume(geom.sf, geom.grid, geom.rho),
        quermassintegral(geom, k) if 0 <= k < geom.n else math.nan,
        float(np.min(geom.kappa[0])),
        geom.sf.curvature,
        geom.n,
        k,
    )


def evaluate_all(traj: Trajectory) -> list[Verdict]:
    out = [
        check_volume_conservation(traj),
        check_area_monotone(traj),
        check_dissipation_identity(traj),
        check_quermass_monotone(traj),
        check_H_bound_hyperbolic(traj),
        check_gradient_monotone(traj),
        *check_C0_and_pinching(traj),
        check_minkowski_trajectory(traj),
    ]
    n = traj.dim
    for label, rec in (("initial", traj.records[0]), ("final", traj.records[-1])):
        v = alexandrov_fenchel(rec.V, rec.W[0], rec.min_kappa, traj.curvature, n, 0)
        v.name = f"{v.name}_{label}"
        out.append(v)
    return out


def all_passed(verdicts: list[Verdict]) -> bool:
    return all(v.status != FAIL for v in verdicts)


__all__ = [
    "DiagnosticsRecord",
    "Verdict",
    "Trajectory",
    "make_record",
    "fill_area_derivative",
    "check_volume_conservation",
    "check_area_monotone",
    "check_dissipation_identity",
    "check_quermass_monotone",
    "check_H_bound_hyperbolic",
    "check_C0",
    "check_gradient_monotone",
    "check_pinching",
    "check_C0_and_pinching",
    "check_minkowski_trajectory",
    "check_alexandrov_fenchel",
    "alexandrov_fenchel",
    "af_constant",
    "af_gap",
    "evaluate_all",
    "all_passed",
]
