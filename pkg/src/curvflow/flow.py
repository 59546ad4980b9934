"""Explicit time integration of the radial-graph flow

    d rho / dt = (n phi'(rho) - H u) omega

in two spatial discretizations. The direct form evaluates the curvature
speed node by node. The divergence form uses

    d rho / dt = phi div(grad rho / (phi omega~)) + (n + 1) phi' |grad rho|^2 / (phi omega~)

with face-centred fluxes, which telescope exactly under the quadrature.
Both reduce to the same PDE, so their trajectories must agree to O(h^2).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import spaceform as spf
from .diagnostics import DiagnosticsRecord, Trajectory, fill_area_derivative, make_record
from .errors import CurvFlowError, StabilityError, StarShapedError
from .geometry import U_MIN, SurfaceGeometry, compute_geometry, enclosed_volume
from .spaceform import SpaceForm
from .sphere_grid import SphereGrid

log = logging.getLogger(__name__)

FORMULATIONS = ("direct", "divergence")
INTEGRATORS = ("rk2", "euler")


@dataclass(frozen=True, eq=False)
class FlowState:
    sf: SpaceForm
    grid: SphereGrid
    rho: np.ndarray
    t: float = 0.0
    step_count: int = 0
    dt_last: float = 0.0
    # (max |grad gamma|^2, min phi omega), filled in by the stepper
    stats: tuple[float, float] | None = field(default=None, repr=False)


@dataclass
class FlowConfig:
    space_form: str = "euclidean"
    dim: int = 2
    n_theta: int = 96
    n_phi: int = 192
    m: int = 256
    initial_shape: dict = field(default_factory=lambda: {"kind": "sphere", "r": 1.0})
    formulation: str = "direct"
    integrator: str = "rk2"
    cfl_factor: float = 0.2
    t_end: float = 1.0
    grad_tol: float = 1e-8
    record_every: int = 20
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.cfl_factor <= 0.5:
            raise ValueError(f"cfl_factor must lie in (0, 0.5], got {self.cfl_factor}")
        if not self.grad_tol > 0.0:
            raise ValueError("grad_tol must be positive")
        if self.formulation not in FORMULATIONS:
            raise ValueError(f"formulation must be one of {FORMULATIONS}")
        if self.integrator not in INTEGRATORS:
            raise ValueError(f"integrator must be one of {INTEGRATORS}")
        if self.dim not in (1, 2):
            raise ValueError("dim must be 1 or 2")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        spf.space_form(self.space_form)

    @property
    def sf(self) -> SpaceForm:
        return spf.space_form(self.space_form)

    def make_grid(self) -> SphereGrid:
        if self.dim == 1:
            return SphereGrid(1, self.m)
        return SphereGrid(2, self.n_theta, self.n_phi)


# -- spatial operators --------------------------------------------------------


def speed(geom: SurfaceGeometry) -> np.ndarray:
    """Radial velocity ``f omega`` with normal speed ``f = n phi' - H u``."""
    return (geom.n * geom.phi_prime - geom.H * geom.u) * geom.omega


def direct_rate(sf, grid, rho) -> np.ndarray:
    """Filtered radial velocity from the trace formula for H in gamma variables.

    Algebraically identical to ``speed(compute_geometry(...))`` but without
    assembling the tensors, which dominates the cost of a step.
    """
    ph = spf.phi(sf, rho)
    dph = spf.phi_prime(sf, rho)
    n = grid.dim
    if n == 1:
        g1, h11 = grid.frame_components(rho)
        q1 = g1 / ph
        q2sq = q1 * q1
        Q11 = h11 / ph - dph * q2sq
        trQ, qQq = Q11, q2sq * Q11
    else:
        g1, g2, h11, h12, h22 = grid.frame_components(rho)
        q1, q2 = g1 / ph, g2 / ph
        q2sq = q1 * q1 + q2 * q2
        Q11 = h11 / ph - dph * q1 * q1
        Q12 = h12 / ph - dph * q1 * q2
        Q22 = h22 / ph - dph * q2 * q2
        trQ = Q11 + Q22
        qQq = q1 * q1 * Q11 + 2 * q1 * q2 * Q12 + q2 * q2 * Q22
    om2 = 1.0 + q2sq
    om = np.sqrt(om2)
    H = (-trQ + qQq / om2 + n * dph) / (ph * om)
    u = ph / om
    return grid.polar_filter((n * dph - H * u) * om)


def flux_divergence(sf: SpaceForm, grid: SphereGrid, rho: np.ndarray) -> np.ndarray:
    """Finite-volume ``div(grad rho / (phi omega~))`` with face-centred coefficients."""
    dt = grid.dtheta
    if grid.dim == 1:
        r_next = np.roll(rho, -1)
        p = (r_next - rho) / dt
        ph = spf.phi(sf, 0.5 * (rho + r_next))
        F = p / (ph * np.sqrt(ph**2 + p**2))
        return (F - np.roll(F, 1)) / dt

    dp = grid.dphi
    st = grid.sin_theta
    P = grid.pad(rho)
    cen = P[:, 1:-1]
    # centred longitude differences on every padded row
    dlon = (P[:, 2:] - P[:, :-2]) / (2 * dp)
    # meridional faces between rows i and i+1 (interior only; pole faces carry no flux)
    t_face = (np.arange(1, grid.n_theta) * dt)[:, None]
    s_face = np.sin(t_face)
    r_f = 0.5 * (rho[1:] + rho[:-1])
    p_t = (rho[1:] - rho[:-1]) / dt
    p_l = 0.5 * (dlon[2:-1] + dlon[1:-2]) / s_face
    ph = spf.phi(sf, r_f)
    F_t = p_t / (ph * np.sqrt(ph**2 + p_t**2 + p_l**2)) * s_face * dp
    flux_t = np.zeros((grid.n_theta + 1, grid.n_phi))
    flux_t[1:-1] = F_t
    # longitude faces between columns j and j+1
    dmer = (cen[2:] - cen[:-2]) / (2 * dt)
    r_e = np.roll(rho, -1, axis=1)
    r_f = 0.5 * (rho + r_e)
    p_l = (r_e - rho) / (dp * st)
    p_t = 0.5 * (dmer + np.roll(dmer, -1, axis=1))
    ph = spf.phi(sf, r_f)
    F_l = p_l / (ph * np.sqrt(ph**2 + p_t**2 + p_l**2)) * dt
    net = (flux_t[1:] - flux_t[:-1]) + (F_l - np.roll(F_l, 1, axis=1))
    return net / grid.weights


def divergence_rate(sf, grid, rho, flip_lower_order: bool = False) -> np.ndarray:
    """Rate of rho from the divergence form.

    ``flip_lower_order`` reverses the sign of the gradient-squared term. It
    is a fault-injection hook for the verification suite and has no other use.
    """
    ph = spf.phi(sf, rho)
    dph = spf.phi_prime(sf, rho)
    p2 = np.sum(grid.gradient(rho) ** 2, axis=0)
    lower = (grid.dim + 1) * dph * p2 / (ph * np.sqrt(ph**2 + p2))
    if flip_lower_order:
        lower = -lower
    return grid.polar_filter(ph * flux_divergence(sf, grid, rho) + lower)


# -- stepping -----------------------------------------------------------------


def max_grad_gamma_sq(sf, grid, rho) -> float:
    return float(np.max(np.sum(grid.gradient(rho) ** 2, axis=0) / spf.phi(sf, rho) ** 2))


def dt_stable(state: FlowState, cfl_factor: float = 0.2) -> float:
    """``cfl * h^2 * min(phi omega)``; ``1 / (phi omega)`` bounds the diffusion coefficient."""
    stats = state.stats or _gradient_stats(state.sf, state.grid, state.rho)
    return cfl_factor * state.grid.h**2 * stats[1]


def _gradient_stats(sf, grid, rho):
    """Star-shapedness gate plus ``max |grad gamma|^2`` and ``min phi omega``."""
    ph = spf.phi(sf, rho)
    p2 = np.sum(grid.gradient(rho) ** 2, axis=0)
    phi_omega = np.sqrt(ph**2 + p2)
    u = ph**2 / phi_omega
    if np.any(~(u > U_MIN)):
        idx = tuple(int(i) for i in np.argwhere(~(u > U_MIN))[0])
        raise StarShapedError(f"support function u={u[idx]!r} <= {U_MIN} at node {idx}")
    return float(np.max(p2 / ph**2)), float(np.min(phi_omega))


def _validated(state: FlowState, rho: np.ndarray):
    if not np.all(np.isfinite(rho)):
        raise CurvFlowError(f"non-finite rho after step {state.step_count + 1} at t={state.t:.6g}")
    try:
        return _gradient_stats(state.sf, state.grid, rho)
    except StarShapedError as exc:
        raise StarShapedError(f"{exc} after step {state.step_count + 1} (t={state.t:.6g})") from None


def _step(state: FlowState, dt: float, rate, integrator: str, cfl_factor: float, dt_max=None) -> FlowState:
    if dt < 0:
        raise ValueError("dt must be non-negative")
    if dt == 0:
        return state
    limit = dt_stable(state, cfl_factor) if dt_max is None else dt_max
    if dt > limit * (1 + 1e-12):
        raise StabilityError(f"dt={dt:.3e} exceeds the stable step {limit:.3e}")
    rho = state.rho
    k1 = rate(state.sf, state.grid, rho)
    if integrator == "euler":
        new = rho + dt * k1
    else:
        k2 = rate(state.sf, state.grid, rho + 0.5 * dt * k1)
        new = rho + dt * k2
    stats = _validated(state, new)
    return replace(state, rho=new, t=state.t + dt, step_count=state.step_count + 1, dt_last=dt, stats=stats)


def step_direct(state: FlowState, dt: float, integrator: str = "rk2", cfl_factor: float = 0.2) -> FlowState:
    return _step(state, dt, direct_rate, integrator, cfl_factor)


def step_divergence(state: FlowState, dt: float, integrator: str = "rk2", cfl_factor: float = 0.2,
                    flip_lower_order: bool = False) -> FlowState:
    if flip_lower_order:
        def rate(sf, grid, rho):
            return divergence_rate(sf, grid, rho, flip_lower_order=True)
    else:
        rate = divergence_rate
    return _step(state, dt, rate, integrator, cfl_factor)


# -- driver -------------------------------------------------------------------


@dataclass
class RunResult:
    records: list[DiagnosticsRecord]
    final: FlowState
    verdict: str
    message: str = ""
    r_inf: float | None = None
    h: float = 0.0
    dt_max: float = 0.0
    dt_min: float = math.inf
    H_flags: list[float] = field(default_factory=list)
    grad_tol: float = 1e-8

    @property
    def converged(self) -> bool:
        return self.verdict == "converged"

    @property
    def sf(self) -> SpaceForm:
        return self.final.sf

    @property
    def dim(self) -> int:
        return self.final.grid.dim

    def series(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    def trajectory(self) -> Trajectory:
        fill_area_derivative(self.records)
        return Trajectory(self.records, self.sf.curvature, self.dim, self.h, self.dt_max,
                          converged=self.converged, grad_tol=self.grad_tol)


def run(config: FlowConfig, rho0: np.ndarray | None = None, *, flip_lower_order: bool = False,
        max_steps: int = 10_000_000, observer=None) -> RunResult:
    """Integrate until ``t_end`` or until ``max |grad gamma|^2 < grad_tol``.

    Diagnostics are recorded at t = 0, every ``record_every`` steps and at the
    final state. Validation or stability failures end the run early with a
    partial trajectory and an ``*_abort`` verdict instead of raising.
    ``observer(state)``, if given, is called on the initial state and after
    every step.
    """
    from .shapes import build_initial_shape

    sf = config.sf
    grid = config.make_grid()
    if rho0 is None:
        rho0 = build_initial_shape(config.initial_shape, grid, sf, seed=config.seed)
    state = FlowState(sf, grid, np.array(rho0, dtype=float))
    if config.formulation == "direct":
        rate = direct_rate
    else:
        def rate(sf_, grid_, rho):
            return divergence_rate(sf_, grid_, rho, flip_lower_order=flip_lower_order)

    geom = compute_geometry(sf, grid, state.rho)
    records = [make_record(0.0, geom)]
    result = RunResult(records=records, final=state, verdict="running", h=grid.h, grad_tol=config.grad_tol)
    H0 = records[0].max_H
    H_slack = 10 * grid.h**2

    def record(st):
        rec = make_record(st.t, compute_geometry(sf, grid, st.rho))
        records.append(rec)
        if sf.curvature == -1 and rec.max_H > H0 + H_slack:
            result.H_flags.append(st.t)
            log.warning("max H rose to %.6g above initial %.6g at t=%.4g", rec.max_H, H0, st.t)

    converged = records[0].maxgrad2 < config.grad_tol
    if observer is not None:
        observer(state)
    try:
        while not converged and state.t < config.t_end and state.step_count < max_steps:
            dt_lim = dt_stable(state, config.cfl_factor)
            dt = min(dt_lim, config.t_end - state.t)
            state = _step(state, dt, rate, config.integrator, config.cfl_factor, dt_max=dt_lim)
            result.dt_max = max(result.dt_max, dt)
            result.dt_min = min(result.dt_min, dt)
            converged = state.stats[0] < config.grad_tol
            if observer is not None:
                observer(state)
            if state.step_count % config.record_every == 0 or converged or state.t >= config.t_end:
                record(state)
    except CurvFlowError as exc:
        result.final = state
        result.verdict = "stability_abort" if isinstance(exc, StabilityError) else "validation_abort"
        result.message = str(exc)
        log.error("run aborted at t=%.6g: %s", state.t, exc)
        return result

    result.final = state
    fill_area_derivative(records)
    if converged:
        result.verdict = "converged"
        result.r_inf = spf.ball_radius(sf, records[0].V, grid.dim)
    else:
        result.verdict = "t_end"
    return result


@dataclass
class DecayFit:
    status: str
    alpha: float = math.nan
    r_squared: float = math.nan
    n_samples: int = 0


def fit_decay_rate(records_or_t, maxgrad2=None, min_samples: int = 20, min_drop: float = 1e-2) -> DecayFit:
    """Exponential rate of ``max |grad gamma|^2`` over the tail half of a run.

    Accepts a list of records or explicit ``(t, maxgrad2)`` arrays. The fit is
    a least-squares line through ``log maxgrad2`` against t on the records with
    ``t >= t_final / 2``. Trajectories that are too short or do not drop
    below ``min_drop`` times the initial value give ``indeterminate``.
    """
    if maxgrad2 is None:
        t = np.array([r.t for r in records_or_t], dtype=float)
        y = np.array([r.maxgrad2 for r in records_or_t], dtype=float)
    else:
        t = np.asarray(records_or_t, dtype=float)
        y = np.asarray(maxgrad2, dtype=float)
    if len(t) < min_samples or not (y[0] > 0 and y[-1] < min_drop * y[0]) or np.any(y <= 0):
        return DecayFit("indeterminate", n_samples=len(t))
    tail = t >= 0.5 * (t[0] + t[-1])
    if tail.sum() < 3:
        return DecayFit("indeterminate", n_samples=int(tail.sum()))
    from scipy.stats import linregress

    fit = linregress(t[tail], np.log(y[tail]))
    return DecayFit("ok", -float(fit.slope), float(fit.rvalue**2), int(tail.sum()))


def initial_state(config: FlowConfig) -> FlowState:
    from .shapes import build_initial_shape

    grid = config.make_grid()
    sf = config.sf
    return FlowState(sf, grid, build_initial_shape(config.initial_shape, grid, sf, seed=config.seed))


def limit_radius(sf: SpaceForm, grid: SphereGrid, rho0) -> float:
    return spf.ball_radius(sf, enclosed_volume(sf, grid, rho0), grid.dim)


def alpha_lower_bound(result: RunResult) -> float:
    """The gradient-estimate constant ``2(n-1) / max(phi omega)`` at t = 0 (0 for curves)."""
    first = result.records[0]
    return 2.0 * (result.dim - 1) / first.max_phi_omega if first.max_phi_omega > 0 else float("nan")


__all__ = [
    "FlowState",
    "FlowConfig",
    "RunResult",
    "speed",
    "direct_rate",
    "divergence_rate",
    "flux_divergence",
    "step_direct",
    "step_divergence",
    "dt_stable",
    "run",
    "initial_state",
    "limit_radius",
    "alpha_lower_bound",
    "max_grad_gamma_sq",
    "fit_decay_rate",
    "DecayFit",
]
