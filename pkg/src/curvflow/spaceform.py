"""Warping functions of the simply connected space forms.

The ambient metric is ``ds^2 = drho^2 + phi(rho)^2 dz^2`` with ``phi`` equal to
``rho``, ``sin(rho)`` or ``sinh(rho)`` for curvature 0, +1, -1. All functions
accept scalars or numpy arrays and reject values outside ``(0, rho_max)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

NAMES = {"euclidean": 0, "sphere": 1, "hyperbolic": -1}


@dataclass(frozen=True)
class SpaceForm:
    curvature: int

    def __post_init__(self):
        if self.curvature not in (-1, 0, 1):
            raise ValueError(f"curvature must be -1, 0 or +1, got {self.curvature!r}")

    @property
    def rho_max(self) -> float:
        return math.pi if self.curvature == 1 else math.inf

    @property
    def name(self) -> str:
        return {0: "euclidean", 1: "sphere", -1: "hyperbolic"}[self.curvature]


def space_form(name: str | int) -> SpaceForm:
    """Look up a space form by config name or by curvature value."""
    if isinstance(name, str):
        try:
            return SpaceForm(NAMES[name])
        except KeyError:
            raise ValueError(f"unknown space_form {name!r}; expected one of {sorted(NAMES)}") from None
    return SpaceForm(int(name))


def check_domain(sf: SpaceForm, rho):
    r = np.asarray(rho, dtype=float)
    bad = ~((r > 0.0) & (r < sf.rho_max))
    if np.any(bad):
        idx = np.argwhere(bad)[0] if r.ndim else ()
        val = float(r[tuple(idx)]) if r.ndim else float(r)
        raise DomainError(
            f"rho={val!r} at node {tuple(int(i) for i in idx)} outside (0, {sf.rho_max}) for K={sf.curvature}"
        )
    return r


def phi(sf: SpaceForm, rho):
    r = check_domain(sf, rho)
    if sf.curvature == 0:
        return r * 1.0
    if sf.curvature == 1:
        return np.sin(r)
    return np.sinh(r)


def phi_prime(sf: SpaceForm, rho):
    r = check_domain(sf, rho)
    if sf.curvature == 0:
        return np.ones_like(r)
    if sf.curvature == 1:
        return np.cos(r)
    return np.cosh(r)


def capital_phi(sf: SpaceForm, rho):
    """Radial antiderivative of phi, normalized to vanish at the origin."""
    r = check_domain(sf, rho)
    if sf.curvature == 0:
        return 0.5 * r * r
    if sf.curvature == 1:
        # 2 sin^2(r/2) == 1 - cos r without cancellation at small r
        return 2.0 * np.sin(0.5 * r) ** 2
    return 2.0 * np.sinh(0.5 * r) ** 2


def gamma_of_rho(sf: SpaceForm, rho):
    """Antiderivative of 1/phi: log r, log tan(r/2), log tanh(r/2)."""
    r = check_domain(sf, rho)
    if sf.curvature == 0:
        return np.log(r)
    if sf.curvature == 1:
        return np.log(np.tan(0.5 * r))
    return np.log(np.tanh(0.5 * r))


def rho_of_gamma(sf: SpaceForm, gamma):
    g = np.asarray(gamma, dtype=float)
    if sf.curvature == 0:
        return np.exp(g)
    if sf.curvature == 1:
        return 2.0 * np.arctan(np.exp(g))
    if np.any(g >= 0.0):
        raise DomainError("gamma must be negative in hyperbolic space")
    return 2.0 * np.arctanh(np.exp(g))


def radial_volume(sf: SpaceForm, rho, n: int):
    """Closed form of the integral of phi(r)^n from 0 to rho (n = 1, 2)."""
    r = check_domain(sf, rho)
    K = sf.curvature
    if n == 1:
        return capital_phi(sf, r)
    if n != 2:
        raise ValueError("only n = 1, 2 are supported")
    if K == 0:
        return r ** 3 / 3.0
    if K == 1:
        return 0.5 * r - 0.25 * np.sin(2.0 * r)
    return 0.25 * np.sinh(2.0 * r) - 0.5 * r


def sphere_measure(n: int) -> float:
    return {1: 2.0 * math.pi, 2: 4.0 * math.pi}[n]


def ball_volume(sf: SpaceForm, r: float, n: int) -> float:
    """Volume enclosed by the geodesic sphere of radius r in N^{n+1}(K)."""
    return sphere_measure(n) * float(radial_volume(sf, r, n))


def ball_radius(sf: SpaceForm, volume: float, n: int, xtol: float = 1e-12) -> float:
    """Radius of the geodesic ball with the given enclosed volume (bisection)."""
    from scipy.optimize import bisect

    hi = sf.rho_max * (1.0 - 1e-12) if sf.curvature == 1 else 1.0
    if sf.curvature != 1:
        while ball_volume(sf, hi, n) < volume:
            hi *= 2.0
    elif volume >= ball_volume(sf, hi, n):
        raise DomainError("volume exceeds that of the whole sphere")
    lo = 1e-300
    return bisect(lambda r: ball_volume(sf, r, n) - volume, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=400)
