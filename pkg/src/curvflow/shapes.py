"""Admissible initial radial graphs.

Shapes are given either as a dict with a ``kind`` key or as a compact
string such as ``"sphere(1)"``, ``"ellipsoid(1, 1, 1.5)"`` or
``"random(1, 0.1, 4, 7)"``.

======== =============================== =====================================
kind     parameters                      rho
======== =============================== =====================================
sphere   r                               r
fourier  r0, a={m: a_m}, b={m: b_m}      r0 (1 + sum a_m cos m t + b_m sin m t)
harmonic r0, terms=[[l, m, eps, cs]]     r0 (1 + sum eps Y_lm), n = 2 only
ellipsoid a, b[, c]                      exact polar graph, K = 0 only
random   r0, amp, l_max, seed            random low-order perturbation
======== =============================== =====================================

``Y_lm = sin(t)^m cos(t)^(l-m) cos(m p)`` (or ``sin(m p)`` when cs is ``"sin"``).
"""

from __future__ import annotations

import math
import re

import numpy as np

from . import spaceform as spf
from .errors import ConfigError
from .geometry import compute_geometry
from .sphere_grid import SphereGrid

POSITIONAL = {
    "sphere": ("r",),
    "ellipsoid": ("a", "b", "c"),
    "random": ("r0", "amp", "l_max", "seed"),
}


def parse_shape(spec) -> dict:
    if isinstance(spec, dict):
        if "kind" not in spec:
            raise ConfigError(f"shape spec {spec!r} has no 'kind'")
        return dict(spec)
    if not isinstance(spec, str):
        raise ConfigError(f"shape spec must be a dict or string, got {type(spec).__name__}")
    m = re.fullmatch(r"\s*(\w+)\s*\((.*)\)\s*", spec)
    if not m or m.group(1) not in POSITIONAL:
        raise ConfigError(f"cannot parse shape {spec!r}")
    kind = m.group(1)
    try:
        args = [float(x) for x in m.group(2).split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"non-numeric argument in shape {spec!r}") from None
    names = POSITIONAL[kind]
    if len(args) > len(names):
        raise ConfigError(f"too many arguments for {kind}: {spec!r}")
    return {"kind": kind, **dict(zip(names, args))}


def y_like(grid: SphereGrid, l: int, m: int, part: str = "cos") -> np.ndarray:
    if not 0 <= m <= l:
        raise ConfigError(f"need 0 <= m <= l, got l={l}, m={m}")
    trig = np.cos if part == "cos" else np.sin
    return np.sin(grid.theta) ** m * np.cos(grid.theta) ** (l - m) * trig(m * grid.phi)


def _fourier(grid, r0, a, b):
    t = grid.theta
    pert = np.zeros_like(t)
    for mm, val in (a or {}).items():
        pert += float(val) * np.cos(int(mm) * t)
    for mm, val in (b or {}).items():
        pert += float(val) * np.sin(int(mm) * t)
    return r0 * (1.0 + pert)


def _harmonic(grid, r0, terms):
    pert = np.zeros(grid.shape)
    for term in terms or []:
        if isinstance(term, dict):
            l, m, eps, part = term["l"], term.get("m", 0), term["eps"], term.get("part", "cos")
        else:
            l, m, eps, *rest = term
            part = rest[0] if rest else "cos"
        pert += float(eps) * y_like(grid, int(l), int(m), part)
    return r0 * (1.0 + pert)


def _ellipsoid(grid, sf, a, b, c=None):
    if sf.curvature != 0:
        raise ConfigError("ellipsoid shapes are only defined in Euclidean space")
    x = grid.points()
    if grid.dim == 1:
        return 1.0 / np.sqrt((x[0] / a) ** 2 + (x[1] / b) ** 2)
    if c is None:
        raise ConfigError("ellipsoid on S^2 needs three semi-axes")
    return 1.0 / np.sqrt((x[0] / a) ** 2 + (x[1] / b) ** 2 + (x[2] / c) ** 2)


def _random(grid, sf, r0, amp, l_max, seed):
    rng = np.random.default_rng(int(seed))
    l_max = int(l_max)
    pert = np.zeros(grid.shape)
    if grid.dim == 1:
        for mm in range(1, l_max + 1):
            ca, cb = rng.standard_normal(2)
            pert += ca * np.cos(mm * grid.theta) + cb * np.sin(mm * grid.theta)
    else:
        for l in range(1, l_max + 1):
            for mm in range(l + 1):
                for part in ("cos", "sin") if mm else ("cos",):
                    pert += rng.standard_normal() * y_like(grid, l, mm, part)
    peak = float(np.max(np.abs(pert)))
    if peak == 0.0:
        return np.full(grid.shape, float(r0))
    # keep rho inside (0.1 r0, 1.9 r0) and, on the sphere, below 0.95 pi
    limit = min(float(amp), 0.9)
    if sf.curvature == 1:
        limit = min(limit, 0.95 * math.pi / r0 - 1.0)
    if limit <= 0:
        raise ConfigError(f"r0={r0} leaves no room for a perturbation in S^{grid.dim + 1}")
    return r0 * (1.0 + limit * pert / peak)


def build_initial_shape(spec, grid: SphereGrid, sf: spf.SpaceForm, seed: int = 0) -> np.ndarray:
    """Radial function of the initial surface, validated for domain and star-shapedness."""
    s = parse_shape(spec)
    kind = s.pop("kind")
    try:
        if kind == "sphere":
            rho = np.full(grid.shape, float(s.get("r", 1.0)))
        elif kind == "fourier":
            if grid.dim != 1:
                raise ConfigError("fourier shapes are for n=1; use harmonic on S^2")
            rho = _fourier(grid, float(s.get("r0", 1.0)), s.get("a"), s.get("b"))
        elif kind == "harmonic":
            if grid.dim != 2:
                raise ConfigError("harmonic shapes are for n=2; use fourier on S^1")
            rho = _harmonic(grid, float(s.get("r0", 1.0)), s.get("terms"))
        elif kind == "ellipsoid":
            rho = _ellipsoid(grid, sf, float(s["a"]), float(s["b"]), None if s.get("c") is None else float(s["c"]))
        elif kind == "random":
            rho = _random(grid, sf, float(s.get("r0", 1.0)), float(s.get("amp", 0.1)), s.get("l_max", 3),
                          s.get("seed", seed))
        else:
            raise ConfigError(f"unknown shape kind {kind!r}")
    except KeyError as exc:
        raise ConfigError(f"shape {kind!r} is missing parameter {exc.args[0]!r}") from None
    compute_geometry(sf, grid, rho)
    return rho
