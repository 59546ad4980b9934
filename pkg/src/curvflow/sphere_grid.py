"""Finite-difference calculus on the round sphere S^n for n = 1, 2.

S^1 uses M equispaced angles. S^2 uses a latitude-longitude grid whose
colatitudes are offset by half a step from the poles, so no node sits on a
coordinate singularity. Stencils that leave the top or bottom row continue
across the pole: the ghost value at colatitude ``-theta`` and longitude
``phi`` is the field at ``theta`` and ``phi + pi``.

Vectors and 2-tensors are returned in the orthonormal frame
``(d_theta, d_phi / sin(theta))``, stacked along the leading axes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

DEFAULT_M = 256
DEFAULT_N_THETA = 96
DEFAULT_N_PHI = 192


@dataclass(frozen=True, eq=False)
class SphereGrid:
    dim: int
    n_theta: int = 0
    n_phi: int = 0
    theta: np.ndarray = field(init=False, repr=False)
    phi: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.dim == 1:
            if self.n_theta < 4:
                raise ValueError("S^1 grid needs at least 4 nodes")
            theta = 2.0 * math.pi * np.arange(self.n_theta) / self.n_theta
            object.__setattr__(self, "n_phi", 1)
            object.__setattr__(self, "theta", theta)
            object.__setattr__(self, "phi", np.zeros_like(theta))
            object.__setattr__(self, "weights", np.full(self.n_theta, 2.0 * math.pi / self.n_theta))
        elif self.dim == 2:
            if self.n_theta < 4 or self.n_phi < 4 or self.n_phi % 2:
                raise ValueError("S^2 grid needs n_theta >= 4 and an even n_phi >= 4")
            dth = math.pi / self.n_theta
            dph = 2.0 * math.pi / self.n_phi
            th = (np.arange(self.n_theta) + 0.5) * dth
            ph = np.arange(self.n_phi) * dph
            TH, PH = np.meshgrid(th, ph, indexing="ij")
            # exact band areas so the weights sum to 4*pi
            edges = np.arange(self.n_theta + 1) * dth
            band = (np.cos(edges[:-1]) - np.cos(edges[1:])) * dph
            object.__setattr__(self, "theta", TH)
            object.__setattr__(self, "phi", PH)
            object.__setattr__(self, "weights", np.repeat(band[:, None], self.n_phi, axis=1))
        else:
            raise ValueError("only S^1 and S^2 are supported")
        for a in (self.theta, self.phi, self.weights):
            a.setflags(write=False)

    @classmethod
    def default(cls, dim: int, scale: float = 1.0) -> "SphereGrid":
        if dim == 1:
            return cls(1, int(round(DEFAULT_M * scale)))
        return cls(2, int(round(DEFAULT_N_THETA * scale)), int(round(DEFAULT_N_PHI * scale)))

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n_theta,) if self.dim == 1 else (self.n_theta, self.n_phi)

    @property
    def dtheta(self) -> float:
        return (2.0 if self.dim == 1 else 1.0) * math.pi / self.n_theta

    @property
    def dphi(self) -> float:
        return 2.0 * math.pi / self.n_phi

    @property
    def h(self) -> float:
        """Smallest coordinate step; sets the O(h^2) tolerance scale."""
        return self.dtheta if self.dim == 1 else min(self.dtheta, self.dphi)

    @property
    def sin_theta(self) -> np.ndarray:
        return self._cached("sin_theta", lambda: np.sin(self.theta))

    @property
    def cot_theta(self) -> np.ndarray:
        return self._cached("cot_theta", lambda: np.cos(self.theta) / np.sin(self.theta))

    def _cached(self, key, make):
        val = self.__dict__.get("_" + key)
        if val is None:
            val = make()
            val.setflags(write=False)
            self.__dict__["_" + key] = val
        return val

    def points(self) -> np.ndarray:
        """Unit vectors of the nodes in R^{n+1}, shape (n+1, *shape)."""
        if self.dim == 1:
            return np.stack([np.cos(self.theta), np.sin(self.theta)])
        st = np.sin(self.theta)
        return np.stack([st * np.cos(self.phi), st * np.sin(self.phi), np.cos(self.theta)])

    # -- stencils ---------------------------------------------------------

    def pad(self, f: np.ndarray, width: int = 1) -> np.ndarray:
        """Ghost layers: periodic in longitude, pole-crossing in colatitude.

        S^2 gets ``width`` ghost rows at each pole and one ghost column at
        each side.
        """
        f = np.asarray(f, dtype=float)
        if f.shape != self.shape:
            raise ValueError(f"field shape {f.shape} does not match grid {self.shape}")
        if self.dim == 1:
            return np.concatenate([f[-width:], f, f[:width]])
        half = self.n_phi // 2
        top = [np.roll(f[i], -half) for i in range(width - 1, -1, -1)]
        bottom = [np.roll(f[-1 - i], -half) for i in range(width)]
        g = np.vstack(top + [f] + bottom)
        return np.concatenate([g[:, -1:], g, g[:, :1]], axis=1)

    def partials(self, f: np.ndarray):
        """Coordinate partials by central differences.

        Returns ``f_t, f_tt`` for S^1 and ``f_t, f_p, f_tt, f_tp, f_pp`` for S^2
        (t = theta, p = longitude). On S^2 the first theta derivative uses the
        five-point stencil and the longitude differences are divided by
        ``2 sin(dphi)`` and ``4 sin^2(dphi / 2)``, which makes them exact on the
        first Fourier mode. Together these keep the ``cot(theta) f_t`` and
        ``f_pp / sin^2(theta)`` pole singularities second-order accurate for
        fields that do not vanish to second order at the poles.
        """
        dt = self.dtheta
        if self.dim == 1:
            P = self.pad(f)
            c = P[1:-1]
            return (P[2:] - P[:-2]) / (2 * dt), (P[2:] - 2 * c + P[:-2]) / dt**2
        dp = self.dphi
        P = self.pad(f, width=2)
        rows = P.shape[0]

        def row(s, cols=slice(1, -1)):
            return P[2 + s : rows - 2 + s, cols]

        c = row(0)
        f_tt = (row(1) - 2 * c + row(-1)) / dt**2
        f_pp = (row(0, slice(2, None)) - 2 * c + row(0, slice(None, -2))) / (4 * np.sin(0.5 * dp) ** 2)
        Dp = (P[:, 2:] - P[:, :-2]) / (2 * np.sin(dp))
        f_p = Dp[2:-2]
        f_t = _d4(P[:, 1:-1], dt)
        f_tp = _d4(Dp, dt)
        return f_t, f_p, f_tt, f_tp, f_pp

    def gradient(self, f: np.ndarray) -> np.ndarray:
        if self.dim == 1:
            P = self.pad(f)
            return ((P[2:] - P[:-2]) / (2 * self.dtheta))[None]
        P = self.pad(f, width=2)
        f_t = _d4(P[:, 1:-1], self.dtheta)
        f_p = (P[2:-2, 2:] - P[2:-2, :-2]) / (2 * np.sin(self.dphi))
        return np.stack([f_t, f_p / self.sin_theta])

    def derivatives(self, f: np.ndarray):
        """Frame gradient (n, ...) and frame Hessian (n, n, ...) in one pass."""
        if self.dim == 1:
            f_t, f_tt = self.partials(f)
            return f_t[None], f_tt[None, None]
        f_t, f_p, f_tt, f_tp, f_pp = self.partials(f)
        st = self.sin_theta
        cot = self.cot_theta
        grad = np.stack([f_t, f_p / st])
        h12 = (f_tp - cot * f_p) / st
        h22 = f_pp / st**2 + cot * f_t
        hess = np.stack([np.stack([f_tt, h12]), np.stack([h12, h22])])
        return grad, hess

    def frame_components(self, f: np.ndarray):
        """Gradient and Hessian frame components as a flat tuple.

        ``(g1, h11)`` on S^1 and ``(g1, g2, h11, h12, h22)`` on S^2; the hot
        path of the time stepper uses this to avoid stacking arrays.
        """
        if self.dim == 1:
            return self.partials(f)
        f_t, f_p, f_tt, f_tp, f_pp = self.partials(f)
        inv_s = 1.0 / self.sin_theta
        cot = self.cot_theta
        return f_t, f_p * inv_s, f_tt, (f_tp - cot * f_p) * inv_s, f_pp * inv_s**2 + cot * f_t

    def hessian(self, f: np.ndarray) -> np.ndarray:
        return self.derivatives(f)[1]

    def laplacian(self, f: np.ndarray) -> np.ndarray:
        hess = self.hessian(f)
        return hess[0, 0] if self.dim == 1 else hess[0, 0] + hess[1, 1]

    def integrate(self, f) -> float:
        f = np.broadcast_to(np.asarray(f, dtype=float), self.shape)
        return float(np.sum(f * self.weights))

    # -- polar filter -----------------------------------------------------

    def polar_filter(self, f: np.ndarray) -> np.ndarray:
        """Drop longitudinal modes finer than the colatitude step near the poles.

        Row ``i`` keeps Fourier mode ``m`` iff
        ``sin(m dphi / 2) <= sin(theta_i) dphi / dtheta``, which caps the
        longitudinal stiffness at the meridional one. The row mean is always
        kept, so integrals against the quadrature weights are unchanged.
        """
        if self.dim == 1:
            return f
        mask = self._filter_mask
        if mask is None:
            return f
        spec = np.fft.rfft(f, axis=1)
        spec *= mask
        return np.fft.irfft(spec, n=self.n_phi, axis=1)

    @property
    def _filter_mask(self):
        cached = self.__dict__.get("_mask_cache", False)
        if cached is not False:
            return cached
        m = np.arange(self.n_phi // 2 + 1)
        limit = np.sin(self.theta[:, 0]) * self.dphi / self.dtheta
        keep = np.sin(0.5 * m * self.dphi)[None, :] <= limit[:, None] + 1e-14
        mask = None if keep.all() else keep.astype(float)
        self.__dict__["_mask_cache"] = mask
        return mask


def _d4(P, dt):
    """Five-point first derivative along axis 0 of an array with two ghost rows."""
    n = P.shape[0]
    return (-P[4:] + 8 * P[3 : n - 1] - 8 * P[1 : n - 3] + P[: n - 4]) / (12 * dt)
