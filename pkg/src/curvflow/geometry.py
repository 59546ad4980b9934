"""Extrinsic geometry of a radial graph ``{(rho(z), z) : z in S^n}``.

Everything is expressed in the orthonormal frame of the round metric on
S^n, in which the induced metric is ``phi^2 I + p p^T`` with ``p`` the frame
gradient of rho, and the second fundamental form is

    h = (-phi Hess(rho) + 2 phi' p p^T + phi^2 phi' I) / sqrt(phi^2 + |p|^2).

The Weingarten map is returned in its symmetric form ``g^{-1/2} h g^{-1/2}``,
which has the same eigenvalues as ``g^{-1} h``.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from . import spaceform as spf
from .errors import ConsistencyError, StarShapedError
from .spaceform import SpaceForm
from .sphere_grid import SphereGrid

U_MIN = 1e-8


@dataclass(frozen=True, eq=False)
class SurfaceGeometry:
    sf: SpaceForm
    grid: SphereGrid
    rho: np.ndarray
    phi: np.ndarray
    phi_prime: np.ndarray
    grad_rho: np.ndarray
    hess_rho: np.ndarray
    gamma_grad: np.ndarray
    omega: np.ndarray
    omega_tilde: np.ndarray
    u: np.ndarray
    g: np.ndarray
    h: np.ndarray
    W: np.ndarray
    kappa: np.ndarray
    H: np.ndarray
    sigma2: np.ndarray
    area_element: np.ndarray

    @property
    def n(self) -> int:
        return self.grid.dim

    @property
    def grad_gamma_sq(self) -> np.ndarray:
        return np.sum(self.gamma_grad**2, axis=0)

    def sigma(self, k: int) -> np.ndarray:
        if k == 0:
            return np.ones_like(self.H)
        if k == 1:
            return self.H
        if k == 2 and self.n == 2:
            return self.sigma2
        raise ValueError(f"sigma_{k} undefined for n={self.n}")

    @property
    def dmu(self) -> np.ndarray:
        """Area element times quadrature weight at each node."""
        return self.area_element * self.grid.weights

    def integrate(self, f) -> float:
        return float(np.sum(np.broadcast_to(f, self.H.shape) * self.dmu))

    @property
    def pinch(self) -> np.ndarray:
        if self.n == 1:
            return np.zeros_like(self.H)
        return self.kappa[1] - self.kappa[0]


def _matmul(A, B):
    return np.einsum("ik...,kj...->ij...", A, B)


def _eye(n, shape):
    I = np.zeros((n, n) + shape)
    for i in range(n):
        I[i, i] = 1.0
    return I


def principal_curvatures(W: np.ndarray) -> np.ndarray:
    """Sorted eigenvalues of a frame Weingarten map of shape (n, n, ...).

    For n = 2 the closed form ``(tr -/+ sqrt(tr^2 - 4 det)) / 2`` is used. A
    slightly negative discriminant (down to -1e-12, relative to tr^2) is
    treated as a double eigenvalue; anything lower means W was not
    diagonalizable over the reals and raises ConsistencyError.
    """
    W = np.asarray(W, dtype=float)
    n = W.shape[0]
    if n == 1:
        return W[0, 0][None].copy()
    a, b, c, d = W[0, 0], W[0, 1], W[1, 0], W[1, 1]
    tr = a + d
    disc = (a - d) ** 2 + 4.0 * b * c
    scale = np.maximum(tr * tr, 1.0)
    if np.any(disc < -1e-12 * scale):
        raise ConsistencyError(f"Weingarten discriminant {disc.min():.3e} < 0: complex principal curvatures")
    root = np.sqrt(np.maximum(disc, 0.0))
    return np.stack([0.5 * (tr - root), 0.5 * (tr + root)])


def support_function(sf: SpaceForm, rho, grad_rho):
    """u = phi^2 / sqrt(phi^2 + |grad rho|^2)."""
    ph = spf.phi(sf, rho)
    return ph**2 / np.sqrt(ph**2 + np.sum(np.asarray(grad_rho) ** 2, axis=0))


def weingarten_rho_form(sf, rho, grad_rho, hess_rho):
    """Metric g, second fundamental form h and g^{-1} h from the rho variables."""
    n = grad_rho.shape[0]
    ph = spf.phi(sf, rho)
    dph = spf.phi_prime(sf, rho)
    p = grad_rho
    p2 = np.sum(p**2, axis=0)
    wt = np.sqrt(ph**2 + p2)
    I = _eye(n, rho.shape)
    pp = p[:, None] * p[None, :]
    g = ph**2 * I + pp
    h = (-ph * hess_rho + 2.0 * dph * pp + ph**2 * dph * I) / wt
    g_inv = (I - pp / wt**2) / ph**2
    return g, h, _matmul(g_inv, h)


def weingarten_gamma_form(sf, rho, grad_rho, hess_rho):
    """g^{-1} h from the gamma = int d rho / phi variables.

    The gamma derivatives come from the chain rule, so this path shares the
    finite differences with :func:`weingarten_rho_form` and differs from it
    only in the algebra.
    """
    n = grad_rho.shape[0]
    ph = spf.phi(sf, rho)
    dph = spf.phi_prime(sf, rho)
    q = grad_rho / ph
    qq = q[:, None] * q[None, :]
    q_hess = hess_rho / ph - dph * qq
    om2 = 1.0 + np.sum(q**2, axis=0)
    I = _eye(n, rho.shape)
    A = I - qq / om2
    B = -q_hess + dph * qq + dph * I
    return _matmul(A, B) / (ph * np.sqrt(om2))


def compute_geometry(sf: SpaceForm, grid: SphereGrid, rho, u_min: float = U_MIN) -> SurfaceGeometry:
    """Full per-node geometry of the radial graph of ``rho``.

    Raises DomainError if rho leaves ``(0, rho_max)`` and StarShapedError if
    the support function drops to ``u_min`` or below anywhere.
    """
    rho = spf.check_domain(sf, rho)
    grad, hess = grid.derivatives(rho)
    return geometry_from_derivatives(sf, grid, rho, grad, hess, u_min)


def geometry_from_derivatives(sf, grid, rho, grad, hess, u_min=U_MIN) -> SurfaceGeometry:
    n = grid.dim
    ph = spf.phi(sf, rho)
    dph = spf.phi_prime(sf, rho)
    p2 = np.sum(grad**2, axis=0)
    wt = np.sqrt(ph**2 + p2)
    u = ph**2 / wt
    if np.any(~(u > u_min)):
        idx = tuple(int(i) for i in np.argwhere(~(u > u_min))[0])
        raise StarShapedError(f"support function u={u[idx]!r} <= {u_min} at node {idx}")
    q = grad / ph
    om = wt / ph
    pp = grad[:, None] * grad[None, :]
    I = _eye(n, rho.shape)
    g = ph**2 * I + pp
    h = (-ph * hess + 2.0 * dph * pp + ph**2 * dph * I) / wt
    if n == 1:
        Wsym = h / g
    else:
        # g^{-1/2} = (I - q q^T / (omega (1 + omega))) / phi
        S = (I - q[:, None] * q[None, :] / (om * (1.0 + om))) / ph
        Wsym = _matmul(_matmul(S, h), S)
        Wsym = 0.5 * (Wsym + np.swapaxes(Wsym, 0, 1))
    kappa = principal_curvatures(Wsym)
    H = np.trace(Wsym) if n == 2 else Wsym[0, 0].copy()
    sigma2 = kappa[0] * kappa[1] if n == 2 else np.zeros_like(H)
    return SurfaceGeometry(
        sf=sf,
        grid=grid,
        rho=rho,
        phi=ph,
        phi_prime=dph,
        grad_rho=grad,
        hess_rho=hess,
        gamma_grad=q,
        omega=om,
        omega_tilde=wt,
        u=u,
        g=g,
        h=h,
        W=Wsym,
        kappa=kappa,
        H=H,
        sigma2=sigma2,
        area_element=ph**n * om,
    )


def second_fundamental_form(sf, grid, rho):
    """h_ij and the (non-symmetric) Weingarten map g^{-1} h in the frame."""
    rho = spf.check_domain(sf, rho)
    grad, hess = grid.derivatives(rho)
    _, h, W = weingarten_rho_form(sf, rho, grad, hess)
    return h, W


def mean_curvature(sf, grid, rho):
    """H via the trace formula in the gamma variables."""
    rho = spf.check_domain(sf, rho)
    grad, hess = grid.derivatives(rho)
    W = weingarten_gamma_form(sf, rho, grad, hess)
    return np.trace(W) if grid.dim == 2 else W[0, 0]


def enclosed_volume(sf, grid, rho) -> float:
    """Integral over S^n of the radial volume ``int_0^rho phi(r)^n dr``."""
    return grid.integrate(spf.radial_volume(sf, rho, grid.dim))


def area(geom: SurfaceGeometry) -> float:
    return float(np.sum(geom.dmu))


def quermassintegral(geom: SurfaceGeometry, k: int) -> float:
    if not 0 <= k <= geom.n - 1:
        raise ValueError(f"k must lie in [0, {geom.n - 1}], got {k}")
    return geom.integrate(geom.sigma(k))


def minkowski_terms(geom: SurfaceGeometry, k: int) -> tuple[float, float]:
    """Both sides ``(k+1) int sigma_{k+1} u`` and ``(n-k) int phi' sigma_k``."""
    n = geom.n
    if not 0 <= k <= n - 1:
        raise ValueError(f"k must lie in [0, {n - 1}], got {k}")
    lhs = (k + 1) * geom.integrate(geom.sigma(k + 1) * geom.u)
    rhs = (n - k) * geom.integrate(geom.phi_prime * geom.sigma(k))
    return lhs, rhs


def minkowski_residual(geom: SurfaceGeometry, k: int) -> float:
    lhs, rhs = minkowski_terms(geom, k)
    return lhs - rhs


def sigma_of_ones(n: int, k: int) -> int:
    return comb(n, k)
