import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from curvflow import geometry as geo
from curvflow import spaceform as spf
from curvflow.errors import ConsistencyError, DomainError, StarShapedError
from curvflow.shapes import build_initial_shape
from curvflow.sphere_grid import SphereGrid

FORMS = [spf.SpaceForm(k) for k in (0, 1, -1)]
AXES = np.array([1.0, 1.0, 1.5])


def implicit_curvatures(X, axes):
    """Mean curvature (sum) and Gauss curvature of the quadric sum (x_i / a_i)^2 = 1."""
    D = 2.0 / axes**2
    grad = D[:, None] * X.reshape(3, -1)
    norm2 = np.sum(grad**2, axis=0)
    H = (D.sum() * norm2 - np.sum(D[:, None] * grad**2, axis=0)) / norm2**1.5
    adj = np.array([D[1] * D[2], D[0] * D[2], D[0] * D[1]])
    G = np.sum(adj[:, None] * grad**2, axis=0) / norm2**2
    return H, G


def spheroid_integral(f_of_H, a=1.0, c=1.5):
    def integrand(t):
        X = np.array([a * math.sin(t), 0.0, c * math.cos(t)])
        H, G = implicit_curvatures(X[:, None], np.array([a, a, c]))
        return f_of_H(H[0], G[0]) * 2 * math.pi * a * math.sin(t) * math.sqrt((c * math.sin(t)) ** 2 + (a * math.cos(t)) ** 2)

    return quad(integrand, 0, math.pi, epsabs=1e-13, epsrel=1e-13)[0]


@pytest.fixture(scope="module")
def ellipsoid_geom():
    sf = spf.space_form("euclidean")
    grid = SphereGrid.default(2)
    rho = build_initial_shape({"kind": "ellipsoid", "a": 1, "b": 1, "c": 1.5}, grid, sf)
    return geo.compute_geometry(sf, grid, rho)


@pytest.mark.parametrize("sf", FORMS, ids=lambda s: s.name)
@pytest.mark.parametrize("dim", [1, 2])
def test_geodesic_sphere_exact(sf, dim):
    grid = SphereGrid.default(dim, 0.25)
    r = 0.8
    g = geo.compute_geometry(sf, grid, np.full(grid.shape, r))
    ph, dph = float(spf.phi(sf, r)), float(spf.phi_prime(sf, r))
    np.testing.assert_allclose(g.kappa, dph / ph, rtol=1e-13)
    np.testing.assert_allclose(g.u, ph, rtol=1e-14)
    np.testing.assert_allclose(g.H, dim * dph / ph, rtol=1e-13)
    assert geo.area(g) == pytest.approx(spf.sphere_measure(dim) * ph**dim, rel=1e-13)
    for k in range(dim):
        assert geo.minkowski_residual(g, k) == pytest.approx(0.0, abs=1e-11)


def test_ellipse_vertex():
    # x^2/4 + y^2 = 1: at (2, 0) the support value is 2 and the curvature a / b^2 = 2
    sf = spf.space_form("euclidean")
    errs = []
    for m in (128, 256, 512):
        grid = SphereGrid(1, m)
        rho = build_initial_shape({"kind": "ellipsoid", "a": 2.0, "b": 1.0}, grid, sf)
        g = geo.compute_geometry(sf, grid, rho)
        assert rho[0] == pytest.approx(2.0, abs=1e-14)
        assert g.u[0] == pytest.approx(2.0, abs=1e-14)
        errs.append(abs(g.kappa[0, 0] - 2.0))
    assert errs[-1] < 1e-3
    assert errs[0] / errs[1] > 3.9 and errs[1] / errs[2] > 3.9


def test_ellipse_total_curvature():
    sf = spf.space_form("euclidean")
    grid = SphereGrid(1, 256)
    g = geo.compute_geometry(sf, grid, build_initial_shape({"kind": "ellipsoid", "a": 2.0, "b": 1.0}, grid, sf))
    perimeter = quad(lambda t: math.hypot(2 * math.sin(t), math.cos(t)), 0, 2 * math.pi, epsabs=1e-13)[0]
    assert geo.quermassintegral(g, 0) == pytest.approx(perimeter, rel=5e-4)
    # turning number of a simple closed curve
    assert g.integrate(g.H) == pytest.approx(2 * math.pi, rel=1e-4)


def test_ellipsoid_curvatures_match_implicit_oracle(ellipsoid_geom):
    g = ellipsoid_geom
    X = g.rho * g.grid.points()
    H, G = implicit_curvatures(X, AXES)
    np.testing.assert_allclose(g.H.ravel(), H, atol=2e-3)
    np.testing.assert_allclose(g.sigma2.ravel(), G, atol=2e-3)


def test_ellipsoid_curvature_second_order():
    sf = spf.space_form("euclidean")
    errs = []
    for scale in (0.5, 1.0):
        grid = SphereGrid.default(2, scale)
        rho = build_initial_shape({"kind": "ellipsoid", "a": 1, "b": 1, "c": 1.5}, grid, sf)
        g = geo.compute_geometry(sf, grid, rho)
        H, _ = implicit_curvatures(rho * grid.points(), AXES)
        errs.append(np.abs(g.H.ravel() - H).max())
    assert errs[0] / errs[1] > 3.5


def test_ellipsoid_quermassintegrals(ellipsoid_geom):
    e = math.sqrt(1 - 1 / 1.5**2)
    area = 2 * math.pi * (1 + 1.5 / e * math.asin(e))
    assert spheroid_integral(lambda H, G: 1.0) == pytest.approx(area, rel=1e-12)
    assert geo.quermassintegral(ellipsoid_geom, 0) == pytest.approx(area, rel=2e-4)
    assert geo.quermassintegral(ellipsoid_geom, 1) == pytest.approx(spheroid_integral(lambda H, G: H), rel=5e-4)
    # Gauss-Bonnet
    assert ellipsoid_geom.integrate(ellipsoid_geom.sigma2) == pytest.approx(4 * math.pi, rel=5e-4)


def test_ellipsoid_volume(ellipsoid_geom):
    V = geo.enclosed_volume(ellipsoid_geom.sf, ellipsoid_geom.grid, ellipsoid_geom.rho)
    assert V == pytest.approx(4 / 3 * math.pi * 1.5, rel=1e-4)


@pytest.mark.parametrize("sf", FORMS, ids=lambda s: s.name)
def test_rho_and_gamma_forms_agree(sf):
    grid = SphereGrid(2, 32, 64)
    x = grid.points()
    rho = 1.0 + 0.2 * x[2] + 0.1 * x[0] * x[1]
    grad, hess = grid.derivatives(rho)
    _, _, W_rho = geo.weingarten_rho_form(sf, rho, grad, hess)
    W_gam = geo.weingarten_gamma_form(sf, rho, grad, hess)
    np.testing.assert_allclose(W_rho, W_gam, atol=1e-8)
    g = geo.compute_geometry(sf, grid, rho)
    np.testing.assert_allclose(geo.mean_curvature(sf, grid, rho), g.H, atol=1e-8)
    # the symmetric form has the eigenvalues of g^{-1} h
    ev = np.sort(np.linalg.eigvals(np.moveaxis(W_rho, (0, 1), (-2, -1))).real, axis=-1)
    np.testing.assert_allclose(np.moveaxis(g.kappa, 0, -1), ev, atol=1e-9)


def test_principal_curvatures_clamp_and_reject():
    W = np.array([[1.0, 1e-8], [-1e-8, 1.0]])
    assert geo.principal_curvatures(W) == pytest.approx([1.0, 1.0])
    with pytest.raises(ConsistencyError):
        geo.principal_curvatures(np.array([[0.0, 1.0], [-1.0, 0.0]]))


@settings(max_examples=50, deadline=None)
@given(a=st.floats(-5, 5), b=st.floats(-5, 5), d=st.floats(-5, 5))
def test_principal_curvatures_symmetric(a, b, d):
    W = np.array([[a, b], [b, d]])
    np.testing.assert_allclose(geo.principal_curvatures(W), np.linalg.eigvalsh(W), atol=1e-9)


def test_star_shaped_gate():
    sf = spf.space_form("euclidean")
    grid = SphereGrid(2, 16, 32)
    with pytest.raises(StarShapedError, match="node"):
        geo.compute_geometry(sf, grid, np.ones(grid.shape), u_min=2.0)


def test_domain_gate():
    sf = spf.space_form("sphere")
    grid = SphereGrid(2, 16, 32)
    rho = np.ones(grid.shape)
    rho[3, 4] = 3.2
    with pytest.raises(DomainError, match=r"\(3, 4\)"):
        geo.compute_geometry(sf, grid, rho)


def test_quermass_index_checked(ellipsoid_geom):
    with pytest.raises(ValueError):
        geo.quermassintegral(ellipsoid_geom, 2)
    with pytest.raises(ValueError):
        ellipsoid_geom.sigma(3)
    assert geo.sigma_of_ones(2, 1) == 2


def test_second_fundamental_form_symmetric(grid2):
    sf = spf.space_form("hyperbolic")
    x = grid2.points()
    h, W = geo.second_fundamental_form(sf, grid2, 1 + 0.2 * x[0])
    np.testing.assert_allclose(h[0, 1], h[1, 0], atol=1e-13)
    assert W.shape == (2, 2) + grid2.shape
