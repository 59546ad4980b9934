import math

import numpy as np
import pytest

from curvflow import spaceform as spf
from curvflow.errors import ConfigError, DomainError
from curvflow.shapes import build_initial_shape, parse_shape, y_like
from curvflow.sphere_grid import SphereGrid

EUC = spf.space_form("euclidean")


def test_sphere_shape(grid2):
    np.testing.assert_array_equal(build_initial_shape("sphere(1)", grid2, EUC), np.ones(grid2.shape))


def test_ellipsoid_near_pole():
    grid = SphereGrid.default(2)
    rho = build_initial_shape("ellipsoid(1, 1, 1.5)", grid, EUC)
    t = grid.theta[0, 0]
    # solve sin^2 t rho^2 + cos^2 t rho^2 / 2.25 = 1 along the ray
    exact = 1 / math.sqrt(math.sin(t) ** 2 + math.cos(t) ** 2 / 2.25)
    np.testing.assert_allclose(rho[0], exact, rtol=1e-14)
    assert rho[0, 0] == pytest.approx(1.5, abs=1e-3)
    assert rho[grid.n_theta // 2, 0] == pytest.approx(1.0, abs=1e-2)


def test_fourier_values():
    grid = SphereGrid(1, 256)
    rho = build_initial_shape({"kind": "fourier", "r0": 1, "a": {"2": 0.2}}, grid, EUC)
    assert rho[0] == pytest.approx(1.2)
    assert rho[64] == pytest.approx(0.8)


def test_fourier_sine_terms():
    grid = SphereGrid(1, 64)
    rho = build_initial_shape({"kind": "fourier", "r0": 2, "b": {1: 0.1}}, grid, EUC)
    np.testing.assert_allclose(rho, 2 * (1 + 0.1 * np.sin(grid.theta)))


def test_harmonic_terms(grid2):
    spec = {"kind": "harmonic", "r0": 1.0, "terms": [[1, 0, 0.2], {"l": 2, "m": 1, "eps": 0.1, "part": "sin"}]}
    rho = build_initial_shape(spec, grid2, spf.space_form("sphere"))
    x = grid2.points()
    np.testing.assert_allclose(rho, 1 + 0.2 * x[2] + 0.1 * x[1] * x[2], atol=1e-14)
    np.testing.assert_allclose(y_like(grid2, 1, 1), x[0], atol=1e-15)


def test_parse_shape_strings():
    assert parse_shape("sphere(2)") == {"kind": "sphere", "r": 2.0}
    assert parse_shape(" ellipsoid(1, 2, 3) ") == {"kind": "ellipsoid", "a": 1.0, "b": 2.0, "c": 3.0}
    assert parse_shape("random(1, 0.1, 4, 7)")["seed"] == 7.0
    for bad in ("cube(1)", "sphere(1", "sphere(x)", "sphere(1, 2)", 3):
        with pytest.raises(ConfigError):
            parse_shape(bad)
    with pytest.raises(ConfigError):
        parse_shape({"r": 1})


def test_rejections(grid2, grid1):
    with pytest.raises(ConfigError, match="Euclidean"):
        build_initial_shape("ellipsoid(1, 1, 2)", grid2, spf.space_form("hyperbolic"))
    with pytest.raises(ConfigError):
        build_initial_shape("ellipsoid(1, 1)", grid2, EUC)
    with pytest.raises(ConfigError):
        build_initial_shape({"kind": "fourier", "a": {1: 0.1}}, grid2, EUC)
    with pytest.raises(ConfigError):
        build_initial_shape({"kind": "harmonic", "terms": [[1, 0, 0.1]]}, grid1, EUC)
    with pytest.raises(ConfigError, match="missing"):
        build_initial_shape({"kind": "ellipsoid", "a": 1}, grid2, EUC)
    with pytest.raises(ConfigError):
        build_initial_shape({"kind": "blob"}, grid2, EUC)
    with pytest.raises(ConfigError):
        build_initial_shape({"kind": "harmonic", "terms": [[1, 2, 0.1]]}, grid2, EUC)


def test_out_of_domain_rejected_with_node(grid2):
    with pytest.raises(DomainError, match="node"):
        build_initial_shape({"kind": "harmonic", "r0": 1, "terms": [[1, 0, 1.5]]}, grid2, EUC)
    with pytest.raises(ValueError, match="node"):
        build_initial_shape("sphere(3.2)", grid2, spf.space_form("sphere"))


@pytest.mark.parametrize("dim", [1, 2])
@pytest.mark.parametrize("K", [0, 1, -1])
def test_random_shapes_admissible_and_seeded(dim, K):
    grid = SphereGrid.default(dim, 0.25)
    sf = spf.SpaceForm(K)
    a = build_initial_shape("random(1, 0.3, 4, 11)", grid, sf)
    b = build_initial_shape("random(1, 0.3, 4, 11)", grid, sf)
    c = build_initial_shape("random(1, 0.3, 4, 12)", grid, sf)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
    assert np.abs(a - 1).max() == pytest.approx(0.3)


def test_random_amplitude_clipped():
    grid = SphereGrid(2, 16, 32)
    rho = build_initial_shape("random(2.5, 5, 2, 1)", grid, spf.space_form("sphere"))
    assert rho.max() <= 0.95 * math.pi + 1e-12
    with pytest.raises(ConfigError, match="no room"):
        build_initial_shape("random(3, 0.1, 2, 1)", grid, spf.space_form("sphere"))
    rho = build_initial_shape("random(1, 5, 2, 1)", grid, EUC)
    assert rho.min() >= 0.1 - 1e-12


def test_random_uses_config_seed_when_omitted(grid2):
    a = build_initial_shape({"kind": "random", "amp": 0.2}, grid2, EUC, seed=3)
    b = build_initial_shape({"kind": "random", "amp": 0.2}, grid2, EUC, seed=4)
    assert not np.array_equal(a, b)
