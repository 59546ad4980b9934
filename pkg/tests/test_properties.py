"""Property tests over randomized admissible surfaces."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from curvflow import flow
from curvflow import spaceform as spf
from curvflow.geometry import compute_geometry, minkowski_terms
from curvflow.shapes import build_initial_shape
from curvflow.sphere_grid import SphereGrid

GRID2 = SphereGrid(2, 48, 96)
GRID1 = SphereGrid(1, 128)

curvatures = st.sampled_from([0, 1, -1])
seeds = st.integers(0, 10_000)
amps = st.floats(0.02, 0.2)


def random_surface(K, dim, seed, amp, r0=1.0):
    grid = GRID2 if dim == 2 else GRID1
    sf = spf.SpaceForm(K)
    return sf, grid, build_initial_shape({"kind": "random", "r0": r0, "amp": amp, "l_max": 3, "seed": seed}, grid, sf)


@settings(max_examples=25, deadline=None)
@given(K=curvatures, dim=st.sampled_from([1, 2]), seed=seeds, amp=amps)
def test_minkowski_identities_hold_on_random_surfaces(K, dim, seed, amp):
    sf, grid, rho = random_surface(K, dim, seed, amp)
    geom = compute_geometry(sf, grid, rho)
    for k in range(dim):
        lhs, rhs = minkowski_terms(geom, k)
        assert abs(lhs - rhs) <= 1e-2 * abs(rhs)


@settings(max_examples=25, deadline=None)
@given(K=curvatures, dim=st.sampled_from([1, 2]), seed=seeds, amp=amps)
def test_flux_form_conserves_exactly(K, dim, seed, amp):
    sf, grid, rho = random_surface(K, dim, seed, amp)
    assert abs(grid.integrate(flow.flux_divergence(sf, grid, rho))) < 1e-11


@settings(max_examples=25, deadline=None)
@given(K=curvatures, dim=st.sampled_from([1, 2]), r=st.floats(0.05, 3.0))
def test_every_geodesic_sphere_is_stationary(K, dim, r):
    sf = spf.SpaceForm(K)
    grid = GRID2 if dim == 2 else GRID1
    rho = np.full(grid.shape, r)
    assert np.abs(flow.direct_rate(sf, grid, rho)).max() < 1e-11 * max(1.0, float(spf.phi_prime(sf, r)))


@settings(max_examples=15, deadline=None)
@given(K=curvatures, seed=seeds, amp=amps)
def test_rates_agree_and_sum_is_volume_preserving(K, seed, amp):
    sf, grid, rho = random_surface(K, 2, seed, amp)
    a = flow.direct_rate(sf, grid, rho)
    b = flow.divergence_rate(sf, grid, rho)
    scale = np.abs(a).max() + 1e-3
    assert np.abs(a - b).max() <= 0.05 * scale
    # dV/dt = int phi^n rho_t over S^n vanishes up to discretization error
    ph = spf.phi(sf, rho)
    dV = grid.integrate(ph**2 * a)
    assert abs(dV) <= 1e-2 * grid.integrate(ph**2 * np.abs(a)) + 1e-12


@settings(max_examples=15, deadline=None)
@given(K=curvatures, seed=seeds, amp=amps)
def test_short_flow_keeps_star_shape_and_C0_bounds(K, seed, amp):
    sf = spf.SpaceForm(K)
    grid = SphereGrid(2, 16, 32)
    rho = build_initial_shape({"kind": "random", "r0": 1.0, "amp": amp, "l_max": 2, "seed": seed}, grid, sf)
    res = flow.run(flow.FlowConfig(space_form=sf.name, dim=2, n_theta=16, n_phi=32, t_end=0.05), rho)
    assert res.verdict in ("t_end", "converged")
    tol = 10 * grid.h**2
    assert res.final.rho.min() >= rho.min() - tol
    assert res.final.rho.max() <= rho.max() + tol
    assert res.series("A")[-1] <= res.series("A")[0] * (1 + 100 * grid.h**2)


@settings(max_examples=30, deadline=None)
@given(K=curvatures, rho=st.floats(0.01, 3.0))
def test_pythagorean_identity_property(K, rho):
    sf = spf.SpaceForm(K)
    assert float(spf.phi_prime(sf, rho)) ** 2 + K * float(spf.phi(sf, rho)) ** 2 == pytest.approx(1.0, abs=1e-12)
