import functools

import numpy as np
import pytest

from curvflow.flow import FlowConfig, run
from curvflow.sphere_grid import SphereGrid

SPACE_FORMS = ("euclidean", "sphere", "hyperbolic")
ELLIPSOID = {"kind": "ellipsoid", "a": 1.0, "b": 1.0, "c": 1.5}
NONCONVEX = {"kind": "harmonic", "r0": 1.0, "terms": [[2, 0, -0.5]]}

# criterion lines collected by the acceptance module, echoed at the end of the run
ACCEPTANCE_LINES: list[str] = []


def perturbed(dim, eps=0.2):
    if dim == 1:
        return {"kind": "fourier", "r0": 1.0, "a": {"1": eps}}
    return {"kind": "harmonic", "r0": 1.0, "terms": [[1, 0, eps]]}


# Long runs are shared between test modules; lru_cache keeps one copy per process.


@functools.lru_cache(maxsize=None)
def ellipsoid_run(scale: float):
    """Ellipsoid (1, 1, 1.5) flowed to convergence; cfl halves with each grid doubling."""
    n_theta, n_phi = int(96 * scale), int(192 * scale)
    cfg = FlowConfig(space_form="euclidean", dim=2, n_theta=n_theta, n_phi=n_phi, initial_shape=ELLIPSOID,
                     t_end=40.0, cfl_factor=min(0.2, 0.1 / scale), record_every=20)
    return run(cfg)


@functools.lru_cache(maxsize=None)
def perturbed_run(K: str, dim: int):
    cfg = FlowConfig(space_form=K, dim=dim, initial_shape=perturbed(dim), t_end=40.0,
                     record_every=50 if dim == 2 else 200)
    return run(cfg)


@functools.lru_cache(maxsize=None)
def nonconvex_run():
    cfg = FlowConfig(space_form="euclidean", dim=2, n_theta=48, n_phi=96, initial_shape=NONCONVEX,
                     t_end=0.02, record_every=10)
    return run(cfg)


@functools.lru_cache(maxsize=None)
def dual_pair(K: str, dim: int, scale: float, flip: bool = False):
    grid = {"m": int(256 * scale)} if dim == 1 else {"n_theta": int(96 * scale), "n_phi": int(192 * scale)}
    common = dict(space_form=K, dim=dim, initial_shape=perturbed(dim, 0.1), t_end=0.1, grad_tol=1e-300, **grid)
    a = run(FlowConfig(formulation="direct", **common))
    b = run(FlowConfig(formulation="divergence", **common), flip_lower_order=flip)
    return a, b


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def grid2():
    return SphereGrid(2, 48, 96)


@pytest.fixture(scope="session")
def grid1():
    return SphereGrid(1, 128)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
