import numpy as np
import pytest

from plap.functional import Nonlinearity, RunParameters
from plap.mesh import build_mesh
from plap.optimizer import SolverConfig, solve_three


def reference_config() -> SolverConfig:
    return SolverConfig(
        params=RunParameters(p=2.0, dim=3, lam=50.0, eps=1e-8),
        nonlin=Nonlinearity(family="signed", q=4.0, r=4.0),
        cells_per_side=8,
        grad_tol=1e-7,
        seed=0,
    )


def coarse_config() -> SolverConfig:
    # small 2d run with p < 2, cheap enough to repeat inside tests
    return SolverConfig(
        params=RunParameters(p=1.5, dim=2, lam=20.0, eps=1e-8),
        nonlin=Nonlinearity(family="signed", q=3.0, r=3.0),
        cells_per_side=6,
        grad_tol=1e-6,
        seed=0,
    )


@pytest.fixture(scope="session")
def reference_run():
    config = reference_config()
    mesh = build_mesh(config.params.dim, config.cells_per_side)
    triple = solve_three(config, mesh)
    return config, mesh, triple


@pytest.fixture(scope="session")
def coarse_run():
    config = coarse_config()
    mesh = build_mesh(config.params.dim, config.cells_per_side)
    triple = solve_three(config, mesh)
    return config, mesh, triple


def interior_bump(mesh, seed=None):
    """Positive product-of-sines bump, optionally jittered, zero on the
    boundary."""
    bump = np.prod(np.sin(np.pi * mesh.vertices), axis=1)
    if seed is not None:
        rng = np.random.default_rng(seed)
        bump = bump * (1.0 + 0.1 * rng.random(mesh.n_vertices))
    bump[mesh.boundary] = 0.0
    return bump
