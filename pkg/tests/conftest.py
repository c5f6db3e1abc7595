from __future__ import annotations

import numpy as np
import pytest

from mhdfem.eos import GasParams
from mhdfem.euler import conserved_from_primitive
from mhdfem.fespace import assemble_graph_matrices, build_p1_space
from mhdfem.mesh import build_rect_mesh


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def params14():
    return GasParams(gamma=1.4)


@pytest.fixture
def periodic_setup(params14):
    """Small doubly periodic mesh with P1 space and graph matrices."""
    mesh = build_rect_mesh(6, 6, (0.0, 1.0, 0.0, 1.0),
                           periodic_x=True, periodic_y=True)
    space = build_p1_space(mesh)
    graph = assemble_graph_matrices(mesh, space)
    return mesh, space, graph


def random_admissible_states(rng, n, gamma=1.4, vmax=3.0):
    rho = np.exp(rng.uniform(-2.0, 2.0, n))
    vx = rng.uniform(-vmax, vmax, n)
    vy = rng.uniform(-vmax, vmax, n)
    p = np.exp(rng.uniform(-3.0, 2.0, n))
    return conserved_from_primitive(rho, vx, vy, p, GasParams(gamma=gamma))
