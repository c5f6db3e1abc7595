import numpy as np
import pytest
import scipy.sparse as sp

from mhdfem.fespace import assemble_graph_matrices
from mhdfem.linalg import IterationLimitError, bicgstab, cg
from mhdfem.mesh import build_rect_mesh


def dense(a):
    return sp.csr_matrix(np.asarray(a, dtype=float))


@pytest.mark.parametrize("solver", [cg, bicgstab])
def test_identity_converges_immediately(solver, rng):
    b = rng.normal(size=12)
    x, iters = solver(sp.identity(12, format="csr"), b)
    assert iters <= 1
    assert np.allclose(x, b, atol=1e-13)


@pytest.mark.parametrize("solver", [cg, bicgstab])
def test_small_spd_system(solver):
    A = dense([[4.0, 1.0], [1.0, 3.0]])
    x, _ = solver(A, np.array([1.0, 2.0]))
    assert np.allclose(x, [1.0 / 11.0, 7.0 / 11.0], atol=1e-12)


def test_zero_rhs_returns_zero():
    A = dense([[4.0, 1.0], [1.0, 3.0]])
    for solver in (cg, bicgstab):
        x, iters = solver(A, np.zeros(2), x0=np.array([5.0, -3.0]))
        assert iters == 0
        assert np.all(x == 0.0)


def test_matvec_linearity(rng):
    A = sp.random(40, 40, density=0.2, random_state=7, format="csr")
    x = rng.normal(size=40)
    y = rng.normal(size=40)
    a, b = 1.7, -0.3
    assert np.allclose(A @ (a * x + b * y), a * (A @ x) + b * (A @ y),
                       atol=1e-13)


def test_mass_matrix_solve_unpreconditioned(rng):
    # the consistent mass of a ~3.7k-node mesh (7442 velocity dofs) is
    # uniformly well conditioned: residual 1e-12 at an h-independent
    # iteration count (37 on this mesh family)
    mesh = build_rect_mesh(61, 61)
    G = assemble_graph_matrices(mesh)
    b = rng.normal(size=G.n)
    x, iters = cg(G.mass_csr, b, rel_tol=1e-12)
    res = np.linalg.norm(b - G.mass_csr @ x) / np.linalg.norm(b)
    assert res <= 1e-12
    assert iters <= 40

    mesh2 = build_rect_mesh(122, 122)
    G2 = assemble_graph_matrices(mesh2)
    b2 = rng.normal(size=G2.n)
    _, iters2 = cg(G2.mass_csr, b2, rel_tol=1e-12)
    assert iters2 <= iters + 2, "iteration count must not grow under refinement"

    x, _ = bicgstab(G.mass_csr, b, rel_tol=1e-12)
    res = np.linalg.norm(b - G.mass_csr @ x) / np.linalg.norm(b)
    assert res <= 1e-12


def test_iteration_limit_raises():
    mesh = build_rect_mesh(12, 12)
    G = assemble_graph_matrices(mesh)
    rng = np.random.default_rng(0)
    b = rng.normal(size=G.n)
    with pytest.raises(IterationLimitError):
        cg(G.mass_csr, b, rel_tol=1e-14, max_iter=2)
    with pytest.raises(IterationLimitError):
        bicgstab(G.mass_csr, b, rel_tol=1e-14, max_iter=1)
