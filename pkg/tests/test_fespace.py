import numpy as np
import pytest

from mhdfem.fespace import (InterpolationError, assemble_curl_mass,
                            assemble_graph_matrices, build_curl_space,
                            build_p1_space, build_p2_space, evaluate_p1,
                            gradient_embedding, interpolate_curl,
                            interpolate_scalar, p1_values)
from mhdfem.mesh import build_rect_mesh, mesh_from_arrays
from mhdfem.quadrature import triangle_rule

BARY = np.array([[1 / 3, 1 / 3, 1 / 3], [0.61, 0.23, 0.16], [0.05, 0.15, 0.8]])


# ----------------------------------------------------------------------
# scalar space
# ----------------------------------------------------------------------

def test_p1_partition_of_unity():
    mesh = build_rect_mesh(5, 4, (0, 2, 0, 1), periodic_x=True)
    space = build_p1_space(mesh)
    ones = np.ones(space.ndofs)
    vals = evaluate_p1(space, ones, p1_values(triangle_rule(4)[0]))
    assert np.abs(vals - 1.0).max() <= 1e-13


def test_p1_nodal_interpolation():
    mesh = build_rect_mesh(4, 4)
    space = build_p1_space(mesh)
    vals = interpolate_scalar(lambda p: np.ones(len(p)), space)
    assert np.all(vals == 1.0)
    lin = interpolate_scalar(lambda p: 2 * p[:, 0] - p[:, 1], space)
    # linear functions are reproduced exactly everywhere
    q = evaluate_p1(space, lin, p1_values(BARY))
    pts = mesh.quad_points(BARY)
    assert np.abs(q - (2 * pts[..., 0] - pts[..., 1])).max() <= 1e-13


def test_interpolation_rejects_non_finite():
    mesh = build_rect_mesh(3, 3)
    space = build_p1_space(mesh)
    with pytest.raises(InterpolationError), np.errstate(divide="ignore"):
        interpolate_scalar(lambda p: 1.0 / p[:, 0], space)  # inf at x=0
    W = build_curl_space(mesh)
    with pytest.raises(InterpolationError):
        interpolate_curl(lambda p: np.full((len(p), 2), np.nan), W)


# ----------------------------------------------------------------------
# graph matrices
# ----------------------------------------------------------------------

def test_graph_lumped_mass_sums_to_domain_area():
    mesh = build_rect_mesh(5, 7, (0, 1, 0, 1))
    G = assemble_graph_matrices(mesh)
    assert abs(G.m.sum() - 1.0) <= 1e-13


def test_graph_partition_of_unity_row_sums():
    mesh = build_rect_mesh(6, 5, (0, 3, 0, 2), periodic_y=True)
    G = assemble_graph_matrices(mesh)
    assert np.abs(G.row_sum(G.mass_data) - G.m).max() <= 1e-13 * G.m.max()
    assert np.abs(G.row_sum(G.cx_data)).max() <= 1e-13
    assert np.abs(G.row_sum(G.cy_data)).max() <= 1e-13


def test_graph_skew_symmetry_periodic():
    mesh = build_rect_mesh(5, 6, periodic_x=True, periodic_y=True)
    G = assemble_graph_matrices(mesh)
    assert np.abs(G.cx_data + G.cx_data[G.transpose_perm]).max() <= 1e-15
    assert np.abs(G.cy_data + G.cy_data[G.transpose_perm]).max() <= 1e-15


def test_reference_triangle_consistent_mass_diagonal():
    mesh = mesh_from_arrays([[0, 0], [1, 0], [0, 1]], [[0, 1, 2]])
    G = assemble_graph_matrices(mesh)
    diag = G.csr_of(G.mass_data).diagonal()
    assert np.allclose(diag, 1.0 / 12.0, atol=1e-15)


# ----------------------------------------------------------------------
# curl-conforming space
# ----------------------------------------------------------------------

def test_bdm_reproduces_constants_and_linears():
    mesh = build_rect_mesh(3, 3, (0, 1.5, 0, 1))
    W = build_curl_space(mesh)
    const = interpolate_curl(lambda p: np.tile([1.0, 0.0], (len(p), 1)), W)
    vals = W.evaluate_at_bary(const, BARY)
    assert np.abs(vals - np.array([1.0, 0.0])).max() <= 1e-13

    def lin(p):
        return np.stack([1 + 2 * p[:, 0] + 3 * p[:, 1],
                         -0.5 * p[:, 0] + 0.25 * p[:, 1]], axis=1)

    c = interpolate_curl(lin, W)
    vals = W.evaluate_at_bary(c, BARY)
    pts = mesh.quad_points(BARY)
    assert np.abs(vals - lin(pts.reshape(-1, 2)).reshape(vals.shape)).max() <= 1e-13
    # curl of the linear field: d(F2)/dx - d(F1)/dy = -0.5 - 3
    assert np.abs(W.evaluate_curl(c) + 3.5).max() <= 1e-12


@pytest.mark.parametrize("periodic", [(False, False), (True, True)])
def test_bdm_tangential_continuity(periodic, rng):
    mesh = build_rect_mesh(3, 4, (0, 2, 0, 1), *periodic)
    W = build_curl_space(mesh)
    coeffs = rng.normal(size=W.ndofs)
    s = np.linspace(0.08, 0.92, 6)
    loc_pairs = [(0, 1), (1, 2), (2, 0)]
    worst = 0.0
    for e in range(mesh.n_edges):
        t1 = mesh.edge_tris[e, 1]
        if t1 < 0:
            continue
        traces = []
        for slot in (0, 1):
            t = mesh.edge_tris[e, slot]
            loc = mesh.edge_local[e, slot]
            sign = mesh.tri_edge_signs[t, loc]
            sloc = s if sign == 1 else 1.0 - s
            lam = np.zeros((len(s), 3))
            a, b = loc_pairs[loc]
            lam[:, a] = 1.0 - sloc
            lam[:, b] = sloc
            v = W.evaluate_at_bary(coeffs, lam)[t]
            pv = mesh.vertices[mesh.triangles[t]]
            tang = (pv[b] - pv[a]) * sign
            traces.append(v @ tang)
        worst = max(worst, np.abs(traces[0] - traces[1]).max())
    assert worst <= 1e-12


def test_curl_mass_matrix_properties():
    mesh = build_rect_mesh(2, 2)
    W = build_curl_space(mesh)
    M = assemble_curl_mass(mesh, W)
    assert np.abs((M - M.T).toarray()).max() <= 1e-14
    assert np.linalg.eigvalsh(M.toarray()).min() > 0.0
    c = interpolate_curl(lambda p: np.tile([1.0, 0.0], (len(p), 1)), W)
    assert c @ (M @ c) == pytest.approx(1.0, rel=1e-13)


# ----------------------------------------------------------------------
# potential space and gradient embedding
# ----------------------------------------------------------------------

def _p2_coeffs(mesh, space, f):
    vals = np.zeros(space.ndofs)
    vals[:space.n_vertex_dofs] = f(mesh.vertices[mesh.class_rep])
    mids = 0.5 * (mesh.vertices[mesh.edges[:, 0]] + mesh.vertices[mesh.edges[:, 1]])
    vals[space.n_vertex_dofs:] = f(mids)
    return vals


def test_gradient_embedding_constant_is_zero():
    mesh = build_rect_mesh(4, 3)
    W = build_curl_space(mesh)
    P = build_p2_space(mesh)
    G = gradient_embedding(P, W)
    coeff = G @ np.ones(P.ndofs)
    assert np.abs(coeff).max() <= 1e-14


def test_gradient_embedding_linear_field():
    mesh = build_rect_mesh(4, 3, (0, 2, 0, 1))
    W = build_curl_space(mesh)
    P = build_p2_space(mesh)
    G = gradient_embedding(P, W)
    om = _p2_coeffs(mesh, P, lambda p: p[:, 0])
    vals = W.evaluate_at_bary(G @ om, BARY)
    assert np.abs(vals - np.array([1.0, 0.0])).max() <= 1e-13


def test_gradient_embedding_matches_p2_gradient_pointwise(rng):
    mesh = build_rect_mesh(3, 5, (0, 1, 0, 2), periodic_x=True, periodic_y=True)
    W = build_curl_space(mesh)
    P = build_p2_space(mesh)
    G = gradient_embedding(P, W)
    om = rng.normal(size=P.ndofs)
    grads = np.einsum("tqkc,tk->tqc", P.basis_gradients(BARY), om[P.cell_dofs])
    emb = W.evaluate_at_bary(G @ om, BARY)
    scale = np.abs(grads).max()
    assert np.abs(grads - emb).max() <= 1e-12 * max(scale, 1.0)
    # curl(grad) vanishes elementwise
    assert np.abs(W.evaluate_curl(G @ om)).max() <= 1e-12 * max(scale, 1.0)
