"""Finite element spaces: P1 Lagrange, curl-conforming BDM1, P2 Lagrange.

The scalar space collocates one degree of freedom per periodic vertex class.
The magnetic space carries two tangential-moment degrees of freedom per edge
entity (moments of psi . t against {1, 2s-1} along the entity direction);
these moments are invariant under the covariant (curl-conforming) Piola
transform, so conformity reduces to bookkeeping: a per-element sign on the
constant moment when the local edge runs against the entity direction.
Gradients of the P2 space embed exactly into the BDM1 space, which is what
makes the weak-divergence fingerprint of the induction update conserved.

Graph matrices (lumped mass m_i, consistent mass m_ij, divergence vectors
c_ij) are stored on a single shared CSR pattern together with the transpose
permutation, which the hyperbolic solver relies on for symmetric viscosity
scatter.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .mesh import Mesh
from .quadrature import interval_rule, triangle_rule

# Reference P1 barycentric gradients on the unit simplex.
_GRAD_HAT = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])

# Reference edges (local vertex pairs) in the order used for tri_edges.
_LOCAL_EDGES = ((0, 1), (1, 2), (2, 0))
_REF_VERTS = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


class InterpolationError(ValueError):
    """Sampled field value is not finite."""


# ----------------------------------------------------------------------
# scalar P1 space
# ----------------------------------------------------------------------

@dataclass
class ScalarSpaceP1:
    mesh: Mesh
    ndofs: int
    node_coords: np.ndarray     # (ndofs, 2) coordinates of class representatives
    cell_dofs: np.ndarray       # (nt, 3) class index per triangle corner


def build_p1_space(mesh: Mesh) -> ScalarSpaceP1:
    return ScalarSpaceP1(
        mesh=mesh,
        ndofs=mesh.n_vertex_classes,
        node_coords=mesh.vertices[mesh.class_rep],
        cell_dofs=mesh.vertex_class[mesh.triangles],
    )


def p1_values(bary: np.ndarray) -> np.ndarray:
    """P1 shape values at barycentric points: identical to the coordinates."""
    return np.asarray(bary, dtype=float)


def interpolate_scalar(f, space: ScalarSpaceP1) -> np.ndarray:
    """Nodal interpolation: f takes points (n, 2) and returns (n,) values."""
    vals = np.asarray(f(space.node_coords), dtype=float)
    if vals.shape != (space.ndofs,):
        raise InterpolationError(f"expected ({space.ndofs},) values, got {vals.shape}")
    if not np.all(np.isfinite(vals)):
        raise InterpolationError("non-finite sample in scalar interpolation")
    return vals


def evaluate_p1(space: ScalarSpaceP1, nodal: np.ndarray, bary: np.ndarray) -> np.ndarray:
    """Evaluate nodal data at barycentric points; (nt, nq) or (nt, nq, ncomp)."""
    local = nodal[space.cell_dofs]                      # (nt, 3[, c])
    if local.ndim == 2:
        return np.einsum("qk,tk->tq", bary, local)
    return np.einsum("qk,tkc->tqc", bary, local)


# ----------------------------------------------------------------------
# graph matrices on the P1 stencil
# ----------------------------------------------------------------------

@dataclass
class GraphMatrices:
    """Sparse node-graph data of the collocated P1 discretization.

    All per-entry arrays (mass, cx, cy, cnorm, ...) share one CSR pattern
    (indptr, indices) that includes the diagonal.  transpose_perm maps entry
    (i, j) to the storage slot of (j, i).
    """

    space: ScalarSpaceP1
    m: np.ndarray               # (n,) lumped mass
    indptr: np.ndarray
    indices: np.ndarray
    mass_data: np.ndarray       # consistent mass entries
    cx_data: np.ndarray
    cy_data: np.ndarray
    transpose_perm: np.ndarray
    row_of: np.ndarray          # (nnz,) row index of each entry
    cnorm: np.ndarray           # (nnz,) |c_ij|
    nx: np.ndarray              # (nnz,) c_ij / |c_ij| (0 where |c_ij| = 0)
    ny: np.ndarray
    offdiag: np.ndarray         # (nnz,) bool, j != i
    stencil_size: np.ndarray    # (n,) card I(i), diagonal included
    domain_area: float
    mass_csr: sp.csr_matrix = field(repr=False, default=None)
    Cx: sp.csr_matrix = field(repr=False, default=None)
    Cy: sp.csr_matrix = field(repr=False, default=None)

    @property
    def n(self) -> int:
        return len(self.m)

    def csr_of(self, data: np.ndarray) -> sp.csr_matrix:
        return sp.csr_matrix((data, self.indices, self.indptr), shape=(self.n, self.n))

    def row_sum(self, data: np.ndarray) -> np.ndarray:
        return np.add.reduceat(data, self.indptr[:-1])


def assemble_graph_matrices(mesh: Mesh, space: ScalarSpaceP1 | None = None) -> GraphMatrices:
    if space is None:
        space = build_p1_space(mesh)
    rm = mesh.ref_map()
    area = 0.5 * rm.det                                    # (nt,)
    grads = np.einsum("tab,kb->tka", rm.inv_t, _GRAD_HAT)  # (nt, 3, 2)
    n = space.ndofs
    nt = mesh.n_triangles
    dofs = space.cell_dofs

    # Raw 3x3 blocks per triangle.
    li, lj = np.meshgrid(np.arange(3), np.arange(3), indexing="ij")
    rows = dofs[:, li].reshape(-1)
    cols = dofs[:, lj].reshape(-1)
    mass_blk = (area[:, None, None] / 12.0) * (1.0 + np.eye(3))
    c_blk = (area[:, None, None, None] / 3.0) * np.broadcast_to(
        grads[:, None, :, :], (nt, 3, 3, 2)
    )

    key = rows.astype(np.int64) * n + cols
    uniq, slots = np.unique(key, return_inverse=True)
    nnz = len(uniq)
    urow = (uniq // n).astype(np.int64)
    ucol = (uniq % n).astype(np.int64)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, urow + 1, 1)
    indptr = np.cumsum(indptr)
    indices = ucol

    mass_data = np.bincount(slots, weights=mass_blk.reshape(-1), minlength=nnz)
    cx_data = np.bincount(slots, weights=c_blk[..., 0].reshape(-1), minlength=nnz)
    cy_data = np.bincount(slots, weights=c_blk[..., 1].reshape(-1), minlength=nnz)

    tkey = ucol * np.int64(n) + urow
    transpose_perm = np.searchsorted(uniq, tkey)
    if not np.array_equal(uniq[transpose_perm], tkey):
        raise RuntimeError("graph pattern is not structurally symmetric")

    m = np.bincount(dofs.reshape(-1), weights=np.repeat(area / 3.0, 3), minlength=n)

    cnorm = np.hypot(cx_data, cy_data)
    safe = np.where(cnorm > 0.0, cnorm, 1.0)
    g = GraphMatrices(
        space=space,
        m=m,
        indptr=indptr,
        indices=indices,
        mass_data=mass_data,
        cx_data=cx_data,
        cy_data=cy_data,
        transpose_perm=transpose_perm,
        row_of=np.repeat(np.arange(n), np.diff(indptr)),
        cnorm=cnorm,
        nx=cx_data / safe,
        ny=cy_data / safe,
        offdiag=urow != ucol,
        stencil_size=np.diff(indptr),
        domain_area=float(m.sum()),
    )
    g.mass_csr = g.csr_of(mass_data)
    g.Cx = g.csr_of(cx_data)
    g.Cy = g.csr_of(cy_data)
    return g


# ----------------------------------------------------------------------
# curl-conforming BDM1 space
# ----------------------------------------------------------------------

# Weight of the linear edge moment.  sqrt(6) balances the diagonal of the
# element Gram matrix between the two moment families, which roughly halves
# the condition number the unpreconditioned Krylov solves see.
_Q1_SCALE = np.sqrt(6.0)


def _reference_bdm_basis():
    """Dualize [P1]^2 monomials against the six reference edge moments.

    Returns (coeff (6, 6), curl (6,)): column j of coeff holds the monomial
    coefficients of basis function j in the order
    [(1,0), (x,0), (y,0), (0,1), (0,x), (0,y)]; curl[j] is its constant curl.
    """
    s, w = interval_rule(3)

    def mono(pts):
        x, y = pts[:, 0], pts[:, 1]
        one = np.ones_like(x)
        zero = np.zeros_like(x)
        return np.array(
            [
                [one, zero], [x, zero], [y, zero],
                [zero, one], [zero, x], [zero, y],
            ]
        ).transpose(2, 0, 1)                            # (npts, 6, 2)

    V = np.zeros((6, 6))
    for k, (a_loc, b_loc) in enumerate(_LOCAL_EDGES):
        a, b = _REF_VERTS[a_loc], _REF_VERTS[b_loc]
        pts = a[None, :] + s[:, None] * (b - a)[None, :]
        vals = mono(pts)                                # (ns, 6, 2)
        tang = vals @ (b - a)                           # (ns, 6)
        V[2 * k, :] = w @ tang
        V[2 * k + 1, :] = _Q1_SCALE * ((w * (2.0 * s - 1.0)) @ tang)
    coeff = np.linalg.inv(V)
    curl = coeff[4, :] - coeff[2, :]
    return coeff, curl


_BDM_COEFF, _BDM_CURL_REF = _reference_bdm_basis()


def _bdm_ref_values(bary: np.ndarray) -> np.ndarray:
    """Reference basis values at barycentric points, shape (nq, 6, 2)."""
    pts = np.asarray(bary, dtype=float)[:, 1:]          # (x, y) = (lam1, lam2)
    x, y = pts[:, 0], pts[:, 1]
    one = np.ones_like(x)
    zero = np.zeros_like(x)
    mono = np.array(
        [[one, zero], [x, zero], [y, zero], [zero, one], [zero, x], [zero, y]]
    ).transpose(2, 0, 1)                                # (nq, 6, 2)
    return np.einsum("qmc,mj->qjc", mono, _BDM_COEFF)


@dataclass
class CurlSpaceBDM1:
    mesh: Mesh
    ndofs: int
    cell_dofs: np.ndarray       # (nt, 6) global dof ids
    cell_signs: np.ndarray      # (nt, 6) +-1, -1 only on reversed constant moments
    edge_len: np.ndarray        # (ne,) entity lengths (moment normalization)
    cell_scale: np.ndarray      # (nt, 6) sign * entity length
    _tables: dict = field(default_factory=dict, repr=False)

    def tables(self, degree: int = 4):
        """(psi (nt, nq, 6, 2), curl (nt, 6), w_det (nt, nq), bary) with signs
        and moment normalization folded in; cached per quadrature degree."""
        if degree not in self._tables:
            bary, w = triangle_rule(degree)
            rm = self.mesh.ref_map()
            ref = _bdm_ref_values(bary)                 # (nq, 6, 2)
            psi = np.einsum("tab,qjb->tqja", rm.inv_t, ref)
            psi *= self.cell_scale[:, None, :, None]
            curl = self.cell_scale * (_BDM_CURL_REF[None, :] / rm.det[:, None])
            w_det = w[None, :] * (0.5 * rm.det)[:, None]   # weights sum to area
            self._tables[degree] = (psi, curl, w_det, bary)
        return self._tables[degree]

    def evaluate(self, coeffs: np.ndarray, degree: int = 4) -> np.ndarray:
        """Field values at quadrature points, (nt, nq, 2)."""
        psi, _, _, _ = self.tables(degree)
        return np.einsum("tqjc,tj->tqc", psi, coeffs[self.cell_dofs])

    def evaluate_curl(self, coeffs: np.ndarray) -> np.ndarray:
        """Elementwise (constant) scalar curl, (nt,)."""
        _, curl, _, _ = self.tables(4)
        return np.einsum("tj,tj->t", curl, coeffs[self.cell_dofs])

    def evaluate_at_bary(self, coeffs: np.ndarray, bary: np.ndarray) -> np.ndarray:
        """Field values at arbitrary barycentric points, (nt, npts, 2)."""
        rm = self.mesh.ref_map()
        ref = _bdm_ref_values(np.asarray(bary))
        psi = np.einsum("tab,qjb->tqja", rm.inv_t, ref)
        psi *= self.cell_scale[:, None, :, None]
        return np.einsum("tqjc,tj->tqc", psi, coeffs[self.cell_dofs])


def build_curl_space(mesh: Mesh) -> CurlSpaceBDM1:
    """Two dofs per edge entity: mean tangential component, and the tangential
    moment against 2s-1, both along the entity direction.

    Normalizing the moments by the edge length keeps basis functions O(1) and
    all mass-like blocks scaling as h^2, matching the lumped velocity block of
    the source system (the stacked Newton matrix stays uniformly conditioned).
    """
    nt = mesh.n_triangles
    d = mesh.vertices[mesh.edges[:, 1]] - mesh.vertices[mesh.edges[:, 0]]
    edge_len = np.hypot(d[:, 0], d[:, 1])
    cell_dofs = np.empty((nt, 6), dtype=np.int64)
    cell_signs = np.ones((nt, 6), dtype=np.int64)
    for k in range(3):
        e = mesh.tri_edges[:, k]
        cell_dofs[:, 2 * k] = 2 * e
        cell_dofs[:, 2 * k + 1] = 2 * e + 1
        cell_signs[:, 2 * k] = mesh.tri_edge_signs[:, k]
    cell_scale = cell_signs * edge_len[cell_dofs // 2]
    return CurlSpaceBDM1(mesh=mesh, ndofs=2 * mesh.n_edges,
                         cell_dofs=cell_dofs, cell_signs=cell_signs,
                         edge_len=edge_len, cell_scale=cell_scale)


def interpolate_curl(F, space: CurlSpaceBDM1) -> np.ndarray:
    """Edge-moment interpolation: F takes points (n, 2) and returns (n, 2)."""
    mesh = space.mesh
    a = mesh.vertices[mesh.edges[:, 0]]                 # (ne, 2)
    b = mesh.vertices[mesh.edges[:, 1]]
    s, w = interval_rule(4)
    coeffs = np.zeros(space.ndofs)
    tang = b - a
    pts = a[:, None, :] + s[None, :, None] * tang[:, None, :]
    vals = np.asarray(F(pts.reshape(-1, 2)), dtype=float).reshape(len(a), len(s), 2)
    if not np.all(np.isfinite(vals)):
        raise InterpolationError("non-finite sample in edge-moment interpolation")
    t_dot = np.einsum("esc,ec->es", vals, tang) / space.edge_len[:, None]
    coeffs[0::2] = t_dot @ w
    coeffs[1::2] = _Q1_SCALE * (t_dot @ (w * (2.0 * s - 1.0)))
    return coeffs


def assemble_curl_mass(mesh: Mesh, space: CurlSpaceBDM1) -> sp.csr_matrix:
    """L2 Gram matrix of the magnetic basis (symmetric positive definite)."""
    psi, _, w_det, _ = space.tables(4)
    blocks = np.einsum("tq,tqac,tqbc->tab", w_det, psi, psi)
    la, lb = np.meshgrid(np.arange(6), np.arange(6), indexing="ij")
    rows = space.cell_dofs[:, la].reshape(-1)
    cols = space.cell_dofs[:, lb].reshape(-1)
    m = sp.coo_matrix((blocks.reshape(-1), (rows, cols)),
                      shape=(space.ndofs, space.ndofs)).tocsr()
    m.sum_duplicates()
    m.sort_indices()
    return m


# ----------------------------------------------------------------------
# P2 potential space
# ----------------------------------------------------------------------

@dataclass
class PotentialSpaceP2:
    mesh: Mesh
    ndofs: int
    cell_dofs: np.ndarray       # (nt, 6): 3 vertex classes + 3 edge entities
    n_vertex_dofs: int

    def basis_values(self, bary: np.ndarray) -> np.ndarray:
        lam = np.asarray(bary, dtype=float)
        l0, l1, l2 = lam[:, 0], lam[:, 1], lam[:, 2]
        return np.stack(
            [
                l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1),
                4 * l0 * l1, 4 * l1 * l2, 4 * l2 * l0,
            ],
            axis=1,
        )                                               # (nq, 6)

    def basis_gradients(self, bary: np.ndarray) -> np.ndarray:
        """Physical gradients at barycentric points, (nt, nq, 6, 2)."""
        lam = np.asarray(bary, dtype=float)
        l0, l1, l2 = lam[:, 0], lam[:, 1], lam[:, 2]
        rm = self.mesh.ref_map()
        glam = np.einsum("tab,kb->tka", rm.inv_t, _GRAD_HAT)   # (nt, 3, 2)
        g0, g1, g2 = glam[:, 0], glam[:, 1], glam[:, 2]

        def outer(coef, g):
            return coef[None, :, None] * g[:, None, :]

        grads = np.empty((self.mesh.n_triangles, len(lam), 6, 2))
        grads[:, :, 0] = outer(4 * l0 - 1, g0)
        grads[:, :, 1] = outer(4 * l1 - 1, g1)
        grads[:, :, 2] = outer(4 * l2 - 1, g2)
        grads[:, :, 3] = 4 * (outer(l1, g0) + outer(l0, g1))
        grads[:, :, 4] = 4 * (outer(l2, g1) + outer(l1, g2))
        grads[:, :, 5] = 4 * (outer(l0, g2) + outer(l2, g0))
        return grads


def build_p2_space(mesh: Mesh) -> PotentialSpaceP2:
    nc = mesh.n_vertex_classes
    cell_dofs = np.empty((mesh.n_triangles, 6), dtype=np.int64)
    cell_dofs[:, :3] = mesh.vertex_class[mesh.triangles]
    cell_dofs[:, 3:] = nc + mesh.tri_edges
    return PotentialSpaceP2(mesh=mesh, ndofs=nc + mesh.n_edges,
                            cell_dofs=cell_dofs, n_vertex_dofs=nc)


def gradient_embedding(pot: PotentialSpaceP2, W: CurlSpaceBDM1) -> sp.csr_matrix:
    """Sparse G with (G w)[BDM dofs] = coefficients of grad(omega_h).

    Exact: the tangential trace of grad(omega) along an edge is linear in the
    arc parameter and depends only on the two endpoint values and the
    midpoint value, so each edge row has three rational entries.
    """
    if pot.mesh is not W.mesh:
        raise ValueError("spaces must share a mesh")
    mesh = pot.mesh
    ne = mesh.n_edges
    nc = pot.n_vertex_dofs
    va = mesh.vertex_class[mesh.edges[:, 0]]
    vb = mesh.vertex_class[mesh.edges[:, 1]]
    mid = nc + np.arange(ne)
    e = np.arange(ne)
    inv_len = 1.0 / W.edge_len

    rows = np.concatenate([2 * e, 2 * e, 2 * e + 1, 2 * e + 1, 2 * e + 1])
    cols = np.concatenate([vb, va, va, vb, mid])
    q1 = _Q1_SCALE
    vals = np.concatenate(
        [inv_len, -inv_len, q1 * (2.0 / 3.0) * inv_len,
         q1 * (2.0 / 3.0) * inv_len, q1 * (-4.0 / 3.0) * inv_len]
    )
    g = sp.coo_matrix((vals, (rows, cols)), shape=(W.ndofs, pot.ndofs)).tocsr()
    g.sum_duplicates()
    g.sort_indices()
    return g
