"""Conforming triangulations of rectangles with optional periodic identification.

The mesh keeps *geometric* vertices (so coordinates, areas and plotting stay
simple) and layers the periodic identification on top:

* ``vertex_master`` maps every geometric vertex to its canonical
  representative (identity when not periodic).  Scalar nodal spaces are built
  on the classes of this map.
* edges are stored as *entities*: a geometric edge lying on a slave periodic
  boundary is translated onto the master side and merged with the edge found
  there.  Edge-based degrees of freedom (the curl-conforming space) live on
  entities.  Every entity carries a fixed direction, from the lower to the
  higher geometric vertex id of its master representative; per-triangle
  orientation signs are recorded relative to that direction.

Only structured-rectangle-derived triangulations are generated: each cell of
an ``nx`` x ``ny`` grid is split along its bottom-left/top-right diagonal.
Uniform refinement doubles the grid, which for this family coincides exactly
with red refinement (each triangle is replaced by its four half-scale
children).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

BOUNDARY_TAG_NAMES = ("interior", "left", "right", "bottom", "top", "boundary")
TAG_INTERIOR, TAG_LEFT, TAG_RIGHT, TAG_BOTTOM, TAG_TOP, TAG_BOUNDARY = range(6)


class MeshError(ValueError):
    """Raised for invalid mesh construction requests."""


@dataclass
class RefMap:
    """Per-triangle affine maps from the unit simplex.

    jac[t] has the edge vectors (P1-P0, P2-P0) as columns; det[t] > 0 for
    counterclockwise triangles; inv_t[t] is the inverse transpose, i.e. the
    covariant push-forward matrix.
    """

    jac: np.ndarray
    det: np.ndarray
    inv_t: np.ndarray


@dataclass
class Mesh:
    vertices: np.ndarray          # (nv, 2) geometric coordinates
    triangles: np.ndarray         # (nt, 3) geometric vertex ids, CCW
    vertex_master: np.ndarray     # (nv,) geometric id of periodic master
    vertex_class: np.ndarray      # (nv,) dense class index
    n_vertex_classes: int
    class_rep: np.ndarray         # (n_classes,) geometric id of each class
    edges: np.ndarray             # (ne, 2) master geometric ids, low < high
    tri_edges: np.ndarray         # (nt, 3) entity id of local edges (01,12,20)
    tri_edge_signs: np.ndarray    # (nt, 3) +1 if local dir matches entity dir
    edge_tris: np.ndarray         # (ne, 2) adjacent triangles, -1 padded
    edge_local: np.ndarray        # (ne, 2) local edge index in adjacent tris
    boundary_tags: np.ndarray     # (ne,) codes into BOUNDARY_TAG_NAMES
    periodic_x: bool
    periodic_y: bool
    structured: tuple | None = None   # (nx, ny, x0, x1, y0, y1) when grid-built
    _ref_map: RefMap | None = field(default=None, repr=False)

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    def ref_map(self) -> RefMap:
        if self._ref_map is None:
            p = self.vertices[self.triangles]           # (nt, 3, 2)
            e1 = p[:, 1] - p[:, 0]
            e2 = p[:, 2] - p[:, 0]
            det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
            if np.any(det <= 0.0):
                raise MeshError("mesh contains non-CCW or degenerate triangles")
            jac = np.stack([e1, e2], axis=-1)           # columns are edges
            inv = np.empty_like(jac)
            inv[:, 0, 0] = e2[:, 1]
            inv[:, 0, 1] = -e2[:, 0]
            inv[:, 1, 0] = -e1[:, 1]
            inv[:, 1, 1] = e1[:, 0]
            inv /= det[:, None, None]
            self._ref_map = RefMap(jac=jac, det=det, inv_t=np.swapaxes(inv, 1, 2))
        return self._ref_map

    def areas(self) -> np.ndarray:
        return 0.5 * self.ref_map().det

    def quad_points(self, bary: np.ndarray) -> np.ndarray:
        """Physical positions of barycentric points, shape (nt, nq, 2)."""
        p = self.vertices[self.triangles]               # (nt, 3, 2)
        return np.einsum("qk,tkc->tqc", bary, p)

    def edge_is_periodic_image(self) -> np.ndarray:
        """Mask of entities adjacent to two triangles through a periodic wrap."""
        return (self.edge_tris[:, 1] >= 0) & (self.boundary_tags == TAG_INTERIOR)


def _build_topology(
    vertices: np.ndarray,
    triangles: np.ndarray,
    vertex_master: np.ndarray,
    edge_translate,
    periodic_x: bool,
    periodic_y: bool,
    structured: tuple | None,
    domain: tuple | None,
) -> Mesh:
    nv = len(vertices)
    masters = np.unique(vertex_master)
    vertex_class = np.searchsorted(masters, vertex_master)

    # Local edges (v0,v1), (v1,v2), (v2,v0) of each triangle.
    loc = [(0, 1), (1, 2), (2, 0)]
    raw_p = np.concatenate([triangles[:, a] for a, _ in loc])
    raw_q = np.concatenate([triangles[:, b] for _, b in loc])
    raw_tri = np.tile(np.arange(len(triangles)), 3)
    raw_loc = np.repeat(np.arange(3), len(triangles))

    tp, tq = edge_translate(raw_p, raw_q)
    lo = np.minimum(tp, tq)
    hi = np.maximum(tp, tq)
    keys = lo.astype(np.int64) * nv + hi
    uniq, inverse = np.unique(keys, return_inverse=True)
    ne = len(uniq)
    edges = np.stack([uniq // nv, uniq % nv], axis=1)

    tri_edges = np.empty((len(triangles), 3), dtype=np.int64)
    tri_edge_signs = np.empty((len(triangles), 3), dtype=np.int64)
    tri_edges[raw_tri, raw_loc] = inverse
    tri_edge_signs[raw_tri, raw_loc] = np.where(tp == edges[inverse, 0], 1, -1)

    edge_tris = -np.ones((ne, 2), dtype=np.int64)
    edge_local = -np.ones((ne, 2), dtype=np.int64)
    slot = np.zeros(ne, dtype=np.int64)
    order = np.argsort(inverse, kind="stable")
    for k in order:
        e = inverse[k]
        if slot[e] >= 2:
            raise MeshError("edge shared by more than two triangles")
        edge_tris[e, slot[e]] = raw_tri[k]
        edge_local[e, slot[e]] = raw_loc[k]
        slot[e] += 1

    boundary_tags = np.full(ne, TAG_INTERIOR, dtype=np.int64)
    on_boundary = edge_tris[:, 1] < 0
    if domain is not None:
        x0, x1, y0, y1 = domain
        mid = 0.5 * (vertices[edges[:, 0]] + vertices[edges[:, 1]])
        tol = 1e-12 * max(x1 - x0, y1 - y0)
        boundary_tags[on_boundary & (np.abs(mid[:, 0] - x0) < tol)] = TAG_LEFT
        boundary_tags[on_boundary & (np.abs(mid[:, 0] - x1) < tol)] = TAG_RIGHT
        boundary_tags[on_boundary & (np.abs(mid[:, 1] - y0) < tol)] = TAG_BOTTOM
        boundary_tags[on_boundary & (np.abs(mid[:, 1] - y1) < tol)] = TAG_TOP
        untagged = on_boundary & (boundary_tags == TAG_INTERIOR)
        boundary_tags[untagged] = TAG_BOUNDARY
    else:
        boundary_tags[on_boundary] = TAG_BOUNDARY

    mesh = Mesh(
        vertices=vertices,
        triangles=triangles,
        vertex_master=vertex_master,
        vertex_class=vertex_class,
        n_vertex_classes=len(masters),
        class_rep=masters,
        edges=edges,
        tri_edges=tri_edges,
        tri_edge_signs=tri_edge_signs,
        edge_tris=edge_tris,
        edge_local=edge_local,
        boundary_tags=boundary_tags,
        periodic_x=periodic_x,
        periodic_y=periodic_y,
        structured=structured,
    )
    mesh.ref_map()  # validates orientation
    return mesh


def build_rect_mesh(
    nx: int,
    ny: int,
    domain: tuple = (0.0, 1.0, 0.0, 1.0),
    periodic_x: bool = False,
    periodic_y: bool = False,
) -> Mesh:
    """Triangulate [x0,x1] x [y0,y1] with an nx-by-ny grid of split cells.

    Each rectangular cell is split along the bottom-left/top-right diagonal
    into two CCW triangles.  Periodic flags identify the opposite sides
    (vertices and boundary edges); at least 2 cells are required per
    direction, so that periodic identification never merges an edge with
    itself.
    """
    x0, x1, y0, y1 = map(float, domain)
    if nx < 2 or ny < 2:
        raise MeshError("need nx, ny >= 2")
    if not (x1 > x0 and y1 > y0):
        raise MeshError("degenerate domain dimensions")

    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    xx, yy = np.meshgrid(xs, ys)                 # row-major: vid = j*(nx+1) + i
    vertices = np.stack([xx.ravel(), yy.ravel()], axis=1)

    def vid(i, j):
        return j * (nx + 1) + i

    ii, jj = np.meshgrid(np.arange(nx), np.arange(ny))
    ii = ii.ravel()
    jj = jj.ravel()
    a = vid(ii, jj)
    b = vid(ii + 1, jj)
    c = vid(ii + 1, jj + 1)
    d = vid(ii, jj + 1)
    lower = np.stack([a, b, c], axis=1)
    upper = np.stack([a, c, d], axis=1)
    triangles = np.empty((2 * nx * ny, 3), dtype=np.int64)
    triangles[0::2] = lower
    triangles[1::2] = upper

    i_of = np.arange(len(vertices)) % (nx + 1)
    j_of = np.arange(len(vertices)) // (nx + 1)

    xmap = np.arange(len(vertices))
    if periodic_x:
        xmap[i_of == nx] -= nx
    ymap = np.arange(len(vertices))
    if periodic_y:
        ymap[j_of == ny] -= ny * (nx + 1)
    vertex_master = xmap[ymap]

    def edge_translate(p, q):
        tp, tq = p.copy(), q.copy()
        if periodic_x:
            on_right = (i_of[p] == nx) & (i_of[q] == nx)
            tp[on_right] = xmap[p[on_right]]
            tq[on_right] = xmap[q[on_right]]
        if periodic_y:
            on_top = (j_of[p] == ny) & (j_of[q] == ny)
            tp[on_top] = ymap[p[on_top]]
            tq[on_top] = ymap[q[on_top]]
        return tp, tq

    return _build_topology(
        vertices,
        triangles,
        vertex_master,
        edge_translate,
        periodic_x,
        periodic_y,
        structured=(nx, ny, x0, x1, y0, y1),
        domain=(x0, x1, y0, y1),
    )


def mesh_from_arrays(vertices: np.ndarray, triangles: np.ndarray) -> Mesh:
    """Wrap raw arrays as a non-periodic mesh (small hand-built test meshes)."""
    vertices = np.asarray(vertices, dtype=float)
    triangles = np.asarray(triangles, dtype=np.int64)

    def edge_translate(p, q):
        return p, q

    return _build_topology(
        vertices,
        triangles,
        np.arange(len(vertices)),
        edge_translate,
        periodic_x=False,
        periodic_y=False,
        structured=None,
        domain=None,
    )


def refine(mesh: Mesh) -> Mesh:
    """Uniform refinement: every triangle is replaced by its four red children.

    Implemented by doubling the structured grid, which produces exactly the
    red-refined triangulation for this mesh family (same diagonals, each
    parent the union of four children).
    """
    if mesh.structured is None:
        raise MeshError("refine is only supported for grid-built meshes")
    nx, ny, x0, x1, y0, y1 = mesh.structured
    return build_rect_mesh(
        2 * nx, 2 * ny, (x0, x1, y0, y1), mesh.periodic_x, mesh.periodic_y
    )
