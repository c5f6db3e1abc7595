"""Legacy-ASCII VTK output of solver states (unstructured triangle grids).

Point data: density, pressure, velocity magnitude, magnetic pressure and the
magnetic field vector (B is sampled per adjacent element at each vertex and
averaged).  Geometric vertices are written, so periodic meshes plot without
seams; slave vertices repeat their master's nodal values.
"""

from __future__ import annotations

import numpy as np

from .splitting import MhdState


def _vertex_bdm_average(state: MhdState) -> np.ndarray:
    """B at geometric vertices, averaged over adjacent triangles."""
    mesh = state.sys.mesh
    corners = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    vals = state.sys.space_w.evaluate_at_bary(state.b, corners)   # (nt, 3, 2)
    acc = np.zeros((len(mesh.vertices), 2))
    cnt = np.zeros(len(mesh.vertices))
    ids = mesh.triangles.reshape(-1)
    for c in range(2):
        acc[:, c] = np.bincount(ids, weights=vals[..., c].reshape(-1),
                                minlength=len(mesh.vertices))
    cnt = np.bincount(ids, minlength=len(mesh.vertices)).astype(float)
    cnt[cnt == 0.0] = 1.0
    return acc / cnt[:, None]


def write_vtk(state: MhdState, path: str, title: str = "mhdfem state") -> None:
    sys = state.sys
    mesh = sys.mesh
    params = sys.params
    U = state.U[mesh.vertex_class]          # per geometric vertex
    rho = U[:, 0]
    v = U[:, 1:3] / rho[:, None]
    eps = U[:, 3] - 0.5 * rho * (v**2).sum(axis=1)
    p = (params.gamma - 1.0) * eps / (1.0 - params.b * rho)
    B = _vertex_bdm_average(state)

    nv = len(mesh.vertices)
    nt = mesh.n_triangles
    lines = [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {nv} double",
    ]
    lines += [f"{x:.17g} {y:.17g} 0" for x, y in mesh.vertices]
    lines.append(f"CELLS {nt} {4 * nt}")
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles]
    lines.append(f"CELL_TYPES {nt}")
    lines += ["5"] * nt
    lines.append(f"POINT_DATA {nv}")

    def scalars(name, arr):
        lines.append(f"SCALARS {name} double 1")
        lines.append("LOOKUP_TABLE default")
        lines.extend(f"{x:.17g}" for x in arr)

    scalars("rho", rho)
    scalars("p", p)
    scalars("vmag", np.sqrt((v**2).sum(axis=1)))
    scalars("magnetic_pressure", 0.5 * (B**2).sum(axis=1))
    lines.append("VECTORS B double")
    lines.extend(f"{bx:.17g} {by:.17g} 0" for bx, by in B)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_vtk_point_scalars(path: str, name: str) -> np.ndarray:
    """Parse one SCALARS field back from a file written by write_vtk."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    npoints = None
    for k, line in enumerate(lines):
        if line.startswith("POINT_DATA"):
            npoints = int(line.split()[1])
        if npoints is not None and line.startswith(f"SCALARS {name} "):
            start = k + 2                    # skip LOOKUP_TABLE line
            return np.array([float(x) for x in lines[start:start + npoints]])
    raise KeyError(f"scalar field {name!r} not found in {path}")
