"""Conserved-quantity functionals, error norms, convergence rates.

The headline functional is the total energy sum(m_i E_i) + (mu/2)||B_h||^2 -
a linear plus a quadratic piece - which the splitting conserves exactly under
periodic boundary conditions (up to Newton/Krylov tolerances).  The weak
divergence of B_h is monitored through its full fingerprint vector
(B_h, grad omega) over all P2 test functions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .eos import GasParams
from .fespace import CurlSpaceBDM1, ScalarSpaceP1, evaluate_p1, p1_values
from .quadrature import triangle_rule
from .splitting import MhdState


@dataclass
class DiagnosticsRecord:
    time: float
    total_mech_energy: float
    magnetic_energy: float
    total_energy: float
    math_entropy: float
    min_density: float
    min_pressure: float
    min_internal_energy: float
    weak_div_drift: float

    FIELDS = (
        "time", "total_mech_energy", "magnetic_energy", "total_energy",
        "math_entropy", "min_density", "min_pressure", "min_internal_energy",
        "weak_div_drift",
    )

    def row(self) -> list:
        return [getattr(self, f) for f in self.FIELDS]


def weak_div_fingerprint(sys, b: np.ndarray) -> np.ndarray:
    """(B_h, grad omega_k) for every P2 basis function omega_k."""
    return sys.grad_embed.T @ (sys.source.M_W @ b)


def compute_record(state: MhdState, fingerprint0: np.ndarray | None = None) -> DiagnosticsRecord:
    sys = state.sys
    params: GasParams = sys.params
    U = state.U
    m = sys.graph.m
    rho = U[:, 0]
    ke = 0.5 * (U[:, 1] ** 2 + U[:, 2] ** 2) / rho
    eps = U[:, 3] - ke
    p = (params.gamma - 1.0) * eps / (1.0 - params.b * rho)
    s = np.log(eps / rho) / (params.gamma - 1.0) - np.log(rho)

    mech = float(m @ U[:, 3])
    mag = 0.5 * params.mu * float(state.b @ (sys.source.M_W @ state.b))
    if fingerprint0 is None:
        drift = 0.0
    else:
        drift = float(np.abs(weak_div_fingerprint(sys, state.b) - fingerprint0).max())
    return DiagnosticsRecord(
        time=state.t,
        total_mech_energy=mech,
        magnetic_energy=mag,
        total_energy=mech + mag,
        math_entropy=float(m @ (-rho * s)),
        min_density=float(rho.min()),
        min_pressure=float(p.min()),
        min_internal_energy=float(eps.min()),
        weak_div_drift=drift,
    )


def error_norms(numeric: np.ndarray, exact, space) -> tuple[float, float, float]:
    """Quadrature L1/L2/Linf norms of (numeric field - exact).

    `numeric` is nodal data (n,) or (n, 2) on a ScalarSpaceP1, or a
    coefficient vector on a CurlSpaceBDM1.  `exact` maps points (k, 2) to
    values of matching shape.  Linf is sampled at the quadrature points and,
    for nodal spaces, also at the nodes.
    """
    bary, _ = triangle_rule(4)
    mesh = space.mesh
    rm = mesh.ref_map()
    w_det = np.outer(0.5 * rm.det, triangle_rule(4)[1])
    pts = mesh.quad_points(bary)                        # (nt, nq, 2)
    flat = pts.reshape(-1, 2)

    if isinstance(space, ScalarSpaceP1):
        num_q = evaluate_p1(space, numeric, p1_values(bary))
        exa = np.asarray(exact(flat), dtype=float).reshape(num_q.shape)
        diff = num_q - exa
        nodal_diff = numeric - np.asarray(exact(space.node_coords), dtype=float)
        if diff.ndim == 3:
            mag = np.sqrt((diff**2).sum(axis=-1))
            nodal_mag = np.sqrt((np.atleast_2d(nodal_diff) ** 2).sum(axis=-1))
        else:
            mag = np.abs(diff)
            nodal_mag = np.abs(nodal_diff)
        linf = max(mag.max(), nodal_mag.max())
    elif isinstance(space, CurlSpaceBDM1):
        num_q = space.evaluate(numeric, degree=4)
        exa = np.asarray(exact(flat), dtype=float).reshape(num_q.shape)
        diff = num_q - exa
        mag = np.sqrt((diff**2).sum(axis=-1))
        linf = mag.max()
    else:
        raise TypeError(f"unsupported space {type(space)}")

    l1 = float((w_det * mag).sum())
    l2 = float(np.sqrt((w_det * mag**2).sum()))
    return l1, l2, float(linf)


def eoc(errors, dofs, dim: int = 2):
    """Experimental orders from successive errors; h is taken as dof^(-1/dim).

    Returns len(errors) - 1 rates; exact zeros produce a NaN sentinel.
    """
    errors = np.asarray(errors, dtype=float)
    dofs = np.asarray(dofs, dtype=float)
    if len(errors) < 2 or len(errors) != len(dofs):
        raise ValueError("need matching error/dof sequences of length >= 2")
    rates = []
    for k in range(1, len(errors)):
        if errors[k] == 0.0 or errors[k - 1] == 0.0:
            rates.append(float("nan"))
        else:
            rates.append(
                float(np.log(errors[k - 1] / errors[k])
                      / np.log((dofs[k] / dofs[k - 1]) ** (1.0 / dim)))
            )
    return rates
