"""Structure-preserving finite element solver for ideal compressible MHD.

The package solves the MHD system in non-divergence (source) form on
triangulated rectangles: an invariant-domain-preserving graph-viscosity
solver for the Euler subsystem (with entropy-viscosity high-order fluxes and
convex limiting), a Crank-Nicolson curl-conforming solve for the coupled
velocity/magnetic source subsystem, and a Strang splitting driver that
composes them while conserving total energy and the weak divergence of the
magnetic field.
"""

from .eos import GasParams
from .mesh import build_rect_mesh, mesh_from_arrays, refine

__all__ = ["GasParams", "build_rect_mesh", "mesh_from_arrays", "refine"]
