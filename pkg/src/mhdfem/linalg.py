"""Unpreconditioned Krylov solvers on CSR matrices.

Sparse storage is scipy CSR (row offsets / sorted column indices / values);
the solvers below are deliberately plain textbook loops: the systems they
face (P1 mass matrices, and a Crank-Nicolson Jacobian that is a small
perturbation of a mass matrix) are uniformly well conditioned, so neither
needs preconditioning, and the step loop wants full control over tolerances,
iteration counts and failure modes.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp


class SolverBreakdownError(RuntimeError):
    """Krylov recurrence broke down (inner product collapsed to zero)."""


class IterationLimitError(RuntimeError):
    """Residual target not reached within max_iter iterations."""


def make_csr(rows, cols, vals, shape) -> sp.csr_matrix:
    a = sp.coo_matrix((vals, (rows, cols)), shape=shape).tocsr()
    a.sum_duplicates()
    a.sort_indices()
    return a


def cg(A, b, x0=None, rel_tol: float = 1e-12, max_iter: int = 1000):
    """Conjugate gradients for SPD A.  Returns (x, iterations).

    Terminates when ||b - A x||_2 <= rel_tol * ||b||_2; raises
    IterationLimitError otherwise.
    """
    b = np.asarray(b, dtype=float)
    norm_b = np.linalg.norm(b)
    if norm_b == 0.0:
        return np.zeros_like(b), 0
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    r = b - A @ x
    target = rel_tol * norm_b
    if np.linalg.norm(r) <= target:
        return x, 0
    p = r.copy()
    rs = r @ r
    for k in range(1, max_iter + 1):
        Ap = A @ p
        denom = p @ Ap
        if denom <= 0.0:
            raise SolverBreakdownError("cg: non-positive curvature (A not SPD?)")
        alpha = rs / denom
        x += alpha * p
        r -= alpha * Ap
        rs_new = r @ r
        if np.sqrt(rs_new) <= target:
            return x, k
        p = r + (rs_new / rs) * p
        rs = rs_new
    raise IterationLimitError(f"cg: no convergence in {max_iter} iterations")


def bicgstab(A, b, x0=None, rel_tol: float = 1e-12, max_iter: int = 200):
    """BiCGStab without preconditioning.  Returns (x, iterations).

    Each iteration applies A twice.  Raises SolverBreakdownError when the
    stabilized recurrence collapses and IterationLimitError on stagnation.
    """
    b = np.asarray(b, dtype=float)
    norm_b = np.linalg.norm(b)
    if norm_b == 0.0:
        return np.zeros_like(b), 0
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    r = b - A @ x
    target = rel_tol * norm_b
    if np.linalg.norm(r) <= target:
        return x, 0
    r_hat = r.copy()
    rho = alpha = omega = 1.0
    v = np.zeros_like(b)
    p = np.zeros_like(b)
    for k in range(1, max_iter + 1):
        rho_new = r_hat @ r
        if rho_new == 0.0 or omega == 0.0:
            raise SolverBreakdownError("bicgstab: rho or omega collapsed")
        beta = (rho_new / rho) * (alpha / omega)
        rho = rho_new
        p = r + beta * (p - omega * v)
        v = A @ p
        denom = r_hat @ v
        if denom == 0.0:
            raise SolverBreakdownError("bicgstab: r_hat . A p collapsed")
        alpha = rho / denom
        s = r - alpha * v
        if np.linalg.norm(s) <= target:
            x += alpha * p
            return x, k
        t = A @ s
        tt = t @ t
        if tt == 0.0:
            raise SolverBreakdownError("bicgstab: A s vanished")
        omega = (t @ s) / tt
        x += alpha * p + omega * s
        r = s - omega * t
        if np.linalg.norm(r) <= target:
            return x, k
    raise IterationLimitError(f"bicgstab: no convergence in {max_iter} iterations")
