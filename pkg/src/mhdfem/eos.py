"""Covolume gamma-law gas: thermodynamics and entropy functionals.

Conserved states are arrays with a trailing axis of length 4 holding
[rho, mx, my, E], where E is the total *mechanical* energy per volume (no
magnetic contribution).  All functions are vectorized over leading axes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class AdmissibilityError(ValueError):
    """State outside the admissible set {rho > 0, internal energy > 0}."""


@dataclass(frozen=True)
class GasParams:
    """Gas constants: adiabatic exponent, covolume b, magnetic permeability mu.

    The two-rarefaction wavespeed bound of the hyperbolic solver is a proven
    upper bound only for 1 < gamma <= 5/3; larger exponents (the Riemann
    benchmark uses gamma = 2) follow standard practice and rely on the same
    estimate heuristically.  b >= 0; mu is 1 in every shipped benchmark.
    """

    gamma: float
    b: float = 0.0
    mu: float = 1.0

    @property
    def wavespeed_bound_guaranteed(self) -> bool:
        return self.gamma <= 5.0 / 3.0 + 1e-12

    def __post_init__(self):
        if not self.gamma > 1.0:
            raise ValueError(f"gamma must be > 1, got {self.gamma}")
        if self.b < 0.0:
            raise ValueError("covolume b must be >= 0")
        if self.mu <= 0.0:
            raise ValueError("permeability mu must be > 0")


def kinetic_energy(U: np.ndarray) -> np.ndarray:
    U = np.asarray(U, dtype=float)
    return 0.5 * (U[..., 1] ** 2 + U[..., 2] ** 2) / U[..., 0]


def internal_energy(U: np.ndarray) -> np.ndarray:
    """Internal energy per volume, eps = E - |m|^2 / (2 rho).  Errors on rho <= 0."""
    U = np.asarray(U, dtype=float)
    rho = U[..., 0]
    if np.any(rho <= 0.0) or not np.all(np.isfinite(rho)):
        raise AdmissibilityError("non-positive density")
    return U[..., 3] - kinetic_energy(U)


def is_admissible(U: np.ndarray) -> np.ndarray:
    """Membership mask for A = {rho > 0, E - |m|^2/(2 rho) > 0} (no raise)."""
    U = np.asarray(U, dtype=float)
    rho = U[..., 0]
    ok = np.isfinite(U).all(axis=-1) & (rho > 0.0)
    eps = np.where(ok, U[..., 3] - 0.5 * (U[..., 1] ** 2 + U[..., 2] ** 2)
                   / np.where(ok, rho, 1.0), -1.0)
    return ok & (eps > 0.0)


def check_admissible(U: np.ndarray, where: str = "state") -> None:
    if not np.all(is_admissible(U)):
        raise AdmissibilityError(f"{where} outside admissible set")


def pressure(rho: np.ndarray, e: np.ndarray, params: GasParams) -> np.ndarray:
    """Covolume pressure p = (gamma-1) e rho / (1 - b rho); e is specific."""
    rho = np.asarray(rho, dtype=float)
    e = np.asarray(e, dtype=float)
    cov = 1.0 - params.b * rho
    if np.any(rho <= 0.0) or np.any(e <= 0.0) or np.any(cov <= 0.0):
        raise AdmissibilityError("pressure requires rho > 0, e > 0, 1 - b rho > 0")
    return (params.gamma - 1.0) * e * rho / cov


def sound_speed(rho: np.ndarray, e: np.ndarray, params: GasParams) -> np.ndarray:
    """c = sqrt(gamma p / (rho (1 - b rho)))."""
    rho = np.asarray(rho, dtype=float)
    p = pressure(rho, e, params)
    return np.sqrt(params.gamma * p / (rho * (1.0 - params.b * rho)))


def pressure_of_state(U: np.ndarray, params: GasParams) -> np.ndarray:
    eps = internal_energy(U)
    if np.any(eps <= 0.0):
        raise AdmissibilityError("non-positive internal energy")
    return (params.gamma - 1.0) * eps / (1.0 - params.b * np.asarray(U)[..., 0])


def specific_entropy(U: np.ndarray, params: GasParams) -> np.ndarray:
    """s = log(e)/(gamma-1) - log(rho) with e the specific internal energy."""
    U = np.asarray(U, dtype=float)
    rho = U[..., 0]
    eps = internal_energy(U)
    if np.any(eps <= 0.0):
        raise AdmissibilityError("non-positive internal energy")
    return np.log(eps / rho) / (params.gamma - 1.0) - np.log(rho)


def math_entropy(U: np.ndarray, params: GasParams) -> np.ndarray:
    """Mathematical entropy eta = -rho s."""
    U = np.asarray(U, dtype=float)
    return -U[..., 0] * specific_entropy(U, params)


def surrogate_entropy(U: np.ndarray, params: GasParams) -> np.ndarray:
    """s_tilde = rho^(-gamma) eps; equals exp((gamma-1) s), so it shares the
    minimum principle of s while staying polynomial-friendly for root finding."""
    U = np.asarray(U, dtype=float)
    rho = U[..., 0]
    eps = internal_energy(U)
    if np.any(eps <= 0.0):
        raise AdmissibilityError("non-positive internal energy")
    return rho ** (-params.gamma) * eps
