"""Gauss quadrature rules on the reference triangle and the unit interval.

Triangle rules are given as barycentric points with weights summing to one,
so that ``integral = area * sum(w_q * f(x_q))``.  The degree-4 rule is the
workhorse for every nonlinear form in the solver (all integrands are at most
cubic on affine elements); degree 2 suffices for products of linears.
"""

from __future__ import annotations

import numpy as np

# 3-point rule at edge midpoints, exact for polynomials of degree 2.
_TRI_DEG2_BARY = np.array(
    [
        [0.5, 0.5, 0.0],
        [0.0, 0.5, 0.5],
        [0.5, 0.0, 0.5],
    ]
)
_TRI_DEG2_W = np.array([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0])

# 6-point Dunavant rule, exact for degree 4.
_A1 = 0.445948490915965
_W1 = 0.223381589678011
_A2 = 0.091576213509771
_W2 = 0.109951743655322
_TRI_DEG4_BARY = np.array(
    [
        [_A1, _A1, 1.0 - 2.0 * _A1],
        [_A1, 1.0 - 2.0 * _A1, _A1],
        [1.0 - 2.0 * _A1, _A1, _A1],
        [_A2, _A2, 1.0 - 2.0 * _A2],
        [_A2, 1.0 - 2.0 * _A2, _A2],
        [1.0 - 2.0 * _A2, _A2, _A2],
    ]
)
_TRI_DEG4_W = np.array([_W1, _W1, _W1, _W2, _W2, _W2])

# 7-point rule (centroid + two orbits), exact for degree 5.  Used by tests
# that want an integration route independent of the assembly rule.
_B1 = 0.470142064105115
_B2 = 0.101286507323456
_V1 = 0.132394152788506
_V2 = 0.125939180544827
_TRI_DEG5_BARY = np.array(
    [
        [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
        [_B1, _B1, 1.0 - 2.0 * _B1],
        [_B1, 1.0 - 2.0 * _B1, _B1],
        [1.0 - 2.0 * _B1, _B1, _B1],
        [_B2, _B2, 1.0 - 2.0 * _B2],
        [_B2, 1.0 - 2.0 * _B2, _B2],
        [1.0 - 2.0 * _B2, _B2, _B2],
    ]
)
_TRI_DEG5_W = np.array([0.225, _V1, _V1, _V1, _V2, _V2, _V2])

_TRI_RULES = {
    2: (_TRI_DEG2_BARY, _TRI_DEG2_W),
    4: (_TRI_DEG4_BARY, _TRI_DEG4_W),
    5: (_TRI_DEG5_BARY, _TRI_DEG5_W),
}


def triangle_rule(degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Return (barycentric points (nq,3), weights (nq,)) exact to `degree`."""
    for d in sorted(_TRI_RULES):
        if d >= degree:
            return _TRI_RULES[d]
    raise ValueError(f"no triangle rule of degree >= {degree}")


def interval_rule(npoints: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre rule on [0, 1]: (points (n,), weights (n,)) summing to 1."""
    x, w = np.polynomial.legendre.leggauss(npoints)
    return 0.5 * (x + 1.0), 0.5 * w
