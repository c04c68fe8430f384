"""Quadrature rules on the reference triangle and the unit interval.

Compact symmetric rules cover low degrees; above those a collapsed
tensor-product rule (Gauss-Legendre x Gauss-Jacobi through the Duffy map)
provides exactness for any requested degree up to MAX_DEGREE.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

MAX_DEGREE = 30


@dataclass(frozen=True)
class QuadRule:
    points: np.ndarray      # (n, 3) barycentric on triangles, (n,) on edges
    weights: np.ndarray     # sum to 1/2 (triangle) or 1 (edge)
    exact_degree: int

    def __post_init__(self):
        self.points.setflags(write=False)
        self.weights.setflags(write=False)

    @property
    def xy(self):
        """Reference (x, y) coordinates for a triangle rule."""
        return self.points[:, 1:]


def _bary(xy):
    xy = np.asarray(xy, dtype=float)
    lam0 = 1.0 - xy[:, 0] - xy[:, 1]
    return np.column_stack([lam0, xy])


# Symmetric rules: (degree, [(orbit point in barycentric, weight / orbit)]).
# Weights are normalized to the reference-triangle measure 1/2.
def _sym_orbits(entries):
    pts, wts = [], []
    for bary, w in entries:
        seen = []
        for perm in [(bary[0], bary[1], bary[2]), (bary[1], bary[2], bary[0]),
                     (bary[2], bary[0], bary[1]), (bary[0], bary[2], bary[1]),
                     (bary[2], bary[1], bary[0]), (bary[1], bary[0], bary[2])]:
            if perm not in seen:
                seen.append(perm)
                pts.append(perm)
                wts.append(w)
    return np.array(pts), np.array(wts)


_SYMMETRIC = {
    1: [((1 / 3, 1 / 3, 1 / 3), 0.5)],
    2: [((2 / 3, 1 / 6, 1 / 6), 1 / 6)],
    4: [((1 - 2 * 0.445948490915965, 0.445948490915965, 0.445948490915965),
         0.223381589678011 / 2),
        ((1 - 2 * 0.091576213509771, 0.091576213509771, 0.091576213509771),
         0.109951743655322 / 2)],
    5: [((1 / 3, 1 / 3, 1 / 3), 0.225 / 2),
        ((1 - 2 * 0.470142064105115, 0.470142064105115, 0.470142064105115),
         0.132394152788506 / 2),
        ((1 - 2 * 0.101286507323456, 0.101286507323456, 0.101286507323456),
         0.125939180544827 / 2)],
}


def _conical(degree):
    """Collapsed tensor rule exact for total degree `degree`."""
    n = (degree + 2) // 2  # 2n - 1 >= degree
    xg, wg = np.polynomial.legendre.leggauss(n)
    xi, ui = (xg + 1) / 2, wg / 2
    yj, vj = roots_jacobi(n, 1.0, 0.0)
    eta, v = (yj + 1) / 2, vj / 4
    X = np.outer(xi, 1 - eta).ravel()
    Y = np.tile(eta, n)
    W = np.outer(ui, v).ravel()
    return _bary(np.column_stack([X, Y])), W


@lru_cache(maxsize=None)
def triangle_rule(degree):
    """Rule on the reference triangle exact for polynomials of total degree."""
    if not 0 <= degree <= MAX_DEGREE:
        raise ValueError(f"unsupported triangle quadrature degree {degree}")
    deg = max(degree, 1)
    if deg in _SYMMETRIC:
        pts, wts = _sym_orbits(_SYMMETRIC[deg])
        return QuadRule(pts, wts, deg)
    pts, wts = _conical(deg)
    n = (deg + 2) // 2
    return QuadRule(pts, wts, 2 * n - 1)


@lru_cache(maxsize=None)
def edge_rule(degree):
    """Gauss-Legendre rule on [0, 1] exact for the given degree."""
    if not 0 <= degree <= 2 * MAX_DEGREE:
        raise ValueError(f"unsupported edge quadrature degree {degree}")
    n = max((degree + 2) // 2, 1)
    x, w = np.polynomial.legendre.leggauss(n)
    return QuadRule((x + 1) / 2, w / 2, 2 * n - 1)
