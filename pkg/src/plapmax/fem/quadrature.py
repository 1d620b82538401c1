"""Element quadrature rules in barycentric coordinates.

Rules are normalized so the weights sum to one; multiply by the element
measure to integrate.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import permutations

import numpy as np

from plapmax.errors import PreconditionError


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    barycentric: np.ndarray  # (q, d + 1)
    weights: np.ndarray  # (q,)

    @property
    def size(self) -> int:
        return int(self.weights.size)


def _gauss_on_unit(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=32)
def gauss_interval(n: int) -> QuadratureRule:
    t, w = _gauss_on_unit(n)
    return QuadratureRule(barycentric=np.column_stack([1.0 - t, t]), weights=w)


# Degree-4 symmetric rule on the triangle (two orbits of three points).
_TRIANGLE_ORBITS = (
    (0.445948490915965, 0.223381589678011),
    (0.091576213509771, 0.109951743655322),
)


@lru_cache(maxsize=1)
def dunavant_triangle() -> QuadratureRule:
    points: list[tuple[float, float, float]] = []
    weights: list[float] = []
    for a, w in _TRIANGLE_ORBITS:
        orbit = sorted(set(permutations((a, a, 1.0 - 2.0 * a))))
        points.extend(orbit)
        weights.extend([w] * len(orbit))
    return QuadratureRule(barycentric=np.array(points), weights=np.array(weights))


@lru_cache(maxsize=32)
def collapsed_triangle(n: int) -> QuadratureRule:
    """Conical product rule: Gauss-Legendre on the square mapped onto the triangle."""
    t, w = _gauss_on_unit(n)
    u, v = np.meshgrid(t, t, indexing="ij")
    wu, wv = np.meshgrid(w, w, indexing="ij")
    lam1 = u.ravel()
    lam2 = ((1.0 - u) * v).ravel()
    weights = (2.0 * wu * wv * (1.0 - u)).ravel()
    bary = np.column_stack([1.0 - lam1 - lam2, lam1, lam2])
    return QuadratureRule(barycentric=bary, weights=weights)


def production_rule(dimension: int) -> QuadratureRule:
    """4-point Gauss on intervals, 6-point Dunavant on triangles."""
    if dimension == 1:
        return gauss_interval(4)
    if dimension == 2:
        return dunavant_triangle()
    raise PreconditionError(f"No quadrature rule for dimension {dimension}")


def reference_rule(dimension: int, points: int = 10) -> QuadratureRule:
    if dimension == 1:
        return gauss_interval(points)
    if dimension == 2:
        return collapsed_triangle(points)
    raise PreconditionError(f"No quadrature rule for dimension {dimension}")


@lru_cache(maxsize=2)
def reaction_rule(dimension: int) -> QuadratureRule:
    """Element midpoint on intervals, the three vertices with equal weight on triangles."""
    if dimension == 1:
        return QuadratureRule(barycentric=np.array([[0.5, 0.5]]), weights=np.array([1.0]))
    if dimension == 2:
        return QuadratureRule(barycentric=np.eye(3), weights=np.full(3, 1.0 / 3.0))
    raise PreconditionError(f"No quadrature rule for dimension {dimension}")
