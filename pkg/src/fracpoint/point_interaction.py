"""Discretised resolvents of the limit operators.

The free resolvent ((-Delta)^{s/2} + lam)^{-1} and the point-interaction
resolvent, which differs from it by the rank-one term
(alpha - Theta(s, lam))^{-1} |G_{s,lam}><G_{s,lam}|.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from .core_math import FractionalParams, PointInteraction, theta
from .discretization import Grid, KernelMatrix, kernel_matrix
from .errors import ConfigError, NumericalError
from .green_kernel import green, green_table


@dataclass(frozen=True)
class Descriptor:
    kind: str  # "Free", "PointInteraction" or "KonnoKuroda"
    alpha: Optional[float] = None
    eps: Optional[float] = None

    def __str__(self):
        if self.kind == "PointInteraction":
            return f"PointInteraction(alpha={self.alpha!r})"
        if self.kind == "KonnoKuroda":
            return f"KonnoKuroda(eps={self.eps!r})"
        return self.kind


@dataclass
class ResolventMatrix:
    matrix: KernelMatrix
    lam: float
    descriptor: Descriptor


def free_resolvent(s, lam, d, grid: Grid) -> ResolventMatrix:
    """Weighted matrix of the free resolvent on ``grid``."""
    if not lam > 0:
        raise ConfigError("free_resolvent needs lam > 0")
    if grid.dimension != d:
        raise ConfigError("grid dimension does not match d")
    M = kernel_matrix(s, lam, grid)
    return ResolventMatrix(KernelMatrix(M, True, float(s), float(lam), int(d)),
                           float(lam), Descriptor("Free"))


@lru_cache(maxsize=64)
def _green_nodes(s, lam, d, key, nodes_bytes):
    x = np.frombuffer(nodes_bytes, dtype=float)
    if d == 1:
        return green_table(s).kernel(lam, x)
    p = FractionalParams(s, 3)
    return np.array([green(p, lam, r).value for r in x])


def green_vector(s, lam, grid: Grid) -> np.ndarray:
    """Weighted vector of the function G_{s,lam}(x) on ``grid``."""
    nodes = np.ascontiguousarray(grid.nodes, dtype=float)
    vals = _green_nodes(float(s), float(lam), grid.dimension, grid.key(),
                        nodes.tobytes())
    return grid.to_vec(vals)


def rank_one_coefficient(pi: PointInteraction, lam) -> float:
    """(alpha - Theta(s, lam))^{-1}, 0 for the Friedrichs extension."""
    if pi.is_friedrichs:
        return 0.0
    p = pi.params
    gap = pi.alpha - theta(p.s, lam, p.d)
    if abs(gap) < 1e-12:
        raise NumericalError("spectral parameter at bound state: alpha - Theta(s, lam) = 0")
    return 1.0 / gap


def point_resolvent(pi: PointInteraction, lam, grid: Grid) -> ResolventMatrix:
    """Free resolvent plus g g^T / (alpha - Theta)."""
    p = pi.params
    free = free_resolvent(p.s, lam, p.d, grid)
    if pi.is_friedrichs:
        return ResolventMatrix(free.matrix, float(lam), Descriptor("PointInteraction", None))
    coef = rank_one_coefficient(pi, lam)
    g = green_vector(p.s, lam, grid)
    M = free.matrix.entries + coef * np.outer(g, g)
    return ResolventMatrix(KernelMatrix(M, True, p.s, float(lam), p.d), float(lam),
                           Descriptor("PointInteraction", pi.alpha))


def rank_one_gap(pi: PointInteraction, lam, grid: Grid) -> float:
    """HS norm of point_resolvent - free_resolvent, |alpha - Theta|^{-1} ||g||^2."""
    g = green_vector(pi.params.s, lam, grid)
    return abs(rank_one_coefficient(pi, lam)) * float(g @ g)
