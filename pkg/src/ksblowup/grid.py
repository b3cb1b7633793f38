"""Graded node sets on [0, 1] and their three-point difference weights."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


class ConfigError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Grid:
    n: int
    nodes: np.ndarray
    clustering_exponent: float = 1.0

    def __post_init__(self):
        x = np.asarray(self.nodes, dtype=float)
        if x.ndim != 1 or x.size != self.n + 1:
            raise ConfigError("nodes must have n + 1 entries")
        if x[0] != 0.0 or x[-1] != 1.0:
            raise ConfigError("grid endpoints must be exactly 0 and 1")
        if not np.all(np.diff(x) > 0):
            raise ConfigError("grid nodes must be strictly increasing")
        x.setflags(write=False)
        object.__setattr__(self, "nodes", x)

    @property
    def h(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def h_max(self) -> float:
        return float(self.h.max())

    @property
    def h_min(self) -> float:
        return float(self.h.min())

    @property
    def interior(self) -> np.ndarray:
        return self.nodes[1:-1]

    @cached_property
    def d2_weights(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        # exact for quadratics on any spacing
        hm, hp = self.h[:-1], self.h[1:]
        return 2.0 / (hm * (hm + hp)), -2.0 / (hm * hp), 2.0 / (hp * (hm + hp))

    @cached_property
    def d1_weights(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        hm, hp = self.h[:-1], self.h[1:]
        return -hp / (hm * (hm + hp)), (hp - hm) / (hm * hp), hm / (hp * (hm + hp))

    def d1_interior(self, U: np.ndarray) -> np.ndarray:
        wl, wc, wr = self.d1_weights
        return wl * U[:-2] + wc * U[1:-1] + wr * U[2:]

    def d2_interior(self, U: np.ndarray) -> np.ndarray:
        wl, wc, wr = self.d2_weights
        return wl * U[:-2] + wc * U[1:-1] + wr * U[2:]

    def d1(self, U: np.ndarray) -> np.ndarray:
        """First derivative at every node; one-sided three-point formulas at the ends."""
        U = np.asarray(U, dtype=float)
        out = np.empty_like(U)
        out[1:-1] = self.d1_interior(U)
        h0, h1 = self.h[0], self.h[1]
        out[0] = (-(2 * h0 + h1) / (h0 * (h0 + h1)) * U[0]
                  + (h0 + h1) / (h0 * h1) * U[1]
                  - h0 / (h1 * (h0 + h1)) * U[2])
        g0, g1 = self.h[-1], self.h[-2]
        out[-1] = ((2 * g0 + g1) / (g0 * (g0 + g1)) * U[-1]
                   - (g0 + g1) / (g0 * g1) * U[-2]
                   + g0 / (g1 * (g0 + g1)) * U[-3])
        return out

    def coarsen(self, factor: int) -> np.ndarray:
        """Indices of this grid's nodes that coincide with a grid `factor` times coarser."""
        if self.n % factor:
            raise ConfigError(f"n={self.n} not divisible by {factor}")
        return np.arange(0, self.n + 1, factor)


def grading_map(xi: np.ndarray, c: float) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    if c == 1.0:
        return xi.copy()
    a = xi**c
    return a / (a + (1.0 - xi) ** c)


def build_grid(n: int, clustering_exponent: float = 3.0) -> Grid:
    """Nodes rho(i/n) with rho(xi) = xi^c / (xi^c + (1-xi)^c), clustered at both ends."""
    if int(n) != n or n < 16:
        raise ConfigError(f"grid needs n >= 16 cells, got {n}")
    if not clustering_exponent >= 1.0:
        raise ConfigError("clustering exponent must be >= 1")
    xi = np.arange(n + 1) / n
    nodes = grading_map(xi, clustering_exponent)
    nodes[0], nodes[-1] = 0.0, 1.0
    return Grid(int(n), nodes, float(clustering_exponent))
