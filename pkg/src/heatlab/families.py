"""Infinite graph families seen through nested finite truncations.

A family hands out, for each radius R, a finite host graph together with the
vertex indices of the Dirichlet support (the truncation).  The host carries one
extra layer so that support vertices keep their full infinite-graph degree.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import (Graph, IidUniform, SphereFunction, antitree_level, build_anti_tree,
                    build_lattice_box)


@dataclass(frozen=True)
class LatticeFamily:
    """Z^n with a conductance rule and a measure rule."""

    n: int = 1
    conductance: float | IidUniform = 1.0
    measure: float | str = 1.0
    name: str = field(default="lattice", init=False)

    def radius_needed(self, ids) -> int:
        return max(max(abs(int(c)) for c in vid.split(",")) for vid in ids)

    def truncation(self, R: int) -> tuple[Graph, np.ndarray]:
        host = build_lattice_box(self.n, R + 1, self.conductance, self.measure)
        coords = np.array([[int(c) for c in vid.split(",")] for vid in host.ids])
        support = np.flatnonzero(np.abs(coords).max(axis=1) <= R)
        return host, support

    def size(self, R: int) -> int:
        return (2 * R + 3) ** self.n

    def describe(self) -> dict:
        c = self.conductance
        cond = c.__dict__ if isinstance(c, IidUniform) else float(c)
        return {"family": "lattice", "n": self.n, "conductance": cond, "measure": self.measure}


@dataclass(frozen=True)
class AntiTreeFamily:
    """Anti-tree with sphere function floor(k^gamma); radius counts levels."""

    gamma: float
    name: str = field(default="anti-tree", init=False)

    def radius_needed(self, ids) -> int:
        return max(antitree_level(v) for v in ids)

    def truncation(self, R: int) -> tuple[Graph, np.ndarray]:
        host = build_anti_tree(self.gamma, R + 1)
        levels = np.array([antitree_level(v) for v in host.ids])
        return host, np.flatnonzero(levels <= R)

    def size(self, R: int) -> int:
        return sum(SphereFunction(self.gamma).sizes(R + 1))

    def describe(self) -> dict:
        return {"family": "anti-tree", "gamma": self.gamma}


def antitree_dimension(gamma: float) -> float:
    """n = 4(gamma + 1) / (2 - gamma)."""
    return 4 * (gamma + 1) / (2 - gamma)


@dataclass(frozen=True)
class AntiTreeRadial:
    """Radial quantities of the infinite anti-tree (counting measure, unit weights).

    Spheres 0..L are tabulated; the path-degree metric with jump size S
    between consecutive spheres j, j+1 has length
    min(S, deg_j^{-1/2}, deg_{j+1}^{-1/2}) with deg_j = s_{j-1} + s_{j+1}.
    """

    gamma: float
    L: int
    S: float = 1.0

    @property
    def sizes(self) -> np.ndarray:
        return np.array(SphereFunction(self.gamma).sizes(self.L + 2), dtype=float)

    @property
    def degrees(self) -> np.ndarray:
        s = self.sizes
        prev = np.concatenate([[0.0], s])
        return prev[: self.L + 1] + s[1: self.L + 2]

    @property
    def steps(self) -> np.ndarray:
        """Length of one hop from sphere j to sphere j + 1, j = 0..L-1."""
        r = 1.0 / np.sqrt(self.degrees)
        return np.minimum(self.S, np.minimum(r[:-1], r[1:]))

    @property
    def root_distance(self) -> np.ndarray:
        """rho(o, S_k) for k = 0..L."""
        return np.concatenate([[0.0], np.cumsum(self.steps)])

    def distance(self, k: int, l: int) -> float:
        """rho between vertices on distinct spheres k and l."""
        if k == l:
            raise ValueError("radial distance is only defined across spheres")
        r = self.root_distance
        return float(abs(r[l] - r[k]))

    def ball_volume(self, radius: float) -> float:
        """m(B_o(radius)) in the infinite graph; needs the ball inside the L levels."""
        r = self.root_distance
        if radius >= r[-1]:
            raise ValueError(f"radius {radius:g} exceeds the tabulated levels (L={self.L})")
        return float(self.sizes[: self.L + 1][r <= radius].sum())

    @classmethod
    def covering(cls, gamma: float, radius: float, S: float = 1.0) -> "AntiTreeRadial":
        """Smallest tabulation (doubling L) whose last sphere lies beyond ``radius``."""
        L = 16
        while True:
            rad = cls(gamma, L, S)
            if rad.root_distance[-1] > radius:
                return rad
            L *= 2


def line_ball_volume(radius, scale: float = 1.0):
    """Counting volume of a ball in Z whose hop length is ``scale``."""
    k = np.floor(np.asarray(radius, dtype=float) / scale + 1e-12)
    return 2 * k + 1

