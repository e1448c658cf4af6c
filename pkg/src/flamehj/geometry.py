"""Angle-parametrized closed curves and discrete convexity measures."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class FlatArc:
    """A run of samples lying on a common line segment."""

    start_index: int
    end_index: int
    normal: tuple
    chord_deviation: float
    length: float = 0.0
    resonant_match: bool | None = None

    def indices(self, n_samples: int) -> list[int]:
        """Sample indices covered by the arc, wrapping around the curve."""
        if self.end_index >= self.start_index:
            return list(range(self.start_index, self.end_index + 1))
        return list(range(self.start_index, n_samples)) + list(range(0, self.end_index + 1))

    def to_dict(self) -> dict:
        return {
            "start_index": self.start_index,
            "end_index": self.end_index,
            "normal": [float(self.normal[0]), float(self.normal[1])],
            "chord_deviation": float(self.chord_deviation),
            "length": float(self.length),
            "resonant_match": self.resonant_match,
        }


@dataclass
class LevelCurve:
    """Samples of a star-shaped convex level curve ordered by polar angle.

    ``values`` holds the function value used to place each sample (the
    level itself up to solver tolerance) and ``errors`` the per-sample
    error estimate that went into it.
    """

    thetas: np.ndarray
    points: np.ndarray
    values: np.ndarray
    errors: np.ndarray | None = None
    flat_arcs: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        self.thetas = np.asarray(self.thetas, dtype=float)
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 2)
        self.values = np.asarray(self.values, dtype=float)
        if self.errors is None:
            self.errors = np.zeros_like(self.thetas)
        self.errors = np.asarray(self.errors, dtype=float)
        if len(self.thetas) != len(self.points):
            raise ValueError("thetas and points differ in length")
        if len(self.thetas) > 1 and np.any(np.diff(self.thetas) <= 0):
            raise ValueError("samples must be ordered by strictly increasing angle")

    def __len__(self) -> int:
        return len(self.thetas)

    @property
    def radii(self) -> np.ndarray:
        return np.hypot(self.points[:, 0], self.points[:, 1])

    def roundness_defect(self) -> float:
        """max radius / min radius - 1."""
        r = self.radii
        return float(r.max() / r.min() - 1.0)


def uniform_angles(n_angles: int) -> np.ndarray:
    return 2.0 * np.pi * np.arange(n_angles) / n_angles


def edge_turning(points: np.ndarray):
    """Signed turning at each vertex of a closed polygon.

    Returns ``(sin_turn, kappa, chord)`` where ``sin_turn[j]`` is the sine of
    the turning angle at vertex j, ``kappa[j]`` the turning angle per unit
    chord length there, and ``chord[j]`` the length of edge j -> j+1.
    """
    pts = np.asarray(points, dtype=float)
    e_next = np.roll(pts, -1, axis=0) - pts
    e_prev = pts - np.roll(pts, 1, axis=0)
    chord = np.hypot(e_next[:, 0], e_next[:, 1])
    chord_prev = np.roll(chord, 1)
    cross = e_prev[:, 0] * e_next[:, 1] - e_prev[:, 1] * e_next[:, 0]
    dot = (e_prev * e_next).sum(axis=1)
    angle = np.arctan2(cross, dot)
    sin_turn = cross / np.maximum(chord * chord_prev, 1e-300)
    kappa = angle / np.maximum(0.5 * (chord + chord_prev), 1e-300)
    return sin_turn, kappa, chord


def convexity_defect(points: np.ndarray) -> float:
    """Largest clockwise turning angle (0 for a counter-clockwise convex polygon)."""
    pts = np.asarray(points, dtype=float)
    e_next = np.roll(pts, -1, axis=0) - pts
    e_prev = pts - np.roll(pts, 1, axis=0)
    cross = e_prev[:, 0] * e_next[:, 1] - e_prev[:, 1] * e_next[:, 0]
    dot = (e_prev * e_next).sum(axis=1)
    angle = np.arctan2(cross, dot)
    return float(max(0.0, -angle.min()))


def is_convex(points: np.ndarray, tol: float = 1e-9) -> bool:
    return convexity_defect(points) <= tol


def point_in_convex_polygon(x, polygon: np.ndarray, tol: float = 0.0) -> bool:
    """True when ``x`` lies inside (or within ``tol`` of) a CCW convex polygon."""
    poly = np.asarray(polygon, dtype=float)
    e = np.roll(poly, -1, axis=0) - poly
    rel = np.asarray(x, dtype=float) - poly
    cross = e[:, 0] * rel[:, 1] - e[:, 1] * rel[:, 0]
    lengths = np.hypot(e[:, 0], e[:, 1])
    return bool(np.all(cross >= -tol * np.maximum(lengths, 1e-300)))
