"""
Effective flame fronts for u_t + alpha(Du) = 0 started from the unit circle.

The Hopf-Lax value is u(x, t) = max{x.p - t alpha(p) : |p| <= 1} - 1 and the
front at time t is Gamma_t = {p + t q : |p| = 1, q in the subdifferential of
alpha at p}.  Flat arcs of {alpha = 1} become translated unit-circle arcs and
corners of alpha become straight fans.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import minimize_scalar

from .geometry import LevelCurve, convexity_defect, edge_turning, uniform_angles

log = logging.getLogger(__name__)

KINDS = ("euclidean", "ell1", "sampled")
CORNER_FACTOR = 5.0


def _e(theta):
    return np.array([math.cos(theta), math.sin(theta)])


def _perp(theta):
    return np.array([-math.sin(theta), math.cos(theta)])


@dataclass
class AlphaModel:
    """Convex, positive, degree-1 homogeneous alpha given analytically or by samples.

    For ``kind="sampled"`` the table ``samples`` holds alpha(e_theta) on a
    uniform angle grid starting at theta = 0; it is interpolated by a
    periodic cubic spline, or piecewise between detected corners.  ``flat_arcs`` optionally lists index ranges of the
    table that lie on flat pieces of {alpha = 1}, each with the fitted line
    normal ``nu`` and offset ``h`` (line nu.x = h); on them Dalpha = nu/h.
    """

    kind: str = "euclidean"
    scale: float = 1.0
    samples: np.ndarray | None = None
    flat_arcs: list = field(default_factory=list)
    corners: list = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown alpha model kind {self.kind!r}")
        if self.scale <= 0:
            raise ValueError("scale must be positive")
        self._pieces = []
        if self.kind == "sampled":
            if self.samples is None or len(self.samples) < 8:
                raise ValueError("sampled model needs a table of at least 8 values")
            a = np.asarray(self.samples, dtype=float) * self.scale
            if np.any(a <= 0) or not np.all(np.isfinite(a)):
                raise ValueError("alpha samples must be positive and finite")
            self.samples = a / self.scale
            m = len(a)
            self._dtheta = 2 * np.pi / m
            if not self.corners:
                self.corners = self._detect_corners(a)
            if self.corners:
                log.warning("alpha table has apparent corners at indices %s (likely solver noise)", self.corners)
            self._build_splines(a)
        elif self.kind == "ell1":
            self.corners = [0, 1, 2, 3]

    # -- construction helpers ------------------------------------------------

    @classmethod
    def from_level_curve(cls, curve: LevelCurve) -> "AlphaModel":
        """Sampled model from a {alpha = 1} curve on a uniform angle grid, keeping its flat arcs."""
        m = len(curve)
        if not np.allclose(curve.thetas, uniform_angles(m), atol=1e-12):
            raise ValueError("level curve must be sampled on a uniform angle grid from 0")
        alphas = 1.0 / curve.radii
        arcs = []
        for arc in curve.flat_arcs:
            idx = arc.indices(m)
            nu = np.asarray(arc.normal, dtype=float)
            h = float(np.mean(curve.points[idx] @ nu))
            arcs.append({"indices": idx, "nu": nu, "h": h})
        return cls("sampled", 1.0, alphas, arcs)

    def _build_splines(self, a):
        """Periodic spline, or one spline per smooth piece between corners."""
        m = len(a)
        th = uniform_angles(m)
        if not self.corners:
            self._pieces = [(0.0, CubicSpline(np.append(th, 2 * np.pi), np.append(a, a[0]), bc_type="periodic"))]
            return
        cs = sorted(self.corners)
        self._pieces = []
        for c0, c1 in zip(cs, cs[1:] + [cs[0] + m]):
            idx = np.arange(c0, c1 + 1)
            kind = "not-a-knot" if len(idx) >= 4 else "natural"
            self._pieces.append((th[c0], CubicSpline(idx * self._dtheta, a[idx % m], bc_type=kind)))

    def _spline(self, theta, nu=0):
        theta = np.asarray(theta, dtype=float)
        if len(self._pieces) == 1:
            return self._pieces[0][1](np.mod(theta, 2 * np.pi), nu)
        out = np.empty_like(theta)
        th = np.mod(theta, 2 * np.pi)
        starts = np.array([s for s, _ in self._pieces])
        # piece j covers [start_j, start_{j+1}); angles before the first corner belong to the last piece
        which = np.searchsorted(starts, th, side="right") - 1
        for j, (s0, spl) in enumerate(self._pieces):
            sel = which == j
            if j == len(self._pieces) - 1:
                sel = sel | (which < 0)
            local = np.where(th[sel] < s0, th[sel] + 2 * np.pi, th[sel])
            out[sel] = spl(local, nu)
        return out if out.ndim else float(out)

    @staticmethod
    def _detect_corners(a):
        m = len(a)
        dth = 2 * np.pi / m
        fwd = (np.roll(a, -1) - a) / dth
        bwd = (a - np.roll(a, 1)) / dth
        jump = np.abs(fwd - bwd)
        scale = float(np.median(jump))
        floor = 1e-9 * float(np.abs(a).max()) / dth
        return [int(j) for j in np.flatnonzero(jump > max(CORNER_FACTOR * scale, floor))]

    # -- evaluation -------------------------------------------------------------

    def alpha_dir(self, theta):
        """alpha(e_theta), vectorized in theta."""
        theta = np.asarray(theta, dtype=float)
        if self.kind == "euclidean":
            return self.scale * np.ones_like(theta)
        if self.kind == "ell1":
            return self.scale * (np.abs(np.cos(theta)) + np.abs(np.sin(theta)))
        return self._spline(theta)

    def __call__(self, p) -> float:
        p = np.asarray(p, dtype=float)
        r = float(np.hypot(*p))
        if r == 0.0:
            return 0.0
        return r * float(self.alpha_dir(math.atan2(p[1], p[0])))

    def _flat_at(self, theta):
        if not self.flat_arcs:
            return None
        m = len(self.samples)
        j = theta / self._dtheta
        for arc in self.flat_arcs:
            idx = arc["indices"]
            if len(idx) < 2:
                continue
            # theta lies within the arc if its position past the first index is within the span
            off = (j - idx[0]) % m
            if off <= len(idx) - 1 + 1e-9:
                return arc
        return None

    def gradient(self, theta) -> np.ndarray:
        """Dalpha at e_theta (degree-0 homogeneous), at a point where alpha is differentiable."""
        if self.kind == "euclidean":
            return self.scale * _e(theta)
        if self.kind == "ell1":
            c, s = math.cos(theta), math.sin(theta)
            return self.scale * np.array([math.copysign(1.0, c), math.copysign(1.0, s)])
        arc = self._flat_at(theta)
        if arc is not None:
            return arc["nu"] / arc["h"]
        a = float(self._spline(theta % (2 * np.pi)))
        da = float(self._spline(theta % (2 * np.pi), 1))
        return a * _e(theta) + da * _perp(theta)

    def corner_angles(self) -> list:
        if self.kind == "ell1":
            return [0.0, 0.5 * np.pi, np.pi, 1.5 * np.pi]
        if self.kind == "sampled":
            return [j * self._dtheta for j in self.corners]
        return []

    def subgradient_ends(self, theta) -> tuple:
        """One-sided gradients (clockwise side, counter-clockwise side) at a corner."""
        if self.kind == "ell1":
            c, s = round(math.cos(theta)), round(math.sin(theta))
            if s == 0:
                return self.scale * np.array([c, -c]), self.scale * np.array([c, c])
            return self.scale * np.array([s, s]), self.scale * np.array([-s, s])
        j = int(round(theta / self._dtheta)) % len(self.samples)
        a = self.samples * self.scale
        fwd = (a[(j + 1) % len(a)] - a[j]) / self._dtheta
        bwd = (a[j] - a[j - 1]) / self._dtheta
        return a[j] * _e(theta) + bwd * _perp(theta), a[j] * _e(theta) + fwd * _perp(theta)

    def describe(self) -> dict:
        out = {"kind": self.kind, "scale": self.scale}
        if self.kind == "sampled":
            out.update(n_samples=len(self.samples), corners=list(self.corners), flat_arcs=len(self.flat_arcs))
        return out


# -- Hopf-Lax ------------------------------------------------------------------------


def _ell1_max(x, ts):
    """max over unit e of x.e - ts |e|_1, by the four quadrant arcs and the axis points."""
    best = max(abs(x[0]), abs(x[1])) - ts
    for s1 in (1.0, -1.0):
        for s2 in (1.0, -1.0):
            w = (x[0] - ts * s1, x[1] - ts * s2)
            if w[0] * s1 >= 0 and w[1] * s2 >= 0:
                best = max(best, math.hypot(*w))
    return best


def hopf_lax_value(x, t: float, m: AlphaModel, n_grid: int = 2048) -> float:
    """u(x, t) = max(0, max_theta (x.e_theta - t alpha(e_theta))) - 1.

    Exact for the euclidean and ell1 models.  For sampled models the best of
    ``n_grid`` angles is refined by a bounded scalar search, keeping the grid
    winner when refinement does not improve it (the objective need not be
    concave in theta).
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    x = np.asarray(x, dtype=float)
    if m.kind == "euclidean":
        inner = float(np.hypot(*x)) - t * m.scale
    elif m.kind == "ell1":
        inner = _ell1_max(x, t * m.scale)
    else:
        th = uniform_angles(n_grid)
        obj = x[0] * np.cos(th) + x[1] * np.sin(th) - t * m.alpha_dir(th)
        j = int(np.argmax(obj))
        inner = float(obj[j])
        d = 2 * np.pi / n_grid
        res = minimize_scalar(lambda s: -(x[0] * math.cos(s) + x[1] * math.sin(s) - t * float(m.alpha_dir(s))),
                              bounds=(th[j] - d, th[j] + d), method="bounded", options={"xatol": 1e-13})
        inner = max(inner, float(-res.fun))
    return max(0.0, inner) - 1.0


# -- front tracing ------------------------------------------------------------------


@dataclass
class FrontSnapshot:
    t: float
    points: np.ndarray
    provenance: list

    def rows(self) -> list:
        return [(self.t, float(p[0]), float(p[1]), tag) for p, tag in zip(self.points, self.provenance)]

    def segments(self, tag: str) -> list:
        """Maximal runs of consecutive points with the given provenance tag (cyclic)."""
        n = len(self.provenance)
        mask = np.array([p == tag for p in self.provenance])
        if mask.all():
            return [self.points]
        out = []
        start = int(np.flatnonzero(~mask)[0]) + 1 if (~mask).any() else 0
        run = []
        for j in range(n):
            i = (start + j) % n
            if mask[i]:
                run.append(self.points[i])
            elif run:
                out.append(np.array(run))
                run = []
        if run:
            out.append(np.array(run))
        return out


def front_trace(m: AlphaModel, t: float, n_angles: int = 256) -> FrontSnapshot:
    """Sample Gamma_t = {p + t q : p on the unit circle, q in dalpha(p)}.

    Regular angles emit p + t Dalpha(p).  At a corner of alpha the
    subdifferential is a segment and the corner point fans into a straight
    segment, sampled with the same arc-length density as the circle.
    Samples on flat arcs of a sampled model are tagged ``flat_translate``.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    dth = 2 * np.pi / n_angles
    corners = sorted(c % (2 * np.pi) for c in m.corner_angles())
    thetas = sorted(set(np.round(uniform_angles(n_angles), 15)) | set(np.round(corners, 15)))
    corner_set = set(np.round(corners, 15))
    pts, tags = [], []
    for th in thetas:
        p = _e(th)
        if th in corner_set:
            q0, q1 = m.subgradient_ends(th)
            length = t * float(np.hypot(*(q1 - q0)))
            k = max(1, int(math.ceil(length / dth)) + 1) if t > 0 else 1
            for tau in (np.linspace(0.0, 1.0, k) if k > 1 else [0.5]):
                pts.append(p + t * ((1 - tau) * q0 + tau * q1))
                tags.append("corner_fan")
            continue
        pts.append(p + t * m.gradient(th))
        flat = m.kind == "sampled" and m._flat_at(th) is not None
        tags.append("flat_translate" if flat else "regular")
    return FrontSnapshot(float(t), np.array(pts), tags)


def front_consistency(m: AlphaModel, t: float, snapshot: FrontSnapshot) -> dict:
    """Hopf-Lax residual, convexity defect and (for smooth models) strict-convexity witness."""
    u = np.array([hopf_lax_value(x, t, m) for x in snapshot.points])
    sin_turn, _, chord = edge_turning(snapshot.points)
    keep = chord > 1e-12
    turning = np.arcsin(np.clip(sin_turn[keep & np.roll(keep, 1)], -1, 1))
    report = {
        "t": t,
        "max_abs_u": float(np.abs(u).max()),
        "convexity_defect": convexity_defect(snapshot.points[keep]),
        "min_turning": float(turning.min()) if turning.size else 0.0,
        "n_points": len(snapshot.points),
    }
    report["strictly_convex"] = bool(m.kind == "euclidean" and report["min_turning"] > 0)
    return report
