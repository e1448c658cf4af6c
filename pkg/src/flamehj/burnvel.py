"""
Effective burning velocity

    alpha(p) = inf_{lam > 0} (1 + Hbar(lam p)) / lam,

its unit level curve, flat-piece detection on that curve, and the Fourier
resonance scan that predicts the normals of flat pieces in weak flows.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .cell_solver import HbarEvaluator, SolverConfig, resolve_method
from .flow import TWO_PI, FlowField, symmetry_group
from .geometry import FlatArc, LevelCurve, convexity_defect, edge_turning, uniform_angles
from .parallel import chunked_map

log = logging.getLogger(__name__)

INVPHI = (math.sqrt(5.0) - 1.0) / 2.0
MAX_DOUBLINGS = 40
FD_STEP = 1e-2


@dataclass
class BurningVelocityResult:
    p: tuple
    alpha: float
    lambda_p: float
    bracket: tuple
    optimality_gap: float
    hbar_at_min: float
    error_estimate: float = 0.0
    gap_bound: float = float("inf")
    evaluations: int = 0
    method: str = ""

    def to_dict(self) -> dict:
        return {
            "p": [float(self.p[0]), float(self.p[1])],
            "alpha": self.alpha,
            "lambda_p": self.lambda_p,
            "bracket": [float(self.bracket[0]), float(self.bracket[1])],
            "optimality_gap": self.optimality_gap,
            "hbar_at_min": self.hbar_at_min,
            "error_estimate": self.error_estimate,
            "gap_bound": self.gap_bound,
            "evaluations": self.evaluations,
            "method": self.method,
        }


def _golden(h, lo, hi, rel_tol):
    """Golden-section minimization of a unimodal ``h`` on [lo, hi]."""
    c = hi - INVPHI * (hi - lo)
    d = lo + INVPHI * (hi - lo)
    hc, hd = h(c), h(d)
    while hi - lo >= rel_tol * 0.5 * (lo + hi):
        if hc <= hd:
            hi, d, hd = d, c, hc
            c = hi - INVPHI * (hi - lo)
            hc = h(c)
        else:
            lo, c, hc = c, d, hd
            d = lo + INVPHI * (hi - lo)
            hd = h(d)
    return (c, hc) if hc <= hd else (d, hd), (lo, hi)


def _bracket(h, lam0):
    """Expand from lam0 by doubling or halving until h rises on both sides."""
    lo, mid, hi = 0.5 * lam0, lam0, 2.0 * lam0
    h_lo, h_mid, h_hi = h(lo), h(mid), h(hi)
    for _ in range(MAX_DOUBLINGS):
        if h_mid <= h_lo and h_mid <= h_hi:
            return lo, hi
        if h_hi < h_mid:
            lo, mid, h_lo, h_mid = mid, hi, h_mid, h_hi
            hi *= 2.0
            h_hi = h(hi)
        else:
            hi, mid, h_hi, h_mid = mid, lo, h_mid, h_lo
            lo *= 0.5
            h_lo = h(lo)
    raise ValueError(f"no minimizing bracket for lambda within {MAX_DOUBLINGS} doublings from {lam0:g}")


class AlphaSolver:
    """Burning-velocity evaluator with a shared, warm-started Hbar cache."""

    def __init__(self, f: FlowField, cfg: SolverConfig = SolverConfig()):
        self.f = f
        self.cfg = cfg
        self.hbar = HbarEvaluator(f, cfg)

    def __call__(self, p) -> BurningVelocityResult:
        p = np.asarray(p, dtype=float).reshape(2)
        norm = float(np.hypot(*p))
        if norm == 0.0:
            raise ValueError("burning velocity needs p != 0")
        rel_tol = self.cfg.alpha_rel_tol
        calls0 = self.hbar.calls

        def hb(lam):
            return self.hbar(lam * p)

        def h(lam):
            return (1.0 + hb(lam).value) / lam

        lo, hi = _bracket(h, 1.0 / norm)
        (lam, _), bracket = _golden(h, lo, hi, rel_tol)
        res0 = hb(lam)
        hbar0 = res0.value
        alpha = (1.0 + hbar0) / lam

        step = FD_STEP * lam
        plus, minus = hb(lam + step), hb(lam - step)
        dhbar = (plus.value - minus.value) / (2.0 * step)
        gap = lam * dhbar - (1.0 + hbar0)
        h_plus = (1.0 + plus.value) / (lam + step)
        h_minus = (1.0 + minus.value) / (lam - step)
        curv = abs(h_plus - 2.0 * alpha + h_minus) / step ** 2
        err_h = max(res0.error_estimate, plus.error_estimate, minus.error_estimate)
        gap_bound = 5.0 * step * lam ** 2 * curv + 2.0 * err_h / FD_STEP + 1e-12 * (1.0 + hbar0)
        err = res0.error_estimate / lam + 0.5 * curv * (rel_tol * lam) ** 2
        return BurningVelocityResult(
            p=(float(p[0]), float(p[1])),
            alpha=alpha,
            lambda_p=lam,
            bracket=bracket,
            optimality_gap=gap,
            hbar_at_min=hbar0,
            error_estimate=err,
            gap_bound=gap_bound,
            evaluations=self.hbar.calls - calls0,
            method=resolve_method(self.f, self.cfg),
        )

    def h(self, p, lam) -> float:
        """Objective (1 + Hbar(lam p)) / lam."""
        return (1.0 + self.hbar(lam * np.asarray(p, dtype=float)).value) / lam


def burning_velocity(p, f: FlowField, cfg: SolverConfig = SolverConfig()) -> BurningVelocityResult:
    """alpha(p) by golden-section search over lam, bracket seeded at 1/|p|.

    Examples
    --------
    >>> from flamehj.flow import make_zero
    >>> r = burning_velocity((3.0, 4.0), make_zero())
    >>> round(r.alpha, 6), round(r.lambda_p, 3)
    (10.0, 0.2)
    """
    return AlphaSolver(f, cfg)(p)


def _orbits(f: FlowField, n_angles: int):
    """Map each grid angle to a representative under the flow's symmetry group."""
    group = symmetry_group(f)
    thetas = uniform_angles(n_angles)
    rep = [-1] * n_angles
    reps = []
    for j, th in enumerate(thetas):
        if rep[j] >= 0:
            continue
        reps.append(j)
        e = np.array([math.cos(th), math.sin(th)])
        for g in group:
            ge = g @ e
            pos = (math.atan2(ge[1], ge[0]) % TWO_PI) * n_angles / TWO_PI
            i = int(round(pos)) % n_angles
            if abs(pos - round(pos)) < 1e-9 and rep[i] < 0:
                rep[i] = j
    return reps, rep, len(group)


def alpha_level_curve(f: FlowField, cfg: SolverConfig = SolverConfig(), n_angles: int = 64,
                      threads: int = 1, use_symmetry: bool = True) -> LevelCurve:
    """Sample {alpha = 1} as e_theta / alpha(e_theta) on a uniform angle grid.

    With ``use_symmetry`` alpha is computed once per orbit of the flow's
    lattice symmetry group (for example one eighth of the angles for
    cellular flow) and copied to the other members.
    """
    if n_angles < 64:
        raise ValueError("n_angles must be >= 64")
    thetas = uniform_angles(n_angles)
    if use_symmetry:
        reps, rep, order = _orbits(f, n_angles)
    else:
        reps, rep, order = list(range(n_angles)), list(range(n_angles)), 1

    def work(chunk):
        solver = AlphaSolver(f, cfg)
        return [solver((math.cos(thetas[j]), math.sin(thetas[j]))) for j in chunk]

    computed = dict(zip(reps, chunked_map(work, reps, threads)))
    results = [computed[rep[j]] for j in range(n_angles)]
    alphas = np.array([r.alpha for r in results])
    dirs = np.column_stack([np.cos(thetas), np.sin(thetas)])
    rel_err = np.array([r.error_estimate / r.alpha for r in results])
    return LevelCurve(
        thetas, dirs / alphas[:, None], alphas, rel_err,
        meta={"kind": "alpha", "level": 1.0, "flow": f.label, "amplitude": f.amplitude,
              "method": resolve_method(f, cfg), "n": cfg.n, "alpha_rel_tol": cfg.alpha_rel_tol,
              "symmetry_order": order, "alpha_evaluations": len(reps)},
        extras={"lambda_p": np.array([r.lambda_p for r in results]),
                "optimality_gap": np.array([r.optimality_gap for r in results]),
                "gap_bound": np.array([r.gap_bound for r in results])},
    )


# -- flat pieces ------------------------------------------------------------------


def default_kappa_tol(curve: LevelCurve) -> float:
    """4 x (largest relative alpha error) / (mean chord length)."""
    _, _, chord = edge_turning(curve.points)
    rel = float(np.max(curve.errors)) if len(curve.errors) else 0.0
    rel = max(rel, curve.meta.get("alpha_rel_tol", 0.0) ** 2, 1e-12)
    return 4.0 * rel / float(chord.mean())


def _canonical(v):
    v = np.asarray(v, dtype=float)
    v = v / np.hypot(*v)
    if v[0] < -1e-12 or (abs(v[0]) <= 1e-12 and v[1] < 0):
        v = -v
    return v


def _cyclic_runs(mask):
    """Maximal runs of True in a cyclic boolean array as (start, length)."""
    n = len(mask)
    if mask.all():
        return [(0, n)]
    start = int(np.flatnonzero(~mask)[0]) + 1
    runs, j = [], 0
    while j < n:
        i = (start + j) % n
        if mask[i]:
            k = 0
            while k < n and mask[(i + k) % n]:
                k += 1
            runs.append((i, k))
            j += k
        else:
            j += 1
    return runs


def _fit_line(pts):
    centre = pts.mean(axis=0)
    _, _, vt = np.linalg.svd(pts - centre)
    normal, tangent = vt[1], vt[0]
    if normal @ centre < 0:
        normal = -normal
    dev = float(np.abs((pts - centre) @ normal).max())
    along = (pts - centre) @ tangent
    return normal, dev, float(along.max() - along.min())


def detect_flat_pieces(curve: LevelCurve, kappa_tol: float | None = None, resonances=None,
                       angle_tol: float | None = None) -> LevelCurve:
    """Mark maximal runs of >= 3 samples with turning per unit chord below ``kappa_tol``.

    Each vertex j whose turning |kappa_j| is below threshold certifies that
    samples j-1, j, j+1 are collinear to within tolerance; a run of such
    vertices a..b gives the arc of samples a-1..b+1.  When ``resonances``
    (output of ``resonant_directions``) is given, each arc's normal is
    compared with the predicted normal families.
    """
    pts = curve.points
    n = len(pts)
    defect = convexity_defect(pts)
    if defect > 1e-6:
        log.warning("level curve is not convex (defect %.3g); flat-piece detection may be unreliable", defect)
    if kappa_tol is None:
        kappa_tol = default_kappa_tol(curve)
    _, kappa, _ = edge_turning(pts)
    flat = np.abs(kappa) < kappa_tol
    if angle_tol is None:
        angle_tol = 2.0 * TWO_PI / n
    arcs = []
    for start, length in _cyclic_runs(flat):
        if length >= n - 2:
            idx = list(range(n))
            a, b = 0, n - 1
        else:
            a, b = (start - 1) % n, (start + length) % n
            idx = [(a + j) % n for j in range(length + 2)]
        normal, dev, span = _fit_line(pts[idx])
        match = None
        if resonances is not None:
            match = any(abs(abs(float(normal @ np.asarray(r["normal"]))) - 1.0) <= 1.0 - math.cos(angle_tol)
                        for r in resonances)
        arcs.append(FlatArc(a, b, (float(normal[0]), float(normal[1])), dev, span, match))
    out = LevelCurve(curve.thetas, curve.points, curve.values, curve.errors, arcs,
                     dict(curve.meta, kappa_tol=kappa_tol), dict(curve.extras))
    return out


def flat_families(curve: LevelCurve, angle_tol: float = 0.1) -> list:
    """Group flat arcs into +-normal families; returns canonical unit normals."""
    fams = []
    for arc in curve.flat_arcs:
        nrm = _canonical(arc.normal)
        if not any(abs(float(nrm @ g)) > math.cos(angle_tol) for g in fams):
            fams.append(nrm)
    return fams


# -- resonances and line integrals -----------------------------------------------


def _primitive(k):
    g = math.gcd(abs(int(k[0])), abs(int(k[1])))
    a, b = int(k[0]) // g, int(k[1]) // g
    if a < 0 or (a == 0 and b < 0):
        a, b = -a, -b
    return (a, b), g


def resonant_directions(f: FlowField) -> list:
    """Predicted flat-piece normals: q = k_perp/|k| for each primitive mode direction.

    One entry per +- family, with the normal oriented to have a positive first
    component (positive second component when the first vanishes) and
    strength max_m |A v_{m k}|.
    """
    families: dict = {}
    for k, v in f.modes:
        mag = abs(f.amplitude) * float(np.sqrt(np.sum(np.abs(v) ** 2)))
        if mag == 0.0:
            continue
        prim, _ = _primitive(k)
        families[prim] = max(families.get(prim, 0.0), mag)
    out = []
    for (a, b), strength in sorted(families.items()):
        q = _canonical((-b, a))
        out.append({"normal": (float(q[0]), float(q[1])), "wavevector": (a, b), "strength": strength})
    return out


def rational_direction(q, max_den: int = 1000) -> tuple[int, int]:
    """Integer pair (a, b), gcd 1, with (a, b)/|(a, b)| equal to the unit vector ``q``."""
    q = np.asarray(q, dtype=float).reshape(2)
    if np.all(np.abs(q - np.round(q)) == 0) and np.any(q != 0):
        (a, b), _ = _primitive(np.round(q).astype(int))
        if np.dot((a, b), q) < 0:
            a, b = -a, -b
        return a, b
    norm = float(np.hypot(*q))
    if norm == 0.0:
        raise ValueError("direction must be nonzero")
    u = q / norm
    if abs(u[0]) >= abs(u[1]):
        fr = Fraction(u[1] / u[0]).limit_denominator(max_den)
        a, b = fr.denominator, fr.numerator
        if u[0] < 0:
            a, b = -a, -b
    else:
        fr = Fraction(u[0] / u[1]).limit_denominator(max_den)
        a, b = fr.numerator, fr.denominator
        if u[1] < 0:
            a, b = -a, -b
    if np.hypot(*(np.array([a, b]) / math.hypot(a, b) - u)) > 1e-12:
        raise ValueError(f"direction {tuple(q)} is not rational (denominator <= {max_den})")
    return a, b


def line_integral_prediction(f: FlowField, ab, x0) -> np.ndarray:
    """Fourier-side value of int_0^T D(q.V)(x0 + q t) dt: only modes with k.(a,b) = 0 survive."""
    a, b = ab
    T = math.hypot(a, b)
    q = np.array([a, b]) / T
    x0 = np.asarray(x0, dtype=float)
    total = np.zeros(2, dtype=complex)
    for k, v in f.modes:
        if k[0] * a + k[1] * b == 0:
            total += 2j * np.pi * (q @ v) * np.asarray(k, dtype=float) * np.exp(2j * np.pi * (np.dot(k, x0)))
    return (T * f.amplitude * total).real


def line_integral_check(f: FlowField, q, x0, n_quad: int | None = None) -> np.ndarray:
    """Quadrature value of the vector line integral int_0^T D(q.V)(x0 + q t) dt.

    ``q`` must be a rational direction (an integer pair or the corresponding
    unit vector); T = |(a, b)| makes the integrand T-periodic, so the
    trapezoid rule with more nodes than the largest frequency is exact.
    """
    a, b = rational_direction(q)
    T = math.hypot(a, b)
    qu = np.array([a, b]) / T
    x0 = np.asarray(x0, dtype=float)
    if f.is_zero:
        return np.zeros(2)
    kk = f.wavevectors
    vv = f.coefficients
    top = int(np.abs(kk @ np.array([a, b])).max())
    m = n_quad or 2 * top + 16
    t = T * np.arange(m) / m
    xs = x0[None, :] + t[:, None] * qu[None, :]
    phase = np.exp(2j * np.pi * xs @ kk.T)          # (m, modes)
    qv = vv @ qu                                      # (modes,)
    grad = 2j * np.pi * (phase * qv[None, :]) @ kk    # (m, 2)
    return (T * f.amplitude * grad.mean(axis=0)).real
