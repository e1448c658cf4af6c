"""
Weak-flow expansion Hbar_eps(p) = |p|^2 + eps^2 a2(p) + O(eps^3).

a2(p) = 1/4 sum_k |p.v_k|^2 |k|^2 / |p.k|^2, the first corrector phi1 with
p.Dphi1 = -V.p / 2, the second corrector phi2 with
p.Dphi2 = (a2 - |Dphi1|^2 - V.Dphi1) / 2, small-divisor diagnostics, and
the numerical expansion-residual table.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .burnvel import burning_velocity
from .cell_solver import SolverConfig, hbar
from .errors import ResonanceError
from .flow import FlowField, GridFunction, grid_points

_ZERO = 1e-14


@dataclass
class PerturbationResult:
    p: tuple
    a2: float
    excluded_modes: list = field(default_factory=list)
    min_divisor: float = float("inf")
    corrector: GridFunction | None = None

    @property
    def truncated(self) -> bool:
        return bool(self.excluded_modes)

    def to_dict(self) -> dict:
        return {
            "p": [float(self.p[0]), float(self.p[1])],
            "a2": self.a2,
            "truncated": self.truncated,
            "excluded_modes": [list(k) for k in self.excluded_modes],
            "min_divisor": self.min_divisor,
        }


def _split_modes(p, f: FlowField, divisor_floor: float):
    """Partition modes into (kept, excluded); raise on exact resonance."""
    p = np.asarray(p, dtype=float).reshape(2)
    pn = float(np.hypot(*p))
    if pn == 0.0:
        raise ValueError("p must be nonzero")
    kept, excluded, min_div = [], [], float("inf")
    for k, v in f.modes:
        kn = math.hypot(*k)
        pk = float(p @ np.asarray(k, dtype=float))
        pv = complex(p @ v)
        if abs(pk) <= _ZERO * pn * kn:
            if abs(pv) > 1e-12 * pn * max(1.0, float(np.abs(v).max())):
                raise ResonanceError(f"p={tuple(p)} is resonant with mode k={k}: p.k = 0 but p.v_k = {pv:.3g}")
            continue
        if abs(pk) < divisor_floor * pn * kn:
            excluded.append(k)
            continue
        min_div = min(min_div, abs(pk) / (pn * kn))
        kept.append((k, v, pk, pv))
    return p, kept, excluded, min_div


def a2(p, f: FlowField, divisor_floor: float = 1e-6) -> PerturbationResult:
    """Second-order coefficient of the weak-flow expansion (unit amplitude).

    Examples
    --------
    >>> from flamehj.flow import make_shear_sin
    >>> a2((1.0, 1.0), make_shear_sin()).a2
    0.125
    """
    p, kept, excluded, min_div = _split_modes(p, f, divisor_floor)
    total = 0.0
    for k, v, pk, pv in kept:
        total += abs(pv) ** 2 * (k[0] ** 2 + k[1] ** 2) / pk ** 2
    return PerturbationResult((float(p[0]), float(p[1])), 0.25 * total, excluded, min_div)


def phi1_coefficients(p, f: FlowField, divisor_floor: float = 1e-6) -> dict:
    """Fourier coefficients -(p.v_k) / (4 pi i p.k) of the first corrector."""
    p, kept, _, _ = _split_modes(p, f, divisor_floor)
    return {k: -pv / (4j * np.pi * pk) for k, v, pk, pv in kept}


def _synth(coeffs: dict, x: np.ndarray, deriv: bool = False):
    """Evaluate sum c_k e^{2 pi i k.x} (or its gradient) at points x[..., 2]."""
    shape = x.shape[:-1]
    if not coeffs:
        return np.zeros(shape + ((2,) if deriv else ()))
    ks = np.array(list(coeffs), dtype=float)
    cs = np.array(list(coeffs.values()))
    ph = np.exp(2j * np.pi * (x @ ks.T)) * cs
    if deriv:
        return (2j * np.pi * ph @ ks).real
    return ph.sum(axis=-1).real


def corrector_phi1(p, f: FlowField, n: int = 64, divisor_floor: float = 1e-6) -> GridFunction:
    """phi1 sampled on the n x n grid; mean zero by construction."""
    return GridFunction(n, _synth(phi1_coefficients(p, f, divisor_floor), grid_points(n)))


def _products(c1: dict, c2: dict) -> dict:
    out: dict = {}
    for k1, a in c1.items():
        for k2, b in c2.items():
            k = (k1[0] + k2[0], k1[1] + k2[1])
            out[k] = out.get(k, 0.0) + a * b
    return out


def phi2_coefficients(p, f: FlowField, divisor_floor: float = 1e-6) -> dict:
    """Fourier coefficients of the second corrector.

    The right-hand side (a2 - |Dphi1|^2 - V.Dphi1) / 2 is a finite sum of
    products of modes; its mean vanishes by the definition of a2.
    """
    p = np.asarray(p, dtype=float).reshape(2)
    c1 = phi1_coefficients(p, f, divisor_floor)
    g1 = [{k: 2j * np.pi * k[i] * c for k, c in c1.items()} for i in (0, 1)]
    vel = [{k: v[i] for k, v in f.modes} for i in (0, 1)]
    rhs: dict = {}
    for i in (0, 1):
        for k, c in _products(g1[i], g1[i]).items():
            rhs[k] = rhs.get(k, 0.0) - 0.5 * c
        for k, c in _products(vel[i], g1[i]).items():
            rhs[k] = rhs.get(k, 0.0) - 0.5 * c
    rhs.pop((0, 0), None)
    pn = float(np.hypot(*p))
    out = {}
    for k, r in rhs.items():
        if abs(r) < 1e-15:
            continue
        pk = float(p @ np.asarray(k, dtype=float))
        if abs(pk) < divisor_floor * pn * math.hypot(*k):
            raise ResonanceError(f"second-order resonance at k={k} for p={tuple(p)}")
        out[k] = r / (2j * np.pi * pk)
    return out


def corrector_residual(p, f: FlowField, eps: float, order: int = 2, n: int = 64,
                       divisor_floor: float = 1e-6) -> float:
    """max |p+Dw|^2 + eps V.(p+Dw) - |p|^2 - eps^2 a2 over the grid.

    ``w = eps phi1`` for ``order=1`` (residual O(eps^2)) and
    ``w = eps phi1 + eps^2 phi2`` for ``order=2`` (residual O(eps^3)).
    All derivatives are exact spectral sums.
    """
    p = np.asarray(p, dtype=float).reshape(2)
    x = grid_points(n)
    dw = eps * _synth(phi1_coefficients(p, f, divisor_floor), x, deriv=True)
    if order >= 2:
        dw = dw + eps ** 2 * _synth(phi2_coefficients(p, f, divisor_floor), x, deriv=True)
    unit = f.with_amplitude(1.0)
    vel = np.stack([_synth({k: v[i] for k, v in unit.modes}, x) for i in (0, 1)], axis=-1)
    q = p + dw
    res = (q * q).sum(-1) + eps * (vel * q).sum(-1) - p @ p - eps ** 2 * a2(p, f, divisor_floor).a2
    return float(np.abs(res).max())


def residual_ratios(p, f: FlowField, eps_list=(0.2, 0.1, 0.05), order: int = 2, n: int = 64) -> list:
    """Ratios residual(eps_i) / residual(eps_{i+1}); about 2^(order+1) when eps halves."""
    res = [corrector_residual(p, f, e, order, n) for e in eps_list]
    return [a / b for a, b in zip(res, res[1:])]


def diophantine_quality(p, k_max: int = 50) -> dict:
    """min over 0 < |k| <= k_max of |p.k| |k|^gamma for gamma = 1, 2 (brute force)."""
    p = np.asarray(p, dtype=float).reshape(2)
    if not np.any(p):
        raise ValueError("p must be nonzero")
    r = np.arange(-k_max, k_max + 1)
    k1, k2 = np.meshgrid(r, r, indexing="ij")
    kn = np.hypot(k1, k2)
    mask = (kn > 0) & (kn <= k_max)
    dots = np.abs(p[0] * k1 + p[1] * k2)
    out = {}
    for gamma in (1, 2):
        q = np.where(mask, dots * kn ** gamma, np.inf)
        best = q.min()
        # among ties report the shortest k, oriented with a positive leading entry
        ties = np.argwhere(q <= best * (1 + 1e-12) + 1e-15)
        ties = sorted(ties, key=lambda ij: (kn[tuple(ij)], -k1[tuple(ij)], -k2[tuple(ij)]))
        j = tuple(ties[0])
        out[gamma] = {"quality": float(best), "k": (int(k1[j]), int(k2[j]))}
    return out


GOLDEN_DIRECTION = tuple(np.array([1.0, (1.0 + math.sqrt(5.0)) / 2.0]) / math.hypot(1.0, (1.0 + math.sqrt(5.0)) / 2.0))
SQRT2_DIRECTION = tuple(round(c, 12) for c in np.array([1.0, math.sqrt(2.0)]) / math.sqrt(3.0))


def expansion_residual(p, f: FlowField, eps_list=(0.2, 0.1, 0.05), cfg: SolverConfig = SolverConfig(),
                       with_alpha: bool = True) -> list:
    """Table of r_H = (Hbar_eps - |p|^2)/eps^2 and r_alpha = (alpha_eps - 2|p|)/(eps^2 |p|).

    ``f`` is rescaled to amplitude eps for each row; the target a2(p) is
    computed for the unit-amplitude field.
    """
    eps_list = [float(e) for e in eps_list]
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be decreasing")
    p = np.asarray(p, dtype=float).reshape(2)
    pn = float(np.hypot(*p))
    target = a2(p, f).a2 if not f.is_zero else 0.0
    rows = []
    for eps in eps_list:
        fe = f.with_amplitude(eps)
        h = hbar(p, fe, cfg)
        row = {
            "eps": eps,
            "hbar": h.value,
            "hbar_err": h.error_estimate,
            "ratio_H": (h.value - pn ** 2) / eps ** 2,
            "ratio_H_err": h.error_estimate / eps ** 2,
            "a2_target": target,
        }
        if with_alpha:
            b = burning_velocity(p, fe, cfg)
            row.update(alpha=b.alpha, alpha_err=b.error_estimate,
                       ratio_alpha=(b.alpha - 2.0 * pn) / (eps ** 2 * pn),
                       ratio_alpha_err=b.error_estimate / (eps ** 2 * pn))
        rows.append(row)
    return rows
