"""
Effective Hamiltonian of the periodic cell problem

    |p + Du|^2 + A V(x).(p + Du) = Hbar(p)   on the 2-torus.

Three routes are provided:

* ``hbar_time_marching`` -- explicit monotone Lax-Friedrichs marching of
  w_t + H(p + Dw, x) = 0; Hbar is minus the long-time slope of w.
* ``hbar_discounted`` -- the discounted problem eps v + H(p + Dv, x) = 0 on
  a Godunov upwind grid, solved by damped Newton, with Hbar = lim -eps v.
* ``shear_oracle`` -- closed-form evaluation for shear flows (v(x2), 0).

Both grid solvers are first order; by default they are run on the levels
n/4, n/2, n and Richardson-extrapolated in the mesh size.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import minimize_scalar

from .errors import NonConvergenceError
from .flow import FlowField, GridFunction, shear_profile, velocity_on_grid
from .geometry import LevelCurve, uniform_angles

log = logging.getLogger(__name__)

METHODS = ("time_marching", "discounted", "shear_oracle", "auto")

_WINDOW = 50  # time steps between slope samples
_LF_SAFETY = 1.2


@dataclass(frozen=True)
class SolverConfig:
    """Numerical parameters shared by the Hbar solvers.

    ``tol`` bounds the spatial oscillation of the marching slope and, scaled
    down by 1e-3, the Newton residual of the discounted solver.
    """

    n: int = 64
    dt_safety: float = 0.9
    t_max: float = 400.0
    tol: float = 1e-6
    discount_eps_list: tuple = (0.1, 0.05, 0.025)
    cross_check: bool = False
    method: str = "discounted"
    richardson: bool = True
    quad_n: int = 1024
    alpha_rel_tol: float = 1e-4
    max_newton: int = 80

    def __post_init__(self):
        object.__setattr__(self, "discount_eps_list", tuple(float(e) for e in self.discount_eps_list))
        if self.n < 32 or self.n % 2:
            raise ValueError(f"n must be even and >= 32, got {self.n}")
        if self.richardson and self.n % 4:
            raise ValueError("Richardson extrapolation needs n divisible by 4")
        if not 0.0 < self.dt_safety <= 1.0:
            raise ValueError("dt_safety must lie in (0, 1]")
        if self.tol <= 0 or self.t_max <= 0:
            raise ValueError("tol and t_max must be positive")
        eps = self.discount_eps_list
        if len(eps) < 2 or any(e <= 0 for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
            raise ValueError("discount_eps_list needs >= 2 strictly decreasing positive entries")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.quad_n < 256:
            raise ValueError("quad_n must be >= 256")
        if not 0.0 < self.alpha_rel_tol < 0.1:
            raise ValueError("alpha_rel_tol must lie in (0, 0.1)")

    def with_(self, **changes) -> "SolverConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "dt_safety": self.dt_safety,
            "t_max": self.t_max,
            "tol": self.tol,
            "discount_eps_list": list(self.discount_eps_list),
            "cross_check": self.cross_check,
            "method": self.method,
            "richardson": self.richardson,
            "quad_n": self.quad_n,
            "alpha_rel_tol": self.alpha_rel_tol,
            "max_newton": self.max_newton,
        }


@dataclass
class HbarResult:
    p: tuple
    value: float
    method: str
    residual: float
    error_estimate: float
    iterations: int
    diagnostics: dict = field(default_factory=dict)
    state: dict | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "p": [float(self.p[0]), float(self.p[1])],
            "value": float(self.value),
            "method": self.method,
            "residual": float(self.residual),
            "error_estimate": float(self.error_estimate),
            "iterations": int(self.iterations),
        }

    def corrector(self) -> GridFunction | None:
        """Finest-level corrector, normalized to mean zero."""
        if not self.state:
            return None
        n = max(self.state)
        u = self.state[n] - self.state[n].mean()
        return GridFunction(n, u)


def _check_p(p, f: FlowField):
    p = np.asarray(p, dtype=float).reshape(2)
    if not np.all(np.isfinite(p)):
        raise ValueError("p must be finite")
    bound = 10.0 * max(1.0, abs(f.amplitude))
    if np.hypot(*p) > bound:
        raise ValueError(f"|p| = {np.hypot(*p):.3g} exceeds 10 max(1, A) = {bound:.3g}")
    return p


def _levels(cfg: SolverConfig) -> list[int]:
    return [cfg.n // 4, cfg.n // 2, cfg.n] if cfg.richardson else [cfg.n]


def _refine(c: np.ndarray) -> np.ndarray:
    """Bilinear prolongation of a periodic grid function to twice the resolution."""
    n = c.shape[0]
    fine = np.empty((2 * n, 2 * n))
    fine[::2, ::2] = c
    fine[1::2, ::2] = 0.5 * (c + np.roll(c, -1, axis=0))
    fine[:, 1::2] = 0.5 * (fine[:, ::2] + np.roll(fine[:, ::2], -1, axis=1))
    return fine


def _restrict(c: np.ndarray, m: int) -> np.ndarray:
    n = c.shape[0]
    while n > m:
        c = c[::2, ::2]
        n //= 2
    return c


def _initial_state(warm: dict | None, m: int, coarse: np.ndarray | None):
    if warm:
        if m in warm:
            return warm[m].copy()
        finer = [k for k in warm if k > m and k % m == 0]
        if finer:
            return _restrict(warm[min(finer)], m).copy()
    if coarse is not None:
        return _refine(coarse)
    return None


def _combine_levels(values: list[float], internal: list[float]):
    """Richardson value and error estimate from per-level values (coarse to fine)."""
    if len(values) == 1:
        return values[0], internal[0]
    h4, h2, h1 = values
    fine = 2.0 * h1 - h2
    coarse = 2.0 * h2 - h4
    return fine, abs(fine - coarse) + 2.0 * internal[-1] + internal[-2]


# -- Lax-Friedrichs time marching --------------------------------------------


def _lf_rhs(w, p, V, h):
    fx = (np.roll(w, -1, axis=0) - w) / h
    bx = (w - np.roll(w, 1, axis=0)) / h
    fy = (np.roll(w, -1, axis=1) - w) / h
    by = (w - np.roll(w, 1, axis=1)) / h
    # per-axis dissipation >= max |dH/dp_i| over both one-sided gradients
    s1 = _LF_SAFETY * max(np.abs(2.0 * (p[0] + fx) + V[0]).max(), np.abs(2.0 * (p[0] + bx) + V[0]).max())
    s2 = _LF_SAFETY * max(np.abs(2.0 * (p[1] + fy) + V[1]).max(), np.abs(2.0 * (p[1] + by) + V[1]).max())
    # a unit floor keeps dt finite when the characteristic speed vanishes (p = 0, no flow)
    s1 = max(s1, 1.0)
    s2 = max(s2, 1.0)
    px = p[0] + 0.5 * (fx + bx)
    py = p[1] + 0.5 * (fy + by)
    ham = px * px + py * py + V[0] * px + V[1] * py - 0.5 * s1 * (fx - bx) - 0.5 * s2 * (fy - by)
    return ham, s1, s2


def _march_level(p, V, m, w0, cfg: SolverConfig):
    h = 1.0 / m
    w = np.zeros((m, m)) if w0 is None else w0 - w0.mean()
    t, steps = 0.0, 0
    w_ref, t_ref = w.copy(), 0.0
    best, osc = float("nan"), float("inf")
    while t < cfg.t_max:
        ham, s1, s2 = _lf_rhs(w, p, V, h)
        dt = cfg.dt_safety * h / (s1 + s2)
        w = w - dt * ham
        t += dt
        steps += 1
        if steps % _WINDOW == 0:
            slope = (w - w_ref) / (t - t_ref)
            osc = float(slope.max() - slope.min())
            best = -float(slope.mean())
            w_ref, t_ref = w.copy(), t
            if osc < cfg.tol:
                ham, _, _ = _lf_rhs(w, p, V, h)
                residual = float(np.abs(ham - best).max())
                return best, osc, steps, w - w.mean(), residual
    if t > t_ref:
        # partial window: still report the latest slope as the best estimate
        slope = (w - w_ref) / (t - t_ref)
        osc = float(slope.max() - slope.min())
        best = -float(slope.mean())
    raise NonConvergenceError(
        f"time marching reached t_max={cfg.t_max} at n={m} with slope oscillation {osc:.3g}",
        best_estimate=best,
        oscillation=osc,
    )


def hbar_time_marching(p, f: FlowField, cfg: SolverConfig = SolverConfig(), warm: dict | None = None) -> HbarResult:
    """Hbar as minus the long-time slope of the Lax-Friedrichs marching scheme.

    The slope ``(w(t+D) - w(t)) / D`` is sampled every 50 steps.  For the
    monotone scheme the discrete Hbar lies between its min and max over the
    grid, so the final oscillation bounds the iteration error.
    """
    p = _check_p(p, f)
    values, internal, state = [], [], {}
    total, residual, coarse = 0, 0.0, None
    for m in _levels(cfg):
        V = velocity_on_grid(f, m)
        w0 = _initial_state(warm, m, coarse)
        val, osc, steps, w, residual = _march_level(p, V, m, w0, cfg)
        values.append(val)
        internal.append(osc)
        state[m] = w
        coarse = w
        total += steps
    value, err = _combine_levels(values, internal)
    return HbarResult(
        p=(float(p[0]), float(p[1])),
        value=value,
        method="time_marching",
        residual=residual,
        error_estimate=err,
        iterations=total,
        diagnostics={"levels": dict(zip(_levels(cfg), values))},
        state=state,
    )


# -- discounted problem, Godunov upwind + Newton ------------------------------


def _godunov(v, p, V, h):
    """Godunov numerical Hamiltonian of the axis-separable H and its partials.

    Per axis g(s) = (p_i + s)^2 + V_i (p_i + s) is convex with minimizer
    s* = -p_i - V_i / 2; the flux is max(g(max(a, s*)), g(min(b, s*))) for
    backward difference a and forward difference b.
    """
    total = 0.0
    parts = []
    for ax in (0, 1):
        a = (v - np.roll(v, 1, axis=ax)) / h
        b = (np.roll(v, -1, axis=ax) - v) / h
        star = -p[ax] - 0.5 * V[ax]
        ta = p[ax] + np.maximum(a, star)
        tb = p[ax] + np.minimum(b, star)
        ga = ta * (ta + V[ax])
        gb = tb * (tb + V[ax])
        use_a = ga >= gb
        total = total + np.where(use_a, ga, gb)
        da = np.where(use_a & (a > star), 2.0 * (p[ax] + a) + V[ax], 0.0)
        db = np.where(~use_a & (b < star), 2.0 * (p[ax] + b) + V[ax], 0.0)
        parts.append((da, db))
    return total, parts


@lru_cache(maxsize=16)
def _stencil(m: int):
    idx = np.arange(m * m).reshape(m, m)
    return idx.ravel(), [(np.roll(idx, 1, axis=ax).ravel(), np.roll(idx, -1, axis=ax).ravel()) for ax in (0, 1)]


def _jacobian(eps, parts, m, h):
    centre, nbrs = _stencil(m)
    diag = np.full(m * m, eps)
    rows, cols, vals = [], [], []
    for (da, db), (back, fwd) in zip(parts, nbrs):
        da = da.ravel() / h
        db = db.ravel() / h
        diag += da - db
        rows += [centre, centre]
        cols += [back, fwd]
        vals += [-da, db]
    rows.append(centre)
    cols.append(centre)
    vals.append(diag)
    # CSR input makes SuperLU order the transposed system, which is noticeably faster for this stencil
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(m * m, m * m)
    )


def _roundoff(eps, c, w, g):
    """Smallest residual resolvable in double precision given the size of the terms."""
    return 1e-13 * max(1.0, abs(eps * c) + float(np.abs(eps * w).max()), float(np.abs(g).max()))


def _newton(v, eps, p, V, h, tol, max_iter):
    """Damped Newton for eps v + G(v) = 0.

    v is carried as a scalar offset c plus a fluctuation w: the offset is of
    size Hbar/eps and would otherwise swamp the difference quotients in G
    with cancellation error once eps is small.

    When the line search fails (G is only piecewise smooth) the step is
    regularised to (J + mu I) d = -res, an implicit pseudo-time step that
    is contractive in the max norm because J is an M-matrix; mu is relaxed
    again after each successful step so fast Newton convergence returns.
    """
    m = v.shape[0]
    w = v - float(v.mean())
    g, parts = _godunov(w, p, V, h)
    # G does not see the offset, so the constant mode is solved exactly before any linear solve
    c = -float(g.mean()) / eps
    res = eps * c + eps * w + g
    r = float(np.abs(res).max())
    its, mu, budget = 0, 0.0, 4 * max_iter
    eye = sp.identity(m * m, format="csr")
    while r > max(tol, _roundoff(eps, c, w, g)):
        if its >= budget:
            raise NonConvergenceError(
                f"Newton for the discounted problem (eps={eps:g}, n={m}) stalled at residual {r:.3g}",
                best_estimate=-eps * (c + float(w.mean())),
                oscillation=r,
            )
        its += 1
        jac = _jacobian(eps, parts, m, h)
        step = spla.spsolve(jac + mu * eye if mu > 0 else jac, -res.ravel()).reshape(m, m)
        shift = float(step.mean())
        step -= shift
        lam = 1.0
        while lam >= 1e-3:
            c_t, w_t = c + lam * shift, w + lam * step
            g_t, parts_t = _godunov(w_t, p, V, h)
            res_t = eps * c_t + eps * w_t + g_t
            r_t = float(np.abs(res_t).max())
            if r_t < (1.0 - 1e-4 * lam) * r:
                break
            lam *= 0.5
        if lam < 1e-3:
            scale = float(np.abs(jac.diagonal()).max())
            mu = 1e-2 * scale if mu == 0.0 else 10.0 * mu
            continue
        c, w, g, parts, res, r = c_t, w_t, g_t, parts_t, res_t, r_t
        mu = 0.0 if mu < 1e-6 * eps else 0.1 * mu
    return c + w, its, r


def _discounted_level(p, V, m, v0, cfg: SolverConfig):
    h = 1.0 / m
    eps_list = cfg.discount_eps_list
    pp = float(p @ p)
    v = np.full((m, m), -pp / eps_list[0]) if v0 is None else v0.copy()
    newton_tol = 1e-3 * cfg.tol
    estimates, its, first = [], 0, None
    for i, eps in enumerate(eps_list):
        if i > 0:
            # v ~ -Hbar/eps + u: shift the previous solution to the new eps
            c = -eps_list[i - 1] * v.mean()
            v = v - v.mean() - c / eps
        v, k, r = _newton(v, eps, p, V, h, newton_tol, cfg.max_newton)
        its += k
        estimates.append(-eps * float(v.mean()))
        if first is None:
            first = v.copy()
    e = eps_list
    extrap = [(e[i] * estimates[i + 1] - e[i + 1] * estimates[i]) / (e[i] - e[i + 1]) for i in range(len(e) - 1)]
    value = extrap[-1]
    spread = abs(extrap[-1] - extrap[-2]) if len(extrap) > 1 else abs(extrap[-1] - estimates[-1])
    residual = float(np.abs(-eps_list[-1] * v - value).max())
    return value, spread, its, first, residual, estimates


def hbar_discounted(p, f: FlowField, cfg: SolverConfig = SolverConfig(), warm: dict | None = None) -> HbarResult:
    """Hbar from the discounted approximation, extrapolated to eps = 0.

    For each eps in ``cfg.discount_eps_list`` the upwind discretization of
    eps v + |p + Dv|^2 + A V.(p + Dv) = 0 is solved to a residual of
    1e-3 tol; -eps mean(v) is extrapolated linearly in eps using the last
    two values and the spread between the last two extrapolants is the
    internal error estimate.
    """
    p = _check_p(p, f)
    values, internal, state = [], [], {}
    total, residual, coarse = 0, 0.0, None
    per_eps = {}
    for m in _levels(cfg):
        V = velocity_on_grid(f, m)
        v0 = _initial_state(warm, m, coarse)
        val, spread, its, first, residual, estimates = _discounted_level(p, V, m, v0, cfg)
        values.append(val)
        internal.append(spread)
        state[m] = first
        coarse = first
        total += its
        per_eps[m] = estimates
    value, err = _combine_levels(values, internal)
    return HbarResult(
        p=(float(p[0]), float(p[1])),
        value=value,
        method="discounted",
        residual=residual,
        error_estimate=err,
        iterations=total,
        diagnostics={"levels": dict(zip(_levels(cfg), values)), "eps_estimates": per_eps},
        state=state,
    )


# -- shear oracle --------------------------------------------------------------


class _TrigInterpolant:
    """Trigonometric interpolant of periodic samples on [0, 1)."""

    def __init__(self, samples):
        samples = np.asarray(samples, dtype=float)
        m = len(samples)
        self.coef = np.fft.fft(samples) / m
        self.freq = np.fft.fftfreq(m, d=1.0 / m)
        keep = np.abs(self.coef) > 1e-15 * max(1.0, np.abs(self.coef).max())
        self.coef, self.freq = self.coef[keep], self.freq[keep]

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        if self.coef.size == 0:
            return np.zeros_like(y)
        return (np.exp(2j * np.pi * np.multiply.outer(y, self.freq)) @ self.coef).real


def _refined_integral(fun, q, centres, factor=16):
    """Trapezoid integral of a 1-periodic function on q nodes with local refinement.

    Around each centre node index the window of width 4/q is re-integrated
    on a mesh ``factor`` times finer.
    """
    y = np.arange(q) / q
    vals = fun(y)
    total = vals.mean()
    coarse_total = total
    for c in centres:
        a = (c - 2) / q
        idx = np.arange(c - 2, c + 3) % q
        w = np.array([0.5, 1.0, 1.0, 1.0, 0.5]) / q
        coarse_part = float((w * vals[idx]).sum())
        fine_y = a + np.arange(4 * factor + 1) / (q * factor)
        fv = fun(fine_y % 1.0)
        fine_part = float((fv[:-1] + fv[1:]).sum() * 0.5 / (q * factor))
        total += fine_part - coarse_part
    return total, coarse_total


def shear_oracle(p, v_samples, quad_n: int = 1024, label: str = "shear") -> HbarResult:
    """Closed-form Hbar for the shear flow with profile samples ``A v(j/m)``.

    Hbar(p) = p1^2 + h with h = M(p1) = max p1 v on the plateau
    |p2| <= W(p1) = int sqrt(M - p1 v) dy, and otherwise the unique h > M
    with |p2| = int sqrt(h - p1 v) dy.
    """
    p = np.asarray(p, dtype=float).reshape(2)
    if quad_n < 256:
        raise ValueError("quad_n must be >= 256")
    samples = np.asarray(v_samples, dtype=float)
    interp = _TrigInterpolant(samples)
    p1, p2 = float(p[0]), abs(float(p[1]))

    def g(y):
        return p1 * interp(y)

    q = int(quad_n)
    grid_vals = g(np.arange(q) / q)
    m_sample = float(grid_vals.max()) if grid_vals.size else 0.0
    spread = float(grid_vals.max() - grid_vals.min()) if grid_vals.size else 0.0
    centres = []
    if spread > 0.0:
        is_peak = (grid_vals >= np.roll(grid_vals, 1)) & (grid_vals >= np.roll(grid_vals, -1))
        centres = [int(j) for j in np.flatnonzero(is_peak & (grid_vals >= m_sample - 1e-3 * spread))]
    big_m = m_sample
    for c in centres:
        yc = c / q
        res = minimize_scalar(lambda y: -g(y), bounds=(yc - 1.0 / q, yc + 1.0 / q), method="bounded",
                              options={"xatol": 1e-13})
        big_m = max(big_m, float(-res.fun))

    def width(h_level, refined=True):
        fun = lambda y: np.sqrt(np.maximum(h_level - g(y), 0.0))
        fine, coarse = _refined_integral(fun, q, centres)
        return fine if refined else coarse

    plateau = width(big_m)
    diagnostics = {"M": big_m, "W": plateau, "plateau": p2 <= plateau}
    if p2 <= plateau:
        h_val, its, err = big_m, 0, abs(width(big_m) - width(big_m, refined=False)) * 0.0 + 1e-12
    else:
        def solve(refined):
            lo, hi = big_m, big_m + p2 * p2
            k = 0
            while hi - lo > 1e-12 * max(1.0, hi):
                mid = 0.5 * (lo + hi)
                if width(mid, refined) < p2:
                    lo = mid
                else:
                    hi = mid
                k += 1
            return 0.5 * (lo + hi), k

        h_val, its = solve(True)
        h_coarse, _ = solve(False)
        err = abs(h_val - h_coarse) + 1e-12 * max(1.0, h_val)
    return HbarResult(
        p=(float(p[0]), float(p[1])),
        value=p1 * p1 + h_val,
        method="shear_oracle",
        residual=0.0,
        error_estimate=err,
        iterations=its,
        diagnostics=diagnostics,
    )


def shear_oracle_for_flow(p, f: FlowField, quad_n: int = 1024) -> HbarResult:
    """Shear oracle with the profile sampled from a shear ``FlowField``."""
    if not f.is_shear:
        raise ValueError(f"flow {f.label!r} is not a shear flow; the oracle does not apply")
    m = max(256, 4 * (max((abs(k[1]) for k, _ in f.modes), default=1) + 1))
    return shear_oracle(p, shear_profile(f, m), quad_n=quad_n, label=f.label)


def plateau_width(p1: float, f: FlowField, quad_n: int = 1024) -> float:
    """W(p1) = int sqrt(M(p1) - p1 v) dy for a shear flow."""
    return float(shear_oracle_for_flow((p1, 0.0), f, quad_n).diagnostics["W"])


# -- dispatch --------------------------------------------------------------------


def resolve_method(f: FlowField, cfg: SolverConfig) -> str:
    if cfg.method == "auto":
        return "shear_oracle" if f.is_shear else "discounted"
    return cfg.method


def hbar(p, f: FlowField, cfg: SolverConfig = SolverConfig(), warm: dict | None = None) -> HbarResult:
    """Evaluate Hbar with the method selected by ``cfg.method``.

    With ``cfg.cross_check`` the other grid method is also run; the pair's
    difference is stored in ``diagnostics`` and a warning is logged when it
    exceeds the sum of their error estimates plus ``tol``.
    """
    method = resolve_method(f, cfg)
    if method == "shear_oracle":
        res = shear_oracle_for_flow(p, f, cfg.quad_n)
    elif method == "time_marching":
        res = hbar_time_marching(p, f, cfg, warm)
    else:
        res = hbar_discounted(p, f, cfg, warm)
    if cfg.cross_check and method != "shear_oracle":
        other = hbar_discounted(p, f, cfg) if method == "time_marching" else hbar_time_marching(p, f, cfg)
        diff = abs(other.value - res.value)
        res.diagnostics["cross_check"] = {"method": other.method, "value": other.value,
                                          "error_estimate": other.error_estimate, "difference": diff}
        if diff > res.error_estimate + other.error_estimate + cfg.tol:
            log.warning("cross-check disagreement at p=%s: %s=%.6g vs %s=%.6g", res.p, res.method,
                        res.value, other.method, other.value)
    return res


class HbarEvaluator:
    """Memoizing Hbar evaluator that warm-starts each solve from the last state."""

    def __init__(self, f: FlowField, cfg: SolverConfig):
        self.f = f
        self.cfg = cfg
        self.cache: dict = {}
        self.state: dict | None = None
        self.calls = 0

    def __call__(self, p) -> HbarResult:
        key = (round(float(p[0]), 14), round(float(p[1]), 14))
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        res = hbar(p, self.f, self.cfg, warm=self.state)
        if res.state:
            self.state = res.state
        self.cache[key] = res
        self.calls += 1
        return res


# -- level curves of Hbar ------------------------------------------------------


def hbar_level_curve(c: float, f: FlowField, cfg: SolverConfig = SolverConfig(), n_angles: int = 64,
                     r_max: float | None = None) -> LevelCurve:
    """Trace {Hbar = c} by bisection along rays from the origin.

    Hbar is strictly increasing along each ray and Hbar(r e) >= r^2, so the
    crossing lies in (0, sqrt(c)]; the bracket is widened (up to ``r_max``)
    only if solver error puts Hbar(sqrt(c) e) below c.
    """
    if c <= 0:
        raise ValueError("level c must be positive")
    r_max = r_max if r_max is not None else 10.0 * max(1.0, abs(f.amplitude))
    thetas = uniform_angles(n_angles)
    ev = HbarEvaluator(f, cfg)
    pts, vals, errs = [], [], []
    for th in thetas:
        e = np.array([math.cos(th), math.sin(th)])
        lo, hi = 0.0, math.sqrt(c)
        res_hi = ev(hi * e)
        while res_hi.value < c:
            lo, hi = hi, 2.0 * hi
            if hi > r_max:
                raise ValueError(f"level {c} not reached along theta={th:.4f} within r_max={r_max}")
            res_hi = ev(hi * e)
        res = res_hi
        tol = max(cfg.tol, 1e-10) * math.sqrt(c)
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            res = ev(mid * e)
            if res.value < c:
                lo = mid
            else:
                hi = mid
        r = 0.5 * (lo + hi)
        pts.append(r * e)
        vals.append(res.value)
        errs.append(res.error_estimate)
    return LevelCurve(thetas, np.array(pts), np.array(vals), np.array(errs),
                      meta={"kind": "hbar", "level": c, "flow": f.label, "amplitude": f.amplitude,
                            "method": resolve_method(f, cfg), "n": cfg.n})
