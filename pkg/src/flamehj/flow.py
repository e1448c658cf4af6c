"""
Periodic, mean-zero, divergence-free velocity fields on the 2-torus.

Fields are stored spectrally as a finite list of Fourier modes

    V(x) = sum_k v_k exp(2 pi i k.x),   k in Z^2 \\ {0},

with the flow strength ``amplitude`` carried separately so that the
effective field is ``amplitude * V``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from .errors import ConfigError

TWO_PI = 2.0 * np.pi
_VALIDATION_TOL = 1e-12


def _as_mode_table(modes):
    """Normalize a mode mapping into a sorted tuple of (k, v_k) pairs."""
    table = []
    for k, v in dict(modes).items():
        k = (int(k[0]), int(k[1]))
        v = np.asarray(v, dtype=complex).reshape(2)
        table.append((k, v))
    table.sort(key=lambda kv: kv[0])
    return tuple(table)


@dataclass(frozen=True)
class FlowField:
    """Finite Fourier representation of an incompressible periodic flow.

    Parameters
    ----------
    modes : mapping
        Wave vector ``(k1, k2)`` to complex 2-vector ``v_k``.
    amplitude : float
        Strength multiplier A; the field evaluated is ``A * V``.
    stream_coeffs : mapping, optional
        Wave vector to complex Fourier coefficient of the stream function
        K, with ``V = (-K_x2, K_x1)``.
    label : str
        Descriptive name used in outputs.
    """

    modes: tuple = ()
    amplitude: float = 1.0
    stream_coeffs: tuple | None = None
    label: str = "custom"
    _k: np.ndarray = field(init=False, repr=False, compare=False)
    _v: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        table = _as_mode_table(self.modes)
        object.__setattr__(self, "modes", table)
        if self.stream_coeffs is not None:
            stream = tuple(sorted(((int(k[0]), int(k[1])), complex(c))
                                  for k, c in dict(self.stream_coeffs).items()))
            object.__setattr__(self, "stream_coeffs", stream)
        object.__setattr__(self, "amplitude", float(self.amplitude))
        if not np.isfinite(self.amplitude):
            raise ValueError("amplitude must be finite")
        ks = np.array([k for k, _ in table], dtype=float).reshape(-1, 2)
        vs = np.array([v for _, v in table], dtype=complex).reshape(-1, 2)
        object.__setattr__(self, "_k", ks)
        object.__setattr__(self, "_v", vs)
        self._validate()

    def _validate(self):
        lookup = dict(self.modes)
        for k, v in self.modes:
            if k == (0, 0):
                raise ValueError("mean-zero violated: mode (0, 0) present")
            scale = max(1.0, float(np.abs(v).max()) * np.hypot(*k))
            if abs(k[0] * v[0] + k[1] * v[1]) > _VALIDATION_TOL * scale:
                raise ValueError(f"mode {k} is not divergence-free: k.v_k != 0")
            partner = lookup.get((-k[0], -k[1]))
            if partner is None:
                raise ValueError(f"mode {k} has no conjugate partner {(-k[0], -k[1])}")
            if np.abs(partner - np.conj(v)).max() > _VALIDATION_TOL * max(1.0, np.abs(v).max()):
                raise ValueError(f"v_{{-k}} != conj(v_k) at k={k}: field is not real")
        if self.stream_coeffs is not None:
            stream = dict(self.stream_coeffs)
            if set(stream) != set(lookup):
                raise ValueError("stream_coeffs and modes have different supports")
            for k, c in stream.items():
                expected = 2j * np.pi * np.array([-k[1], k[0]]) * c
                if np.abs(expected - lookup[k]).max() > _VALIDATION_TOL * max(1.0, abs(c) * TWO_PI * np.hypot(*k)):
                    raise ValueError(f"stream coefficient at {k} inconsistent with v_k")

    # -- convenience -------------------------------------------------------

    @property
    def wavevectors(self) -> np.ndarray:
        return self._k

    @property
    def coefficients(self) -> np.ndarray:
        return self._v

    @property
    def is_zero(self) -> bool:
        return len(self.modes) == 0 or self.amplitude == 0.0

    @property
    def is_shear(self) -> bool:
        """True for fields of the form (v(x2), 0)."""
        return all(k[0] == 0 and abs(v[1]) <= _VALIDATION_TOL for k, v in self.modes)

    def with_amplitude(self, amplitude: float) -> "FlowField":
        return replace(self, amplitude=amplitude)

    def max_speed(self) -> float:
        """Upper bound on max |A V| from the triangle inequality on modes."""
        if not self.modes:
            return 0.0
        return abs(self.amplitude) * float(np.sqrt((np.abs(self._v) ** 2).sum(axis=1)).sum())


def make_zero(label: str = "zero") -> FlowField:
    return FlowField(modes={}, amplitude=1.0, stream_coeffs={}, label=label)


def make_shear(v_fourier: Mapping[int, complex], amplitude: float = 1.0, label: str = "shear") -> FlowField:
    """Shear flow V = (v(x2), 0) from the Fourier coefficients of v."""
    coeffs = {int(m): complex(c) for m, c in dict(v_fourier).items()}
    if not coeffs:
        raise ValueError("empty shear profile; use make_zero() for the zero field")
    if 0 in coeffs:
        raise ValueError("shear profile must have mean zero (coefficient at 0 present)")
    modes, stream = {}, {}
    for m, c in coeffs.items():
        modes[(0, m)] = (c, 0.0)
        # v_k = 2 pi i (-k2, k1) K_k with k = (0, m)
        stream[(0, m)] = c / (-2j * np.pi * m)
    return FlowField(modes=modes, amplitude=amplitude, stream_coeffs=stream, label=label)


def make_shear_sin(amplitude: float = 1.0) -> FlowField:
    return make_shear({1: -0.5j, -1: 0.5j}, amplitude=amplitude, label="shear:sin")


def make_shear_cos(amplitude: float = 1.0) -> FlowField:
    return make_shear({1: 0.5, -1: 0.5}, amplitude=amplitude, label="shear:cos")


def _from_stream(stream: Mapping[tuple, complex], amplitude: float, label: str) -> FlowField:
    stream = {k: complex(c) for k, c in stream.items() if c != 0}
    modes = {k: 2j * np.pi * np.array([-k[1], k[0]]) * c for k, c in stream.items()}
    return FlowField(modes=modes, amplitude=amplitude, stream_coeffs=stream, label=label)


def make_cellular(amplitude: float = 1.0) -> FlowField:
    """Cellular flow with stream function K = sin(2 pi x1) sin(2 pi x2)."""
    # sin a sin b = (cos(a - b) - cos(a + b)) / 2
    stream = {(1, -1): 0.25, (-1, 1): 0.25, (1, 1): -0.25, (-1, -1): -0.25}
    return _from_stream(stream, amplitude, "cellular")


def make_cats_eye(delta: float, amplitude: float = 1.0) -> FlowField:
    """Cat's eye flow, K = sin(2 pi x1) sin(2 pi x2) + delta cos(2 pi x1) cos(2 pi x2)."""
    delta = float(delta)
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    # cos a cos b = (cos(a - b) + cos(a + b)) / 2
    stream = {
        (1, -1): 0.25 + 0.25 * delta,
        (-1, 1): 0.25 + 0.25 * delta,
        (1, 1): -0.25 + 0.25 * delta,
        (-1, -1): -0.25 + 0.25 * delta,
    }
    return _from_stream(stream, amplitude, f"cats_eye:delta={delta:g}")


# -- evaluation ---------------------------------------------------------------


def _phases(f: FlowField, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.exp(2j * np.pi * (x @ f._k.T))


def eval_velocity(f: FlowField, x) -> np.ndarray:
    """Evaluate ``A V(x)``; ``x`` has shape (..., 2)."""
    x = np.asarray(x, dtype=float)
    if not f.modes:
        return np.zeros(x.shape, dtype=float)
    v = (_phases(f, x) @ f._v).real
    return f.amplitude * v


def eval_gradient(f: FlowField, x) -> np.ndarray:
    """Jacobian ``J[..., i, j] = d(A V_i)/dx_j`` by Fourier summation."""
    x = np.asarray(x, dtype=float)
    if not f.modes:
        return np.zeros(x.shape + (2,), dtype=float)
    ph = _phases(f, x)
    # d/dx_j exp(2 pi i k.x) = 2 pi i k_j exp(...)
    coef = 2j * np.pi * f._v[:, :, None] * f._k[:, None, :]
    jac = np.einsum("...m,mij->...ij", ph, coef).real
    return f.amplitude * jac


def eval_stream(f: FlowField, x) -> np.ndarray:
    """Stream function ``A K(x)``; requires ``stream_coeffs``."""
    if f.stream_coeffs is None:
        raise ValueError(f"flow {f.label!r} carries no stream function")
    x = np.asarray(x, dtype=float)
    if not f.stream_coeffs:
        return np.zeros(x.shape[:-1])
    ks = np.array([k for k, _ in f.stream_coeffs], dtype=float)
    cs = np.array([c for _, c in f.stream_coeffs], dtype=complex)
    return f.amplitude * (np.exp(2j * np.pi * (x @ ks.T)) @ cs).real


def grid_points(n: int) -> np.ndarray:
    """Points ``x[i, j] = (i/n, j/n)``, shape (n, n, 2)."""
    s = np.arange(n) / n
    return np.stack(np.meshgrid(s, s, indexing="ij"), axis=-1)


def velocity_on_grid(f: FlowField, n: int) -> np.ndarray:
    """Sample ``A V`` on the n x n grid; returns shape (2, n, n)."""
    if not f.modes:
        return np.zeros((2, n, n))
    s = np.arange(n) / n
    out = np.zeros((2, n, n))
    for (k1, k2), v in f.modes:
        e1 = np.exp(2j * np.pi * k1 * s)
        e2 = np.exp(2j * np.pi * k2 * s)
        ph = np.outer(e1, e2)
        out[0] += (v[0] * ph).real
        out[1] += (v[1] * ph).real
    return f.amplitude * out


def divergence_on_grid(f: FlowField, n: int) -> np.ndarray:
    jac = eval_gradient(f, grid_points(n))
    return jac[..., 0, 0] + jac[..., 1, 1]


def shear_profile(f: FlowField, m: int) -> np.ndarray:
    """Samples of ``A v(y)`` at ``y = j/m`` for a shear field (v(x2), 0)."""
    if not f.is_shear:
        raise ValueError(f"flow {f.label!r} is not a shear flow")
    y = np.arange(m) / m
    out = np.zeros(m)
    for (_, k2), v in f.modes:
        out += (v[0] * np.exp(2j * np.pi * k2 * y)).real
    return f.amplitude * out


def _signed_permutations():
    mats = []
    for perm in ((0, 1), (1, 0)):
        for s0 in (1, -1):
            for s1 in (1, -1):
                g = np.zeros((2, 2), dtype=int)
                g[0, perm[0]] = s0
                g[1, perm[1]] = s1
                mats.append(g)
    return mats


def symmetry_group(f: FlowField, tol: float = 1e-12) -> list:
    """Lattice symmetries g with Hbar(g p) = Hbar(p) for this flow.

    g (a signed permutation) qualifies when W(x) = g V(g^T x + tau) equals
    V for some quarter-period shift tau; mode-wise, v_{gk} = g v_k e^{2 pi i k.tau}.
    The identity is always first.
    """
    table = {k: v for k, v in f.modes}
    shifts = [np.array([a, b]) / 4.0 for a in range(4) for b in range(4)]
    scale = max((float(np.abs(v).max()) for v in table.values()), default=1.0)
    group = []
    for g in _signed_permutations():
        for tau in shifts:
            ok = True
            for k, v in table.items():
                gk = tuple(int(c) for c in g @ np.array(k))
                target = table.get(gk)
                image = (g @ v) * np.exp(2j * np.pi * np.dot(k, tau))
                if target is None or np.abs(target - image).max() > tol * scale:
                    ok = False
                    break
            if ok:
                group.append(g)
                break
    group.sort(key=lambda g: (not np.array_equal(g, np.eye(2, dtype=int)), g.ravel().tolist()))
    return group


@dataclass
class GridFunction:
    """Scalar field on the periodic n x n grid, ``values[i, j]`` at ``(i/n, j/n)``."""

    n: int
    values: np.ndarray

    def __post_init__(self):
        if self.n < 8 or self.n % 2:
            raise ValueError(f"grid resolution must be even and >= 8, got {self.n}")
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.n, self.n):
            raise ValueError(f"values must have shape ({self.n}, {self.n})")

    def __getitem__(self, idx):
        i, j = idx
        return self.values[i % self.n, j % self.n]

    def mean(self) -> float:
        return float(self.values.mean())

    def oscillation(self) -> float:
        return float(self.values.max() - self.values.min())


# -- config block -------------------------------------------------------------

BUILTINS = ("shear_sin", "shear_cos", "cellular", "cats_eye", "zero")


def flow_from_config(block: Mapping) -> FlowField:
    """Build a field from a run-config flow block.

    Accepts ``{"builtin": name, "delta": ..., "amplitude": ...}`` or
    ``{"modes": [{"k": [k1, k2], "re": [.., ..], "im": [.., ..]}], "amplitude": ...}``.
    """
    if not isinstance(block, Mapping):
        raise ConfigError("flow block must be a JSON object")
    amplitude = block.get("amplitude", 1.0)
    if not isinstance(amplitude, (int, float)) or isinstance(amplitude, bool):
        raise ConfigError("flow.amplitude must be a number")
    try:
        if "builtin" in block:
            name = block["builtin"]
            if name == "shear_sin":
                return make_shear_sin(amplitude)
            if name == "shear_cos":
                return make_shear_cos(amplitude)
            if name == "cellular":
                return make_cellular(amplitude)
            if name == "cats_eye":
                if "delta" not in block:
                    raise ConfigError("cats_eye flow requires 'delta'")
                return make_cats_eye(block["delta"], amplitude)
            if name == "zero":
                return make_zero().with_amplitude(amplitude)
            raise ConfigError(f"unknown builtin flow {name!r}; expected one of {BUILTINS}")
        if "modes" in block:
            entries = block["modes"]
            if not isinstance(entries, list):
                raise ConfigError("flow.modes must be a list")
            if not entries:
                return make_zero().with_amplitude(amplitude)
            modes = {}
            for e in entries:
                k = tuple(int(c) for c in e["k"])
                re = np.asarray(e.get("re", [0.0, 0.0]), dtype=float)
                im = np.asarray(e.get("im", [0.0, 0.0]), dtype=float)
                if len(k) != 2 or re.shape != (2,) or im.shape != (2,):
                    raise ConfigError(f"malformed mode entry {e!r}")
                modes[k] = re + 1j * im
            return FlowField(modes=modes, amplitude=amplitude, label=block.get("label", "custom"))
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid flow block: {exc}") from exc
    raise ConfigError("flow block needs either 'builtin' or 'modes'")


def flow_to_config(f: FlowField) -> dict:
    return {
        "label": f.label,
        "amplitude": f.amplitude,
        "modes": [
            {"k": list(k), "re": [float(v[0].real), float(v[1].real)], "im": [float(v[0].imag), float(v[1].imag)]}
            for k, v in f.modes
        ],
    }
