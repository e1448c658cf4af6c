import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from flamehj.cell_solver import SolverConfig
from flamehj.errors import ResonanceError
from flamehj.flow import make_cats_eye, make_cellular, make_shear_cos, make_shear_sin, make_zero, velocity_on_grid
from flamehj.perturb import (GOLDEN_DIRECTION, SQRT2_DIRECTION, a2, corrector_phi1, corrector_residual,
                             diophantine_quality, expansion_residual, phi1_coefficients, residual_ratios)

ORACLE = SolverConfig(method="auto")


def brute_force_a2(p, f, n=16):
    """a2 from FFT coefficients of the sampled velocity, one mode at a time."""
    V = velocity_on_grid(f.with_amplitude(1.0), n)
    vh = np.fft.fft2(V, axes=(1, 2)) / n ** 2
    total = 0.0
    for i in range(n):
        for j in range(n):
            k = (i if i <= n // 2 else i - n, j if j <= n // 2 else j - n)
            pk = p[0] * k[0] + p[1] * k[1]
            pv = p[0] * vh[0, i, j] + p[1] * vh[1, i, j]
            if abs(pv) < 1e-12:
                continue
            total += abs(pv) ** 2 * (k[0] ** 2 + k[1] ** 2) / pk ** 2
    return 0.25 * total


def test_hand_value_shear():
    assert abs(a2((1.0, 1.0), make_shear_sin()).a2 - 0.125) <= 1e-12


@pytest.mark.parametrize("f", [make_shear_sin(), make_shear_cos(), make_cellular(), make_cats_eye(0.5)],
                         ids=lambda f: f.label)
@pytest.mark.parametrize("p", [(1.0, 1.0), GOLDEN_DIRECTION, SQRT2_DIRECTION, (0.3, -0.8)])
def test_a2_matches_brute_force(f, p):
    if any(abs(p[0] * k[0] + p[1] * k[1]) < 1e-12 for k, _ in f.modes):
        pytest.skip("direction is exactly resonant with this flow")
    assert a2(p, f).a2 == pytest.approx(brute_force_a2(p, f), rel=1e-10)


def test_a2_of_zero_flow():
    assert a2((0.6, 0.8), make_zero()).a2 == 0.0


def test_a2_is_amplitude_free():
    assert a2((1.0, 2.0), make_cellular(7.0)).a2 == a2((1.0, 2.0), make_cellular()).a2


def test_exact_resonance_raises():
    with pytest.raises(ResonanceError):
        a2((1.0, 0.0), make_shear_sin())
    with pytest.raises(ValueError):
        a2((0.0, 0.0), make_shear_sin())


def test_near_resonance_is_truncated():
    res = a2((1.0, 1e-9), make_shear_sin(), divisor_floor=1e-6)
    assert res.truncated and res.excluded_modes
    assert res.to_dict()["truncated"] is True


@given(st.floats(0.0, 2 * math.pi), st.floats(0.1, 10.0), st.sampled_from(["cellular", "cats_eye", "shear"]))
def test_a2_degree_zero(theta, scale, name):
    f = {"cellular": make_cellular(), "cats_eye": make_cats_eye(0.4), "shear": make_shear_sin()}[name]
    p = np.array([math.cos(theta), math.sin(theta)])
    try:
        base = a2(p, f, divisor_floor=1e-3)
    except ResonanceError:
        return
    assert a2(scale * p, f, divisor_floor=1e-3).a2 == pytest.approx(base.a2, rel=1e-10)


def test_a2_half_sum_doubles_to_full():
    # conjugate partners contribute equally, so the sum over k > 0 is half of the total
    p = np.array(GOLDEN_DIRECTION)
    f = make_cats_eye(0.5)
    half = 0.0
    for k, v in f.modes:
        if k > (0, 0):
            half += abs(p @ v) ** 2 * (k[0] ** 2 + k[1] ** 2) / (p @ np.asarray(k)) ** 2
    assert 0.5 * half == pytest.approx(a2(p, f).a2, rel=1e-13)


def test_phi1_shear_modes_and_cell_equation():
    p = np.array([0.0, 1.0])
    f = make_shear_sin()
    assert set(phi1_coefficients(p, f)) <= {(0, 1), (0, -1)}
    p = np.array(GOLDEN_DIRECTION)
    for f in (make_shear_sin(), make_cellular()):
        n = 64
        phi = corrector_phi1(p, f, n)
        assert abs(phi.values.mean()) <= 1e-12
        # spectral derivative of the sampled corrector
        kx = np.fft.fftfreq(n, 1.0 / n)
        ph = np.fft.fft2(phi.values)
        d = [np.fft.ifft2(2j * np.pi * kx[:, None] * ph).real, np.fft.ifft2(2j * np.pi * kx[None, :] * ph).real]
        V = velocity_on_grid(f, n)
        assert np.abs(p[0] * d[0] + p[1] * d[1] + 0.5 * (p[0] * V[0] + p[1] * V[1])).max() <= 1e-10


def test_zero_flow_corrector_is_zero():
    assert np.all(corrector_phi1((1.0, 0.3), make_zero(), 16).values == 0.0)


@pytest.mark.parametrize("f", [make_shear_sin(), make_cellular(), make_cats_eye(0.5)], ids=lambda f: f.label)
def test_residual_orders(f):
    eps = (0.1, 0.05, 0.025)
    first = residual_ratios(GOLDEN_DIRECTION, f, eps, order=1)
    second = residual_ratios(GOLDEN_DIRECTION, f, eps, order=2)
    assert all(3.9 <= r <= 4.1 for r in first)
    assert 6.0 <= second[-1] <= 10.0


def test_corrector_residual_vanishes_for_zero_flow():
    assert corrector_residual((1.0, 0.5), make_zero(), 0.1) == 0.0


def test_diophantine_examples():
    q = diophantine_quality(GOLDEN_DIRECTION)
    assert q[1]["quality"] > 0 and q[2]["quality"] > 0
    assert diophantine_quality((1.0, 0.0))[1] == {"quality": 0.0, "k": (0, 1)}
    assert diophantine_quality((1.0, 0.5))[2]["k"] == (1, -2)
    with pytest.raises(ValueError):
        diophantine_quality((0.0, 0.0))


def test_expansion_residual_zero_flow():
    rows = expansion_residual((0.6, 0.8), make_zero(), cfg=SolverConfig(n=32), with_alpha=True)
    for row in rows:
        assert abs(row["ratio_H"]) <= 1e-6 and abs(row["ratio_alpha"]) <= 1e-4


def test_expansion_residual_shear_approaches_a2():
    p = np.array([1.0, 1.0]) / math.sqrt(2.0)
    rows = expansion_residual(p, make_shear_sin(), eps_list=(0.4, 0.2, 0.1, 0.05), cfg=ORACLE)
    target = rows[0]["a2_target"]
    assert target == pytest.approx(0.125, abs=1e-12)
    dev_h = [abs(r["ratio_H"] - target) for r in rows]
    dev_a = [abs(r["ratio_alpha"] - target) for r in rows]
    assert all(b < a for a, b in zip(dev_h, dev_h[1:]))
    assert all(b < a for a, b in zip(dev_a, dev_a[1:]))
    assert dev_h[-1] / target <= 0.05


def test_expansion_residual_rejects_increasing_eps():
    with pytest.raises(ValueError):
        expansion_residual((1.0, 1.0), make_shear_sin(), eps_list=(0.1, 0.2), cfg=ORACLE)
