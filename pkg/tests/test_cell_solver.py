import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from flamehj.cell_solver import (HbarEvaluator, SolverConfig, hbar, hbar_discounted, hbar_level_curve,
                                 hbar_time_marching, plateau_width, resolve_method, shear_oracle,
                                 shear_oracle_for_flow)
from flamehj.errors import NonConvergenceError
from flamehj.flow import make_cats_eye, make_cellular, make_shear_sin, make_zero, shear_profile

FAST = SolverConfig(n=32)
W_UNIT = 2 * math.sqrt(2) / math.pi


@pytest.mark.parametrize("kw", [dict(n=30), dict(n=34), dict(n=16), dict(dt_safety=0.0), dict(tol=-1.0),
                                dict(discount_eps_list=(0.1,)), dict(discount_eps_list=(0.05, 0.1)),
                                dict(method="spectral"), dict(quad_n=128), dict(alpha_rel_tol=0.5)])
def test_solver_config_rejects(kw):
    with pytest.raises(ValueError):
        SolverConfig(**kw)


def test_solver_config_roundtrip():
    cfg = SolverConfig(n=64, method="auto")
    assert SolverConfig(**dict(cfg.to_dict(), discount_eps_list=tuple(cfg.discount_eps_list))) == cfg
    assert cfg.with_(n=128).n == 128


@pytest.mark.parametrize("solver", [hbar_time_marching, hbar_discounted])
def test_zero_flow_is_exact(solver):
    res = solver((1.0, 0.0), make_zero(), FAST)
    assert res.value == pytest.approx(1.0, abs=1e-8)
    assert solver((0.0, 0.0), make_zero(), FAST).value == pytest.approx(0.0, abs=1e-10)


def test_discounted_zero_flow_at_two():
    assert hbar_discounted((2.0, 0.0), make_zero(), FAST).value == pytest.approx(4.0, rel=1e-8)


def test_time_marching_shear_example_within_error_estimate():
    res = hbar_time_marching((1.0, 0.0), make_shear_sin(), SolverConfig(n=64))
    assert abs(res.value - 2.0) <= res.error_estimate
    assert res.value == pytest.approx(2.0, rel=2e-2)


@pytest.mark.parametrize("solver", [hbar_time_marching, hbar_discounted])
@pytest.mark.parametrize("f", [make_cellular(), make_cats_eye(0.4)], ids=lambda f: f.label)
def test_hbar_vanishes_at_origin(solver, f):
    assert abs(solver((0.0, 0.0), f, FAST).value) <= 1e-8


def test_methods_agree_on_cellular():
    cfg = SolverConfig(n=64)
    a = hbar_time_marching((1.0, 0.0), make_cellular(), cfg)
    b = hbar_discounted((1.0, 0.0), make_cellular(), cfg)
    assert abs(a.value - b.value) <= 2 * (a.error_estimate + b.error_estimate)


@pytest.mark.parametrize("p", [(1.0, 0.0), (0.6, 0.8), (1.2, 0.3), (0.2, 1.1)])
def test_discounted_matches_shear_oracle(p):
    f = make_shear_sin()
    exact = shear_oracle_for_flow(p, f).value
    res = hbar_discounted(p, f, SolverConfig(n=64))
    assert abs(res.value - exact) <= max(2 * res.error_estimate, 2e-3 * exact)


def test_lower_bound_on_cellular():
    for p in [(0.5, 0.2), (1.0, 1.0), (0.0, 1.5)]:
        res = hbar_discounted(p, make_cellular(), FAST)
        assert res.value >= float(np.dot(p, p)) - 3 * res.error_estimate


def test_scaling_identity_on_discounted_solver():
    p = np.array([0.7, 0.3])
    base = hbar_discounted(p, make_cellular(1.0), FAST)
    # the corrector scales like A, so the rescaled discrete problem has discount eps A
    eps2 = tuple(2.0 * e for e in FAST.discount_eps_list)
    scaled = hbar_discounted(2.0 * p, make_cellular(2.0), SolverConfig(n=32, discount_eps_list=eps2))
    assert scaled.value / 4.0 == pytest.approx(base.value, rel=1e-10)
    same = hbar_discounted(2.0 * p, make_cellular(2.0), FAST)
    assert abs(same.value / 4.0 - base.value) <= same.error_estimate / 4.0 + base.error_estimate


def test_midpoint_convexity_on_cellular():
    ev = HbarEvaluator(make_cellular(), FAST)
    a, b = np.array([1.0, 0.0]), np.array([0.2, 0.9])
    ha, hb, hm = ev(a), ev(b), ev(0.5 * (a + b))
    slack = hm.error_estimate + 0.5 * (ha.error_estimate + hb.error_estimate)
    assert hm.value <= 0.5 * (ha.value + hb.value) + slack


def test_result_fields_and_corrector():
    res = hbar_discounted((1.0, 0.5), make_cellular(), FAST)
    assert res.method == "discounted" and np.isfinite(res.residual)
    assert set(res.diagnostics["levels"]) == {8, 16, 32}
    corr = res.corrector()
    assert corr.n == 32 and abs(corr.values.mean()) < 1e-8
    d = res.to_dict()
    assert d["p"] == [1.0, 0.5] and "state" not in d


def test_time_marching_reports_nonconvergence():
    with pytest.raises(NonConvergenceError) as info:
        hbar_time_marching((1.0, 0.3), make_cellular(), SolverConfig(n=32, t_max=0.05, richardson=False))
    assert np.isfinite(info.value.best_estimate)
    assert info.value.oscillation > 0


def test_p_outside_supported_range():
    with pytest.raises(ValueError):
        hbar((11.0, 0.0), make_cellular(), FAST)
    with pytest.raises(ValueError):
        hbar((np.nan, 0.0), make_cellular(), FAST)


def test_cross_check_records_difference():
    res = hbar((1.0, 0.0), make_cellular(), SolverConfig(n=32, cross_check=True))
    cc = res.diagnostics["cross_check"]
    assert cc["method"] == "time_marching"
    assert cc["difference"] <= res.error_estimate + cc["error_estimate"] + 1e-2


def test_resolve_method():
    assert resolve_method(make_shear_sin(), SolverConfig(method="auto")) == "shear_oracle"
    assert resolve_method(make_cellular(), SolverConfig(method="auto")) == "discounted"


def test_evaluator_memoizes():
    ev = HbarEvaluator(make_cellular(), FAST)
    ev((0.5, 0.5))
    ev((0.5, 0.5))
    assert ev.calls == 1


# -- shear oracle -------------------------------------------------------------------


def test_shear_oracle_examples():
    f = make_shear_sin()
    res = shear_oracle_for_flow((1.0, 0.0), f)
    assert res.value == pytest.approx(2.0, abs=1e-12)
    assert res.diagnostics["W"] == pytest.approx(W_UNIT, rel=1e-6)
    assert shear_oracle_for_flow((0.0, 1.0), f).value == pytest.approx(1.0, abs=1e-12)
    assert plateau_width(1.0, f) == pytest.approx(W_UNIT, rel=1e-6)


def test_shear_oracle_zero_profile_is_quadratic():
    assert shear_oracle((0.3, 1.7), np.zeros(256)).value == pytest.approx(0.09 + 2.89, abs=1e-11)


def test_shear_oracle_rejects_non_shear_and_small_quadrature():
    with pytest.raises(ValueError):
        shear_oracle_for_flow((1.0, 0.0), make_cellular())
    with pytest.raises(ValueError):
        shear_oracle((1.0, 0.0), shear_profile(make_shear_sin(), 256), quad_n=128)


@given(st.floats(0.1, 2.0), st.floats(0.0, 1.5), st.floats(0.0, 1.5), st.floats(0.0, 1.5), st.floats(0.0, 1.5))
def test_shear_oracle_midpoint_convexity(amp, a1, a2, b1, b2):
    f = make_shear_sin(amp)
    a, b = np.array([a1, a2]), np.array([b1, b2])
    ha, hb = shear_oracle_for_flow(a, f), shear_oracle_for_flow(b, f)
    hm = shear_oracle_for_flow(0.5 * (a + b), f)
    slack = hm.error_estimate + ha.error_estimate + hb.error_estimate + 1e-12
    assert hm.value <= 0.5 * (ha.value + hb.value) + slack
    assert ha.value >= a @ a - 1e-12


def test_hbar_level_curve_zero_flow_is_unit_circle():
    curve = hbar_level_curve(1.0, make_zero(), SolverConfig(n=32, richardson=False), n_angles=16)
    assert np.allclose(curve.radii, 1.0, atol=1e-5)


def test_hbar_level_curve_shear_oracle():
    f = make_shear_sin()
    curve = hbar_level_curve(2.0, f, SolverConfig(method="auto"), n_angles=16)
    assert curve.points[0] == pytest.approx([1.0, 0.0], abs=1e-5)
    for pt in curve.points:
        assert shear_oracle_for_flow(pt, f).value == pytest.approx(2.0, abs=1e-4)
