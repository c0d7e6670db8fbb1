import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from deunet.ode_core import (
    DeuParams,
    Regime,
    StabilityConfig,
    clamp_params,
    classify_regime,
    delta_approx,
    evaluate,
    evaluate_arrays,
    heaviside,
    sigmoid,
)

coef = st.floats(-3.0, 3.0, allow_nan=False)
unit = st.floats(-1.0, 1.0, allow_nan=False)
times = st.floats(-10.0, 10.0, allow_nan=False)


@st.composite
def clamped_params(draw):
    p = DeuParams(draw(coef), draw(coef), draw(coef), draw(unit), draw(unit))
    return clamp_params(p)


# --- clamp and classify ------------------------------------------------------


@pytest.mark.parametrize("raw, expected", [
    ((0.0, 0.0, 0.0), (0.0, 0.01, 0.0)),
    ((0.005, 0.5, -0.002), (0.0, 0.5, 0.0)),
    ((1.001, 2.0, 0.999), (1.0, 2.0, 1.0)),
])
def test_clamp_examples(raw, expected):
    p = clamp_params(DeuParams(*raw, c1=0.3, c2=-0.4))
    assert (p.a, p.b, p.c) == pytest.approx(expected, abs=1e-15)
    assert (p.c1, p.c2) == (0.3, -0.4)


def test_clamp_keeps_values_exactly_at_eps():
    p = clamp_params(DeuParams(0.01, -0.01, 0.5))
    assert (p.a, p.b) == (0.01, -0.01)


def test_clamp_uses_configured_eps():
    p = clamp_params(DeuParams(0.05, 1.0, 0.0), StabilityConfig(eps=0.1))
    assert p.a == 0.0


def test_clamp_rejects_non_finite():
    with pytest.raises(ValueError):
        clamp_params(DeuParams(math.nan, 1.0, 0.0))


@pytest.mark.parametrize("abc, regime", [
    ((0, 1, 0), Regime.FIRST_ORDER_PURE),
    ((0.5, 0, 0.5), Regime.PURE_OSCILLATION),
    ((1, 3, 1), Regime.GENERAL_OVERDAMPED),
    ((0, 0, 1), Regime.SIGMOID_CORE),
    ((0, 1, 2), Regime.FIRST_ORDER_DECAY),
    ((2, 0, 0), Regime.PURE_QUADRATIC),
    ((1, 0, -1), Regime.PURE_EXPONENTIAL),
    ((1, 1, 0), Regime.DAMPED_NO_STIFFNESS),
    ((1, 1, 1), Regime.GENERAL_UNDERDAMPED),
    ((1, 2, 1), Regime.GENERAL_CRITICAL),
])
def test_classify(abc, regime):
    assert classify_regime(DeuParams(*abc)) is regime


def test_classify_rejects_unclamped():
    with pytest.raises(ValueError, match="clamp"):
        classify_regime(DeuParams(0.005, 1.0, 0.0))


@given(coef, coef, coef)
def test_clamp_is_idempotent_and_classifiable(a, b, c):
    p = clamp_params(DeuParams(a, b, c))
    assert clamp_params(p) == p
    classify_regime(p)
    for q in (p.a, p.b, p.c):
        assert q == 0 or abs(q) >= 0.01


# --- elementary functions ----------------------------------------------------


@pytest.mark.parametrize("t, u", [(0.0, 0.0), (-3.0, 0.0), (1e-12, 1.0)])
def test_heaviside(t, u):
    assert heaviside(t) == u


def test_delta_peak_and_symmetry():
    assert delta_approx(0.0, 100.0) == 25.0
    assert delta_approx(1.0, 100.0) == delta_approx(-1.0, 100.0)


def test_delta_integrates_to_one():
    t = np.linspace(-1.0, 1.0, 200_001)
    assert np.trapezoid(delta_approx(t, 100.0), t) == pytest.approx(1.0, abs=1e-6)


def test_delta_is_finite_far_out():
    assert delta_approx(1e6, 100.0) == 0.0
    with pytest.raises(ValueError):
        delta_approx(0.0, 0.0)


def test_sigmoid_stable_for_large_arguments():
    assert sigmoid(-800.0) == 0.0 and sigmoid(800.0) == 1.0


# --- closed forms --------------------------------------------------------------


def test_relu_regime():
    ev = evaluate(DeuParams(0, 1, 0), 2.0)
    assert ev.y == 2.0
    assert ev.dy_dt == pytest.approx(1.0, abs=1e-12)


def test_requ_regime():
    ev = evaluate(DeuParams(1, 0, 0), 2.0)
    assert ev.y == pytest.approx(2.0)
    assert ev.dy_dt == pytest.approx(2.0)


def test_oscillation_regime_at_pi():
    assert evaluate(DeuParams(1, 0, 1), math.pi).y == pytest.approx(2.0, abs=1e-14)


def test_first_order_decay_regime():
    assert evaluate(DeuParams(0, 1, 1), math.log(2.0)).y == pytest.approx(0.5, abs=1e-14)


def test_general_overdamped_frozen_value():
    # fixed by high-accuracy numerical integration of the ODE from the
    # initial state c1 + c2, c1 r1 + c2 r2 (r1 the slower root), with the
    # coefficient partials from differences of that integration
    ev = evaluate(DeuParams(1, 3, 1, 0.2, -0.1), 0.7)
    assert ev.y == pytest.approx(0.26827934534732, abs=1e-12)
    assert ev.dy_dt == pytest.approx(0.25415601811843, abs=1e-12)
    assert ev.dy_da == pytest.approx(-0.1041939012, abs=1e-8)
    assert ev.dy_db == pytest.approx(0.0101595300, abs=1e-8)
    assert ev.dy_dc == pytest.approx(-0.0574863420, abs=1e-8)
    assert ev.dy_dc1 == pytest.approx(0.7653850734, abs=1e-9)
    assert ev.dy_dc2 == pytest.approx(0.1599932276, abs=1e-9)


def test_sigmoid_core_scales_with_c():
    ev = evaluate(DeuParams(0, 0, 2), 0.0)
    assert ev.y == pytest.approx(0.25)


def test_evaluate_rejects_non_finite_time():
    with pytest.raises(ValueError):
        evaluate(DeuParams(0, 1, 0), math.inf)


def test_array_and_scalar_agree():
    p = DeuParams(0.5, -0.3, 1.2, 0.1, 0.2)
    t = np.linspace(-2, 2, 9)
    arr = evaluate(p, t)
    for i, ti in enumerate(t):
        assert evaluate(p, float(ti)).y == arr.y[i]


def test_critical_partials_agree_with_neighbouring_regimes():
    # the step response is smooth across disc = 0, so differences through
    # the over/underdamped forms must reproduce the critical partials
    p = DeuParams(1.0, 2.0, 1.0)
    assert classify_regime(p) is Regime.GENERAL_CRITICAL
    t, h = 1.3, 1e-4
    ev = evaluate(p, t)
    for name in ("a", "b", "c"):
        hi = evaluate_arrays(t, **{**dict(a=p.a, b=p.b, c=p.c, c1=0.0, c2=0.0),
                                   name: getattr(p, name) + h}).y
        lo = evaluate_arrays(t, **{**dict(a=p.a, b=p.b, c=p.c, c1=0.0, c2=0.0),
                                   name: getattr(p, name) - h}).y
        assert getattr(ev, f"dy_d{name}") == pytest.approx((hi - lo) / (2 * h), rel=1e-6)


@given(times.filter(lambda t: t != 0.0))
def test_relu_reduction_is_exact(t):
    assert evaluate(DeuParams(0, 1, 0), t).y == max(0.0, t)


@given(clamped_params(), times, st.floats(1e-3, 1.0))
def test_linear_in_initial_condition_coefficients(p, t, h):
    base = evaluate(p, t)
    up1 = evaluate(p.replace(c1=p.c1 + h), t).y
    up2 = evaluate(p.replace(c2=p.c2 + h), t).y
    scale = max(1.0, abs(base.y))
    assert up1 - base.y == pytest.approx(h * base.dy_dc1, abs=1e-9 * scale)
    assert up2 - base.y == pytest.approx(h * base.dy_dc2, abs=1e-9 * scale)


@given(clamped_params(), times)
def test_outputs_are_finite(p, t):
    ev = evaluate(p, t)
    assert all(math.isfinite(v) for v in (ev.y, ev.dy_dt, ev.dy_da, ev.dy_db, ev.dy_dc, ev.dy_dc1, ev.dy_dc2))
