import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from infelastica.families import make_circular_arc
from infelastica.functionals import (PenaltyConfig, eval_Jpmu, eval_Kalpha, eval_Kinf, eval_Kp, grad_Jpmu, grad_Kp,
                                     lp_mean, penalty_term)
from infelastica.geometry import TangentField, WeightFunction


def _field(seed, N=32, n=3):
    rng = np.random.default_rng(seed)
    t = np.linspace(0.0, 1.5, N + 1)
    base = np.cumsum(rng.normal(scale=0.25, size=(N + 1, n)), axis=0) + rng.normal(size=n)
    return TangentField.from_raw(t, base)


def test_great_circle_speed():
    t = np.linspace(0.0, 2.0, 401)
    tau = TangentField(t, np.column_stack([np.cos(1.5 * t), np.sin(1.5 * t)]))
    chord_speed = 2 * math.sin(1.5 * 0.005 / 2) / 0.005
    for p in (2, 8, 1024):
        assert eval_Kp(tau, p) == pytest.approx(chord_speed, rel=1e-12)
    assert eval_Kinf(tau) == pytest.approx(chord_speed, rel=1e-12)


def test_lp_mean_large_exponent():
    x = np.array([1e-3, 2.0, 1.999])
    assert lp_mean(x, 2 ** 20) == pytest.approx(2.0, rel=1e-5)
    assert lp_mean(np.zeros(3), 4) == 0.0


@given(st.integers(0, 10_000), st.floats(2, 50), st.floats(1, 4))
def test_Kp_nondecreasing_in_p_and_bounded(seed, p, factor):
    tau = _field(seed)
    assert eval_Kp(tau, p) <= eval_Kp(tau, p * factor) * (1 + 1e-12)
    assert eval_Kp(tau, p * factor) <= eval_Kinf(tau) * (1 + 1e-12)


@given(st.integers(0, 10_000))
def test_Kp_rotation_invariant(seed):
    tau = _field(seed)
    Q, _ = np.linalg.qr(np.random.default_rng(seed).normal(size=(3, 3)))
    rot = TangentField(tau.t, tau.values @ Q.T)
    assert eval_Kp(rot, 8) == pytest.approx(eval_Kp(tau, 8), rel=1e-12)


def test_penalty_vanishes_at_anchor():
    tau = _field(1)
    assert penalty_term(tau, tau, 1.0, 5.0) == 0.0
    cfg = PenaltyConfig(4, 3.0, tau)
    assert eval_Jpmu(tau, cfg, 1.0) == pytest.approx(eval_Kp(tau, 4))


def test_penalty_config_validation():
    tau = _field(2)
    with pytest.raises(ValueError):
        PenaltyConfig(1.5, 0.0, tau)
    with pytest.raises(ValueError):
        PenaltyConfig(2, -1.0, tau)


@pytest.mark.parametrize("p", [2, 8, 32])
def test_grad_Kp_directional_derivative(p):
    tau = _field(p, N=40, n=2)
    rng = np.random.default_rng(p)
    v = rng.normal(size=tau.values.shape)
    K, g = grad_Kp(tau.values, tau.dt, p)
    h = 1e-6
    Kp, _ = grad_Kp(tau.values + h * v, tau.dt, p)
    Km, _ = grad_Kp(tau.values - h * v, tau.dt, p)
    assert (Kp - Km) / (2 * h) == pytest.approx(np.sum(g * v), rel=1e-6)


def test_grad_Jpmu_includes_penalty():
    tau = _field(3)
    anchor = _field(4)
    g0 = grad_Jpmu(tau, PenaltyConfig(4, 0.0, anchor), 1.0)
    g1 = grad_Jpmu(tau, PenaltyConfig(4, 2.0, anchor), 1.0)
    w = np.full(tau.N + 1, tau.dt)
    w[0] = w[-1] = tau.dt / 2
    expected = (2.0 / tau.L) * w[:, None] * (tau.values - anchor.values)
    assert np.allclose(g1 - g0, expected)


def test_Kalpha_of_arc_with_weight():
    curve, _ = make_circular_arc(0.5, 1.0, N=1024)
    assert eval_Kalpha(curve, WeightFunction.constant(1.0)) == pytest.approx(2.0, rel=1e-5)
    assert eval_Kalpha(curve, WeightFunction.constant(3.0)) == pytest.approx(6.0, rel=1e-5)
