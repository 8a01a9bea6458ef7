import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import trapezoid

from infelastica.errors import DimensionError, InvalidWeightError, NotArcLengthError
from infelastica.geometry import (Curve, ProblemSpec, TangentField, WeightFunction, build_reparametrization,
                                  chord_residual, integrate_tangent, tangent_from_curve)

weights = st.lists(st.floats(0.2, 5.0), min_size=1, max_size=5)


def _weight(values, interpolation="constant", ell=3.0):
    knots = np.linspace(0.0, ell, len(values) + 1)[:-1]
    return WeightFunction(knots, np.array(values), interpolation)


def test_weight_rejects_nonpositive():
    with pytest.raises(InvalidWeightError):
        WeightFunction(np.array([0.0, 1.0]), np.array([1.0, 0.0]))
    with pytest.raises(InvalidWeightError):
        WeightFunction(np.array([0.5]), np.array([1.0]))


def test_weight_dict_round_trip():
    w = WeightFunction.from_pairs([[0, 1.0], [1.5, 2.0]], "linear")
    back = WeightFunction.from_dict(w.to_dict())
    assert np.array_equal(back.knots, w.knots) and back.interpolation == "linear"


def test_constant_weight_scales_length():
    rep = build_reparametrization(WeightFunction.constant(2.0), 3.0, 64)
    assert rep.L == pytest.approx(1.5)
    assert np.allclose(rep.s, 2.0 * rep.t)
    assert np.allclose(rep.beta, 2.0)


def test_piecewise_constant_length():
    w = WeightFunction(np.array([0.0, 1.0]), np.array([1.0, 2.0]))
    rep = build_reparametrization(w, 3.0, 64)
    assert rep.L == pytest.approx(1.0 + 2.0 / 2.0)


@given(weights, st.sampled_from(["constant", "linear"]))
def test_psi_phi_inverse(values, interp):
    w = _weight(values, interp)
    rep = build_reparametrization(w, 3.0, 32)
    s = np.linspace(0.0, 3.0, 57)
    assert np.allclose(rep.phi(rep.psi(s)), s, atol=1e-10)
    # psi' = 1/alpha: compare with a fine quadrature
    fine = np.linspace(0.0, 3.0, 200001)
    ref = trapezoid(1.0 / w(fine), fine)
    assert rep.L == pytest.approx(ref, rel=1e-4)


def test_tangent_field_requires_unit_values():
    t = np.linspace(0, 1, 5)
    with pytest.raises(ValueError):
        TangentField(t, np.ones((5, 2)))
    with pytest.raises(DimensionError):
        TangentField(t, np.ones((4, 2)) / math.sqrt(2))


def test_integrate_tangent_circle():
    N = 512
    rep = build_reparametrization(WeightFunction.constant(), math.pi, N)
    vals = np.column_stack([-np.sin(rep.t), np.cos(rep.t)])
    curve = integrate_tangent(TangentField(rep.t, vals), rep, [1.0, 0.0])
    exact = np.column_stack([np.cos(rep.s), np.sin(rep.s)])
    assert np.abs(curve.points - exact).max() < 1e-5
    back = tangent_from_curve(curve, rep)
    assert np.abs(back.values - vals).max() < 1e-4


def test_tangent_from_curve_rejects_wrong_speed():
    rep = build_reparametrization(WeightFunction.constant(), 1.0, 32)
    curve = Curve(rep.s, np.column_stack([2 * rep.s, 0 * rep.s]))
    with pytest.raises(NotArcLengthError):
        tangent_from_curve(curve, rep)


def test_chord_residual_zero_for_straight_data():
    spec = ProblemSpec(2.0, np.zeros(3), np.array([2.0, 0, 0]), np.array([1.0, 0, 0]), np.array([1.0, 0, 0]))
    rep = spec.reparametrization(32)
    tau = TangentField(rep.t, np.tile(spec.T1, (33, 1)))
    assert np.linalg.norm(chord_residual(tau, rep, spec.a)) < 1e-14


def test_problem_spec_validation_and_round_trip():
    with pytest.raises(DimensionError):
        ProblemSpec(1.0, np.zeros(2), np.zeros(3), np.array([1.0, 0]), np.array([1.0, 0]))
    with pytest.raises(ValueError):
        ProblemSpec(1.0, np.zeros(2), np.zeros(2), np.array([2.0, 0]), np.array([1.0, 0]))
    spec = ProblemSpec(1.5, np.zeros(2), np.ones(2), np.array([1.0, 0]), np.array([0, 1.0]))
    back = ProblemSpec.from_dict(spec.to_dict())
    assert back.ell == spec.ell and np.array_equal(back.a2, spec.a2)


@given(st.floats(-3, 3), st.floats(-5, 5), st.floats(-5, 5))
def test_curve_rigid_motion_preserves_lengths(angle, bx, by):
    s = np.linspace(0, 2, 33)
    curve = Curve(s, np.column_stack([np.cos(s), np.sin(s)]))
    R = np.array([[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]])
    moved = curve.transformed(R, np.array([bx, by]))
    assert moved.polyline_length() == pytest.approx(curve.polyline_length(), rel=1e-12)
