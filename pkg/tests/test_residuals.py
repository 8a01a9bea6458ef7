import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from infelastica.errors import DegenerateExtractionError, InconsistentCertificateError, NotEvaluableError
from infelastica.families import make_circular_arc, make_helix
from infelastica.geometry import TangentField, WeightFunction
from infelastica.residuals import (ElasticaCertificate, alpha1_equation_residual, certificate_scan, direction_grid,
                                   extract_u, f_from_u, minimiser_certificate_check, normalize_lambda,
                                   original_residual, perp_projection, rescaled_residual, system_residual,
                                   u_from_f)

UNIT = WeightFunction.constant()


def _helix_field(r=1.0, om=math.pi / 4, ell=5.0, N=2048):
    curve, cert = make_helix(r, om, ell, N=N)
    return curve, cert, TangentField(curve.s, curve.tangents)


def test_helix_original_frame():
    curve, cert = make_helix(1.0, math.pi / 3, 6.0, N=2048)[:2]
    r1, r2 = original_residual(curve, cert.witness, cert.lam, UNIT, cert.k)
    assert max(r1, r2) <= 1e-6


def test_helix_rescaled_frame_and_system_u():
    curve, cert, tau = _helix_field()
    # unit weight: the rescaled witness coincides with g
    r1, r2 = rescaled_residual(tau, cert.witness, cert.lam, 1.0, cert.k)
    assert max(r1, r2) <= 1e-6
    u = u_from_f(tau, cert.witness, cert.k)
    e1, e2 = system_residual(tau, u, cert.lam, 1.0, cert.k)
    assert max(e1, e2) <= 1e-6
    assert np.allclose(f_from_u(u, cert.k), cert.witness, atol=1e-8)


def test_wrong_multiplier_is_detected():
    curve, cert = make_helix(1.0, math.pi / 4, 5.0, N=1024)[:2]
    bad = cert.lam + np.array([0.1, 0.0, 0.0])
    r1, _ = original_residual(curve, cert.witness, bad, UNIT, cert.k)
    assert r1 > 1e-3


def test_alpha1_residual_unevaluable():
    curve, cert = make_helix(1.0, math.pi / 4, 2.0, N=256)[:2]
    tangents = curve.tangents
    lam = cert.lam
    with pytest.raises(NotEvaluableError):
        alpha1_equation_residual(curve, cert.k, lam, float(tangents[0] @ lam), threshold=1.0)


@given(st.integers(0, 1000))
def test_perp_projection_orthogonal(seed):
    rng = np.random.default_rng(seed)
    T = rng.normal(size=(6, 4))
    T /= np.linalg.norm(T, axis=1, keepdims=True)
    Tp = rng.normal(size=(6, 4))
    Tp -= np.sum(Tp * T, axis=1, keepdims=True) * T
    v = rng.normal(size=4)
    P = perp_projection(T, Tp, v)
    assert np.abs(np.sum(P * T, axis=1)).max() < 1e-12
    assert np.abs(np.sum(P * Tp, axis=1)).max() < 1e-12
    assert np.allclose(perp_projection(T, Tp, P), P)


def test_certificate_json_round_trip():
    _, cert = make_helix(1.0, math.pi / 4, 3.0, N=64)
    back = ElasticaCertificate.from_json(cert.to_json())
    assert np.array_equal(back.lam, cert.lam) and np.array_equal(back.witness, cert.witness)
    assert back.eta == cert.eta and back.frame == "original"


def test_certificate_validation():
    grid = np.linspace(0, 1, 5)
    with pytest.raises(InconsistentCertificateError):
        ElasticaCertificate([1.0, 0.0], 1.0, -np.ones(5), grid)
    with pytest.raises(InconsistentCertificateError):
        ElasticaCertificate([1.0, 0.0], 1.0, np.zeros(5), grid)
    with pytest.raises(ValueError):
        ElasticaCertificate([1.0, 0.0], 1.0, np.ones(5), grid, frame="other")


def test_normalize_lambda_scales_witness():
    t = np.linspace(0, 1, 33)
    tau = TangentField(t, np.column_stack([np.cos(t), np.sin(t)]))
    cert = ElasticaCertificate([0.0, 3.0], 1.0, np.full(33, 6.0), t, "rescaled")
    out = normalize_lambda(cert, tau)
    assert np.linalg.norm(out.lam) == pytest.approx(1.0)
    assert np.allclose(out.witness, 2.0)


def test_normalize_lambda_zero_multiplier():
    t = np.linspace(0, 1, 33)
    tau = TangentField(t, np.column_stack([np.cos(t), np.sin(t)]))
    cert = ElasticaCertificate([0.0, 0.0], 1.0, np.ones(33), t, "rescaled")
    out = normalize_lambda(cert, tau)
    assert out.witness.min() == pytest.approx(1.0)
    assert np.allclose(out.lam, tau.values[0])
    off = TangentField.from_raw(t, np.column_stack([np.cos(t), np.sin(t), np.sin(3 * t)]))
    cert3 = ElasticaCertificate([0.0, 0.0, 0.0], 1.0, np.ones(33), t, "rescaled")
    with pytest.raises(InconsistentCertificateError):
        normalize_lambda(cert3, off)


def test_extract_u_straight_field_raises():
    class Flat:
        k_p = 0.0
    with pytest.raises(DegenerateExtractionError):
        extract_u(Flat(), None)


def test_arc_scan_at_threshold_length():
    ell = 2 * math.pi / 3
    curve, cert = make_circular_arc(1.0, ell, N=1024)
    ok, margin = minimiser_certificate_check(cert, curve.tangents, UNIT)
    assert ok and margin >= -1e-10
    short, _ = make_circular_arc(1.0, 1.5, N=512)
    assert certificate_scan(short, UNIT, 1.0).passed


def test_arc_beyond_threshold_has_no_certificate():
    curve, _ = make_circular_arc(1.0, 2.5, N=512)
    res = certificate_scan(curve, UNIT, 1.0)
    assert not res.passed and res.margin < 0


def test_direction_grid_unit():
    for n in (2, 3):
        d = direction_grid(n, 50)
        assert np.allclose(np.linalg.norm(d, axis=1), 1.0)
    with pytest.raises(ValueError):
        direction_grid(4, 10)
