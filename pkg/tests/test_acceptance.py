"""The ten acceptance criteria, each at its stated tolerance and runtime bound.

Run with ``pytest tests/test_acceptance.py -v`` (the terminal summary lists
one PASS/FAIL line per criterion) or directly with ``python``.
"""
import functools
import math

import numpy as np
import pytest

from acceptance_registry import criterion
from infelastica.classifier import classify
from infelastica.dubins import random_csc_fixture
from infelastica.families import (NAMED_BLUEPRINTS, comparison_length, comparison_path, make_circular_arc,
                                  make_comparison_curve, make_helix, make_semicircle_triple, make_type_i_concat)
from infelastica.functionals import PenaltyConfig, eval_Jpmu, eval_Kalpha, eval_Kinf, eval_Kp, grad_Jpmu
from infelastica.geometry import Curve, ProblemSpec, TangentField, WeightFunction
from infelastica.residuals import (ElasticaCertificate, alpha1_equation_residual, certificate_scan,
                                   minimiser_certificate_check, original_residual)
from infelastica.shooting import IVPState, gram_volume, integrate_ivp, shoot_boundary, to_spherical
from infelastica.solver import SolverOptions, continuation_solve

UNIT = WeightFunction.constant(1.0)
DUBINS_SEED = 2024


@functools.lru_cache(maxsize=None)
def dubins_fixtures():
    rng = np.random.default_rng(DUBINS_SEED)
    return tuple(random_csc_fixture(rng, 1.0) for _ in range(3))


def _spec_from_path(path):
    (a1, T1), (a2, T2) = path.start, path.end
    return ProblemSpec(path.length, a1, a2, T1, T2)


@functools.lru_cache(maxsize=None)
def dubins_solves():
    opts = SolverOptions(N=1024)
    return tuple(continuation_solve(_spec_from_path(c.path), opts=opts) for c in dubins_fixtures())


TRIPLE_SPEC = ProblemSpec(math.pi, np.array([-1.0, 0.0]), np.array([1.0, 0.0]),
                          np.array([0.0, 1.0]), np.array([0.0, -1.0]))


@functools.lru_cache(maxsize=None)
def triple_solve():
    return continuation_solve(TRIPLE_SPEC, opts=SolverOptions(N=1024))


@criterion(1, "circular-arc certificate", limit=5)
def test_01_circular_arc_certificate():
    ell = 2 * math.pi / 3
    curve, _ = make_circular_arc(1.0, ell, N=2048)
    lam = np.array([math.sqrt(3) / 2, -0.5])
    T = curve.tangents
    g = 1.0 + T @ lam
    cert = ElasticaCertificate(lam, 1.0, g, curve.s, "original")
    r1, r2 = original_residual(curve, g, lam, UNIT, 1.0)
    assert max(r1, r2) <= 1e-6
    ok, margin = minimiser_certificate_check(cert, T, UNIT)
    assert ok
    long_curve, _ = make_circular_arc(1.0, 1.1 * ell, N=2048)
    scan = certificate_scan(long_curve, UNIT, 1.0)
    assert not scan.passed
    return f"residual {max(r1, r2):.1e}, margin {margin:.1e}; 1.1x scan best margin {scan.margin:.3f}"


@criterion(2, "helix certificate", limit=5)
def test_02_helix_certificate():
    worst_k, worst_r = 0.0, 0.0
    for r, om in [(1.0, math.pi / 4), (1.0, math.pi / 3), (2.0, math.pi / 6)]:
        curve, cert = make_helix(r, om, 6.0, N=2048)
        k = math.cos(om) / r
        eta = math.sin(om) - math.cos(om) / math.tan(om)
        dk = abs(eval_Kalpha(curve, UNIT) - k)
        res = alpha1_equation_residual(curve, k, cert.lam, eta)
        assert dk <= 1e-3
        assert res <= 1e-6
        worst_k, worst_r = max(worst_k, dk), max(worst_r, res)
    return f"max |K - k| {worst_k:.1e}, max residual {worst_r:.1e}"


@criterion(3, "comparison-curve geometry", limit=5)
def test_03_comparison_geometry():
    assert abs(comparison_length(1 / 3) - math.pi) <= 1e-12
    assert abs(comparison_length(1.0) - math.pi) <= 1e-12
    rs = np.linspace(1 / 3, 1, 102)[1:-1]
    vals = np.array([comparison_length(r) for r in rs])
    assert np.all(vals < math.pi)
    h = 1e-4
    second = np.array([(comparison_length(r + h) - 2 * comparison_length(r) + comparison_length(r - h)) / h ** 2
                       for r in rs])
    assert np.all(second > 0)
    worst = 0.0
    for r in (0.4, 0.5, 0.7, 0.9):
        curve = make_comparison_curve(r)
        assert abs(comparison_path(r).length - math.pi) <= 1e-6
        assert abs(curve.length - math.pi) <= 1e-6
        assert abs(curve.polyline_length() - math.pi) <= 1e-5
        dk = abs(eval_Kalpha(curve, UNIT) - 1 / r)
        assert dk <= 1e-3
        worst = max(worst, dk)
    return f"min second difference {second.min():.3f}, max |K1 - 1/r| {worst:.1e}"


@criterion(4, "solver vs Dubins oracle", limit=120)
def test_04_solver_vs_dubins():
    devs = []
    for cand, res in zip(dubins_fixtures(), dubins_solves()):
        assert res.schedule[-1] == 1024 and res.final.tau_p.N == 1024
        devs.append(abs(res.final.k_p - 1.0))
    assert max(devs) <= 0.05
    words = " ".join(c.word for c in dubins_fixtures())
    return f"{words}: |k - 1| = " + ", ".join(f"{d:.1e}" for d in devs)


@criterion(5, "semicircle triple is not a minimiser", limit=60)
def test_05_triple_not_minimiser():
    res = triple_solve()
    k = res.final.k_p
    assert k <= 2.9
    return f"final k {k:.6f}"


@criterion(6, "p-monotonicity and reference bound")
def test_06_monotonicity():
    solves = list(dubins_solves()) + [triple_solve()]
    for res in solves:
        assert np.all(np.diff(res.k_values) >= -1e-6)
    worst = -np.inf
    for cand in dubins_fixtures():
        N = 256
        s = np.linspace(0.0, cand.length, N + 1)
        ref = TangentField.from_raw(s, cand.path.tangent(s))
        # boundary data of the discrete reference so it is exactly feasible
        a2 = cand.path.start[0] + (np.full(N + 1, s[1]) * np.r_[0.5, np.ones(N - 1), 0.5]) @ ref.values
        spec = ProblemSpec(cand.length, cand.path.start[0], a2, ref.values[0], ref.values[-1])
        mu = 10.0 * eval_Kp(ref, 2)
        res = continuation_solve(spec, mu=mu, init=ref, anchor=ref, opts=SolverOptions(N=N))
        assert np.all(np.diff(res.k_values) >= -1e-6)
        bound = eval_Kinf(ref)
        for r in res.results:
            J = eval_Jpmu(r.tau_p, PenaltyConfig(r.p, mu, ref), 1.0)
            assert J <= bound + 1e-9
            worst = max(worst, J - bound)
    return f"{len(solves)} fixture solves monotone; max J - K_inf(ref) = {worst:.2e}"


@criterion(7, "gradient correctness", limit=10)
def test_07_gradient():
    rng = np.random.default_rng(7)
    worst = 0.0
    for p in (2, 8, 32):
        for n in (2, 3):
            for _ in range(20):
                N = 24
                t = np.linspace(0.0, 2.0, N + 1)
                base = np.cumsum(rng.normal(scale=0.3, size=(N + 1, n)), axis=0) + rng.normal(size=n)
                tau = TangentField.from_raw(t, base)
                tau0 = TangentField.from_raw(t, base + rng.normal(scale=0.2, size=base.shape))
                beta = rng.uniform(0.5, 2.0, size=N + 1)
                cfg = PenaltyConfig(p, float(rng.uniform(0.1, 5.0)), tau0)
                g = grad_Jpmu(tau, cfg, beta)
                assert abs(_J(t, tau.values, cfg, beta) - eval_Jpmu(tau, cfg, beta)) <= 1e-12 * (1 + abs(_J(t, tau.values, cfg, beta)))
                fd = np.zeros_like(g)
                h = 1e-6
                vals = tau.values
                for i in range(N + 1):
                    for j in range(n):
                        vp, vm = vals.copy(), vals.copy()
                        vp[i, j] += h
                        vm[i, j] -= h
                        fd[i, j] = (_J(t, vp, cfg, beta) - _J(t, vm, cfg, beta)) / (2 * h)
                rel = np.linalg.norm(g - fd) / np.linalg.norm(g)
                assert rel <= 1e-5, (p, n, rel)
                worst = max(worst, rel)
    return f"max relative error {worst:.1e} over 120 fields"


def _J(t, vals, cfg, beta):
    """Discrete J evaluated directly from raw node values (off the sphere)."""
    dt = t[1] - t[0]
    speed = np.linalg.norm(np.diff(vals, axis=0), axis=1) / dt
    K = np.mean(speed ** cfg.p) ** (1.0 / cfg.p)
    w = np.full(len(t), dt)
    w[0] = w[-1] = 0.5 * dt
    pen = cfg.mu / (2 * (t[-1] - t[0])) * np.sum(w * beta * np.sum((vals - cfg.tau0.values) ** 2, axis=1))
    return K + pen


@criterion(8, "ODE conservation", limit=30)
def test_08_ode_conservation():
    rng = np.random.default_rng(8)
    worst = {"speed": 0.0, "B": 0.0, "sphere": 0.0, "span": 0.0}
    for run in range(10):
        n = 3 if run < 6 else 4
        tau0 = rng.normal(size=n)
        tau0 /= np.linalg.norm(tau0)
        v = rng.normal(size=n)
        v -= (v @ tau0) * tau0
        v *= rng.uniform(0.5, 1.5) / np.linalg.norm(v)
        lam = rng.normal(size=n)
        lam /= np.linalg.norm(lam)
        beta = 1.0 if run % 2 == 0 else (lambda t: 1.0 if t < 4.0 else 1.5)
        traj = integrate_ivp(IVPState(0.0, tau0, v, float(rng.uniform(0.5, 2.0))), lam, beta, 10.0,
                             breakpoints=(4.0,))
        speed = np.linalg.norm(traj.tau_prime, axis=1)
        B = traj.f * np.array([gram_volume(lam, a, b) for a, b in zip(traj.tau, traj.tau_prime)])
        if n == 3:
            # the angle form of B evaluated independently on a subsample
            for i in range(0, len(traj.t), 25):
                st = IVPState(traj.t[i], traj.tau[i], traj.tau_prime[i], traj.f[i])
                sph = to_spherical(st, lam)
                Bs = sph.f * abs(sph.dvarphi) * math.sin(sph.vartheta) ** 2
                assert abs(Bs - B[i]) <= 1e-9 * max(1.0, abs(B[i]))
        worst["speed"] = max(worst["speed"], float(np.abs(speed - speed[0]).max()))
        worst["B"] = max(worst["B"], float(np.abs(B - B[0]).max()))
        worst["sphere"] = max(worst["sphere"], float(np.abs(np.linalg.norm(traj.tau, axis=1) - 1).max()))
        assert traj.f.min() > 0
        if n == 4:
            worst["span"] = max(worst["span"], traj.span_deviation)
    assert worst["speed"] <= 1e-6 and worst["B"] <= 1e-6
    assert worst["sphere"] <= 1e-9
    assert worst["span"] <= 1e-8
    return ", ".join(f"{k} {v:.1e}" for k, v in worst.items())


@criterion(9, "shooting round trip", limit=60)
def test_09_shooting_round_trip():
    r, om, ell = 1.0, math.pi / 4, 5.0
    curve, cert = make_helix(r, om, ell, N=2048)
    k = math.cos(om) / r
    f0 = math.cos(om) ** 2 / math.sin(om)
    spec = ProblemSpec(ell, curve.points[0], curve.points[-1], curve.tangents[0], curve.tangents[-1])
    res = shoot_boundary(spec, k_guess=1.02 * k, seed=0)
    assert res.success
    assert res.defect <= 1e-6
    errs = (float(np.linalg.norm(res.lam - cert.lam)), abs(res.f0 - f0), abs(res.k - k))
    assert max(errs) <= 1e-4
    return f"defect {res.defect:.1e}; errors lambda {errs[0]:.1e}, f0 {errs[1]:.1e}, k {errs[2]:.1e}"


def _rotation(n, rng):
    Q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    if np.linalg.det(Q) < 0:
        Q[:, 0] = -Q[:, 0]
    return Q, rng.normal(size=n) * 3


def _angle(u, v):
    c = abs(float(u @ v)) / (np.linalg.norm(u) * np.linalg.norm(v))
    return math.acos(min(1.0, c))


@criterion(10, "classification", limit=30)
def test_10_classification():
    rng = np.random.default_rng(10)
    cases = []
    triple, _ = make_semicircle_triple(3072)
    cases.append(("triple", triple, "type-i", np.array([1.0, 0.0]), np.array([1.0, 0.0]), 3))
    for name, make in NAMED_BLUEPRINTS.items():
        bp = make()
        cases.append((name, make_type_i_concat(bp), "type-i", bp.line_direction, bp.lam, None))
    for r, om in [(0.5, math.pi / 6), (1.0, math.pi / 4), (2.0, math.pi / 3)]:
        curve, cert = make_helix(r, om, 6.0, N=2048)
        cases.append((f"helix {r} {om:.3f}", curve, "type-ii", None, cert.lam, None))
    s = np.linspace(0.0, 3.0, 513)
    cases.append(("line", Curve(s, np.outer(s, [0.6, 0.8]) + [1.0, -2.0]), "straight-line", None, None, None))
    count = 0
    for name, curve, verdict, direction, lam, N in cases:
        rep = classify(curve)
        assert rep.verdict == verdict, (name, rep.verdict, rep.notes)
        if N is not None:
            assert rep.N == N
        if verdict == "type-i":
            assert rep.conditions["junction_signs"], name
            assert _angle(rep.line_direction, direction) <= 1e-6, name
            assert np.linalg.norm(rep.lam - lam) <= 1e-6, name
        if verdict == "type-ii":
            assert rep.witness["g_min"] > 0
            assert np.linalg.norm(rep.lam - lam) <= 1e-6, name
        for _ in range(10):
            Q, b = _rotation(curve.n, rng)
            moved = classify(curve.transformed(Q, b))
            assert moved.verdict == rep.verdict, name
            assert moved.N == rep.N, name
            if rep.lam is not None:
                assert np.linalg.norm(moved.lam - Q @ rep.lam) <= 1e-6, name
            if rep.line_direction is not None:
                assert _angle(moved.line_direction, Q @ rep.line_direction) <= 1e-6, name
            count += 1
    return f"{len(cases)} curves, {count} rigid motions"


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-v"]))
