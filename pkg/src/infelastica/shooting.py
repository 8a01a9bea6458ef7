"""Initial value problem for helicoidal solutions and boundary shooting.

The Cartesian system, for a unit ``tau`` with ``tau' = v``::

    tau'' = -|v|^2 tau + (beta / f) (|v|^2 (lam - (lam.tau) tau) - (lam.v) v)
    f'    = beta lam.v
    c'    = beta tau

(the bracket is ``|v|^2`` times the projection of ``lam`` off ``span{tau, v}``).
Along solutions ``|v|`` and ``B = f sqrt(Gram(lam, tau, v))`` are conserved.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import least_squares

from .errors import CoordinateBreakdownError, DimensionError, SingularStateError, StepSizeError
from .geometry import ProblemSpec

F_FLOOR = 1e-12
SIN_FLOOR = 1e-9

BetaLike = Union[float, Callable[[float], float]]


@dataclass(frozen=True)
class IVPState:
    t: float
    tau: np.ndarray
    tau_prime: np.ndarray
    f: float

    def __post_init__(self):
        tau = np.asarray(self.tau, dtype=float)
        tp = np.asarray(self.tau_prime, dtype=float)
        if tau.shape != tp.shape or tau.ndim != 1:
            raise DimensionError("tau and tau_prime must be vectors of one dimension")
        if abs(np.linalg.norm(tau) - 1.0) > 1e-9:
            raise ValueError("tau must be a unit vector")
        if abs(tau @ tp) > 1e-9:
            raise ValueError("tau_prime must be orthogonal to tau")
        if not self.f > 0:
            raise SingularStateError("f must be positive")
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "tau_prime", tp)

    @property
    def k(self) -> float:
        return float(np.linalg.norm(self.tau_prime))


@dataclass(frozen=True)
class SphericalState:
    """Angles of ``tau = (cos p sin q, sin p sin q, cos q)`` relative to ``lam = e3``."""

    varphi: float
    dvarphi: float
    vartheta: float
    dvartheta: float
    f: float

    def __post_init__(self):
        if not 0 < self.vartheta < math.pi:
            raise CoordinateBreakdownError("polar angle must lie in (0, pi)")


def _beta_fn(beta: BetaLike) -> Callable[[float], float]:
    if callable(beta):
        return lambda t: float(beta(t))
    b = float(beta)
    return lambda t: b


def _tau_accel(tau, v, f, b, lam):
    k2 = v @ v
    lt = lam @ tau
    lv = lam @ v
    return -k2 * tau + (b / f) * (k2 * (lam - lt * tau) - lv * v)


def ivp_rhs(state: IVPState, beta_at_t: float, lam) -> tuple:
    """``(tau', tau'', f')`` at ``state``."""
    if state.f <= F_FLOOR:
        raise SingularStateError(f"f = {state.f:.3g} below floor")
    lam = np.asarray(lam, dtype=float)
    acc = _tau_accel(state.tau, state.tau_prime, state.f, beta_at_t, lam)
    return state.tau_prime.copy(), acc, beta_at_t * float(lam @ state.tau_prime)


def spherical_rhs(state: SphericalState, beta: float) -> np.ndarray:
    """Derivatives of ``(varphi, varphi', vartheta, vartheta', f)``."""
    p, dp, q, dq, f = state.varphi, state.dvarphi, state.vartheta, state.dvartheta, state.f
    sq, cq = math.sin(q), math.cos(q)
    if sq < SIN_FLOOR:
        raise CoordinateBreakdownError("polar singularity")
    if f <= F_FLOOR:
        raise SingularStateError(f"f = {f:.3g} below floor")
    ddp = (beta / f * dp * dq * sq * sq - 2.0 * dp * dq * cq) / sq
    ddq = dp * dp * sq * cq - beta / f * dp * dp * sq ** 3
    return np.array([dp, ddp, dq, ddq, -beta * dq * sq])


def polar_frame(lam) -> np.ndarray:
    """Orthonormal 3x3 matrix whose last column is ``lam``."""
    lam = np.asarray(lam, dtype=float)
    lam = lam / np.linalg.norm(lam)
    seed = np.eye(3)[int(np.argmin(np.abs(lam)))]
    e1 = seed - (seed @ lam) * lam
    e1 /= np.linalg.norm(e1)
    return np.column_stack([e1, np.cross(lam, e1), lam])


def to_spherical(state: IVPState, lam) -> SphericalState:
    if state.tau.shape != (3,):
        raise DimensionError("spherical coordinates need n = 3")
    Q = polar_frame(lam)
    x, dx = Q.T @ state.tau, Q.T @ state.tau_prime
    q = math.acos(max(-1.0, min(1.0, x[2])))
    sq = math.sin(q)
    if sq < SIN_FLOOR:
        raise CoordinateBreakdownError("tau is parallel to lam")
    p = math.atan2(x[1], x[0])
    e1 = np.array([-math.sin(p), math.cos(p), 0.0])
    e2 = np.array([math.cos(p) * math.cos(q), math.sin(p) * math.cos(q), -sq])
    return SphericalState(p, (dx @ e1) / sq, q, dx @ e2, state.f)


def from_spherical(s: SphericalState, lam, t: float = 0.0) -> IVPState:
    Q = polar_frame(lam)
    p, q = s.varphi, s.vartheta
    tau = np.array([math.cos(p) * math.sin(q), math.sin(p) * math.sin(q), math.cos(q)])
    e1 = np.array([-math.sin(p), math.cos(p), 0.0])
    e2 = np.array([math.cos(p) * math.cos(q), math.sin(p) * math.cos(q), -math.sin(q)])
    dtau = s.dvarphi * math.sin(q) * e1 + s.dvartheta * e2
    return IVPState(t, Q @ tau, Q @ dtau, s.f)


def gram_volume(lam, tau, v) -> float:
    """``sqrt(det Gram(lam, tau, v))``: the volume spanned by the three vectors."""
    M = np.vstack([lam, tau, v])
    return math.sqrt(max(np.linalg.det(M @ M.T), 0.0))


def conserved_B(lam, tau, v, f) -> float:
    return f * gram_volume(lam, tau, v)


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray
    tau: np.ndarray
    tau_prime: np.ndarray
    f: np.ndarray
    position: np.ndarray
    speed_drift: float
    B_drift: float
    sphere_deviation: float
    min_f: float
    max_lam_tau: float
    span_deviation: float
    lam: np.ndarray

    @property
    def final(self) -> IVPState:
        return IVPState(float(self.t[-1]), self.tau[-1], self.tau_prime[-1], float(self.f[-1]))

    @property
    def B(self) -> np.ndarray:
        return self.f * np.array([gram_volume(self.lam, a, b) for a, b in zip(self.tau, self.tau_prime)])


# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


def _pack(tau, v, f, c):
    return np.concatenate([tau, v, [f], c])


def _make_rhs(n, lam, bfun):
    def rhs(t, y):
        tau, v, f = y[:n], y[n:2 * n], y[2 * n]
        if f <= F_FLOOR:
            raise SingularStateError(f"f = {f:.3g} below floor at t = {t:.6g}")
        b = bfun(t)
        out = np.empty_like(y)
        out[:n] = v
        out[n:2 * n] = _tau_accel(tau, v, f, b, lam)
        out[2 * n] = b * (lam @ v)
        out[2 * n + 1:] = b * tau
        return out
    return rhs


def _project(y, n):
    tau = y[:n] / np.linalg.norm(y[:n])
    v = y[n:2 * n]
    y[:n] = tau
    y[n:2 * n] = v - (v @ tau) * tau
    return y


def _dp45(rhs, t0, t1, y0, n, rtol, atol, h0=None, max_steps=200000):
    ts, ys = [t0], [y0.copy()]
    t, y = t0, y0.copy()
    span = t1 - t0
    if span <= 0:
        return ts, ys
    h = h0 if h0 else min(span, 1e-2 * span + 1e-3)
    k1 = rhs(t, y)
    steps = 0
    while t < t1:
        if steps > max_steps:
            raise StepSizeError("too many steps")
        h = min(h, t1 - t)
        K = [k1]
        for i in range(1, 7):
            yi = y + h * sum(a * K[j] for j, a in enumerate(_A[i]) if a != 0.0)
            K.append(rhs(t + _C[i] * h, yi))
        y5 = y + h * sum(b * K[j] for j, b in enumerate(_B5) if b != 0.0)
        err = h * sum(e * K[j] for j, e in enumerate(_E) if e != 0.0)
        sc = atol + rtol * np.maximum(np.abs(y), np.abs(y5))
        en = float(np.sqrt(np.mean((err / sc) ** 2)))
        if en <= 1.0:
            t = t + h if t1 - (t + h) > 1e-14 * abs(span) else t1
            y = _project(y5, n)
            k1 = rhs(t, y)
            ts.append(t)
            ys.append(y.copy())
            fac = 5.0 if en == 0 else min(5.0, 0.9 * en ** -0.2)
        else:
            fac = max(0.2, 0.9 * en ** -0.25)
        h *= fac
        if h < 1e-14 * max(1.0, abs(t)):
            raise StepSizeError(f"step size underflow at t = {t:.6g}")
        steps += 1
    return ts, ys


def integrate_ivp(init: IVPState, lam, beta: BetaLike, L: float, rtol: float = 1e-10, atol: float = 1e-10,
                  breakpoints: Sequence[float] = (), check_independent: bool = True,
                  drift_limit: float = 1e-6, start_position=None) -> Trajectory:
    """Integrate from ``init.t`` to ``L`` with a Dormand-Prince 5(4) pair and post-step projection.

    ``breakpoints`` (jumps of ``beta``) are stepped onto exactly.  Drift of
    ``|tau'|`` or ``B`` beyond ``drift_limit`` raises StepSizeError.
    """
    lam = np.asarray(lam, dtype=float)
    n = init.tau.shape[0]
    if lam.shape != (n,):
        raise DimensionError("lam has the wrong dimension")
    if check_independent and gram_volume(lam, init.tau, init.tau_prime) <= 1e-12 * max(init.k, 1e-300):
        raise SingularStateError("tau0, tau1 and lam are linearly dependent")
    bfun = _beta_fn(beta)
    rhs = _make_rhs(n, lam, bfun)
    c0 = np.zeros(n) if start_position is None else np.asarray(start_position, dtype=float)
    y = _pack(init.tau, init.tau_prime, init.f, c0)
    knots = [init.t] + sorted(b for b in breakpoints if init.t < b < L) + [L]
    ts, ys = [init.t], [y]
    for a, b in zip(knots[:-1], knots[1:]):
        tt, yy = _dp45(rhs, a, b, ys[-1], n, rtol, atol)
        ts.extend(tt[1:])
        ys.extend(yy[1:])
    Y = np.array(ys)
    tau, v, f, pos = Y[:, :n], Y[:, n:2 * n], Y[:, 2 * n], Y[:, 2 * n + 1:]
    speed = np.linalg.norm(v, axis=1)
    B = f * np.array([gram_volume(lam, a, b) for a, b in zip(tau, v)])
    speed_drift = float(np.abs(speed - speed[0]).max())
    B_drift = float(np.abs(B - B[0]).max())
    if max(speed_drift, B_drift) > drift_limit:
        raise StepSizeError(f"conserved quantities drift by {max(speed_drift, B_drift):.3g}")
    # distance of tau from span{tau0, tau1, lam}
    basis = np.linalg.svd(np.vstack([init.tau, init.tau_prime, lam]), full_matrices=False)[2]
    basis = basis[: min(3, n)]
    span_dev = float(np.linalg.norm(tau - (tau @ basis.T) @ basis, axis=1).max())
    traj = Trajectory(np.array(ts), tau, v, f, pos, speed_drift, B_drift,
                      float(np.abs(np.linalg.norm(tau, axis=1) - 1).max()), float(f.min()),
                      float(np.abs(tau @ lam).max()), span_dev, lam)
    return traj


def integrate_spherical(init: SphericalState, beta: BetaLike, L: float, t0: float = 0.0,
                        rtol: float = 1e-12, atol: float = 1e-12, t_eval=None):
    """Reference integration of the angle system with scipy's DOP853."""
    bfun = _beta_fn(beta)

    def rhs(t, y):
        return spherical_rhs(SphericalState(*y), bfun(t))

    sol = solve_ivp(rhs, (t0, L), [init.varphi, init.dvarphi, init.vartheta, init.dvartheta, init.f],
                    method="DOP853", rtol=rtol, atol=atol, t_eval=t_eval, dense_output=t_eval is None)
    if not sol.success:
        raise CoordinateBreakdownError(sol.message)
    return sol


def spherical_to_tau(varphi, vartheta, lam) -> np.ndarray:
    Q = polar_frame(lam)
    loc = np.stack([np.cos(varphi) * np.sin(vartheta), np.sin(varphi) * np.sin(vartheta), np.cos(vartheta)], -1)
    return loc @ Q.T


# ---------------------------------------------------------------- shooting

@dataclass(frozen=True)
class ShootingResult:
    success: bool
    lam: np.ndarray
    f0: float
    tau1: np.ndarray
    k: float
    defect: float
    trajectory: Optional[Trajectory]
    starts_tried: int
    message: str = ""


def _sphere_chart(x):
    a, b = x
    return np.array([math.cos(a) * math.sin(b), math.sin(a) * math.sin(b), math.cos(b)])


def _chart_inverse(v):
    v = v / np.linalg.norm(v)
    return math.atan2(v[1], v[0]), math.acos(max(-1.0, min(1.0, v[2])))


def _shoot_map(params, spec: ProblemSpec, bfun, breaks, Lt, basis):
    lam = _sphere_chart(params[:2])
    f0 = math.exp(params[2])
    tau1 = basis @ params[3:5]
    init = IVPState(0.0, spec.T1, tau1, f0)
    traj = integrate_ivp(init, lam, bfun, Lt, breakpoints=breaks, check_independent=False, drift_limit=np.inf)
    return np.concatenate([traj.tau[-1] - spec.T2, traj.position[-1] - spec.a]), traj


def shoot_boundary(spec: ProblemSpec, guess: Optional[tuple] = None, k_guess: Optional[float] = None,
                   starts: int = 32, seed: int = 0, tol: float = 1e-6, refine: int = 12,
                   accept: int = 3) -> ShootingResult:
    """Search ``(lam, f0, tau1)`` so that the IVP from ``T1`` meets ``T2`` and the chord.

    Starts are a seeded mix of Fibonacci directions for ``lam``, a log grid
    for ``f0`` on [0.1, 10] and random directions for ``tau1`` with length
    ``k_guess``; ``guess = (lam, f0, tau1)`` is tried first.  The starts with
    the smallest initial defect are refined by Levenberg-Marquardt until
    ``accept`` of them meet ``tol``.  Boundary data may admit several
    helicoidal solutions; the one with the smallest ``k`` is returned, ties
    broken by defect and then parameter norm.
    """
    if spec.n != 3:
        raise DimensionError("shooting is implemented for n = 3")
    rep = spec.reparametrization(64)
    Lt = rep.L
    bfun = _beta_fn(lambda t: spec.alpha(rep.phi(np.asarray(t)))) if not spec.alpha.is_constant else \
        _beta_fn(float(spec.alpha.values[0]))
    breaks = [float(rep.psi(np.asarray(x))) for x in spec.alpha.knots[1:] if 0 < x < spec.ell]
    T1 = spec.T1
    Qf = polar_frame(T1)
    basis = Qf[:, :2]
    if k_guess is None:
        k_guess = max(1.0 / spec.ell, 1e-3) * 2.0
    rng = np.random.default_rng(seed)
    cand = []
    if guess is not None:
        lam_g, f_g, t1_g = guess
        cand.append(np.concatenate([_chart_inverse(np.asarray(lam_g, dtype=float)), [math.log(f_g)],
                                    basis.T @ np.asarray(t1_g, dtype=float)]))
    i = np.arange(starts) + 0.5
    z = 1 - 2 * i / starts
    ang = np.pi * (1 + 5 ** 0.5) * i
    fgrid = np.exp(np.linspace(math.log(0.1), math.log(10.0), 4))
    for j in range(starts):
        lam = np.array([math.sqrt(1 - z[j] ** 2) * math.cos(ang[j]), math.sqrt(1 - z[j] ** 2) * math.sin(ang[j]), z[j]])
        phi = rng.uniform(0, 2 * math.pi)
        cand.append(np.concatenate([_chart_inverse(lam), [math.log(fgrid[j % 4])],
                                    k_guess * np.array([math.cos(phi), math.sin(phi)])]))

    def defect_of(x):
        try:
            r, traj = _shoot_map(x, spec, bfun, breaks, Lt, basis)
        except (SingularStateError, StepSizeError, CoordinateBreakdownError, FloatingPointError, ValueError):
            return np.inf, None
        return float(np.linalg.norm(r)), traj

    scored = []
    for idx, x in enumerate(cand):
        d, _ = defect_of(x)
        scored.append((d, float(np.linalg.norm(x)), idx))
    scored.sort()

    def fun(x):
        try:
            return _shoot_map(x, spec, bfun, breaks, Lt, basis)[0]
        except (SingularStateError, StepSizeError, CoordinateBreakdownError, ValueError):
            return np.full(6, 1e3)

    found = []
    tried = 0
    for d0, _, idx in scored[:refine]:
        if not np.isfinite(d0):
            continue
        tried += 1
        sol = least_squares(fun, cand[idx], method="lm", diff_step=1e-6, xtol=1e-13, ftol=1e-13,
                            gtol=1e-13, max_nfev=200)
        d, traj = defect_of(sol.x)
        if traj is None:
            continue
        x = sol.x
        found.append((d > tol, float(np.linalg.norm(x[3:5])) if d <= tol else 0.0, d, float(np.linalg.norm(x)),
                      tried, x, traj))
        if sum(1 for e in found if not e[0]) >= accept:
            break
    # converged first; among those the smallest k (lowest sup-curvature), then defect, then norm
    best = min(found, key=lambda e: e[:5]) if found else None
    if best is None:
        return ShootingResult(False, np.full(3, np.nan), math.nan, np.full(3, np.nan), math.nan, math.inf, None,
                              tried, "no start produced a trajectory")
    d, x, traj = best[2], best[5], best[6]
    lam = _sphere_chart(x[:2])
    tau1 = basis @ x[3:5]
    ok = d <= tol and traj is not None and traj.min_f > 0
    msg = "" if ok else "no start met the boundary data; a type-(ii) solution is unlikely"
    return ShootingResult(ok, lam, math.exp(x[2]), tau1, float(np.linalg.norm(tau1)), d, traj, tried, msg)
