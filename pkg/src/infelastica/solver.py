"""Constrained minimisation of ``J_p^mu`` on the sphere product and p-continuation.

The primal variable is a grid tangent field with clamped end values.  The
chord constraint ``int beta tau = a`` is handled by an augmented Lagrangian
with multiplier ``y``; the inner problem is a descent method on the product
of spheres with Armijo backtracking along the normalisation retraction.

Search directions are gradients taken in a weighted discrete ``H^1`` metric
(the frozen-coefficient p-Laplacian of the current iterate, plus the rank-n
term of the augmented Lagrangian).  ``method="lbfgs"`` adds limited-memory
curvature pairs on top of that metric, ``method="pg"`` uses the metric alone.

Multipliers: the stationarity condition of ``K_p + penalty + y.(chord - a)``
multiplied by ``L k_p^(p-1)`` is the Euler-Lagrange equation with right-hand
side ``k_p^(p-1) beta P_tau(Lambda - mu tau0)``, so ``Lambda = L y``.
"""
from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import solve_banded

from .errors import ConvergenceWarning, DimensionError, InfeasibleError, ProjectionError
from .functionals import PenaltyConfig, eval_Kinf, eval_Kp, grad_Kp
from .geometry import ProblemSpec, Reparametrization, TangentField

log = logging.getLogger(__name__)

DEFAULT_SCHEDULE = tuple(2 ** j for j in range(1, 11))


@dataclass(frozen=True)
class SolverOptions:
    N: int = 1024
    tol_c: Optional[float] = None  # defaults to 1e-8 (1 + |a|)
    tol_g: float = 1e-6
    # relative size of the predicted decrease below which a step cannot be
    # resolved in double precision; counts as converged
    tol_f: float = 1e-14
    max_iter: int = 4000
    max_outer: int = 30
    rho0: float = 10.0
    memory: int = 10
    method: str = "lbfgs"
    floor: float = 1e-3
    seed: int = 0
    trace: bool = False

    def __post_init__(self):
        if self.method not in ("lbfgs", "pg"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.N < 16:
            raise ValueError("need at least 16 cells")

    def chord_tol(self, a: np.ndarray) -> float:
        if self.tol_c is not None:
            return self.tol_c
        return 1e-8 * (1.0 + float(np.linalg.norm(a)))


@dataclass(frozen=True)
class SolverResult:
    tau_p: TangentField
    Lambda_p: np.ndarray
    Lambda_raw: np.ndarray
    k_p: float
    p: float
    mu: float
    el_residual: float
    constraint_residual: float
    iterations: int
    converged: bool
    objective: float
    trace: tuple = field(default=(), repr=False)

    @property
    def lambda_p(self) -> np.ndarray:
        return self.Lambda_p / (1.0 + np.linalg.norm(self.Lambda_p))

    @property
    def Lambda_norm(self) -> float:
        return float(np.linalg.norm(self.Lambda_p))


@dataclass(frozen=True)
class ContinuationResult:
    schedule: tuple
    results: tuple
    k_inf: float
    lambda_estimate: np.ndarray
    u_estimate: Optional[np.ndarray]
    m_p: float
    monotone: bool

    @property
    def final(self) -> SolverResult:
        return self.results[-1]

    @property
    def k_values(self) -> np.ndarray:
        return np.array([r.k_p for r in self.results])

    @property
    def converged(self) -> bool:
        return all(r.converged for r in self.results)


TRACE_COLUMNS = ("p", "outer", "iteration", "merit", "K_p", "chord", "stationarity", "step")


def write_trace(rows: Sequence[tuple], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_COLUMNS)
        for row in rows:
            w.writerow([repr(float(x)) if isinstance(x, float) else x for x in row])


def project_constraints(tau, spec: ProblemSpec, t=None) -> TangentField:
    """Normalise every node and clamp the end values to ``T1``, ``T2``."""
    if isinstance(tau, TangentField):
        t, vals = tau.t, np.array(tau.values)
    else:
        vals = np.array(tau, dtype=float)
        if t is None:
            raise ValueError("grid t is required for raw arrays")
    if vals.ndim != 2 or vals.shape[1] != spec.n:
        raise DimensionError(f"field of shape {vals.shape} does not match dimension {spec.n}")
    norms = np.linalg.norm(vals, axis=1)
    if np.any(norms == 0):
        raise ProjectionError(f"zero node value at index {int(np.argmin(norms))}")
    vals = vals / norms[:, None]
    vals[0] = spec.T1
    vals[-1] = spec.T2
    return TangentField(t, vals)


def check_feasible(spec: ProblemSpec) -> None:
    dist = float(np.linalg.norm(spec.a))
    ell = spec.ell
    if dist > ell * (1 + 1e-12):
        raise InfeasibleError(f"|a2 - a1| = {dist:.12g} exceeds the length {ell:.12g}")
    if dist >= ell * (1 - 1e-12):
        d = spec.a / dist
        if np.linalg.norm(spec.T1 - d) > 1e-8 or np.linalg.norm(spec.T2 - d) > 1e-8:
            raise InfeasibleError("|a2 - a1| equals the length but the end tangents are not along the chord")


def _rotate_path(T1, v, angles):
    return np.cos(angles)[:, None] * T1 + np.sin(angles)[:, None] * v


def geodesic_field(spec: ProblemSpec, t: np.ndarray, seed: int = 0) -> np.ndarray:
    """Constant-speed great-circle interpolation from T1 to T2.

    For antipodal end tangents the great circle through the component of the
    chord orthogonal to T1 is used, or a seeded random one if that vanishes.
    """
    T1, T2 = spec.T1, spec.T2
    L = t[-1]
    cosang = float(np.clip(T1 @ T2, -1.0, 1.0))
    theta = float(np.arccos(cosang))
    if theta < 1e-12:
        return np.tile(T1, (len(t), 1))
    v = T2 - cosang * T1
    if np.linalg.norm(v) < 1e-8:
        v = spec.a - (spec.a @ T1) * T1
        if np.linalg.norm(v) < 1e-8 * (1 + np.linalg.norm(spec.a)):
            rng = np.random.default_rng(seed)
            v = rng.standard_normal(spec.n)
            v -= (v @ T1) * T1
        v = v / np.linalg.norm(v)
        theta = np.pi
    else:
        v = v / np.linalg.norm(v)
    return _rotate_path(T1, v, theta * t / L)


def initial_field(spec: ProblemSpec, rep: Reparametrization, seed: int = 0,
                  correction_steps: int = 20) -> TangentField:
    """Geodesic interpolation followed by a chord correction.

    The correction adds ``sin(pi t/L) nu`` to the interior nodes and solves
    for ``nu`` by damped Gauss-Newton on the chord residual; it is kept only
    where it reduces the residual.
    """
    t = rep.t
    base = geodesic_field(spec, t, seed)
    wb = rep.weights * rep.beta
    bump = np.sin(np.pi * t / rep.L)
    bump[0] = bump[-1] = 0.0

    def field_of(nu):
        raw = base + bump[:, None] * nu
        nrm = np.linalg.norm(raw, axis=1)
        return raw / nrm[:, None], nrm

    nu = np.zeros(spec.n)
    vals, nrm = field_of(nu)
    res = wb @ vals - spec.a
    for _ in range(correction_steps):
        if np.linalg.norm(res) < 1e-13 * (1 + np.linalg.norm(spec.a)):
            break
        # d tau_i / d nu = bump_i (I - tau_i tau_i^T) / |raw_i|
        coef = wb * bump / nrm
        J = np.eye(spec.n) * coef.sum() - (vals * coef[:, None]).T @ vals
        step = np.linalg.lstsq(J, -res, rcond=1e-10)[0]
        improved = False
        for damp in (1.0, 0.5, 0.25, 0.125, 0.0625):
            cand, cn = field_of(nu + damp * step)
            cres = wb @ cand - spec.a
            if np.linalg.norm(cres) < np.linalg.norm(res):
                nu, vals, nrm, res = nu + damp * step, cand, cn, cres
                improved = True
                break
        if not improved:
            break
    return project_constraints(vals, spec, t)


class _Problem:
    """Merit function and metric for one (p, mu) stage."""

    def __init__(self, spec, rep, cfg: PenaltyConfig, opts: SolverOptions):
        self.spec = spec
        self.rep = rep
        self.p = float(cfg.p)
        self.mu = float(cfg.mu)
        self.tau0 = np.asarray(cfg.tau0.values)
        self.opts = opts
        self.dt = rep.dt
        self.N = rep.N
        self.L = rep.L
        self.wb = rep.weights * rep.beta
        self.pen_w = (self.mu / self.L) * self.wb
        self.a = spec.a

    def evaluate(self, vals, y, rho):
        K, g = grad_Kp(vals, self.dt, self.p)
        c = self.wb @ vals - self.a
        f = K + y @ c + 0.5 * rho * (c @ c)
        g = g + np.outer(self.wb, y + rho * c)
        if self.mu > 0:
            diff = vals - self.tau0
            f += 0.5 * float(self.pen_w @ np.sum(diff * diff, axis=1))
            g += self.pen_w[:, None] * diff
        return f, g, K, c

    def stationarity(self, vals, g, lam_total) -> float:
        ti = vals[1:-1]
        gi = _tangential(g[1:-1], ti)
        scale = self.L / self.wb[1:-1]
        return float(np.max(np.linalg.norm(gi, axis=1) * scale) / (1.0 + self.L * np.linalg.norm(lam_total)))

    def metric_solve(self, vals, K, g, rho, rhs):
        """Apply the inverse of the weighted H^1 metric to interior rows ``rhs``."""
        p, N, dt = self.p, self.N, self.dt
        floor = self.opts.floor
        if K > 0:
            speed = np.linalg.norm(np.diff(vals, axis=0), axis=1) / dt
            r = speed / K
            with np.errstate(under="ignore"):
                a = (p - 1.0) * (r ** (p - 2.0) + floor) / (N * K * dt * dt)
        else:
            a = np.full(N, floor / (self.L * dt * dt))
        ti = vals[1:-1]
        normal = np.maximum(0.0, -np.sum(g[1:-1] * ti, axis=1))
        diag = a[:-1] + a[1:] + normal + self.pen_w[1:-1]
        ab = np.zeros((3, N - 1))
        ab[0, 1:] = -a[1:-1]
        ab[1] = diag
        ab[2, :-1] = -a[1:-1]
        b = self.wb[1:-1]
        X = solve_banded((1, 1), ab, np.column_stack([rhs, b]), check_finite=False)
        Xr, Xb = X[:, :-1], X[:, -1]
        coef = rho * (b @ Xr) / (1.0 + rho * (b @ Xb))
        return Xr - np.outer(Xb, coef)


def _tangential(v, t):
    return v - np.sum(v * t, axis=1, keepdims=True) * t


def _retract(ti, d, step):
    x = ti + step * d
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def minimize_Jpmu(spec: ProblemSpec, cfg: PenaltyConfig, init: TangentField,
                  opts: SolverOptions = SolverOptions(), multiplier=None) -> SolverResult:
    """Minimise ``J_p^mu`` subject to the chord constraint, starting from ``init``.

    ``multiplier`` warm-starts the augmented-Lagrangian multiplier ``y``.
    On non-convergence the best iterate is returned with a ConvergenceWarning.
    """
    check_feasible(spec)
    rep = spec.reparametrization(init.N)
    if abs(init.L - rep.L) > 1e-12 * max(1.0, rep.L):
        raise DimensionError("initial field is not on the reparametrized grid")
    if init.n != spec.n:
        raise DimensionError("initial field dimension does not match the problem")
    if cfg.tau0.N != init.N:
        raise DimensionError("anchor field is not on the solver grid")
    if not (np.allclose(init.values[0], spec.T1, atol=1e-10) and np.allclose(init.values[-1], spec.T2, atol=1e-10)):
        raise ValueError("initial field must satisfy the end-tangent conditions")
    prob = _Problem(spec, rep, cfg, opts)
    tol_c = opts.chord_tol(spec.a)
    memory = opts.memory if opts.method == "lbfgs" else 0

    vals = np.array(init.values)
    y = np.zeros(spec.n) if multiplier is None else np.array(multiplier, dtype=float)
    rho = opts.rho0 / rep.L
    trace = []
    total = 0
    converged = False
    prev_c = np.inf
    r = np.inf
    for outer in range(opts.max_outer):
        f, g, K, c = prob.evaluate(vals, y, rho)
        S, Y = [], []
        inner_ok = False
        restarted = False
        for _ in range(opts.max_iter):
            ti = vals[1:-1]
            G = _tangential(g[1:-1], ti)
            r = prob.stationarity(vals, g, y + rho * c)
            if r <= opts.tol_g:
                inner_ok = True
                break
            # two-loop recursion with the metric as initial inverse Hessian
            q = G.copy()
            hist = []
            for s_k, y_k in zip(reversed(S), reversed(Y)):
                rh = 1.0 / np.sum(s_k * y_k)
                al = rh * np.sum(s_k * q)
                q -= al * y_k
                hist.append((al, rh))
            z = prob.metric_solve(vals, K, g, rho, q)
            for (s_k, y_k), (al, rh) in zip(zip(S, Y), reversed(hist)):
                z += (al - rh * np.sum(y_k * z)) * s_k
            D = -_tangential(z, ti)
            slope = float(np.sum(G * D))
            if slope >= 0:
                S, Y = [], []
                D = -_tangential(prob.metric_solve(vals, K, g, rho, G), ti)
                slope = float(np.sum(G * D))
            if -slope <= opts.tol_f * (1.0 + abs(f)):
                inner_ok = True
                break
            step = 1.0
            while True:
                cand = vals.copy()
                cand[1:-1] = _retract(ti, D, step)
                f2, g2, K2, c2 = prob.evaluate(cand, y, rho)
                if f2 <= f + 1e-4 * step * slope:
                    break
                step *= 0.5
                if step < 1e-14:
                    break
            if step < 1e-14:
                # no representable decrease along a descent direction
                inner_ok = True
                break
            total += 1
            stalled = f - f2 <= opts.tol_f * (1.0 + abs(f))
            if opts.trace:
                trace.append((cfg.p, outer, total, f2, K2, float(np.linalg.norm(c2)), r, step))
            if memory:
                s_k = _tangential(cand[1:-1] - ti, cand[1:-1])
                y_k = _tangential(g2[1:-1], cand[1:-1]) - _tangential(G, cand[1:-1])
                sy = np.sum(s_k * y_k)
                if sy > 1e-12 * np.sqrt(np.sum(s_k * s_k) * np.sum(y_k * y_k)):
                    S.append(s_k)
                    Y.append(y_k)
                    if len(S) > memory:
                        S.pop(0)
                        Y.pop(0)
            vals, f, g, K, c = cand, f2, g2, K2, c2
            if stalled:
                # unresolvable decrease: retry once from the metric direction
                if restarted:
                    inner_ok = True
                    break
                S, Y = [], []
            restarted = stalled
        cn =float(np.linalg.norm(c))
        if cn <= tol_c and inner_ok:
            converged = True
            break
        y = y + rho * c
        if cn > 0.25 * prev_c:
            rho = min(rho * 10.0, 1e12 / rep.L)
        prev_c = cn

    # final multiplier estimate and diagnostics at the returned iterate
    f, g, K, c = prob.evaluate(vals, y, 0.0)
    lam = y.copy()
    r = prob.stationarity(vals, g, lam)
    tau = TangentField(rep.t, vals)
    cn = float(np.linalg.norm(c))
    if not converged:
        warnings.warn(f"p={cfg.p:g}: no convergence after {total} iterations "
                      f"(chord {cn:.2e}, stationarity {r:.2e})", ConvergenceWarning, stacklevel=2)
    obj = K
    if prob.mu > 0:
        diff = vals - prob.tau0
        obj += 0.5 * float(prob.pen_w @ np.sum(diff * diff, axis=1))
    Lam = rep.L * lam
    log.info("p=%g k_p=%.10g |Lambda_p|=%.6g chord=%.2e stationarity=%.2e iterations=%d",
             cfg.p, K, np.linalg.norm(Lam), cn, r, total)
    return SolverResult(tau, Lam, lam, float(eval_Kp(tau, cfg.p)), float(cfg.p), float(cfg.mu),
                        r, cn, total, converged, float(obj), tuple(trace))


def continuation_solve(spec: ProblemSpec, mu: float = 0.0, schedule: Sequence[float] = DEFAULT_SCHEDULE,
                       init: Optional[TangentField] = None, opts: SolverOptions = SolverOptions(),
                       anchor: Optional[TangentField] = None) -> ContinuationResult:
    """Solve for each ``p`` in ``schedule``, warm-starting from the previous stage.

    The penalty anchor ``tau0`` is ``anchor`` if given, else ``init``.
    """
    schedule = tuple(float(p) for p in schedule)
    if not schedule or schedule[0] != 2 or any(b <= a for a, b in zip(schedule, schedule[1:])):
        raise ValueError("schedule must be strictly increasing and start at p = 2")
    check_feasible(spec)
    rep = spec.reparametrization(init.N if init is not None else opts.N)
    if init is None:
        init = initial_field(spec, rep, opts.seed)
    tau0 = anchor if anchor is not None else init
    results = []
    cur = init
    y = None
    for p in schedule:
        res = minimize_Jpmu(spec, PenaltyConfig(p, mu, tau0), cur, opts, multiplier=y)
        results.append(res)
        cur = res.tau_p
        y = res.Lambda_raw
    ks = np.array([r.k_p for r in results])
    monotone = bool(np.all(np.diff(ks) >= -1e-6))
    if not monotone:
        log.warning("k_p sequence is not nondecreasing: %s", ks)
    final = results[-1]
    u = None
    if final.k_p > 0:
        from .residuals import extract_u
        u = extract_u(final, PenaltyConfig(final.p, mu, tau0))[0]
    nrm = 1.0 + final.Lambda_norm
    return ContinuationResult(schedule, tuple(results), float(eval_Kinf(final.tau_p)),
                              final.Lambda_p / nrm, u, mu / nrm, monotone)
