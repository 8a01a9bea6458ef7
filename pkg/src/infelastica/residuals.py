"""Residuals of the characterising differential systems and certificate checks.

Three equivalent certificate frames are supported:

* ``original``: a scalar ``g(s) >= 0`` on the arc-length grid with
  ``(g alpha T')' - g' alpha T' + g k^2 T / alpha = k^2 P(lam)`` weakly and
  ``g' = alpha lam.T'``;
* ``rescaled``: ``f(t) >= 0`` on the reparametrized grid with
  ``f (tau'' + k^2 tau) = beta k^2 P(lam)`` weakly and ``f' = beta lam.tau'``;
* ``system-u``: a vector field ``u`` with
  ``u' + (u.tau') tau = beta P_tau(lam)`` and ``|u| tau' = k u``.

Here ``P`` is the orthogonal projection onto the complement of
``span{T, T'}`` and ``P_tau`` the one onto the complement of ``tau``.
``f = g o phi``; ``f = k |u|`` and ``u = f tau' / k^2`` convert between the
last two frames.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import DegenerateExtractionError, InconsistentCertificateError, NotEvaluableError
from .functionals import PenaltyConfig, grad_Kp
from .geometry import Curve, TangentField, WeightFunction

FRAMES = ("original", "rescaled", "system-u")
DEGENERATE_SPEED = 1e-10


@dataclass(frozen=True)
class ElasticaCertificate:
    lam: np.ndarray
    k: float
    witness: np.ndarray
    grid: np.ndarray
    frame: str = "original"
    eta: Optional[float] = None

    def __post_init__(self):
        if self.frame not in FRAMES:
            raise ValueError(f"unknown frame {self.frame!r}")
        lam = np.array(self.lam, dtype=float)
        w = np.array(self.witness, dtype=float)
        grid = np.array(self.grid, dtype=float)
        if w.shape[0] != grid.shape[0]:
            raise ValueError("witness and grid lengths differ")
        if self.frame != "system-u":
            if w.ndim != 1:
                raise ValueError("scalar witness expected")
            if w.min() < -1e-10:
                raise InconsistentCertificateError(f"witness takes the negative value {w.min():.3g}")
            if np.abs(w).max() <= 1e-10:
                raise InconsistentCertificateError("witness vanishes identically")
        for name, v in (("lam", lam), ("witness", w), ("grid", grid)):
            v.setflags(write=False)
            object.__setattr__(self, name, v)
        object.__setattr__(self, "k", float(self.k))

    @property
    def kind(self) -> str:
        return {"original": "g", "rescaled": "f", "system-u": "u"}[self.frame]

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam.tolist(),
            "k": self.k,
            "frame": self.frame,
            "eta": self.eta,
            "grid": self.grid.tolist(),
            "witness": self.witness.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "ElasticaCertificate":
        return cls(np.array(d["lambda"]), d["k"], np.array(d["witness"]), np.array(d["grid"]),
                   d.get("frame", "original"), d.get("eta"))

    @classmethod
    def from_json(cls, text: str) -> "ElasticaCertificate":
        return cls.from_dict(json.loads(text))


def perp_projection(T: np.ndarray, Tp: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Project ``v`` (one vector or one per node) onto the complement of ``span{T, T'}``.

    Where ``|T'| < 1e-10`` only ``T`` is removed.
    """
    v = np.broadcast_to(v, T.shape)
    out = v - np.sum(v * T, axis=1, keepdims=True) * T
    e2 = Tp - np.sum(Tp * T, axis=1, keepdims=True) * T
    nrm = np.linalg.norm(e2, axis=1)
    ok = nrm >= DEGENERATE_SPEED
    e2 = np.where(ok[:, None], e2 / np.where(ok, nrm, 1.0)[:, None], 0.0)
    return out - np.sum(out * e2, axis=1, keepdims=True) * e2


def _node_derivative(x: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Second-order derivative at nodes of a grid with cell widths ``h``."""
    return np.gradient(x, np.concatenate([[0.0], np.cumsum(h)]), axis=0, edge_order=2)


def _d1_4(x, h):
    """Fourth-order first derivative on a uniform grid."""
    d = np.empty_like(x)
    d[2:-2] = (x[:-4] - 8 * x[1:-3] + 8 * x[3:-1] - x[4:]) / (12 * h)
    for i in (0, 1):
        d[i] = (-25 * x[i] + 48 * x[i + 1] - 36 * x[i + 2] + 16 * x[i + 3] - 3 * x[i + 4]) / (12 * h)
        j = -1 - i
        d[j] = (25 * x[j] - 48 * x[j - 1] + 36 * x[j - 2] - 16 * x[j - 3] + 3 * x[j - 4]) / (12 * h)
    return d


def _d2_4(x, h):
    """Fourth-order second derivative on a uniform grid (interior rows 2..N-2)."""
    return (-x[:-4] + 16 * x[1:-3] - 30 * x[2:-2] + 16 * x[3:-1] - x[4:]) / (12 * h * h)


def _weak_defect(x, T, A, B, C, E, g, lam, k):
    """Hat-function defect of ``int A T'.xi' + B g' T'.xi - C g k^2 T.xi + E k^2 P(lam).xi``.

    ``A`` is sampled at cell midpoints, the other coefficients at nodes.
    Returns the per-node vectors divided by the hat masses (interior nodes).
    """
    h = np.diff(x)
    d = np.diff(T, axis=0) / h[:, None]
    flux = A[:, None] * d
    uniform = len(h) >= 8 and np.abs(h - h[0]).max() <= 1e-12 * abs(h[0])
    if uniform:
        Tp, gp = _d1_4(T, h[0]), _d1_4(g, h[0])
    else:
        Tp, gp = _node_derivative(T, h), _node_derivative(g, h)
    mass = 0.5 * (h[:-1] + h[1:])
    P = perp_projection(T, Tp, lam)
    zeroth = (B * gp)[:, None] * Tp - (C * g * k * k)[:, None] * T + (E * k * k)[:, None] * P
    if uniform:
        # exact hat moments of quadratics
        zi = (zeroth[:-2] + 10.0 * zeroth[1:-1] + zeroth[2:]) / 12.0
    else:
        zi = zeroth[1:-1]
    R = flux[:-1] - flux[1:] + mass[:, None] * zi
    return R / mass[:, None]


def _scale(k: float) -> float:
    return k * k if k > 0 else 1.0


def rescaled_residual(tau: TangentField, f, lam, beta, k: float) -> tuple[float, float]:
    """Weak defect of ``f(tau'' + k^2 tau) = beta k^2 P(lam)`` and midpoint defect of ``f' = beta lam.tau'``."""
    f = np.asarray(f, dtype=float)
    beta = np.broadcast_to(np.asarray(beta, dtype=float), f.shape)
    lam = np.asarray(lam, dtype=float)
    fm = 0.5 * (f[1:] + f[:-1])
    R = _weak_defect(tau.t, tau.values, fm, np.ones_like(f), np.ones_like(f), beta, f, lam, k)
    r1 = float(np.linalg.norm(R, axis=1).max()) / _scale(k)
    bm = 0.5 * (beta[1:] + beta[:-1])
    r2 = float(np.abs(np.diff(f) / tau.dt - bm * (tau.cell_derivative() @ lam)).max())
    return r1, r2


def _curve_tangents(gamma: Curve) -> np.ndarray:
    if gamma.tangents is not None:
        return np.asarray(gamma.tangents)
    d = np.gradient(gamma.points, gamma.s, axis=0, edge_order=2)
    return d / np.linalg.norm(d, axis=1, keepdims=True)


def original_residual(gamma: Curve, g, lam, alpha: WeightFunction, k: float) -> tuple[float, float]:
    """Weak defect of the weighted first equation and midpoint defect of ``g' = alpha lam.T'``."""
    g = np.asarray(g, dtype=float)
    lam = np.asarray(lam, dtype=float)
    s = gamma.s
    T = _curve_tangents(gamma)
    a_node = alpha(s)
    smid = 0.5 * (s[1:] + s[:-1])
    a_mid = alpha(smid)
    gm = 0.5 * (g[1:] + g[:-1])
    R = _weak_defect(s, T, gm * a_mid, a_node, 1.0 / a_node, np.ones_like(g), g, lam, k)
    r1 = float(np.linalg.norm(R, axis=1).max()) / _scale(k)
    h = np.diff(s)
    Tp = np.diff(T, axis=0) / h[:, None]
    r2 = float(np.abs(np.diff(g) / h - a_mid * (Tp @ lam)).max())
    return r1, r2


def alpha1_equation_residual(T, k: float, lam, eta: float, threshold: float = 1e-6) -> float:
    """Pointwise defect of ``T'' + k^2 T = k^2 P(lam) / (lam.T - eta)`` (unit weight).

    ``T`` is a Curve (its tangents are used) or a TangentField on an arc-length grid.
    Fourth-order differences; nodes with ``|lam.T - eta| < threshold`` are skipped.
    """
    if isinstance(T, Curve):
        x, vals = T.s, _curve_tangents(T)
    else:
        x, vals = T.t, T.values
    lam = np.asarray(lam, dtype=float)
    h = float(x[1] - x[0])
    if np.abs(np.diff(x) - h).max() > 1e-9 * max(1.0, abs(h)):
        raise ValueError("uniform grid required")
    Tp = _d1_4(vals, h)[2:-2]
    Tpp = _d2_4(vals, h)
    Tm = vals[2:-2]
    denom = Tm @ lam - eta
    ok = np.abs(denom) >= threshold
    if not np.any(ok):
        raise NotEvaluableError("lam.T - eta vanishes on every node")
    P = perp_projection(Tm, Tp, lam)
    defect = Tpp + k * k * Tm - k * k * P / np.where(ok, denom, 1.0)[:, None]
    return float(np.linalg.norm(defect[ok], axis=1).max())


def system_residual(tau: TangentField, u, lam, beta, k: float) -> tuple[float, float]:
    """Defects of ``u' + (u.tau') tau = beta P_tau(lam)`` and ``|u| tau' = k u``.

    ``u`` may be sampled at nodes (N+1 rows, derivatives of fourth order) or
    on cells (N rows, as produced by ``extract_u``; the first equation is
    then checked at interior nodes and the second on cells).
    """
    u = np.asarray(u, dtype=float)
    lam = np.asarray(lam, dtype=float)
    beta = np.broadcast_to(np.asarray(beta, dtype=float), (tau.N + 1,))
    vals = tau.values
    dt = tau.dt
    if u.shape[0] == tau.N + 1:
        up = _d1_4(u, dt)
        tp = _d1_4(vals, dt)
        Pl = lam - (vals @ lam)[:, None] * vals
        e1 = up + np.sum(u * tp, axis=1, keepdims=True) * vals - beta[:, None] * Pl
        e2 = np.linalg.norm(u, axis=1, keepdims=True) * tp - k * u
    elif u.shape[0] == tau.N:
        d = tau.cell_derivative()
        ti = vals[1:-1]
        up = np.diff(u, axis=0) / dt
        tp = 0.5 * (d[1:] + d[:-1])
        um = 0.5 * (u[1:] + u[:-1])
        Pl = lam - (ti @ lam)[:, None] * ti
        e1 = up + np.sum(um * tp, axis=1, keepdims=True) * ti - beta[1:-1, None] * Pl
        e2 = np.linalg.norm(u, axis=1, keepdims=True) * d - k * u
    else:
        raise ValueError(f"u has {u.shape[0]} rows; expected {tau.N} or {tau.N + 1}")
    return float(np.linalg.norm(e1, axis=1).max()), float(np.linalg.norm(e2, axis=1).max())


def euler_lagrange_residual(res, cfg: PenaltyConfig, beta) -> float:
    """Hat-tested defect of the p-level Euler-Lagrange equation.

    Equals ``max_i |P_tau (L grad_i)| / (w_i (1 + |Lambda|))`` where ``grad`` is
    the gradient of ``K_p + penalty + (Lambda/L).chord``, i.e. the weak
    pairing divided by ``k_p^(p-1) (1 + |Lambda_p|)``.
    """
    tau = res.tau_p
    vals = tau.values
    beta = np.broadcast_to(np.asarray(beta, dtype=float), (tau.N + 1,))
    w = np.full(tau.N + 1, tau.dt)
    w[0] = w[-1] = 0.5 * tau.dt
    L = tau.L
    Lam = np.asarray(res.Lambda_p, dtype=float)
    _, g = grad_Kp(vals, tau.dt, cfg.p)
    wb = w * beta
    g = g + np.outer(wb, Lam / L)
    if cfg.mu > 0:
        g = g + (cfg.mu / L) * wb[:, None] * (vals - cfg.tau0.values)
    ti = vals[1:-1]
    gi = g[1:-1] - np.sum(g[1:-1] * ti, axis=1, keepdims=True) * ti
    return float((np.linalg.norm(gi, axis=1) * L / w[1:-1]).max() / (1.0 + np.linalg.norm(Lam)))


def extract_u(res, cfg: PenaltyConfig):
    """Cell field ``k^(1-p) |tau'|^(p-2) tau' / (1 + |Lambda|)`` with ``lambda_p`` and ``m_p``."""
    k = float(res.k_p)
    if k <= 0:
        raise DegenerateExtractionError("k_p = 0: the field is straight and u is undefined")
    d = res.tau_p.cell_derivative()
    r = np.linalg.norm(d, axis=1) / k
    nrm = 1.0 + float(np.linalg.norm(res.Lambda_p))
    with np.errstate(under="ignore", divide="ignore", invalid="ignore"):
        fac = np.where(r > 0, r ** (cfg.p - 2.0), 0.0)
    u = fac[:, None] * (d / k) / nrm
    return u, np.asarray(res.Lambda_p) / nrm, cfg.mu / nrm


def f_from_u(u, k: float) -> np.ndarray:
    return k * np.linalg.norm(np.asarray(u), axis=1)


def u_from_f(tau: TangentField, f, k: float) -> np.ndarray:
    """Node field ``f tau' / k^2`` (fourth-order ``tau'``)."""
    if k <= 0:
        raise DegenerateExtractionError("k = 0")
    return np.asarray(f)[:, None] * _d1_4(tau.values, tau.dt) / (k * k)


def pseudo_minimiser_bound(u, beta, lam, k: float, dt: float) -> float:
    """``(k ||u/beta||_inf + |lam|) / (2 ||u||_1)`` for a cell field ``u``."""
    u = np.asarray(u)
    beta = np.asarray(beta, dtype=float)
    bc = 0.5 * (beta[1:] + beta[:-1]) if beta.ndim and beta.shape[0] == u.shape[0] + 1 else beta
    un = np.linalg.norm(u, axis=1)
    return float((k * np.max(un / bc) + np.linalg.norm(lam)) / (2.0 * dt * un.sum()))


def normalize_lambda(cert: ElasticaCertificate, tau: TangentField, beta=1.0) -> ElasticaCertificate:
    """Rescale a rescaled-frame certificate to ``|lam| = 1``.

    For ``lam = 0`` the field must follow a great circle; then ``lam`` is
    replaced by ``tau(0)`` and ``f`` is rebuilt from ``f' = beta lam.tau'``
    with its minimum set to 1.
    """
    if cert.frame != "rescaled":
        raise ValueError("normalize_lambda acts on rescaled-frame certificates")
    nl = float(np.linalg.norm(cert.lam))
    if nl > 1e-14:
        if abs(nl - 1.0) <= 1e-15:
            return cert
        return ElasticaCertificate(cert.lam / nl, cert.k, cert.witness / nl, cert.grid, "rescaled", cert.eta)
    vals = tau.values
    sv = np.linalg.svd(vals - 0.0, compute_uv=False)
    if sv.shape[0] > 2 and sv[2] > 1e-8 * sv[0]:
        raise InconsistentCertificateError("lam = 0 but tau does not lie on a great circle")
    lam = vals[0].copy()
    beta = np.broadcast_to(np.asarray(beta, dtype=float), (tau.N + 1,))
    F = cumulative_trapezoid(beta * (_node_derivative(vals, np.full(tau.N, tau.dt)) @ lam), tau.t, initial=0.0)
    return ElasticaCertificate(lam, cert.k, F - F.min() + 1.0, cert.grid, "rescaled", cert.eta)


def minimiser_certificate_check(cert: ElasticaCertificate, T, alpha) -> tuple[bool, float]:
    """``0 <= g <= -alpha lam.T`` within 1e-10; returns (passed, min(-alpha lam.T - g))."""
    if cert.frame != "original":
        raise ValueError("the minimiser condition is stated for original-frame certificates")
    T = np.asarray(T, dtype=float)
    a = alpha(cert.grid) if callable(alpha) else np.broadcast_to(np.asarray(alpha, dtype=float), cert.grid.shape)
    bound = -a * (T @ cert.lam)
    g = cert.witness
    ok = bool(g.min() >= -1e-10 and (g - bound).max() <= 1e-10)
    return ok, float((bound - g).min())


@dataclass(frozen=True)
class ScanResult:
    passed: bool
    lam: np.ndarray
    h: float
    margin: float
    certificate: ElasticaCertificate


def direction_grid(n: int, count: int) -> np.ndarray:
    """Uniform angles (n = 2) or a Fibonacci sphere (n = 3)."""
    if n == 2:
        ang = 2 * np.pi * np.arange(count) / count
        return np.column_stack([np.cos(ang), np.sin(ang)])
    if n == 3:
        i = np.arange(count) + 0.5
        z = 1 - 2 * i / count
        rad = np.sqrt(1 - z * z)
        phi = np.pi * (1 + 5 ** 0.5) * i
        return np.column_stack([rad * np.cos(phi), rad * np.sin(phi), z])
    raise ValueError("direction scans are available for n = 2, 3")


def certificate_scan(gamma: Curve, alpha: WeightFunction, k: float,
                     n_dirs: int = 720, n_h: int = 400) -> ScanResult:
    """Search ``g = h + G`` over directions ``lam`` and offsets ``h``.

    ``G(s) = alpha(0) lam.T(0) + int_0^s alpha lam.T'``, which is
    ``alpha lam.T`` for a constant weight.  Offsets run from the smallest one
    keeping ``g >= 0`` upwards by ``2 max|alpha lam.T|``; the direction
    opposite to the mean tangent is added to the grid.  The certificate with
    the largest margin of ``0 <= g <= -alpha lam.T`` is returned.
    """
    s = gamma.s
    T = _curve_tangents(gamma)
    a = alpha(s)
    dirs = direction_grid(gamma.n, n_dirs)
    mean = (0.5 * (T[1:] + T[:-1]) * np.diff(s)[:, None]).sum(axis=0)
    if np.linalg.norm(mean) > 1e-12:
        dirs = np.vstack([dirs, -mean / np.linalg.norm(mean)])
    # G[j] = int_0^s alpha lam_j . T'  via the trapezoid rule on alpha T'
    Tp = np.gradient(T, s, axis=0, edge_order=2)
    G = a[0] * (T[0] @ dirs.T) + cumulative_trapezoid((a[:, None] * Tp) @ dirs.T, s, axis=0, initial=0.0)
    if np.allclose(a, a[0]):
        # exact for constant weight
        G = a[0] * (T @ dirs.T)
    bound = -a[:, None] * (T @ dirs.T)
    h_star = -G.min(axis=0)
    hspan = 2 * np.abs(bound).max(axis=0)
    best = (-np.inf, 0, 0.0)
    for j in range(dirs.shape[0]):
        hs = h_star[j] + np.linspace(0.0, hspan[j], n_h)
        gmin = G[:, j].min() + hs
        gap = (bound[:, j] - G[:, j]).min() - hs
        margin = np.minimum(gmin, gap)
        i = int(np.argmax(margin))
        if margin[i] > best[0]:
            best = (float(margin[i]), j, float(hs[i]))
    margin, j, h = best
    lam = dirs[j]
    g = G[:, j] + h
    passed = False
    cert = None
    if g.min() >= -1e-10 and np.abs(g).max() > 1e-10:
        cert = ElasticaCertificate(lam, k, g, s, "original")
        passed, _ = minimiser_certificate_check(cert, T, alpha)
    return ScanResult(passed, lam, h, margin, cert)
