"""Curvature functionals of tangent fields and their discrete gradients.

Cell derivatives ``d_c = (tau_{c+1} - tau_c) / dt`` are the ``tau'`` used
by every functional here.  ``K_p`` is evaluated as
``m * (mean (|d|/m)^p)^(1/p)`` with ``m = max |d|`` so that ``p`` up to
``2**20`` neither overflows nor underflows.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientResolutionError
from .geometry import Curve, TangentField, WeightFunction


@dataclass(frozen=True)
class PenaltyConfig:
    """``J_p^mu(tau; tau0) = K_p(tau) + mu/(2L) int beta |tau - tau0|^2``."""

    p: float
    mu: float
    tau0: TangentField

    def __post_init__(self):
        if self.p < 2:
            raise ValueError("p must be >= 2")
        if self.mu < 0:
            raise ValueError("mu must be >= 0")


def _speeds(tau: TangentField) -> np.ndarray:
    return np.linalg.norm(np.diff(tau.values, axis=0), axis=1) / tau.dt


def lp_mean(x: np.ndarray, p: float) -> float:
    """``(mean x^p)^(1/p)`` for ``x >= 0``, scaled by the max."""
    m = float(x.max()) if x.size else 0.0
    if m == 0.0:
        return 0.0
    return m * float(np.mean((x / m) ** p)) ** (1.0 / p)


def eval_Kp(tau: TangentField, p: float) -> float:
    if p < 1:
        raise ValueError("p must be >= 1")
    return lp_mean(_speeds(tau), p)


def eval_Kinf(tau: TangentField) -> float:
    return float(_speeds(tau).max())


def penalty_term(tau: TangentField, tau0: TangentField, beta, mu: float) -> float:
    diff2 = np.sum((tau.values - tau0.values) ** 2, axis=1)
    w = np.full(tau.N + 1, tau.dt)
    w[0] = w[-1] = 0.5 * tau.dt
    return 0.5 * mu / tau.L * float(np.sum(w * np.asarray(beta) * diff2))


def eval_Jpmu(tau: TangentField, cfg: PenaltyConfig, beta) -> float:
    return eval_Kp(tau, cfg.p) + penalty_term(tau, cfg.tau0, beta, cfg.mu)


def grad_Kp(values: np.ndarray, dt: float, p: float) -> tuple[float, np.ndarray]:
    """``K_p`` and its gradient with respect to all node values (ambient)."""
    d = np.diff(values, axis=0) / dt
    speed = np.linalg.norm(d, axis=1)
    K = lp_mean(speed, p)
    grad = np.zeros_like(values)
    if K == 0.0:
        return 0.0, grad
    N = len(speed)
    r = speed / K
    # (|d|/K)^(p-2) (d/K) / N; the factor is taken as 0 on cells with d = 0
    with np.errstate(divide="ignore", invalid="ignore"):
        fac = np.where(speed > 0, r ** (p - 2), 0.0) / (K * N)
    g = fac[:, None] * d
    grad[1:] += g / dt
    grad[:-1] -= g / dt
    return K, grad


def grad_Jpmu(tau: TangentField, cfg: PenaltyConfig, beta) -> np.ndarray:
    """Exact gradient of the discrete ``J_p^mu`` with respect to node values."""
    _, g = grad_Kp(tau.values, tau.dt, cfg.p)
    w = np.full(tau.N + 1, tau.dt)
    w[0] = w[-1] = 0.5 * tau.dt
    g += (cfg.mu / tau.L) * (w * np.asarray(beta))[:, None] * (tau.values - cfg.tau0.values)
    return g


def second_derivative(points: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Three-point second derivative at interior nodes of a possibly non-uniform grid."""
    h0 = np.diff(s)[:-1][:, None]
    h1 = np.diff(s)[1:][:, None]
    x0, x1, x2 = points[:-2], points[1:-1], points[2:]
    return 2.0 * (h0 * x2 - (h0 + h1) * x1 + h1 * x0) / (h0 * h1 * (h0 + h1))


def eval_Kalpha(gamma: Curve, alpha: WeightFunction) -> float:
    """``esssup alpha |gamma''|`` from second differences of an arc-length curve."""
    if gamma.N < 2:
        raise InsufficientResolutionError("need at least 3 nodes")
    dd = second_derivative(gamma.points, gamma.s)
    return float(np.max(alpha(gamma.s[1:-1]) * np.linalg.norm(dd, axis=1)))
