"""Curves, tangent fields and the speed-alpha reparametrization.

All fields live on a uniform grid in the reparametrized variable
``t in [0, L]``; the weight only enters through the sampled ``beta``.
Quadrature is the composite trapezoid rule throughout.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Optional, Sequence

import numpy as np

from .errors import DimensionError, InvalidWeightError, NotArcLengthError

UNIT_TOL = 1e-10


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class WeightFunction:
    """Positive weight on ``[0, ell]`` given by samples.

    ``interpolation="constant"`` means ``values[j]`` holds on
    ``[knots[j], knots[j+1])``; ``"linear"`` interpolates between knots.
    Both extend the last value to the right.
    """

    knots: np.ndarray
    values: np.ndarray
    interpolation: Literal["constant", "linear"] = "constant"

    def __post_init__(self):
        knots = np.atleast_1d(np.asarray(self.knots, dtype=float))
        values = np.atleast_1d(np.asarray(self.values, dtype=float))
        if knots.shape != values.shape or knots.ndim != 1 or knots.size == 0:
            raise InvalidWeightError("knots and values must be 1-D arrays of equal length")
        if knots[0] != 0.0 or np.any(np.diff(knots) <= 0):
            raise InvalidWeightError("knots must start at 0 and be strictly increasing")
        if not np.all(np.isfinite(values)) or np.any(values <= 0):
            raise InvalidWeightError("weight samples must be finite and strictly positive")
        if self.interpolation not in ("constant", "linear"):
            raise InvalidWeightError(f"unknown interpolation {self.interpolation!r}")
        object.__setattr__(self, "knots", _frozen(knots))
        object.__setattr__(self, "values", _frozen(values))

    @classmethod
    def constant(cls, value: float = 1.0) -> "WeightFunction":
        return cls(np.array([0.0]), np.array([value]))

    @classmethod
    def from_pairs(cls, pairs: Sequence[Sequence[float]], interpolation="constant"):
        pairs = np.asarray(pairs, dtype=float)
        return cls(pairs[:, 0], pairs[:, 1], interpolation)

    @property
    def is_constant(self) -> bool:
        return bool(np.all(self.values == self.values[0]))

    @property
    def total_variation(self) -> float:
        return float(np.sum(np.abs(np.diff(self.values))))

    @property
    def inverse_bound(self) -> float:
        """``sup 1/alpha``."""
        return float(1.0 / self.values.min())

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        if self.interpolation == "linear":
            return np.interp(s, self.knots, self.values)
        idx = np.searchsorted(self.knots, s, side="right") - 1
        return self.values[np.clip(idx, 0, len(self.values) - 1)]

    def to_dict(self) -> dict:
        return {
            "knots": self.knots.tolist(),
            "values": self.values.tolist(),
            "interpolation": self.interpolation,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "WeightFunction":
        return cls(np.asarray(d["knots"]), np.asarray(d["values"]), d.get("interpolation", "constant"))


@dataclass(frozen=True)
class Reparametrization:
    """``psi(s) = int_0^s 1/alpha``, its inverse ``phi`` and ``beta = alpha o phi``.

    ``t`` holds the N+1 uniform nodes on ``[0, L]``, ``s = phi(t)`` the
    matching arc-length positions and ``beta`` the weight at those nodes.
    """

    alpha: WeightFunction
    ell: float
    L: float
    t: np.ndarray
    s: np.ndarray
    beta: np.ndarray
    # exact piecewise table: breakpoints in s, psi there, alpha at both ends
    _seg_s: np.ndarray = field(repr=False)
    _seg_psi: np.ndarray = field(repr=False)
    _seg_a0: np.ndarray = field(repr=False)
    _seg_a1: np.ndarray = field(repr=False)

    @property
    def N(self) -> int:
        return len(self.t) - 1

    @property
    def dt(self) -> float:
        return self.L / self.N

    @property
    def weights(self) -> np.ndarray:
        """Trapezoid weights on the t-grid."""
        w = np.full(self.N + 1, self.dt)
        w[0] = w[-1] = 0.5 * self.dt
        return w

    @property
    def beta_cells(self) -> np.ndarray:
        return 0.5 * (self.beta[1:] + self.beta[:-1])

    def psi(self, s):
        s = np.asarray(s, dtype=float)
        j = np.clip(np.searchsorted(self._seg_s, s, side="right") - 1, 0, len(self._seg_a0) - 1)
        ds = s - self._seg_s[j]
        return self._seg_psi[j] + _segment_integral(self._seg_a0[j], self._seg_a1[j],
                                                    self._seg_s[j + 1] - self._seg_s[j], ds)

    def phi(self, t):
        t = np.asarray(t, dtype=float)
        j = np.clip(np.searchsorted(self._seg_psi, t, side="right") - 1, 0, len(self._seg_a0) - 1)
        dpsi = t - self._seg_psi[j]
        return self._seg_s[j] + _segment_inverse(self._seg_a0[j], self._seg_a1[j],
                                                 self._seg_s[j + 1] - self._seg_s[j], dpsi)


def _slope(a0, a1, width):
    return np.where(width > 0, (a1 - a0) / np.where(width > 0, width, 1.0), 0.0)


def _segment_integral(a0, a1, width, ds):
    b = _slope(a0, a1, width)
    small = np.abs(b * ds) < 1e-14 * np.abs(a0)
    bb = np.where(small, 1.0, b)
    return np.where(small, ds / a0, np.log1p(bb * ds / a0) / bb)


def _segment_inverse(a0, a1, width, dpsi):
    b = _slope(a0, a1, width)
    small = np.abs(b) < 1e-14
    bb = np.where(small, 1.0, b)
    return np.where(small, a0 * dpsi, a0 / bb * np.expm1(bb * dpsi))


def build_reparametrization(alpha: WeightFunction, ell: float, N: int) -> Reparametrization:
    """Exact reparametrization table for a sampled weight, on N cells."""
    if not ell > 0:
        raise ValueError("length must be positive")
    if N < 16:
        raise ValueError("need at least 16 cells")
    if np.any(alpha.values <= 0):
        raise InvalidWeightError("weight samples must be strictly positive")
    inner = alpha.knots[(alpha.knots > 0) & (alpha.knots < ell)]
    seg_s = np.concatenate([[0.0], inner, [ell]])
    width = np.diff(seg_s)
    if alpha.interpolation == "constant":
        a0 = alpha(seg_s[:-1])
        a1 = a0.copy()
    else:
        a0 = alpha(seg_s[:-1])
        a1 = alpha(seg_s[1:])
    seg_psi = np.concatenate([[0.0], np.cumsum(_segment_integral(a0, a1, width, width))])
    L = float(seg_psi[-1])
    t = np.linspace(0.0, L, N + 1)
    rep = Reparametrization(alpha, float(ell), L, _frozen(t), _frozen(t), _frozen(t),
                            _frozen(seg_s), _frozen(seg_psi), _frozen(a0), _frozen(a1))
    s = rep.phi(t)
    s[0], s[-1] = 0.0, ell
    if alpha.is_constant:
        s = t * alpha.values[0]
        s[-1] = ell
    object.__setattr__(rep, "s", _frozen(s))
    object.__setattr__(rep, "beta", _frozen(alpha(s)))
    return rep


@dataclass(frozen=True)
class TangentField:
    """Unit vectors ``values[i]`` at uniform nodes ``t[i]``."""

    t: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != t.shape[0] or v.shape[1] < 2:
            raise DimensionError(f"values of shape {v.shape} do not match {t.shape[0]} nodes")
        dev = np.abs(np.linalg.norm(v, axis=1) - 1.0).max()
        if dev > UNIT_TOL:
            raise ValueError(f"tangent field is not unit (max deviation {dev:.3g})")
        object.__setattr__(self, "t", _frozen(t))
        object.__setattr__(self, "values", _frozen(v))

    @classmethod
    def from_raw(cls, t, values) -> "TangentField":
        v = np.asarray(values, dtype=float)
        return cls(t, v / np.linalg.norm(v, axis=1, keepdims=True))

    @property
    def N(self) -> int:
        return len(self.t) - 1

    @property
    def n(self) -> int:
        return self.values.shape[1]

    @property
    def L(self) -> float:
        return float(self.t[-1] - self.t[0])

    @property
    def dt(self) -> float:
        return self.L / self.N

    def cell_derivative(self) -> np.ndarray:
        """Cell-constant ``tau'``, shape (N, n)."""
        return np.diff(self.values, axis=0) / self.dt

    def speed(self) -> np.ndarray:
        return np.linalg.norm(self.cell_derivative(), axis=1)


@dataclass(frozen=True)
class Curve:
    """Sampled curve; ``tangents`` holds exact unit tangents when known."""

    s: np.ndarray
    points: np.ndarray
    parametrization: Literal["arc-length", "speed-alpha"] = "arc-length"
    tangents: Optional[np.ndarray] = None

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float)
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] != s.shape[0]:
            raise DimensionError(f"points of shape {pts.shape} do not match {s.shape[0]} nodes")
        object.__setattr__(self, "s", _frozen(s))
        object.__setattr__(self, "points", _frozen(pts))
        if self.tangents is not None:
            tg = np.asarray(self.tangents, dtype=float)
            if tg.shape != pts.shape:
                raise DimensionError("tangents must have the same shape as points")
            object.__setattr__(self, "tangents", _frozen(tg))

    @property
    def N(self) -> int:
        return len(self.s) - 1

    @property
    def n(self) -> int:
        return self.points.shape[1]

    @property
    def length(self) -> float:
        return float(self.s[-1] - self.s[0])

    def polyline_length(self) -> float:
        return float(np.linalg.norm(np.diff(self.points, axis=0), axis=1).sum())

    def transformed(self, R: np.ndarray, b: np.ndarray) -> "Curve":
        """Image under ``x -> R x + b``."""
        tg = None if self.tangents is None else self.tangents @ R.T
        return Curve(self.s, self.points @ R.T + b, self.parametrization, tg)


def _check_grid(tau: TangentField, rep: Reparametrization):
    if tau.N != rep.N or abs(tau.L - rep.L) > 1e-12 * max(1.0, rep.L):
        raise DimensionError(f"tangent field on {tau.N} cells over [0, {tau.L}] does not match "
                             f"reparametrization on {rep.N} cells over [0, {rep.L}]")


def integrate_tangent(tau: TangentField, rep: Reparametrization, a1) -> Curve:
    """``c(t) = a1 + int_0^t beta tau`` by cumulative trapezoid, sampled at ``s = phi(t)``."""
    _check_grid(tau, rep)
    a1 = np.asarray(a1, dtype=float)
    if a1.shape != (tau.n,):
        raise DimensionError(f"start point has shape {a1.shape}, expected ({tau.n},)")
    f = rep.beta[:, None] * tau.values
    incr = 0.5 * rep.dt * (f[1:] + f[:-1])
    pts = np.vstack([a1, a1 + np.cumsum(incr, axis=0)])
    return Curve(rep.s, pts, "arc-length", tau.values)


def tangent_from_curve(gamma: Curve, rep: Reparametrization) -> TangentField:
    """``tau(t) = gamma'(phi(t))`` by finite differences, renormalized."""
    if gamma.N != rep.N or np.abs(gamma.s - rep.s).max() > 1e-9 * max(1.0, rep.ell):
        raise DimensionError("curve nodes do not match phi(t) of the reparametrization")
    d = np.gradient(gamma.points, gamma.s, axis=0, edge_order=2)
    speed = np.linalg.norm(d, axis=1)
    dev = np.abs(speed - 1.0).max()
    if dev > 1e-3:
        raise NotArcLengthError(f"|gamma'| deviates from 1 by {dev:.3g}")
    return TangentField(rep.t, d / speed[:, None])


def chord_residual(tau: TangentField, rep: Reparametrization, a) -> np.ndarray:
    """``int_0^L beta tau dt - a`` (trapezoid)."""
    _check_grid(tau, rep)
    return (rep.weights * rep.beta) @ tau.values - np.asarray(a, dtype=float)


@dataclass(frozen=True)
class ProblemSpec:
    """Boundary data ``gamma(0)=a1, gamma(ell)=a2, gamma'(0)=T1, gamma'(ell)=T2``."""

    ell: float
    a1: np.ndarray
    a2: np.ndarray
    T1: np.ndarray
    T2: np.ndarray
    alpha: WeightFunction = field(default_factory=WeightFunction.constant)

    def __post_init__(self):
        vecs = [np.asarray(getattr(self, k), dtype=float) for k in ("a1", "a2", "T1", "T2")]
        n = vecs[0].shape[0]
        if n < 2 or any(v.shape != (n,) for v in vecs):
            raise DimensionError("a1, a2, T1, T2 must be vectors of one common dimension >= 2")
        for name, v in zip(("T1", "T2"), vecs[2:]):
            if abs(np.linalg.norm(v) - 1.0) > 1e-12:
                raise ValueError(f"{name} must be a unit vector")
        if not self.ell > 0:
            raise ValueError("length must be positive")
        for k, v in zip(("a1", "a2", "T1", "T2"), vecs):
            object.__setattr__(self, k, _frozen(v))

    @property
    def n(self) -> int:
        return self.a1.shape[0]

    @property
    def a(self) -> np.ndarray:
        return self.a2 - self.a1

    def reparametrization(self, N: int) -> Reparametrization:
        return build_reparametrization(self.alpha, self.ell, N)

    def to_dict(self) -> dict:
        return {
            "ell": self.ell,
            "a1": self.a1.tolist(),
            "a2": self.a2.tolist(),
            "T1": self.T1.tolist(),
            "T2": self.T2.tolist(),
            "alpha": self.alpha.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ProblemSpec":
        alpha = WeightFunction.from_dict(d["alpha"]) if "alpha" in d else WeightFunction.constant()
        T1 = np.asarray(d["T1"], dtype=float)
        T2 = np.asarray(d["T2"], dtype=float)
        return cls(float(d["ell"]), np.asarray(d["a1"], dtype=float), np.asarray(d["a2"], dtype=float),
                   T1 / np.linalg.norm(T1), T2 / np.linalg.norm(T2), alpha)
