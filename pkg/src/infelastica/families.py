"""Closed-form curves: arcs, piecewise arc/segment paths, helices and
type-(i) concatenations.  Everything is sampled analytically in arc length.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .errors import DomainError, InvalidBlueprintError
from .geometry import Curve, ProblemSpec, WeightFunction
from .residuals import ElasticaCertificate, certificate_scan

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class ArcSpec:
    """Arc ``c + r (cos th e1 + sin th e2)``, ``th = start + sign(sweep) s / r``."""

    center: np.ndarray
    radius: float
    e1: np.ndarray
    e2: np.ndarray
    start: float
    sweep: float

    def __post_init__(self):
        for k in ("center", "e1", "e2"):
            object.__setattr__(self, k, np.asarray(getattr(self, k), dtype=float))
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        G = np.array([[self.e1 @ self.e1, self.e1 @ self.e2], [self.e2 @ self.e1, self.e2 @ self.e2]])
        if np.abs(G - np.eye(2)).max() > 1e-12:
            raise ValueError("arc plane basis is not orthonormal")

    @property
    def length(self) -> float:
        return self.radius * abs(self.sweep)

    @property
    def sense(self) -> int:
        return 1 if self.sweep >= 0 else -1

    def _angle(self, s):
        return self.start + self.sense * np.asarray(s) / self.radius

    def point(self, s):
        th = self._angle(s)
        return self.center + self.radius * (np.cos(th)[..., None] * self.e1 + np.sin(th)[..., None] * self.e2)

    def tangent(self, s):
        th = self._angle(s)
        return self.sense * (-np.sin(th)[..., None] * self.e1 + np.cos(th)[..., None] * self.e2)

    def acceleration(self, s):
        th = self._angle(s)
        return -(np.cos(th)[..., None] * self.e1 + np.sin(th)[..., None] * self.e2) / self.radius


@dataclass(frozen=True)
class Segment:
    start_point: np.ndarray
    end_point: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "start_point", np.asarray(self.start_point, dtype=float))
        object.__setattr__(self, "end_point", np.asarray(self.end_point, dtype=float))

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.end_point - self.start_point))

    @property
    def direction(self) -> np.ndarray:
        return (self.end_point - self.start_point) / self.length

    def point(self, s):
        return self.start_point + np.asarray(s)[..., None] * self.direction

    def tangent(self, s):
        return np.broadcast_to(self.direction, np.shape(s) + self.direction.shape).copy()

    def acceleration(self, s):
        return np.zeros(np.shape(s) + self.direction.shape)


Piece = Union[ArcSpec, Segment]


@dataclass(frozen=True)
class PiecewisePath:
    """C^1 chain of arcs and segments; ``word`` is an optional label."""

    pieces: tuple
    word: str = ""
    tol: float = 1e-10

    def __post_init__(self):
        pieces = tuple(p for p in self.pieces)
        if not pieces:
            raise ValueError("empty path")
        object.__setattr__(self, "pieces", pieces)
        for a, b in zip(pieces, pieces[1:]):
            pa, pb = a.point(a.length), b.point(0.0)
            ta, tb = a.tangent(a.length), b.tangent(0.0)
            scale = max(1.0, float(np.abs(pa).max()))
            if np.linalg.norm(pa - pb) > self.tol * scale or np.linalg.norm(ta - tb) > self.tol * 10:
                raise InvalidBlueprintError("adjacent pieces do not join with a common point and tangent")

    @property
    def breaks(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum([p.length for p in self.pieces])])

    @property
    def length(self) -> float:
        return float(self.breaks[-1])

    @property
    def n(self) -> int:
        return self.pieces[0].point(0.0).shape[-1]

    def _locate(self, s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        br = self.breaks
        idx = np.clip(np.searchsorted(br, s, side="right") - 1, 0, len(self.pieces) - 1)
        return s, idx, s - br[idx]

    def _eval(self, s, what):
        s, idx, loc = self._locate(s)
        out = np.empty((len(s), self.n))
        for j, piece in enumerate(self.pieces):
            m = idx == j
            if np.any(m):
                out[m] = getattr(piece, what)(loc[m])
        return out

    def point(self, s):
        return self._eval(s, "point")

    def tangent(self, s):
        return self._eval(s, "tangent")

    def acceleration(self, s):
        return self._eval(s, "acceleration")

    def sample(self, N: int) -> Curve:
        s = np.linspace(0.0, self.length, N + 1)
        pts = self.point(s)
        tg = self.tangent(s)
        pts[-1] = self.pieces[-1].point(self.pieces[-1].length)
        tg[-1] = self.pieces[-1].tangent(self.pieces[-1].length)
        return Curve(s, pts, "arc-length", tg)

    @property
    def start(self):
        return self.point(0.0)[0], self.tangent(0.0)[0]

    @property
    def end(self):
        last = self.pieces[-1]
        return last.point(last.length), last.tangent(last.length)


def planar_arc(center, radius: float, start: float, sweep: float) -> ArcSpec:
    return ArcSpec(np.asarray(center, dtype=float), radius, np.array([1.0, 0.0]), np.array([0.0, 1.0]), start, sweep)


def turtle_arc(point, heading: float, radius: float, sweep: float) -> ArcSpec:
    """Planar arc leaving ``point`` with heading angle ``heading``; ``sweep > 0`` turns left."""
    point = np.asarray(point, dtype=float)
    sense = 1.0 if sweep >= 0 else -1.0
    normal = sense * np.array([-math.sin(heading), math.cos(heading)])
    center = point + radius * normal
    d = point - center
    return planar_arc(center, radius, math.atan2(d[1], d[0]), sweep)


def heading_of(v) -> float:
    return math.atan2(v[1], v[0])


# ---------------------------------------------------------------- arcs

def make_circular_arc(r: float, ell: float, N: int = 2048):
    """Arc ``r (cos(s/r), sin(s/r))`` of length ``ell`` with a certificate.

    For ``ell <= 2 pi r / 3`` the certificate comes from the direction/offset
    scan and satisfies the minimiser condition; otherwise it is the witness
    ``g = lam.T + max(-lam.T) >= 0`` with ``lam`` opposite to the mean tangent.
    """
    if not (r > 0 and ell > 0):
        raise ValueError("radius and length must be positive")
    path = PiecewisePath((planar_arc([0.0, 0.0], r, 0.0, ell / r),), "C")
    curve = path.sample(N)
    k = 1.0 / r
    alpha = WeightFunction.constant()
    if ell <= TWO_PI * r / 3 * (1 + 1e-12):
        return curve, certificate_scan(curve, alpha, k).certificate
    T = curve.tangents
    mean = T.mean(axis=0)
    lam = -mean / np.linalg.norm(mean) if np.linalg.norm(mean) > 1e-9 else np.array([1.0, 0.0])
    lt = T @ lam
    return curve, ElasticaCertificate(lam, k, lt - lt.min(), curve.s, "original")


def make_semicircle_triple(N: int = 3072):
    """Three semicircles of radius 1/3 from (-1, 0) to (1, 0), alternating sense."""
    if N % 3:
        raise ValueError("N must be divisible by 3")
    r = 1.0 / 3.0
    pieces = (
        planar_arc([-2 * r, 0.0], r, math.pi, -math.pi),
        planar_arc([0.0, 0.0], r, math.pi, math.pi),
        planar_arc([2 * r, 0.0], r, math.pi, -math.pi),
    )
    curve = PiecewisePath(pieces, "CCC").sample(N)
    pts = np.array(curve.points)
    pts[0], pts[-1] = (-1.0, 0.0), (1.0, 0.0)
    boundary = ProblemSpec(math.pi, np.array([-1.0, 0.0]), np.array([1.0, 0.0]),
                           np.array([0.0, 1.0]), np.array([0.0, -1.0]))
    return Curve(curve.s, pts, "arc-length", curve.tangents), boundary


def _omega(r: float) -> float:
    return math.acos(min(1.0, (1.0 - r) / (2.0 * r)))


def comparison_length(r: float) -> float:
    """Arc length ``r (3 pi - 4 omega(r))`` of the three-arc comparison curve."""
    if not (1.0 / 3.0 <= r <= 1.0):
        raise DomainError(f"r = {r} outside [1/3, 1]")
    return r * (3 * math.pi - 4 * _omega(r))


def comparison_path(r: float) -> PiecewisePath:
    if not (1.0 / 3.0 < r < 1.0):
        raise DomainError(f"r = {r} outside (1/3, 1)")
    w = _omega(r)
    h = (math.pi - comparison_length(r)) / 2.0
    c1 = np.array([r - 1.0, h])
    c2 = np.array([0.0, h + 2 * r * math.sin(w)])
    c3 = np.array([1.0 - r, h])
    pieces = []
    if h > 0:
        pieces.append(Segment([-1.0, 0.0], [-1.0, h]))
    pieces += [
        planar_arc(c1, r, math.pi, -(math.pi - w)),
        planar_arc(c2, r, math.pi + w, math.pi - 2 * w),
        planar_arc(c3, r, math.pi - w, -(math.pi - w)),
    ]
    if h > 0:
        pieces.append(Segment([1.0, h], [1.0, 0.0]))
    return PiecewisePath(tuple(pieces), "SCCCS", tol=1e-9)


def make_comparison_curve(r: float, N: int = 3000) -> Curve:
    """Segment, three arcs of radius r, segment; total length pi, same end data as the triple."""
    return comparison_path(r).sample(N)


# ---------------------------------------------------------------- helix

@dataclass(frozen=True)
class HelixSpec:
    r: float
    omega: float
    ell: float
    frame: np.ndarray = field(default_factory=lambda: np.eye(3))
    origin: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError("r must be positive")
        if not 0 < self.omega < math.pi / 2:
            raise DomainError("omega must lie in (0, pi/2)")
        object.__setattr__(self, "frame", np.asarray(self.frame, dtype=float))
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=float))

    @property
    def k(self) -> float:
        return math.cos(self.omega) / self.r

    @property
    def eta(self) -> float:
        w = self.omega
        return math.sin(w) - math.cos(w) / math.tan(w)

    @property
    def axis(self) -> np.ndarray:
        return self.frame[:, 2]

    def point(self, s):
        s = np.asarray(s, dtype=float)
        r, w = self.r, self.omega
        loc = np.stack([r * math.cos(w) * np.cos(s / r), r * math.cos(w) * np.sin(s / r), s * math.sin(w)], -1)
        return loc @ self.frame.T + self.origin

    def tangent(self, s):
        s = np.asarray(s, dtype=float)
        w, r = self.omega, self.r
        loc = np.stack([-math.cos(w) * np.sin(s / r), math.cos(w) * np.cos(s / r),
                        np.full_like(s, math.sin(w))], -1)
        return loc @ self.frame.T

    def derivative(self, s):
        s = np.asarray(s, dtype=float)
        c = math.cos(self.omega) / self.r
        loc = np.stack([-c * np.cos(s / self.r), -c * np.sin(s / self.r), np.zeros_like(s)], -1)
        return loc @ self.frame.T


def make_helix(r: float, omega: float, ell: float, N: int = 2048, frame=None, origin=None):
    """Helix with curvature ``cos(omega)/r`` and certificate ``g = lam.T - eta`` for ``lam`` the axis."""
    spec = HelixSpec(r, omega, ell, np.eye(3) if frame is None else frame,
                     np.zeros(3) if origin is None else origin)
    s = np.linspace(0.0, ell, N + 1)
    curve = Curve(s, spec.point(s), "arc-length", spec.tangent(s))
    lam = spec.axis
    g = curve.tangents @ lam - spec.eta
    return curve, ElasticaCertificate(lam, spec.k, g, s, "original", spec.eta)


# ---------------------------------------------------------------- type (i)

@dataclass(frozen=True)
class TypeIBlueprint:
    """Planar chain built from a start pose.

    ``pieces`` holds ``("arc", signed sweep)``, ``("line", length)`` or
    ``("circle", +1 | -1)``; every arc has radius ``radius``.  ``line_point``
    and ``line_direction`` give the line the chain must touch and ``lam`` the
    multiplier direction.
    """

    start: np.ndarray
    heading: float
    radius: float
    pieces: tuple
    line_point: np.ndarray
    line_direction: np.ndarray
    lam: np.ndarray
    name: str = ""

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "start": list(map(float, self.start)),
            "heading": self.heading,
            "radius": self.radius,
            "pieces": [list(p) for p in self.pieces],
            "line_point": list(map(float, self.line_point)),
            "line_direction": list(map(float, self.line_direction)),
            "lambda": list(map(float, self.lam)),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TypeIBlueprint":
        try:
            return cls(np.asarray(d["start"], dtype=float), float(d["heading"]), float(d["radius"]),
                       tuple((str(k), float(v)) for k, v in d["pieces"]),
                       np.asarray(d["line_point"], dtype=float), np.asarray(d["line_direction"], dtype=float),
                       np.asarray(d["lambda"], dtype=float), d.get("name", ""))
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidBlueprintError(f"malformed blueprint: {exc}") from exc


def _build_chain(bp: TypeIBlueprint) -> tuple:
    p = np.asarray(bp.start, dtype=float)
    h = float(bp.heading)
    pieces = []
    for kind, val in bp.pieces:
        if kind == "arc":
            if val == 0:
                raise InvalidBlueprintError("zero-sweep arc")
            piece = turtle_arc(p, h, bp.radius, val)
            h += val
        elif kind == "circle":
            piece = turtle_arc(p, h, bp.radius, math.copysign(TWO_PI, val))
        elif kind == "line":
            if not val > 0:
                raise InvalidBlueprintError("line pieces need a positive length")
            piece = Segment(p, p + val * np.array([math.cos(h), math.sin(h)]))
        else:
            raise InvalidBlueprintError(f"unknown piece kind {kind!r}")
        pieces.append(piece)
        p = piece.point(piece.length)
        h = heading_of(piece.tangent(piece.length))
    return tuple(pieces)


def make_type_i_path(bp: TypeIBlueprint, tol: float = 1e-9) -> PiecewisePath:
    """Build the chain and check the type-(i) conditions against the line and ``lam``."""
    u = np.asarray(bp.line_direction, dtype=float)
    u = u / np.linalg.norm(u)
    lam = np.asarray(bp.lam, dtype=float)
    lam = lam / np.linalg.norm(lam)
    if abs(abs(u @ lam) - 1.0) > tol:
        raise InvalidBlueprintError("the line must be parallel to lambda")
    q = np.asarray(bp.line_point, dtype=float)
    nrm = np.array([-u[1], u[0]])

    def off(x):
        return (np.asarray(x) - q) @ nrm

    pieces = _build_chain(bp)
    path = PiecewisePath(pieces, "".join("S" if isinstance(p, Segment) else "C" for p in pieces), tol=tol)
    scale = max(1.0, float(np.abs(q).max()), bp.radius)
    for j, piece in enumerate(pieces):
        a, b = piece.point(0.0), piece.point(piece.length)
        if isinstance(piece, Segment):
            if abs(off(a)) > tol * scale or abs(piece.direction @ nrm) > tol:
                raise InvalidBlueprintError(f"segment {j} does not lie on the line")
            continue
        # interior of an arc must avoid the line
        ss = np.linspace(0.0, piece.length, 2001)[1:-1]
        d = off(piece.point(ss))
        if np.any(np.abs(d) < tol * scale) or (d.min() < 0 < d.max()):
            raise InvalidBlueprintError(f"arc {j} meets the line in its interior")
        eps = 1e-6 * piece.length
        if j > 0:
            if abs(off(a)) > tol * scale:
                raise InvalidBlueprintError(f"junction before piece {j} is not on the line")
            if lam @ piece.acceleration(eps) <= 0:
                raise InvalidBlueprintError(f"sign condition fails after the start of arc {j}")
        if j < len(pieces) - 1:
            if abs(off(b)) > tol * scale:
                raise InvalidBlueprintError(f"junction after piece {j} is not on the line")
            if lam @ piece.acceleration(piece.length - eps) >= 0:
                raise InvalidBlueprintError(f"sign condition fails before the end of arc {j}")
    return path


def make_type_i_concat(bp: TypeIBlueprint, N: int = 2048) -> Curve:
    return make_type_i_path(bp).sample(N)


def _backward_start(end, heading_end, radius, sweep):
    """Start pose of an arc that ends at ``end`` with ``heading_end``."""
    h0 = heading_end - sweep
    arc = turtle_arc(np.zeros(2), h0, radius, sweep)
    shift = np.asarray(end, dtype=float) - arc.point(arc.length)
    return shift, h0


def blueprint_arc_line_arc(radius: float = 1.0, line: float = 1.5, circles: Sequence[int] = ()) -> TypeIBlueprint:
    """Arc onto the x-axis, segment(s) and optional full circles on it, arc away; ``lam = (-1, 0)``."""
    start, h0 = _backward_start([0.0, 0.0], 0.0, radius, math.pi / 2)
    pieces = [("arc", math.pi / 2), ("line", line)]
    for sense in circles:
        pieces += [("circle", float(sense)), ("line", line)]
    pieces.append(("arc", -math.pi / 3))
    return TypeIBlueprint(start, h0, radius, tuple(pieces), np.zeros(2), np.array([1.0, 0.0]),
                          np.array([-1.0, 0.0]), "arc-line-arc")


def blueprint_alternating(radius: float = 1.0, junction_heading: float = -math.pi / 3, middle: int = 1,
                          first_sweep: float = math.pi / 2, last_sweep: float = math.pi / 2) -> TypeIBlueprint:
    """Arcs of alternating sense meeting the x-axis at ``junction_heading``; ``lam = (1, 0)``.

    Inner arcs run from the axis back to it, so each sweeps ``2|junction_heading|``
    (left turns starting downward) or its mirror.
    """
    h = junction_heading
    if not -math.pi < h < 0:
        raise InvalidBlueprintError("junction heading must point below the axis")
    start, h0 = _backward_start([0.0, 0.0], h, radius, -first_sweep)
    pieces = [("arc", -first_sweep)]
    sense = 1.0
    inner = -2.0 * h
    for _ in range(middle):
        pieces.append(("arc", sense * inner))
        sense = -sense
    pieces.append(("arc", sense * last_sweep))
    return TypeIBlueprint(start, h0, radius, tuple(pieces), np.zeros(2), np.array([1.0, 0.0]),
                          np.array([1.0, 0.0]), "alternating")


NAMED_BLUEPRINTS = {
    "arc-line-arc": lambda: blueprint_arc_line_arc(1.0, 1.5),
    "arc-line-circle-arc": lambda: blueprint_arc_line_arc(1.0, 1.0, circles=(1,)),
    "alternating-shallow": lambda: blueprint_alternating(1.0, -math.pi / 3, middle=1),
    "alternating-loops": lambda: blueprint_alternating(0.5, -2 * math.pi / 3, middle=2,
                                                       first_sweep=math.pi / 3, last_sweep=math.pi / 3),
}
