"""Structure detection for candidate curves.

A curve is reported as a straight line, as a planar chain of arcs and
segments touching a line parallel to the multiplier (type-i), as a curve of
constant curvature in a 3-dimensional affine space carrying a positive
witness ``g = lam.T - eta`` (type-ii), or as unclassified.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ElasticaError, InconclusiveError
from .geometry import Curve, WeightFunction
from .residuals import _curve_tangents, _d1_4, _d2_4, alpha1_equation_residual, certificate_scan
from .shooting import IVPState, integrate_ivp

VERDICTS = ("type-i", "type-ii", "straight-line", "unclassified")


@dataclass
class ClassifierTolerances:
    curvature: float = 1e-3      # relative, for line/arc labels
    planarity: float = 1e-6      # times the diameter
    line_distance: float = 1e-6  # times the diameter
    other_fraction: float = 0.10
    straight: float = 1e-8       # absolute bound on weighted curvature times length
    equation: float = 1e-5       # type-ii equation defect relative to k^2
    min_piece_nodes: int = 4
    window: int = 4


@dataclass
class Piece:
    kind: str                    # "line" | "arc" | "other"
    i0: int
    i1: int
    s0: float
    s1: float
    radius: float = math.inf
    sense: int = 0
    center: Optional[np.ndarray] = None
    plane: Optional[np.ndarray] = None    # 2 x n orthonormal rows
    direction: Optional[np.ndarray] = None
    sweep: float = 0.0

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "s0": self.s0, "s1": self.s1, "nodes": [self.i0, self.i1]}
        if self.kind == "arc":
            d.update(radius=self.radius, sense=self.sense, sweep=self.sweep,
                     center=self.center.tolist(), plane=self.plane.tolist())
        if self.kind == "line":
            d["direction"] = self.direction.tolist()
        return d


@dataclass
class StructureReport:
    verdict: str
    k: float
    hull_dimension: int
    lam: Optional[np.ndarray] = None
    line_point: Optional[np.ndarray] = None
    line_direction: Optional[np.ndarray] = None
    intervals: list = field(default_factory=list)
    pieces: list = field(default_factory=list)
    conditions: dict = field(default_factory=dict)
    witness: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def __post_init__(self):
        if self.verdict not in VERDICTS:
            raise ValueError(f"unknown verdict {self.verdict!r}")

    @property
    def N(self) -> int:
        return len(self.intervals)

    def to_dict(self) -> dict:
        arr = lambda v: None if v is None else [float(x) for x in v]
        return {
            "verdict": self.verdict,
            "k": self.k,
            "hull_dimension": self.hull_dimension,
            "lambda": arr(self.lam),
            "line": None if self.line_point is None else {"point": arr(self.line_point),
                                                          "direction": arr(self.line_direction)},
            "intervals": [p.to_dict() for p in self.intervals],
            "pieces": [p.to_dict() for p in self.pieces],
            "conditions": {k: bool(v) for k, v in self.conditions.items()},
            "witness": self.witness,
            "tolerances": self.tolerances,
            "notes": list(self.notes),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def summary(self) -> str:
        lines = [f"verdict: {self.verdict}", f"k: {self.k:.10g}", f"hull dimension: {self.hull_dimension}"]
        if self.lam is not None:
            lines.append("lambda: " + " ".join(f"{x:.8g}" for x in self.lam))
        if self.line_point is not None:
            lines.append("line: point " + " ".join(f"{x:.8g}" for x in self.line_point)
                         + ", direction " + " ".join(f"{x:.8g}" for x in self.line_direction))
        if self.intervals:
            lines.append(f"intervals: {self.N}")
            for p in self.intervals:
                lines.append(f"  [{p.s0:.6g}, {p.s1:.6g}] radius {p.radius:.6g} sense {p.sense:+d}")
        for name, ok in self.conditions.items():
            lines.append(f"  {name}: {'pass' if ok else 'fail'}")
        lines.extend(self.notes)
        return "\n".join(lines)


def fit_affine_hull(points, tol: float = 1e-6):
    """Smallest affine subspace containing ``points`` to within ``tol`` times the diameter.

    Returns ``(dimension, basis rows, offset)``.
    """
    X = np.asarray(points, dtype=float)
    if X.ndim != 2 or X.shape[0] < 4:
        raise ValueError("need at least 4 points")
    offset = X.mean(axis=0)
    Y = X - offset
    diam = float(np.linalg.norm(X.max(axis=0) - X.min(axis=0)))
    if diam == 0.0:
        return 0, np.zeros((0, X.shape[1])), offset
    _, sv, Vt = np.linalg.svd(Y, full_matrices=False)
    dim = 0
    for j in range(len(sv)):
        # largest deviation from the span of the first j directions
        resid = Y - (Y @ Vt[:j].T) @ Vt[:j]
        if np.linalg.norm(resid, axis=1).max() <= tol * diam:
            break
        dim = j + 1
    return dim, Vt[:dim], offset


def _turns(points):
    d = np.diff(points, axis=0)
    h = np.linalg.norm(d, axis=1)
    u = d / h[:, None]
    c = np.clip(np.einsum("ij,ij->i", u[:-1], u[1:]), -1.0, 1.0)
    cross = np.linalg.norm(u[1:] - c[:, None] * u[:-1], axis=1)
    ang = np.arctan2(cross, c)
    return u, h, ang


def node_curvature(gamma: Curve, alpha=None) -> np.ndarray:
    """Weighted curvature at every node from the turning angle of consecutive chords.

    Angles are divided by the arc-length step, which is exact for circular
    arcs sampled uniformly in arc length.
    """
    u, h, ang = _turns(gamma.points)
    if gamma.parametrization == "arc-length":
        h = np.diff(gamma.s)
    kap = np.empty(gamma.N + 1)
    kap[1:-1] = ang / (0.5 * (h[:-1] + h[1:]))
    kap[0], kap[-1] = kap[1], kap[-2]
    if alpha is not None:
        kap = kap * (alpha(gamma.s) if callable(alpha) else alpha)
    return kap


def _runs(labels):
    out = []
    start = 0
    for i in range(1, len(labels) + 1):
        if i == len(labels) or labels[i] != labels[start]:
            out.append([labels[start], start, i - 1])
            start = i
    return out


def _fit_circle(P2):
    A = np.column_stack([2 * P2, np.ones(len(P2))])
    b = (P2 ** 2).sum(axis=1)
    sol = np.linalg.lstsq(A, b, rcond=None)[0]
    c = sol[:2]
    return c, math.sqrt(max(sol[2] + c @ c, 0.0))


def _plane_frame(points, n):
    if n == 2:
        return np.eye(2)
    dim, basis, _ = fit_affine_hull(points, 1e-6)
    if dim < 2:
        return None
    return basis[:2]


def segment_curve(gamma: Curve, alpha=None, tol: Optional[ClassifierTolerances] = None) -> list:
    """Split into line, arc and other pieces from the weighted curvature.

    Short runs (at most two nodes) between pieces are junction nodes and are
    absorbed.  Arc runs are split where the turning sense changes; a run that
    does not lie in a plane becomes "other".
    """
    tol = tol or ClassifierTolerances()
    if gamma.N < 16:
        raise ValueError("need at least 16 cells")
    kap = node_curvature(gamma, alpha)
    k = float(kap.max())
    if k <= 0:
        return [Piece("line", 0, gamma.N, float(gamma.s[0]), float(gamma.s[-1]))]
    labels = np.where(kap <= tol.curvature * k, "L", np.where(np.abs(kap - k) <= tol.curvature * k, "A", "O"))
    # sense split in the plane of the curve (n = 2) or of each arc run
    pts = gamma.points
    runs = _runs(list(labels))
    # absorb short runs that sit between two longer runs
    for r in runs[1:-1]:
        if r[2] - r[1] + 1 <= 2:
            r[0] = "J"
    pieces = []
    for lab, i0, i1 in runs:
        if lab == "J":
            continue
        if lab == "A":
            pieces.extend(_arc_pieces(gamma, i0, i1, kap, tol))
        elif lab == "L":
            pieces.append(_line_piece(gamma, i0, i1))
        else:
            pieces.append(Piece("other", i0, i1, float(gamma.s[i0]), float(gamma.s[i1])))
    return pieces


def _line_piece(gamma, i0, i1):
    P = gamma.points[i0:i1 + 1]
    if len(P) >= 2:
        d = P[-1] - P[0]
        nd = np.linalg.norm(d)
    else:
        nd = 0.0
    if nd == 0.0:
        T = _curve_tangents(gamma)[i0]
        d, nd = T, 1.0
    return Piece("line", i0, i1, float(gamma.s[i0]), float(gamma.s[i1]), direction=d / nd)


def _arc_pieces(gamma, i0, i1, kap, tol):
    n = gamma.n
    P = gamma.points
    lo, hi = max(i0 - 1, 0), min(i1 + 1, gamma.N)
    frame = _plane_frame(P[lo:hi + 1], n) if hi - lo + 1 >= 4 else None
    if frame is None:
        return [Piece("other", i0, i1, float(gamma.s[i0]), float(gamma.s[i1]))]
    if n > 2:
        dim, _, _ = fit_affine_hull(P[lo:hi + 1], tol.planarity)
        if dim > 2:
            return [Piece("other", i0, i1, float(gamma.s[i0]), float(gamma.s[i1]))]
    Q = P @ frame.T
    d = np.diff(Q, axis=0)
    sn = np.zeros(gamma.N + 1)
    sn[1:-1] = np.sign(d[:-1, 0] * d[1:, 1] - d[:-1, 1] * d[1:, 0])
    sn[0], sn[-1] = sn[1], sn[-2]
    sense = sn[i0:i1 + 1]
    out = []
    start = i0
    for j in range(i0 + 1, i1 + 2):
        if j == i1 + 1 or sense[j - i0] != sense[start - i0]:
            out.append((start, j - 1, int(sense[start - i0])))
            start = j
    pieces = []
    for a, b, sg in out:
        la, lb = max(a - 1, 0), min(b + 1, gamma.N)
        c2, r = _fit_circle(Q[la:lb + 1])
        origin = P[la] - (P[la] @ frame.T) @ frame
        center = origin + c2 @ frame
        sweep = float(np.sum(np.abs(_turns(P[la:lb + 1])[2]))) + (gamma.s[la + 1] - gamma.s[la]) / r
        pieces.append(Piece("arc", a, b, float(gamma.s[a]), float(gamma.s[b]), radius=r, sense=sg,
                            center=center, plane=frame, sweep=sweep))
    return pieces


def _junction_point(left: Piece, right: Piece, gamma: Curve):
    """Meeting point of two adjacent pieces and its arc-length position."""
    if left.kind == "arc" and right.kind == "arc":
        d = right.center - left.center
        x = left.center + left.radius * d / np.linalg.norm(d)
    elif left.kind == "arc" or right.kind == "arc":
        arc, line = (left, right) if left.kind == "arc" else (right, left)
        q = gamma.points[line.i0]
        x = q + ((arc.center - q) @ line.direction) * line.direction
    else:
        x = gamma.points[right.i0]
    i = int(np.argmin(np.linalg.norm(gamma.points[left.i1:right.i0 + 1] - x, axis=1))) + left.i1
    T = _curve_tangents(gamma)
    s0 = float(gamma.s[i] + (x - gamma.points[i]) @ T[i])
    return x, s0


def _second_derivative(gamma: Curve) -> np.ndarray:
    P, s = gamma.points, gamma.s
    acc = np.zeros_like(P)
    h0, h1 = np.diff(s)[:-1], np.diff(s)[1:]
    acc[1:-1] = 2 * ((P[2:] - P[1:-1]) / h1[:, None] - (P[1:-1] - P[:-2]) / h0[:, None]) / (h0 + h1)[:, None]
    acc[0], acc[-1] = acc[1], acc[-2]
    return acc


def junction_sign_check(gamma: Curve, lam, s0: float, window: int = 4, sides=None) -> bool:
    """Sign of ``lam . gamma''`` next to a junction at ``s0``.

    Inside an interval the value must be positive just after ``s0`` and
    negative just before it.  ``sides`` may be given as a pair of booleans
    (left is an interval, right is an interval); otherwise a side counts as
    an interval when the curvature there is at least half its maximum.
    Nodes whose stencil straddles ``s0`` are skipped.
    """
    lam = np.asarray(lam, dtype=float)
    acc = _second_derivative(gamma)
    mag = np.linalg.norm(acc, axis=1)
    s = gamma.s
    h = float(np.max(np.diff(s)))
    right = np.where(s > s0 + 1.01 * h)[0][:window]
    left = np.where(s < s0 - 1.01 * h)[0][-window:]
    if sides is None:
        big = 0.5 * mag.max()
        sides = (len(left) > 0 and mag[left].mean() > big, len(right) > 0 and mag[right].mean() > big)
    if not (sides[0] or sides[1]):
        raise InconclusiveError(f"no interval cells next to s = {s0:.6g}")
    ok = True
    if sides[1]:
        ok &= bool(np.all(acc[right] @ lam > 0))
    if sides[0]:
        ok &= bool(np.all(acc[left] @ lam < 0))
    return ok


def _distance_to_line(X, q, u):
    Y = np.asarray(X) - q
    return np.linalg.norm(Y - np.outer(Y @ u, u), axis=-1)


def _type_i_conditions(gamma, pieces, junctions, q, u, lam, tol, diam):
    arcs = [p for p in pieces if p.kind == "arc"]
    cond = {}
    cond["arcs_constant_curvature"] = len(arcs) > 0 and all(
        abs(p.radius - arcs[0].radius) <= tol.curvature * arcs[0].radius for p in arcs)
    lines = [p for p in pieces if p.kind == "line"]
    lt = tol.line_distance * diam
    cond["segments_on_line"] = all(
        np.all(_distance_to_line(gamma.points[p.i0:p.i1 + 1], q, u) <= lt) and abs(abs(p.direction @ u) - 1) <= 1e-9
        for p in lines)
    jt = max(lt, 1e-9 * diam)
    cond["junctions_on_line"] = all(_distance_to_line(x[None], q, u)[0] <= jt for x, _, _, _ in junctions)
    off = True
    for p in arcs:
        # skip two nodes at each end, where a tangential touch is closer than the tolerance
        inner = gamma.points[p.i0 + 2:p.i1 - 1]
        if len(inner) == 0:
            continue
        nrm = inner - q - np.outer((inner - q) @ u, u)
        ref = nrm[np.argmax(np.linalg.norm(nrm, axis=1))]
        side = nrm @ ref / max(np.linalg.norm(ref), 1e-300)
        off &= bool(np.all(side > 0))
    cond["arcs_off_line"] = off
    signs = True
    for _, s0, left, right in junctions:
        try:
            signs &= junction_sign_check(gamma, lam, s0, tol.window,
                                         (left is not None and left.kind == "arc",
                                          right is not None and right.kind == "arc"))
        except InconclusiveError:
            pass
    cond["junction_signs"] = signs
    return cond


def infer_line_and_lambda(pieces: list, gamma: Curve, tol: Optional[ClassifierTolerances] = None):
    """Line ``(point, direction)`` and ``lam`` for a planar chain, or None.

    Candidates come from the line pieces, from pairs of junction points and
    from the junction tangents; the sign of ``lam`` is fixed by the junction
    sign condition.
    """
    tol = tol or ClassifierTolerances()
    found = _search_line(pieces, gamma, tol)
    if found is None:
        return None
    q, u, lam, _, _ = found
    return (q, u), lam


def _junctions(pieces, gamma):
    out = []
    for a, b in zip(pieces[:-1], pieces[1:]):
        x, s0 = _junction_point(a, b, gamma)
        out.append((x, s0, a, b))
    return out


def _search_line(pieces, gamma, tol):
    diam = float(np.linalg.norm(gamma.points.max(axis=0) - gamma.points.min(axis=0)))
    junctions = _junctions(pieces, gamma)
    T = _curve_tangents(gamma)
    cands = []
    for p in pieces:
        if p.kind == "line":
            cands.append((gamma.points[p.i0], p.direction))
    xs = [j[0] for j in junctions]
    for i in range(len(xs)):
        for j in range(i + 1, len(xs)):
            d = xs[j] - xs[i]
            if np.linalg.norm(d) > 1e-9 * diam:
                cands.append((xs[i], d / np.linalg.norm(d)))
    for x, s0, _, _ in junctions:
        i = int(np.argmin(np.abs(gamma.s - s0)))
        cands.append((x, T[i]))
    if not junctions:
        # single arc: tangent line at the start
        cands.append((gamma.points[0], T[0]))
    for q, u in cands:
        u = u / np.linalg.norm(u)
        for lam in (u, -u):
            cond = _type_i_conditions(gamma, pieces, junctions, q, u, lam, tol, diam)
            if all(cond.values()):
                return q, u, lam, cond, junctions
    return None


def _canonical_point(q, u):
    return q - (q @ u) * u


def _fit_type_ii(gamma: Curve, alpha, k_node: float, tol):
    """Null vector of ``(lam.T - eta)(T'' + k^2 T) = k^2 P(lam)`` over the nodes."""
    s = gamma.s
    h = float(s[1] - s[0])
    if np.abs(np.diff(s) - h).max() > 1e-9 * max(1.0, h):
        return None
    T = _curve_tangents(gamma)
    Tp = _d1_4(T, h)[2:-2]
    Tpp = _d2_4(T, h)
    Tm = T[2:-2]
    n = gamma.n
    k2 = k_node ** 2
    v = Tpp + k2 * Tm
    e1 = Tm
    w = Tp - np.einsum("ij,ij->i", Tp, e1)[:, None] * e1
    wn = np.linalg.norm(w, axis=1)
    if np.any(wn < 1e-12):
        return None
    e2 = w / wn[:, None]
    Pm = np.eye(n)[None] - e1[:, :, None] * e1[:, None, :] - e2[:, :, None] * e2[:, None, :]
    M = np.concatenate([v[:, :, None] * Tm[:, None, :] - k2 * Pm, -v[:, :, None]], axis=2).reshape(-1, n + 1)
    _, sv, Vt = np.linalg.svd(M, full_matrices=False)
    x = Vt[-1]
    lam, eta = x[:n], x[n]
    nl = np.linalg.norm(lam)
    if nl < 1e-12:
        return None
    lam, eta = lam / nl, eta / nl
    g = T @ lam - eta
    if g.mean() < 0:
        lam, eta, g = -lam, -eta, -g
    return lam, float(eta), g, float(sv[-1] / max(sv[0], 1e-300))


def _attempt_type_ii(gamma, alpha, k, hull_dim, tol, report_kw):
    if hull_dim > 3:
        return None, "affine hull has dimension above 3"
    a = alpha(gamma.s) if callable(alpha) else np.full(gamma.N + 1, float(alpha))
    if np.ptp(a) > 0:
        return None, "type-ii fit needs a constant weight"
    a0 = float(a[0])
    kap = k / a0
    fit = _fit_type_ii(gamma, alpha, kap, tol)
    if fit is None:
        return None, "no type-ii fit"
    lam, eta, g, sing = fit
    if g.min() <= 0:
        return None, f"witness is not positive (min g = {g.min():.3g})"
    try:
        eq = alpha1_equation_residual(gamma, kap, lam, eta)
    except ElasticaError as exc:
        return None, str(exc)
    if eq > tol.equation * max(kap * kap, 1e-300):
        return None, f"type-ii equation defect {eq:.3g}"
    # IVP round trip: in the rescaled frame tau(t) = T(a0 t), f = g
    T = _curve_tangents(gamma)
    h = float(gamma.s[1] - gamma.s[0])
    T1 = a0 * _d1_4(T, h)[0]
    T1 = T1 - (T1 @ T[0]) * T[0]
    trip = None
    if gamma.n >= 3 and np.linalg.norm(T1) > 0:
        try:
            traj = integrate_ivp(IVPState(0.0, T[0], T1, float(g[0])), lam, a0, gamma.length / a0)
            trip = max(float(np.linalg.norm(traj.tau[-1] - T[-1])),
                       float(np.linalg.norm(traj.position[-1] - (gamma.points[-1] - gamma.points[0]))))
        except ElasticaError as exc:
            return None, f"round trip failed: {exc}"
        if trip > 1e-5 * max(1.0, gamma.length):
            return None, f"round trip defect {trip:.3g}"
    witness = {"eta": eta, "g_min": float(g.min()), "g_max": float(g.max()), "equation_defect": eq,
               "fit_singular_ratio": sing, "round_trip_defect": trip}
    return StructureReport("type-ii", k, hull_dim, lam=lam, witness=witness,
                           conditions={"hull_at_most_3": True, "witness_positive": True,
                                       "equation": True, "round_trip": True},
                           **report_kw), ""


def classify(gamma: Curve, alpha=None, tol: Optional[ClassifierTolerances] = None) -> StructureReport:
    """Straight line, type-i chain, type-ii helicoidal curve or unclassified."""
    tol = tol or ClassifierTolerances()
    if alpha is None:
        alpha = WeightFunction.constant(1.0)
    tol_dict = {k: getattr(tol, k) for k in tol.__dataclass_fields__}
    kap = node_curvature(gamma, alpha)
    k = float(kap.max())
    P = gamma.points
    diam = float(np.linalg.norm(P.max(axis=0) - P.min(axis=0)))
    hull_dim, _, _ = fit_affine_hull(P, tol.planarity)
    kw = {"tolerances": tol_dict}
    if k * max(gamma.length, 1e-300) <= tol.straight or hull_dim <= 1:
        d = P[-1] - P[0]
        u = d / np.linalg.norm(d) if np.linalg.norm(d) > 0 else _curve_tangents(gamma)[0]
        return StructureReport("straight-line", 0.0, hull_dim, line_point=P[0], line_direction=u,
                               conditions={"collinear": True}, **kw)
    notes = []
    pieces = segment_curve(gamma, alpha, tol)
    other = sum(p.i1 - p.i0 + 1 for p in pieces if p.kind == "other")
    planar = all(p.kind != "other" for p in pieces) and other <= tol.other_fraction * (gamma.N + 1)
    if planar and any(p.kind == "arc" for p in pieces):
        found = _search_line(pieces, gamma, tol)
        if found is not None:
            q, u, lam, cond, junctions = found
            arcs = [p for p in pieces if p.kind == "arc"]
            rep = StructureReport("type-i", k, hull_dim, lam=lam, line_point=_canonical_point(q, u),
                                  line_direction=u if u @ lam > 0 else -u, intervals=arcs, pieces=pieces,
                                  conditions=cond, **kw)
            if len(arcs) == 1 and len(pieces) == 1:
                scan = certificate_scan(gamma, alpha, k, n_dirs=360, n_h=100) if gamma.n <= 3 else None
                if scan is not None:
                    rep.witness = {"scan_lambda": scan.lam.tolist(), "scan_passed": scan.passed,
                                   "scan_margin": scan.margin}
                rep.notes.append("single arc: the projection term vanishes and any lambda is admissible")
            return rep
        notes.append("planar pieces found but no line satisfies the type-i conditions")
    rep, why = _attempt_type_ii(gamma, alpha, k, hull_dim, tol, kw)
    if rep is not None:
        rep.pieces = pieces
        rep.notes = notes
        return rep
    notes.append(why)
    return StructureReport("unclassified", k, hull_dim, pieces=pieces, notes=notes, **kw)
