"""Shortest planar paths with curvature at most 1/R between two poses.

Each of the six words LSL, RSR, LSR, RSL, RLR, LRL is built from its
tangent circles; CCC words keep only the solution whose middle arc exceeds
a half turn.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InfeasibleError
from .families import PiecewisePath, Segment, planar_arc

TWO_PI = 2.0 * math.pi
WORDS = ("LSL", "RSR", "LSR", "RSL", "RLR", "LRL")
SIGN = {"L": 1.0, "R": -1.0}


@dataclass(frozen=True)
class DubinsCandidate:
    word: str
    path: PiecewisePath
    arcs: tuple  # signed sweeps / lengths of the three pieces
    shortest: bool = False

    @property
    def length(self) -> float:
        return self.path.length

    @property
    def reduced(self) -> str:
        """Word with zero-length pieces dropped."""
        return "".join(c for c, v in zip(self.word, self.arcs) if abs(v) > 0) or "S"


def _wrap(x: float) -> float:
    x = math.fmod(x, TWO_PI)
    if x < 0:
        x += TWO_PI
    if x < 1e-10 or TWO_PI - x < 1e-10:
        x = 0.0
    return x


def _center(p, h, turn, R):
    return p + R * SIGN[turn] * np.array([-math.sin(h), math.cos(h)])


def _heading_on(c, q, turn):
    d = q - c
    return math.atan2(d[1], d[0]) + SIGN[turn] * math.pi / 2


def _arc(c, R, q, sweep):
    d = q - c
    return planar_arc(c, R, math.atan2(d[1], d[0]), sweep)


def _csc(word, p0, h0, p1, h1, R):
    t1, t2 = word[0], word[2]
    c1, c2 = _center(p0, h0, t1, R), _center(p1, h1, t2, R)
    v = c2 - c1
    D = float(np.linalg.norm(v))
    base = math.atan2(v[1], v[0])
    if t1 == t2:
        ls, hs = D, base
    else:
        if D < 2 * R:
            return None
        ls = math.sqrt(max(D * D - 4 * R * R, 0.0))
        if ls < 1e-12 * R:
            ls = 0.0
        hs = base + SIGN[t1] * math.atan2(2 * R, ls)
    a1 = _wrap(SIGN[t1] * (hs - h0))
    a2 = _wrap(SIGN[t2] * (h1 - hs))
    e = np.array([math.cos(hs), math.sin(hs)])
    q1 = c1 + R * SIGN[t1] * np.array([math.sin(hs), -math.cos(hs)])
    q2 = q1 + ls * e
    pieces = []
    if a1 > 0:
        pieces.append(_arc(c1, R, p0, SIGN[t1] * a1))
    if ls > 0:
        pieces.append(Segment(q1, q2))
    if a2 > 0:
        pieces.append(_arc(c2, R, q2, SIGN[t2] * a2))
    if not pieces:
        return None
    return pieces, (SIGN[t1] * a1 * R, ls, SIGN[t2] * a2 * R)


def _ccc(word, p0, h0, p1, h1, R):
    t1, tm = word[0], word[1]
    c1, c2 = _center(p0, h0, t1, R), _center(p1, h1, t1, R)
    v = c2 - c1
    D = float(np.linalg.norm(v))
    if D > 4 * R or D < 1e-14:
        return None
    base = math.atan2(v[1], v[0])
    phi = math.acos(min(1.0, D / (4 * R)))
    best = None
    for sgn in (1.0, -1.0):
        c3 = c1 + 2 * R * np.array([math.cos(base + sgn * phi), math.sin(base + sgn * phi)])
        q1 = 0.5 * (c1 + c3)
        q2 = 0.5 * (c3 + c2)
        hq1 = _heading_on(c1, q1, t1)
        hq2 = _heading_on(c2, q2, t1)
        a1 = _wrap(SIGN[t1] * (hq1 - h0))
        am = _wrap(SIGN[tm] * (hq2 - hq1))
        a3 = _wrap(SIGN[t1] * (h1 - hq2))
        if am <= math.pi:
            continue
        total = a1 + am + a3
        if best is None or total < best[0]:
            pieces = []
            if a1 > 0:
                pieces.append(_arc(c1, R, p0, SIGN[t1] * a1))
            pieces.append(_arc(c3, R, q1, SIGN[tm] * am))
            if a3 > 0:
                pieces.append(_arc(c2, R, q2, SIGN[t1] * a3))
            best = (total, pieces, (SIGN[t1] * a1 * R, SIGN[tm] * am * R, SIGN[t1] * a3 * R))
    if best is None:
        return None
    return best[1], best[2]


def make_dubins_candidates(a1, T1, a2, T2, R: float = 1.0) -> list:
    """All feasible words between the two planar poses, shortest first and flagged."""
    p0, p1 = np.asarray(a1, dtype=float), np.asarray(a2, dtype=float)
    T1, T2 = np.asarray(T1, dtype=float), np.asarray(T2, dtype=float)
    if any(x.shape != (2,) for x in (p0, p1, T1, T2)):
        raise DimensionError("Dubins candidates are planar")
    if not R > 0:
        raise ValueError("R must be positive")
    h0, h1 = math.atan2(T1[1], T1[0]), math.atan2(T2[1], T2[0])
    if np.linalg.norm(p1 - p0) <= 1e-12 * max(1.0, R) and abs(_wrap(h1 - h0)) <= 1e-12:
        raise InfeasibleError("the two poses coincide; the shortest path is empty")
    out = []
    for word in WORDS:
        built = (_csc if word[1] == "S" else _ccc)(word, p0, h0, p1, h1, R)
        if built is None:
            continue
        pieces, arcs = built
        try:
            path = PiecewisePath(tuple(pieces), word, tol=1e-8)
        except Exception:
            continue
        end, tend = path.end
        if np.linalg.norm(end - p1) > 1e-8 * max(1.0, R) or np.linalg.norm(tend - T2 / np.linalg.norm(T2)) > 1e-8:
            continue
        out.append(DubinsCandidate(word, path, arcs))
    if not out:
        raise InfeasibleError("no Dubins word connects the two poses")
    out.sort(key=lambda c: c.length)
    unique = []
    for cand in out:
        if not any(u.reduced == cand.reduced and abs(u.length - cand.length) < 1e-9 for u in unique):
            unique.append(cand)
    out = unique
    out[0] = DubinsCandidate(out[0].word, out[0].path, out[0].arcs, True)
    return out


def shortest_dubins(a1, T1, a2, T2, R: float = 1.0) -> DubinsCandidate:
    return make_dubins_candidates(a1, T1, a2, T2, R)[0]


def path_from_word(word: str, a1, h0: float, lengths, R: float = 1.0) -> PiecewisePath:
    """Path following ``word`` from pose ``(a1, h0)``; ``lengths`` are unsigned piece lengths."""
    p = np.asarray(a1, dtype=float)
    h = float(h0)
    pieces = []
    for c, ln in zip(word, lengths):
        if ln <= 0:
            continue
        if c == "S":
            q = p + ln * np.array([math.cos(h), math.sin(h)])
            pieces.append(Segment(p, q))
            p = q
        else:
            sweep = SIGN[c] * ln / R
            cen = _center(p, h, c, R)
            arc = _arc(cen, R, p, sweep)
            pieces.append(arc)
            p = arc.point(arc.length)
            h += sweep
    return PiecewisePath(tuple(pieces), word)


def random_csc_fixture(rng: np.random.Generator, R: float = 1.0, max_tries: int = 200) -> DubinsCandidate:
    """Seeded CSC path that is the shortest word for its own end poses.

    The net turning is kept inside (-pi, pi) so the path is in the homotopy
    class reached from the great-circle initial field.
    """
    for _ in range(max_tries):
        word = ("LSL", "RSR", "LSR", "RSL")[int(rng.integers(4))]
        a1, a3 = rng.uniform(0.3, 1.6, size=2) * R
        ls = rng.uniform(0.5, 2.5) * R
        h0 = rng.uniform(-math.pi, math.pi)
        turn = (SIGN[word[0]] * a1 + SIGN[word[2]] * a3) / R
        if not -math.pi < turn < math.pi:
            continue
        path = path_from_word(word, np.zeros(2), h0, (a1, ls, a3), R)
        end, tend = path.end
        start_t = np.array([math.cos(h0), math.sin(h0)])
        best = shortest_dubins(np.zeros(2), start_t, end, tend, R)
        if best.word == word and abs(best.length - path.length) < 1e-9 * R:
            return best
    raise InfeasibleError("no shortest CSC fixture found")
