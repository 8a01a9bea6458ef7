"""Run configuration, CSV/JSON export and SVG plots."""
from __future__ import annotations

import csv
import json
import math
import os
import re
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ElasticaError
from .geometry import Curve, ProblemSpec, WeightFunction
from .solver import SolverOptions


class ConfigError(ElasticaError, ValueError):
    """Malformed configuration; the message names the offending field."""


SOLVER_KEYS = {"N": int, "tol_c": float, "tol_g": float, "tol_f": float, "max_iter": int, "max_outer": int,
               "rho0": float, "memory": int, "method": str, "floor": float, "seed": int}


@dataclass
class RunConfig:
    problem: Optional[ProblemSpec] = None
    mu: float = 0.0
    schedule: tuple = tuple(2.0 ** j for j in range(1, 11))
    solver: SolverOptions = field(default_factory=SolverOptions)
    out: str = "out"
    svg: bool = False
    trace: bool = False
    seed: int = 0
    sections: dict = field(default_factory=dict)

    @classmethod
    def from_mapping(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise ConfigError("config root must be a table")
        cfg = cls(sections={k: v for k, v in d.items() if k not in ("problem", "solver", "output")})
        if "problem" in d:
            cfg.problem = parse_problem(d["problem"])
        sol = d.get("solver", {})
        if not isinstance(sol, dict):
            raise ConfigError("solver: expected a table")
        opts = {}
        for key, val in sol.items():
            if key == "mu":
                cfg.mu = _num(val, "solver.mu")
                if cfg.mu < 0:
                    raise ConfigError("solver.mu: must be nonnegative")
            elif key == "schedule":
                if not isinstance(val, list) or not val:
                    raise ConfigError("solver.schedule: expected a nonempty list")
                cfg.schedule = tuple(_num(p, "solver.schedule") for p in val)
                if cfg.schedule[0] != 2 or any(b <= a for a, b in zip(cfg.schedule, cfg.schedule[1:])):
                    raise ConfigError("solver.schedule: must start at 2 and increase")
            elif key in SOLVER_KEYS:
                try:
                    opts[key] = SOLVER_KEYS[key](val)
                except (TypeError, ValueError):
                    raise ConfigError(f"solver.{key}: cannot convert {val!r}") from None
            else:
                raise ConfigError(f"solver.{key}: unknown field")
        try:
            cfg.solver = SolverOptions(**opts)
        except ValueError as exc:
            raise ConfigError(f"solver: {exc}") from None
        cfg.seed = cfg.solver.seed
        outp = d.get("output", {})
        if not isinstance(outp, dict):
            raise ConfigError("output: expected a table")
        cfg.out = str(outp.get("dir", cfg.out))
        cfg.svg = bool(outp.get("svg", False))
        cfg.trace = bool(outp.get("trace", False))
        return cfg


def _num(v, name) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{name}: expected a number, got {v!r}")
    if not math.isfinite(v):
        raise ConfigError(f"{name}: must be finite")
    return float(v)


def _vec(v, name) -> np.ndarray:
    if not isinstance(v, list) or not v:
        raise ConfigError(f"{name}: expected a list of numbers")
    return np.array([_num(x, name) for x in v])


def parse_weight(d, name="problem.alpha") -> WeightFunction:
    if isinstance(d, (int, float)) and not isinstance(d, bool):
        try:
            return WeightFunction.constant(_num(d, name))
        except ValueError as exc:
            raise ConfigError(f"{name}: {exc}") from None
    if not isinstance(d, dict):
        raise ConfigError(f"{name}: expected a number or a table")
    try:
        return WeightFunction(_vec(d.get("knots"), name + ".knots"), _vec(d.get("values"), name + ".values"),
                              d.get("interpolation", "constant"))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"{name}: {exc}") from None


def parse_problem(d) -> ProblemSpec:
    if not isinstance(d, dict):
        raise ConfigError("problem: expected a table")
    for key in ("ell", "a1", "a2", "T1", "T2"):
        if key not in d:
            raise ConfigError(f"problem.{key}: missing")
    ell = _num(d["ell"], "problem.ell")
    if ell <= 0:
        raise ConfigError("problem.ell: must be positive")
    vecs = {k: _vec(d[k], f"problem.{k}") for k in ("a1", "a2", "T1", "T2")}
    n = len(vecs["a1"])
    for k, v in vecs.items():
        if len(v) != n:
            raise ConfigError(f"problem.{k}: expected {n} components, got {len(v)}")
        if k.startswith("T") and np.linalg.norm(v) == 0:
            raise ConfigError(f"problem.{k}: must be nonzero")
    if n < 2:
        raise ConfigError("problem.a1: dimension must be at least 2")
    alpha = parse_weight(d["alpha"]) if "alpha" in d else WeightFunction.constant()
    T1 = vecs["T1"] / np.linalg.norm(vecs["T1"])
    T2 = vecs["T2"] / np.linalg.norm(vecs["T2"])
    return ProblemSpec(ell, vecs["a1"], vecs["a2"], T1, T2, alpha)


def load_config(path) -> RunConfig:
    """Read a JSON or TOML config (chosen by extension, JSON otherwise)."""
    try:
        if str(path).endswith(".toml"):
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
        else:
            with open(path) as fh:
                raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"config does not parse: {exc}") from None
    return RunConfig.from_mapping(raw)


# ------------------------------------------------------------------ CSV

def _fmt(x) -> str:
    return repr(float(x))


def write_table(path, header: Sequence[str], columns: Sequence[np.ndarray]) -> None:
    cols = [np.asarray(c, dtype=float) for c in columns]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*cols):
            w.writerow([_fmt(x) for x in row])


def read_table(path) -> tuple[list, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ConfigError(f"{path}: empty table")
    header = rows[0]
    try:
        data = np.array([[float(x) for x in r] for r in rows[1:] if r], dtype=float)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if data.ndim != 2 or data.shape[1] != len(header):
        raise ConfigError(f"{path}: rows do not match the header")
    return header, data


def write_curve_csv(path, curve: Curve, extra: Optional[dict] = None) -> None:
    """Columns ``s, x1..xn``, the tangents ``T1..Tn`` when known, then ``extra``."""
    n = curve.n
    header = ["s"] + [f"x{i + 1}" for i in range(n)]
    cols = [curve.s] + [curve.points[:, i] for i in range(n)]
    if curve.tangents is not None:
        header += [f"T{i + 1}" for i in range(n)]
        cols += [curve.tangents[:, i] for i in range(n)]
    for name, val in (extra or {}).items():
        header.append(name)
        cols.append(val)
    write_table(path, header, cols)


def read_curve_csv(path) -> tuple[Curve, dict]:
    header, data = read_table(path)
    if header[0] not in ("s", "t"):
        raise ConfigError(f"{path}: first column must be s or t")
    xs = [i for i, h in enumerate(header) if re.fullmatch(r"x\d+", h)]
    ts = [i for i, h in enumerate(header) if re.fullmatch(r"T\d+", h)]
    if len(xs) < 2:
        raise ConfigError(f"{path}: need at least two coordinate columns")
    tangents = data[:, ts] if len(ts) == len(xs) else None
    extra = {h: data[:, i] for i, h in enumerate(header) if i and i not in xs and i not in ts}
    return Curve(data[:, 0], data[:, xs], "arc-length", tangents), extra


def write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ------------------------------------------------------------------ SVG

def _project(points: np.ndarray, view: int) -> np.ndarray:
    if points.shape[1] == 2:
        return points
    axes = [(0, 1), (0, 2), (1, 2)][view]
    return points[:, list(axes)]


def write_svg(path, curves: Sequence[tuple], line: Optional[tuple] = None, size: int = 480) -> None:
    """Polylines for ``curves = [(name, points), ...]``.

    Planar data give one panel; higher dimensions give the (x1, x2) and
    (x1, x3) orthographic projections side by side.  Each polyline carries
    its untransformed coordinates in a ``data-points`` attribute so the
    values round-trip at full precision.
    """
    dim = curves[0][1].shape[1]
    views = [0] if dim == 2 else [0, 1]
    panels = []
    for vi, view in enumerate(views):
        proj = [_project(np.asarray(p, dtype=float), view) for _, p in curves]
        allp = np.vstack(proj)
        lo, hi = allp.min(axis=0), allp.max(axis=0)
        span = float(max((hi - lo).max(), 1e-12))
        scale = 0.9 * size / span
        off = 0.05 * size + vi * size

        def tr(q):
            return off + (q[:, 0] - lo[0]) * scale, size - (0.05 * size + (q[:, 1] - lo[1]) * scale)

        items = []
        if line is not None and view == 0:
            q, u = (np.asarray(x, dtype=float) for x in line)
            ends = np.array([q - 2 * span * u, q + 2 * span * u])
            X, Y = tr(_project(ends, view))
            items.append(f'<line x1="{X[0]:.3f}" y1="{Y[0]:.3f}" x2="{X[1]:.3f}" y2="{Y[1]:.3f}" '
                         'stroke="grey" stroke-dasharray="4 3"/>')
        for (name, pts), q in zip(curves, proj):
            X, Y = tr(q)
            disp = " ".join(f"{a:.3f},{b:.3f}" for a, b in zip(X, Y))
            data = ";".join(",".join(_fmt(v) for v in row) for row in np.asarray(pts, dtype=float))
            items.append(f'<polyline id="{name}-{view}" fill="none" stroke="black" points="{disp}" '
                         f'data-points="{data}"/>')
        panels.append(f'<g clip-path="none">{"".join(items)}</g>')
    width = size * len(views)
    with open(path, "w") as fh:
        fh.write(f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{size}" '
                 f'viewBox="0 0 {width} {size}">\n')
        for p in panels:
            fh.write(p + "\n")
        fh.write("</svg>\n")


def read_svg_points(path) -> dict:
    """``{polyline id: points}`` from the ``data-points`` attributes."""
    text = open(path).read()
    out = {}
    for m in re.finditer(r'<polyline id="([^"]+)"[^>]*data-points="([^"]*)"', text):
        rows = [[float(v) for v in r.split(",")] for r in m.group(2).split(";") if r]
        out[m.group(1)] = np.array(rows)
    return out


def ensure_dir(path) -> str:
    os.makedirs(path, exist_ok=True)
    return path
