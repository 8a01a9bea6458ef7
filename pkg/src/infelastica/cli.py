"""Command-line front end.

Exit codes: 0 success, 1 usage or parse error, 2 infeasible data,
3 solver non-convergence, 4 verification failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import os
import sys

import numpy as np

from . import families
from .classifier import classify
from .dubins import make_dubins_candidates
from .errors import ElasticaError, InfeasibleError
from .geometry import TangentField, WeightFunction, integrate_tangent
from .io import (ConfigError, RunConfig, ensure_dir, load_config, parse_problem, parse_weight, read_curve_csv,
                 write_curve_csv, write_json, write_svg, write_table)
from .residuals import (ElasticaCertificate, alpha1_equation_residual, minimiser_certificate_check,
                        original_residual, rescaled_residual, system_residual)
from .shooting import conserved_B, shoot_boundary
from .solver import SolverOptions, continuation_solve, write_trace

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_NONCONVERGED, EXIT_VERIFY = 0, 1, 2, 3, 4
VERIFY_TOL = 1e-6

log = logging.getLogger("infelastica")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.out is not None:
        cfg.out = args.out
    if args.seed is not None:
        cfg.seed = args.seed
        cfg.solver = dataclasses.replace(cfg.solver, seed=args.seed)
    cfg.svg = cfg.svg or args.svg
    cfg.trace = cfg.trace or args.trace
    return cfg


def _section(cfg: RunConfig, name: str) -> dict:
    sec = cfg.sections.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"{name}: expected a table")
    return sec


def _alpha(cfg: RunConfig) -> WeightFunction:
    if cfg.problem is not None:
        return cfg.problem.alpha
    if "alpha" in cfg.sections:
        return parse_weight(cfg.sections["alpha"], "alpha")
    return WeightFunction.constant()


# ------------------------------------------------------------------ solve

def cmd_solve(args) -> int:
    cfg = _config(args)
    if cfg.problem is None:
        raise ConfigError("problem: missing (solve needs boundary data)")
    spec = cfg.problem
    opts = dataclasses.replace(cfg.solver, trace=cfg.trace)
    out = ensure_dir(cfg.out)
    res = continuation_solve(spec, cfg.mu, cfg.schedule, opts=opts)
    final = res.final
    rep = spec.reparametrization(final.tau_p.N)
    curve = integrate_tangent(final.tau_p, rep, spec.a1)
    write_curve_csv(os.path.join(out, "solution.csv"), curve, {"t": rep.t})
    summary = {
        "schedule": list(res.schedule),
        "k_p": res.k_values.tolist(),
        "k_inf": res.k_inf,
        "lambda": res.lambda_estimate.tolist(),
        "Lambda_p": final.Lambda_p.tolist(),
        "el_residual": [r.el_residual for r in res.results],
        "constraint_residual": [r.constraint_residual for r in res.results],
        "iterations": [r.iterations for r in res.results],
        "converged": res.converged,
        "monotone": res.monotone,
        "problem": spec.to_dict(),
    }
    write_json(os.path.join(out, "summary.json"), summary)
    if res.u_estimate is not None:
        mid = 0.5 * (rep.t[1:] + rep.t[:-1])
        cert = ElasticaCertificate(res.lambda_estimate, res.k_inf, res.u_estimate, mid, "system-u")
        write_json(os.path.join(out, "certificate.json"), cert.to_dict())
    report = classify(curve, spec.alpha)
    write_json(os.path.join(out, "report.json"), report.to_dict())
    if cfg.trace:
        write_trace([row for r in res.results for row in r.trace], os.path.join(out, "trace.csv"))
    if cfg.svg:
        line = None if report.line_point is None else (report.line_point, report.line_direction)
        write_svg(os.path.join(out, "solution.svg"), [("solution", curve.points)], line)
    print(f"k_p: {' '.join(f'{k:.8g}' for k in res.k_values)}")
    print(f"k: {res.k_inf:.10g}  converged: {res.converged}  monotone: {res.monotone}")
    print(report.summary())
    return EXIT_OK if res.converged else EXIT_NONCONVERGED


# ------------------------------------------------------------------ verify

def _tangents(curve):
    if curve.tangents is not None:
        return curve.tangents
    d = np.gradient(curve.points, curve.s, axis=0, edge_order=2)
    return d / np.linalg.norm(d, axis=1, keepdims=True)


def cmd_verify(args) -> int:
    cfg = _config(args)
    sec = _section(cfg, "verify")
    curve_path = args.curve or sec.get("curve")
    cert_path = args.certificate or sec.get("certificate")
    if not curve_path or not cert_path:
        raise ConfigError("verify: both curve and certificate are required")
    curve, extra = read_curve_csv(curve_path)
    try:
        with open(cert_path) as fh:
            cert = ElasticaCertificate.from_dict(json.load(fh))
    except (OSError, KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"certificate: {exc}") from None
    alpha = _alpha(cfg)
    rows = []
    if cert.frame == "original":
        if cert.grid.shape[0] != curve.N + 1 or np.abs(cert.grid - curve.s).max() > 1e-9 * max(1.0, curve.length):
            raise ConfigError("certificate grid does not match the curve nodes (frame mismatch)")
        r1, r2 = original_residual(curve, cert.witness, cert.lam, alpha, cert.k)
        rows += [("equation", r1, True), ("witness derivative", r2, True)]
        if cert.eta is not None and alpha.is_constant and alpha.values[0] == 1.0:
            rows.append(("unit-weight equation", alpha1_equation_residual(curve, cert.k, cert.lam, cert.eta), True))
        ok, margin = minimiser_certificate_check(cert, _tangents(curve), alpha)
        rows.append(("minimiser margin", margin, False))
    elif cert.frame in ("rescaled", "system-u"):
        if "t" not in extra:
            raise ConfigError("curve file has no t column; it cannot be paired with a reparametrized certificate")
        t = extra["t"]
        tau = TangentField(t, _tangents(curve))
        beta = alpha(curve.s)
        if cert.frame == "rescaled":
            if cert.grid.shape[0] != t.shape[0]:
                raise ConfigError("certificate grid does not match the curve nodes (frame mismatch)")
            r1, r2 = rescaled_residual(tau, cert.witness, cert.lam, beta, cert.k)
        else:
            if cert.grid.shape[0] not in (t.shape[0], t.shape[0] - 1):
                raise ConfigError("certificate grid does not match the curve nodes (frame mismatch)")
            r1, r2 = system_residual(tau, cert.witness, cert.lam, beta, cert.k)
        rows += [("equation", r1, True), ("witness relation", r2, True)]
    passed = all(v <= VERIFY_TOL for _, v, gate in rows if gate)
    print(f"{'check':<24}{'value':>14}  status")
    for name, v, gate in rows:
        status = ("pass" if v <= VERIFY_TOL else "fail") if gate else "info"
        print(f"{name:<24}{v:>14.3e}  {status}")
    print("verified" if passed else "not verified")
    return EXIT_OK if passed else EXIT_VERIFY


# ------------------------------------------------------------------ classify

def cmd_classify(args) -> int:
    cfg = _config(args)
    sec = _section(cfg, "classify")
    path = args.curve or sec.get("curve")
    if not path:
        raise ConfigError("classify: curve is required")
    curve, _ = read_curve_csv(path)
    report = classify(curve, _alpha(cfg))
    out = ensure_dir(cfg.out)
    write_json(os.path.join(out, "report.json"), report.to_dict())
    if cfg.svg:
        line = None if report.line_point is None else (report.line_point, report.line_direction)
        write_svg(os.path.join(out, "curve.svg"), [("curve", curve.points)], line)
    print(report.summary())
    return EXIT_OK


# ------------------------------------------------------------------ family

FAMILY_PARAMS = {
    "arc": {"r": 1.0, "l": 2 * math.pi / 3, "N": 2048},
    "helix": {"r": 1.0, "omega": math.pi / 4, "l": 6.0, "N": 2048},
    "semicircle-triple": {"N": 3072},
    "comparison": {"r": 0.5, "N": 3000},
    "blueprint": {"name": "arc-line-arc", "N": 2048},
}


def _parse_params(name: str, pairs, base: dict) -> dict:
    if name not in FAMILY_PARAMS:
        raise ConfigError(f"family: unknown family {name!r} (known: {', '.join(FAMILY_PARAMS)})")
    params = dict(FAMILY_PARAMS[name])
    params.update(base)
    for item in pairs:
        if "=" not in item:
            raise ConfigError(f"family: parameter {item!r} is not key=value")
        key, val = item.split("=", 1)
        params[key] = val
    for key, val in list(params.items()):
        if key in ("name", "file"):
            continue
        if key not in FAMILY_PARAMS[name]:
            raise ConfigError(f"family.{key}: unknown parameter for {name}")
        try:
            params[key] = int(val) if key == "N" else float(val)
        except (TypeError, ValueError):
            raise ConfigError(f"family.{key}: cannot convert {val!r}") from None
    return params


def cmd_family(args) -> int:
    cfg = _config(args)
    sec = dict(_section(cfg, "family"))
    name = args.name or sec.pop("name", None)
    if name is None:
        raise ConfigError("family: name is required")
    p = _parse_params(name, args.params, sec.get("params", {}))
    out = ensure_dir(cfg.out)
    cert = None
    problem = None
    if name == "arc":
        curve, cert = families.make_circular_arc(p["r"], p["l"], p["N"])
    elif name == "helix":
        curve, cert = families.make_helix(p["r"], p["omega"], p["l"], p["N"])
    elif name == "semicircle-triple":
        curve, problem = families.make_semicircle_triple(p["N"])
    elif name == "comparison":
        curve = families.make_comparison_curve(p["r"], p["N"])
    else:
        if "file" in p:
            with open(p["file"]) as fh:
                bp = families.TypeIBlueprint.from_dict(json.load(fh))
        elif p["name"] in families.NAMED_BLUEPRINTS:
            bp = families.NAMED_BLUEPRINTS[p["name"]]()
        else:
            raise ConfigError(f"family.name: unknown blueprint {p['name']!r}")
        curve = families.make_type_i_concat(bp, p["N"])
        write_json(os.path.join(out, "blueprint.json"), bp.to_dict())
    write_curve_csv(os.path.join(out, "curve.csv"), curve)
    if cert is not None:
        write_json(os.path.join(out, "certificate.json"), cert.to_dict())
    if problem is not None:
        write_json(os.path.join(out, "problem.json"), {"problem": problem.to_dict()})
    if cfg.svg:
        write_svg(os.path.join(out, "curve.svg"), [(name, curve.points)])
    print(f"{name}: {curve.N + 1} nodes, length {curve.length:.12g}")
    return EXIT_OK


# ------------------------------------------------------------------ dubins

def cmd_dubins(args) -> int:
    cfg = _config(args)
    sec = _section(cfg, "dubins")
    src = {**(cfg.problem.to_dict() if cfg.problem is not None else {}), **sec}
    for key in ("a1", "T1", "a2", "T2"):
        if key not in src:
            raise ConfigError(f"dubins.{key}: missing")
    R = float(args.radius if args.radius is not None else src.get("R", 1.0))
    cands = make_dubins_candidates(src["a1"], src["T1"], src["a2"], src["T2"], R)
    print(f"{'word':<6}{'reduced':<9}{'length':>16}  pieces")
    for c in cands:
        flag = "  *" if c.shortest else ""
        print(f"{c.word:<6}{c.reduced:<9}{c.length:>16.10f}  " + " ".join(f"{x:.6g}" for x in c.arcs) + flag)
    out = ensure_dir(cfg.out)
    table = [{"word": c.word, "reduced": c.reduced, "length": c.length, "pieces": list(c.arcs),
              "shortest": c.shortest} for c in cands]
    result = {"R": R, "candidates": table}
    best = cands[0]
    write_curve_csv(os.path.join(out, "shortest.csv"), best.path.sample(1024))
    if args.check or sec.get("check", False):
        T1 = np.asarray(src["T1"], dtype=float)
        T2 = np.asarray(src["T2"], dtype=float)
        spec = parse_problem({"ell": best.length, "a1": list(map(float, src["a1"])), "a2": list(map(float, src["a2"])),
                              "T1": list(map(float, T1)), "T2": list(map(float, T2))})
        res = continuation_solve(spec, cfg.mu, cfg.schedule, opts=cfg.solver)
        ratio = abs(res.final.k_p * R - 1.0)
        result["check"] = {"k": res.final.k_p, "deviation": ratio, "converged": res.converged}
        print(f"solver k at the shortest length: {res.final.k_p:.8g}  |k R - 1| = {ratio:.3e}")
    write_json(os.path.join(out, "dubins.json"), result)
    if cfg.svg:
        write_svg(os.path.join(out, "dubins.svg"), [(c.word, c.path.sample(512).points) for c in cands[:1]])
    return EXIT_OK


# ------------------------------------------------------------------ shoot

def cmd_shoot(args) -> int:
    cfg = _config(args)
    if cfg.problem is None:
        raise ConfigError("problem: missing (shoot needs boundary data)")
    sec = _section(cfg, "shoot")
    guess = None
    if all(k in sec for k in ("lambda", "f0", "tau1")):
        guess = (np.asarray(sec["lambda"], dtype=float), float(sec["f0"]), np.asarray(sec["tau1"], dtype=float))
    res = shoot_boundary(cfg.problem, guess=guess, k_guess=sec.get("k_guess"), starts=int(sec.get("starts", 32)),
                         seed=cfg.seed)
    out = ensure_dir(cfg.out)
    info = {"success": res.success, "defect": res.defect, "lambda": res.lam.tolist(), "f0": res.f0,
            "tau1": res.tau1.tolist(), "k": res.k, "starts_refined": res.starts_tried, "message": res.message}
    write_json(os.path.join(out, "shoot.json"), info)
    if res.trajectory is not None:
        tr = res.trajectory
        speed = np.linalg.norm(tr.tau_prime, axis=1)
        B = np.array([conserved_B(tr.lam, a, b, f) for a, b, f in zip(tr.tau, tr.tau_prime, tr.f)])
        n = tr.tau.shape[1]
        write_table(os.path.join(out, "trajectory.csv"),
                    ["t"] + [f"tau{i + 1}" for i in range(n)] + ["f", "speed", "B"],
                    [tr.t] + [tr.tau[:, i] for i in range(n)] + [tr.f, speed, B])
    print(f"success: {res.success}  defect: {res.defect:.3e}")
    print("lambda: " + " ".join(f"{x:.10g}" for x in res.lam) + f"  f0: {res.f0:.10g}  k: {res.k:.10g}")
    if res.message:
        print(res.message)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON or TOML run configuration")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, help="seed for initial fields and multi-start")
    common.add_argument("--trace", action="store_true", help="write per-iteration solver trace")
    common.add_argument("--svg", action="store_true", help="write an SVG plot")
    common.add_argument("-v", "--verbose", action="store_true")
    parser = _Parser(prog="infelastica", description="Curvature-minimising curves with prescribed boundary data.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    p = sub.add_parser("solve", parents=[common], help="p-continuation solve")
    p.set_defaults(func=cmd_solve)
    p = sub.add_parser("verify", parents=[common], help="check a curve against a certificate")
    p.add_argument("--curve")
    p.add_argument("--certificate")
    p.set_defaults(func=cmd_verify)
    p = sub.add_parser("classify", parents=[common], help="structure report for a curve")
    p.add_argument("--curve")
    p.set_defaults(func=cmd_classify)
    p = sub.add_parser("family", parents=[common], help="write an analytic fixture")
    p.add_argument("name", nargs="?", choices=sorted(FAMILY_PARAMS))
    p.add_argument("params", nargs="*", help="key=value parameters")
    p.set_defaults(func=cmd_family)
    p = sub.add_parser("dubins", parents=[common], help="bounded-curvature candidate table")
    p.add_argument("--radius", type=float)
    p.add_argument("--check", action="store_true", help="run the solver at the shortest length")
    p.set_defaults(func=cmd_dubins)
    p = sub.add_parser("shoot", parents=[common], help="shoot for helicoidal solutions (n = 3)")
    p.set_defaults(func=cmd_shoot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ElasticaError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
