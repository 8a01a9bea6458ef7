import json
import math
import os

import numpy as np
import pytest

from infelastica.cli import main
from infelastica.families import make_helix
from infelastica.io import (ConfigError, RunConfig, load_config, read_curve_csv, read_svg_points, write_curve_csv,
                            write_svg)

PROBLEM = {"ell": math.pi / 2, "a1": [1.0, 0.0], "a2": [0.0, 1.0], "T1": [0.0, 1.0], "T2": [-1.0, 0.0]}


def _write(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh)
    return str(path)


def test_config_errors_name_the_field(tmp_path):
    with pytest.raises(ConfigError, match="problem.ell"):
        RunConfig.from_mapping({"problem": {**PROBLEM, "ell": -1}})
    with pytest.raises(ConfigError, match="problem.T2"):
        RunConfig.from_mapping({"problem": {**PROBLEM, "T2": [1.0, 0, 0]}})
    with pytest.raises(ConfigError, match="solver.bogus"):
        RunConfig.from_mapping({"solver": {"bogus": 1}})
    with pytest.raises(ConfigError, match="solver.schedule"):
        RunConfig.from_mapping({"solver": {"schedule": [4, 8]}})
    with pytest.raises(ConfigError, match="problem.alpha"):
        RunConfig.from_mapping({"problem": {**PROBLEM, "alpha": -2.0}})
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")


def test_toml_config(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text('[problem]\nell = 1.5707963267948966\na1 = [1.0, 0.0]\na2 = [0.0, 1.0]\n'
                    'T1 = [0.0, 1.0]\nT2 = [-1.0, 0.0]\n[solver]\nN = 64\nmu = 0.5\n[output]\ndir = "x"\n')
    cfg = load_config(str(path))
    assert cfg.solver.N == 64 and cfg.mu == 0.5 and cfg.out == "x"
    assert cfg.problem.n == 2


def test_curve_csv_round_trip(tmp_path):
    curve, _ = make_helix(1.0, math.pi / 4, 2.0, N=32)
    path = tmp_path / "c.csv"
    write_curve_csv(path, curve, {"t": curve.s / 2})
    back, extra = read_curve_csv(path)
    assert np.array_equal(back.points, curve.points)
    assert np.array_equal(back.tangents, curve.tangents)
    assert np.array_equal(extra["t"], curve.s / 2)


def test_svg_round_trip(tmp_path):
    curve, _ = make_helix(1.0, math.pi / 4, 2.0, N=16)
    path = tmp_path / "c.svg"
    write_svg(path, [("helix", curve.points)])
    pts = read_svg_points(path)
    assert set(pts) == {"helix-0", "helix-1"}
    assert np.array_equal(pts["helix-0"], curve.points)


def test_cli_family_verify_and_exit_codes(tmp_path, capsys):
    out = str(tmp_path / "helix")
    assert main(["family", "helix", "l=3", "N=512", "--out", out]) == 0
    curve, cert = os.path.join(out, "curve.csv"), os.path.join(out, "certificate.json")
    assert main(["verify", "--curve", curve, "--certificate", cert]) == 0
    bad = json.load(open(cert))
    bad["lambda"] = [0.3, 0.0, 0.9539392014169456]
    assert main(["verify", "--curve", curve, "--certificate", _write(tmp_path / "bad.json", bad)]) == 4
    assert main(["family", "helix", "radius=2", "--out", out]) == 1
    with pytest.raises(SystemExit) as exc:
        main(["family", "nosuch"])
    assert exc.value.code == 1


def test_cli_family_is_deterministic(tmp_path):
    a, b = str(tmp_path / "a"), str(tmp_path / "b")
    main(["family", "blueprint", "name=alternating-loops", "N=512", "--out", a])
    main(["family", "blueprint", "name=alternating-loops", "N=512", "--out", b])
    for name in ("curve.csv", "blueprint.json"):
        assert open(os.path.join(a, name)).read() == open(os.path.join(b, name)).read()


def test_cli_classify(tmp_path, capsys):
    out = str(tmp_path / "t")
    main(["family", "semicircle-triple", "N=768", "--out", out])
    assert main(["classify", "--curve", os.path.join(out, "curve.csv"), "--out", out]) == 0
    report = json.load(open(os.path.join(out, "report.json")))
    assert report["verdict"] == "type-i"


def test_cli_solve_and_infeasible(tmp_path):
    cfg = _write(tmp_path / "run.json", {"problem": PROBLEM, "solver": {"N": 64, "schedule": [2, 4, 8]}})
    out = str(tmp_path / "solve")
    assert main(["solve", "--config", cfg, "--out", out, "--trace", "--svg"]) == 0
    summary = json.load(open(os.path.join(out, "summary.json")))
    assert summary
    for name in ("solution.csv", "certificate.json", "trace.csv", "solution.svg"):
        assert os.path.exists(os.path.join(out, name))
    far = _write(tmp_path / "far.json", {"problem": {**PROBLEM, "a2": [5.0, 5.0]}})
    assert main(["solve", "--config", far, "--out", out]) == 2
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    assert main(["solve", "--config", str(broken), "--out", out]) == 1


def test_cli_dubins(tmp_path, capsys):
    cfg = _write(tmp_path / "d.json", {"dubins": {"a1": [0, 0], "T1": [1, 0], "a2": [3, 0], "T2": [1, 0]}})
    assert main(["dubins", "--config", cfg, "--out", str(tmp_path / "d")]) == 0
    table = json.load(open(tmp_path / "d" / "dubins.json"))
    best = [c for c in table["candidates"] if c["shortest"]][0]
    assert best["reduced"] == "S" and best["length"] == pytest.approx(3.0)
