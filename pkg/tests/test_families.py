import math

import numpy as np
import pytest

from infelastica.errors import DomainError, InvalidBlueprintError
from infelastica.families import (NAMED_BLUEPRINTS, TypeIBlueprint, blueprint_alternating, comparison_length,
                                  make_comparison_curve, make_helix, make_semicircle_triple, make_type_i_concat,
                                  make_type_i_path)
from infelastica.functionals import eval_Kalpha
from infelastica.geometry import WeightFunction


def test_semicircle_triple():
    curve, spec = make_semicircle_triple(3072)
    assert eval_Kalpha(curve, WeightFunction.constant()) == pytest.approx(3.0, rel=1e-4)
    assert np.allclose(curve.points[0], spec.a1) and np.allclose(curve.points[-1], spec.a2)
    assert curve.polyline_length() == pytest.approx(math.pi, rel=1e-6)
    with pytest.raises(ValueError):
        make_semicircle_triple(100)


def test_comparison_domain():
    for r in (0.2, 1.2):
        with pytest.raises(DomainError):
            comparison_length(r)
    with pytest.raises(DomainError):
        make_comparison_curve(1.0)


def test_comparison_curve_ends_match_triple():
    _, spec = make_semicircle_triple(300)
    curve = make_comparison_curve(0.6)
    assert np.allclose(curve.points[0], spec.a1, atol=1e-9)
    assert np.allclose(curve.points[-1], spec.a2, atol=1e-9)
    assert np.allclose(curve.tangents[0], spec.T1) and np.allclose(curve.tangents[-1], spec.T2)


def test_helix_geometry():
    curve, cert = make_helix(2.0, math.pi / 6, 4.0, N=1024)
    assert np.allclose(np.linalg.norm(curve.tangents, axis=1), 1.0)
    assert curve.polyline_length() == pytest.approx(4.0, rel=1e-5)
    assert cert.witness.min() > 0
    with pytest.raises(DomainError):
        make_helix(1.0, math.pi / 2, 1.0)


@pytest.mark.parametrize("name", sorted(NAMED_BLUEPRINTS))
def test_blueprints_build_and_round_trip(name):
    bp = NAMED_BLUEPRINTS[name]()
    path = make_type_i_path(bp)
    back = TypeIBlueprint.from_dict(bp.to_dict())
    assert make_type_i_path(back).length == pytest.approx(path.length)
    curve = make_type_i_concat(bp, N=512)
    assert curve.polyline_length() == pytest.approx(path.length, rel=1e-4)


def test_invalid_blueprints():
    bp = NAMED_BLUEPRINTS["arc-line-arc"]()
    d = bp.to_dict()
    d["pieces"] = [["spiral", 1.0]]
    with pytest.raises(InvalidBlueprintError):
        make_type_i_path(TypeIBlueprint.from_dict(d))
    d = bp.to_dict()
    d["lambda"] = [0.0, 1.0]
    with pytest.raises(InvalidBlueprintError):
        make_type_i_path(TypeIBlueprint.from_dict(d))
    d = bp.to_dict()
    d["line_point"] = [0.0, 0.5]
    with pytest.raises(InvalidBlueprintError):
        make_type_i_path(TypeIBlueprint.from_dict(d))
    with pytest.raises(InvalidBlueprintError):
        TypeIBlueprint.from_dict({"start": [0, 0]})
    with pytest.raises(InvalidBlueprintError):
        blueprint_alternating(junction_heading=0.5)
