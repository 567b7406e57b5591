"""Tests for scenario configuration parsing, validation, and round-tripping."""

import json
import math

import numpy as np
import pytest

from stemgrow.config import (
    SeedCurve,
    SimConfig,
    config_from_dict,
    config_to_dict,
    load_config,
)
from stemgrow.errors import ParseError, ValidationError


def base_doc():
    return {
        "label": "unit",
        "scene": {"obstacles": []},
        "law": {"variant": "gravitropic", "beta": 1.0, "gain": 1.0, "up": [0.0, 0.0, 1.0]},
        "seed_curve": {"type": "segment", "direction": [0.0, 0.0, 1.0], "length": 0.2},
        "numerics": {"dt": 0.1, "t0": 0.2, "horizon": 1.0},
        "output": {"stride": 1, "seed": 7},
    }


# ---------------------------------------------------------------------------
# defaults and round-trips
# ---------------------------------------------------------------------------


def test_minimal_config_fills_defaults():
    doc = base_doc()
    del doc["output"]
    del doc["label"]
    config = config_from_dict(doc)
    assert config.dt == 0.1
    assert config.eps_contact == pytest.approx(1e-3 * 0.1)
    assert config.eps_penetration == pytest.approx(0.05 * 0.1)
    assert config.kappa == 0.2
    assert config.correction_sweeps == 12
    assert config.correction_tol == 1e-8
    assert config.stride == 1
    assert config.rng_seed is None
    assert config.label == ""


def test_explicit_tolerances_survive():
    doc = base_doc()
    doc["numerics"]["eps_contact"] = 0.01
    doc["numerics"]["eps_penetration"] = 0.004
    doc["numerics"]["kappa"] = 0.5
    config = config_from_dict(doc)
    assert config.eps_contact == 0.01
    assert config.eps_penetration == 0.004
    assert config.kappa == 0.5


def test_cell_count_properties():
    config = config_from_dict(base_doc())
    assert config.n_seed_cells == 2
    assert config.n_total_cells == 10


def test_round_trip_is_stable():
    doc = base_doc()
    doc["scene"]["obstacles"] = [
        {"type": "sphere", "center": [0.0, 0.0, 5.0], "radius": 1.0},
        {"type": "half_space", "point": [0.0, 0.0, 10.0], "outward_normal": [0.0, 0.0, -1.0]},
        {"type": "cylinder", "axis_point": [8.0, 0.0, 0.0], "axis": [0.0, 1.0, 0.0], "radius": 1.0},
    ]
    config = config_from_dict(doc)
    dumped = config_to_dict(config)
    again = config_to_dict(config_from_dict(dumped))
    assert again == dumped
    # the dump is JSON-serializable as-is
    json.dumps(dumped)


def test_round_trip_custom_law():
    doc = base_doc()
    doc["law"] = {
        "variant": "custom",
        "beta": 0.5,
        "gain": 2.0,
        "up": [0.0, 0.0, 1.0],
        "ages": [0.0, 1.0, 2.0],
        "response": [1.0, 0.5, 0.0],
    }
    config = config_from_dict(doc)
    dumped = config_to_dict(config)
    assert dumped["law"]["ages"] == [0.0, 1.0, 2.0]
    assert dumped["law"]["response"] == [1.0, 0.5, 0.0]
    assert config_to_dict(config_from_dict(dumped)) == dumped


# ---------------------------------------------------------------------------
# file loading
# ---------------------------------------------------------------------------


def test_load_config_reads_json(tmp_path):
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(base_doc()))
    config = load_config(str(path))
    assert config.dt == 0.1
    assert config.label == "unit"


def test_load_config_replays_manifest(tmp_path):
    manifest = {"tool": "stemgrow", "version": "0.1.0", "config": base_doc()}
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps(manifest))
    config = load_config(str(path))
    assert config.horizon == 1.0
    assert config.rng_seed == 7


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ParseError, match="cannot read"):
        load_config(str(tmp_path / "absent.json"))


def test_load_config_rejects_invalid_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(ParseError, match="not valid JSON"):
        load_config(str(path))


def test_load_config_rejects_non_object(tmp_path):
    path = tmp_path / "list.json"
    path.write_text("[1, 2, 3]")
    with pytest.raises(ParseError, match="top level"):
        load_config(str(path))


# ---------------------------------------------------------------------------
# validation errors name the offending field
# ---------------------------------------------------------------------------


def test_zero_dt_rejected():
    doc = base_doc()
    doc["numerics"]["dt"] = 0.0
    with pytest.raises(ValidationError, match="numerics.dt"):
        config_from_dict(doc)


def test_horizon_must_exceed_t0():
    doc = base_doc()
    doc["numerics"]["horizon"] = 0.2
    with pytest.raises(ValidationError, match="horizon"):
        config_from_dict(doc)


def test_t0_must_be_whole_cells():
    doc = base_doc()
    doc["numerics"]["t0"] = 0.25
    doc["seed_curve"]["length"] = 0.25
    with pytest.raises(ValidationError, match="whole number of dt cells"):
        config_from_dict(doc)


def test_seed_length_must_match_t0():
    doc = base_doc()
    doc["seed_curve"]["length"] = 0.3
    with pytest.raises(ValidationError, match="seed_curve arclength"):
        config_from_dict(doc)


def test_missing_section_rejected():
    doc = base_doc()
    del doc["law"]
    with pytest.raises(ValidationError, match="missing section 'law'"):
        config_from_dict(doc)


def test_missing_required_numeric_rejected():
    doc = base_doc()
    del doc["numerics"]["horizon"]
    with pytest.raises(ValidationError, match="numerics.horizon is required"):
        config_from_dict(doc)


def test_unknown_top_level_key_rejected():
    doc = base_doc()
    doc["extra"] = 1
    with pytest.raises(ValidationError, match="unknown keys.*extra"):
        config_from_dict(doc)


def test_unknown_numerics_key_rejected():
    doc = base_doc()
    doc["numerics"]["dtau"] = 0.1
    with pytest.raises(ValidationError, match="numerics.*dtau"):
        config_from_dict(doc)


def test_unknown_obstacle_key_rejected():
    doc = base_doc()
    doc["scene"]["obstacles"] = [
        {"type": "sphere", "center": [0.0, 0.0, 5.0], "radius": 1.0, "colour": "red"}
    ]
    with pytest.raises(ValidationError, match=r"obstacles\[0\].*colour"):
        config_from_dict(doc)


def test_unknown_obstacle_type_rejected():
    doc = base_doc()
    doc["scene"]["obstacles"] = [{"type": "torus"}]
    with pytest.raises(ValidationError, match="torus"):
        config_from_dict(doc)


def test_non_numeric_dt_rejected():
    doc = base_doc()
    doc["numerics"]["dt"] = "fast"
    with pytest.raises(ValidationError, match="numerics.dt must be a float"):
        config_from_dict(doc)


def test_zero_stride_rejected():
    doc = base_doc()
    doc["output"]["stride"] = 0
    with pytest.raises(ValidationError, match="stride"):
        config_from_dict(doc)


def test_overlapping_obstacles_rejected():
    doc = base_doc()
    doc["scene"]["obstacles"] = [
        {"type": "sphere", "center": [0.0, 0.0, 5.0], "radius": 1.0},
        {"type": "sphere", "center": [0.0, 0.0, 6.5], "radius": 1.0},
    ]
    with pytest.raises(ValidationError):
        config_from_dict(doc)


# ---------------------------------------------------------------------------
# seed curve geometry
# ---------------------------------------------------------------------------


def test_segment_tangents_constant():
    seed = SeedCurve("segment", direction=[0.0, 3.0, 4.0], length=1.0)
    tangents = seed.tangents(np.array([0.0, 0.5, 1.0]))
    expected = np.array([0.0, 0.6, 0.8])
    assert np.allclose(tangents, expected[None, :], atol=1e-15)
    assert seed.arclength() == 1.0


def test_arc_tangent_turns_at_curvature_one_over_radius():
    seed = SeedCurve(
        "arc",
        initial_direction=[1.0, 0.0, 0.0],
        turn_axis=[0.0, 0.0, 1.0],
        radius=1.0,
        length=math.pi / 2,
    )
    s = np.array([0.0, math.pi / 4, math.pi / 2])
    tangents = seed.tangents(s)
    expected = np.stack([np.cos(s), np.sin(s), np.zeros(3)], axis=1)
    assert np.allclose(tangents, expected, atol=1e-12)


def test_arc_requires_orthogonal_axis():
    with pytest.raises(ValidationError, match="orthogonal"):
        SeedCurve(
            "arc",
            initial_direction=[1.0, 0.0, 0.0],
            turn_axis=[1.0, 0.0, 1.0],
            radius=1.0,
            length=1.0,
        )


def test_polyline_tangents_and_arclength():
    points = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 2.0, 0.0]]
    seed = SeedCurve("polyline", points=points)
    assert seed.arclength() == pytest.approx(3.0)
    tangents = seed.tangents(np.array([0.0, 0.5, 1.0, 2.0]))
    assert np.allclose(tangents[0], [1.0, 0.0, 0.0])
    assert np.allclose(tangents[1], [1.0, 0.0, 0.0])
    # at and beyond the first break the second chord's tangent applies
    assert np.allclose(tangents[2], [0.0, 1.0, 0.0])
    assert np.allclose(tangents[3], [0.0, 1.0, 0.0])


def test_polyline_rejects_zero_chord():
    points = [[0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]
    with pytest.raises(ValidationError, match="zero-length chord"):
        SeedCurve("polyline", points=points)


def test_bad_seed_kind_rejected():
    with pytest.raises(ValidationError, match="helix"):
        SeedCurve("helix", direction=[0.0, 0.0, 1.0], length=1.0)


def test_tilted_segment_rotates_direction():
    seed = SeedCurve("segment", direction=[0.0, 0.0, 1.0], length=0.2)
    tilted = seed.tilted(math.pi / 2, np.array([1.0, 0.0, 0.0]))
    assert np.allclose(tilted.direction, [0.0, -1.0, 0.0], atol=1e-15)
    assert tilted.length == 0.2


def test_tilted_polyline_rotates_points():
    seed = SeedCurve("polyline", points=[[0.0, 0.0, 0.0], [1.0, 2.0, 3.0]])
    tilted = seed.tilted(math.pi / 2, np.array([0.0, 0.0, 1.0]))
    assert np.allclose(tilted.points[1], [-2.0, 1.0, 3.0], atol=1e-14)
    assert tilted.arclength() == pytest.approx(seed.arclength())


def test_tilted_arc_preserves_orthogonality():
    seed = SeedCurve(
        "arc",
        initial_direction=[0.0, 0.0, 1.0],
        turn_axis=[1.0, 0.0, 0.0],
        radius=0.5,
        length=0.2,
    )
    tilted = seed.tilted(0.3, np.array([0.0, 1.0, 1.0]))
    assert abs(float(tilted.initial_direction @ tilted.turn_axis)) < 1e-12
    assert tilted.radius == 0.5
