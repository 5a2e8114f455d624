import json
from pathlib import Path

import numpy as np
import pytest

from hilbend.convex import Polytope, QuadricDomain
from hilbend.errors import SchemaError
from hilbend.scene import build_domain, load_scene, parse_scene, serialize

SCENES = Path(__file__).resolve().parent.parent / "scenes"
MINIMAL = '{"schema": 1, "dimension": 2, "domain": {"kind": "ellipsoid"}}'


# ---------- defaults ---------------------------------------------------------


def test_minimal_scene_fills_defaults():
    s = parse_scene(MINIMAL)
    assert s.group == "trivial"
    assert s.domain["form"] == np.diag([1.0, 1.0, -1.0]).tolist()
    assert s.probe.samples == 10000 and s.probe.seed == 0
    assert s.render.viewport == [-1.1, 1.1, -1.1, 1.1]
    assert s.render.colors["boundary"] == "#000000"


def test_partial_sections_merge_with_defaults():
    s = parse_scene('{"schema": 1, "probe": {"seed": 7}, "render": {"colors": {"tile": "#00ff00"}}}')
    assert s.probe.seed == 7 and s.probe.samples == 10000
    assert s.render.colors["tile"] == "#00ff00"
    assert s.render.colors["wall"] == "#cc0000"


def test_with_seed_leaves_the_original_alone():
    s = parse_scene(MINIMAL)
    assert s.with_seed(11).probe.seed == 11
    assert s.probe.seed == 0


# ---------- validation -------------------------------------------------------


def test_positive_definite_form_is_rejected_with_location():
    text = '{\n  "schema": 1,\n  "dimension": 2,\n  "domain": {\n    "kind": "ellipsoid",\n    "form": [[1, 0, 0], [0, 1, 0], [0, 0, 1]]\n  }\n}'
    with pytest.raises(SchemaError) as exc:
        parse_scene(text)
    assert exc.value.location == "domain.form"
    assert exc.value.line == 6
    assert "domain.form" in str(exc.value)


def test_unknown_field_is_named():
    with pytest.raises(SchemaError) as exc:
        parse_scene('{"schema": 1, "probe": {"sampels": 10}}')
    assert exc.value.location == "probe.sampels"


def test_wrong_arity_wall():
    with pytest.raises(SchemaError) as exc:
        parse_scene('{"schema": 1, "domain": {"kind": "polytope", "walls": [[1, 0, 1], [-1, 0], [0, 1, 1], [0, -1, 1]]}}')
    assert exc.value.location == "domain.walls"


@pytest.mark.parametrize(
    "text",
    [
        '{"schema": 2}',
        '{"schema": 1, "dimension": 0}',
        '{"schema": 1, "domain": {"kind": "torus"}}',
        '{"schema": 1, "group": "free"}',
        '{"schema": 1, "dimension": 3, "domain": {"kind": "bend"}}',
        '{"schema": 1, "render": {"viewport": [1, -1, 0, 1]}}',
        '{"schema": 1, "render": {"colors": {"tile": "blue"}}}',
        '{"schema": 1, "probe": {"samples": 0}}',
        '{"schema": 1, "probe": {"geom_tol": -1}}',
        '{"schema": 1, "domain": {"kind": "ellipsoid", "form": [[1, 2, 0], [0, 1, 0], [0, 0, -1]]}}',
    ],
)
def test_invalid_documents(text):
    with pytest.raises(SchemaError):
        parse_scene(text)


def test_broken_json_reports_its_line():
    with pytest.raises(SchemaError) as exc:
        parse_scene('{\n  "schema": 1,\n  "dimension": \n}')
    assert exc.value.line == 4


# ---------- round trip -------------------------------------------------------


@pytest.mark.parametrize("path", sorted(SCENES.glob("*.json")), ids=lambda p: p.stem)
def test_serialization_is_idempotent(path):
    once = serialize(load_scene(path))
    assert serialize(parse_scene(once)) == once
    assert json.loads(once)["schema"] == 1


# ---------- building ---------------------------------------------------------


def test_build_kinds():
    dom, rep = build_domain(load_scene(SCENES / "klein.json"))
    assert isinstance(dom, QuadricDomain) and rep is None
    dom, _ = build_domain(load_scene(SCENES / "square.json"))
    assert isinstance(dom, Polytope)
    _, rep = build_domain(load_scene(SCENES / "punctured-torus.json"))
    assert sorted(rep.generators) == ["a", "b"]
