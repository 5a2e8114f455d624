import re

import numpy as np
import pytest

from hilbend.errors import DimensionUnsupported, HilbendError
from hilbend.groups import reduced_words
from hilbend.render import render_svg
from hilbend.scene import parse_scene

KLEIN = parse_scene('{"schema": 1, "domain": {"kind": "ellipsoid"}}')
PT = parse_scene('{"schema": 1, "domain": {"kind": "ellipsoid"}, "group": "punctured-torus"}')


def bend_scene(t, depth, steps=None):
    render = {"t_steps": steps} if steps else {}
    return parse_scene(
        '{"schema": 1, "domain": {"kind": "bend", "t": %r, "depth": %d}, "render": %s}'
        % (t, depth, str(render).replace("'", '"'))
    )


def group_body(svg, gid):
    m = re.search(r'<g id="%s"[^>]*>\n(.*?)\n</g>' % gid, svg, re.S)
    return m.group(1) if m else None


def points(element):
    raw = re.search(r'points="([^"]*)"', element).group(1)
    return np.array([[float(c) for c in p.split(",")] for p in raw.split()])


# ---------- documents --------------------------------------------------------


def test_trivial_klein_is_one_boundary_polyline():
    svg = render_svg(KLEIN)
    assert svg.startswith("<?xml")
    assert svg.count("<polyline") == 1
    assert group_body(svg, "tiles") is None


def test_rendering_is_byte_identical():
    assert render_svg(KLEIN) == render_svg(KLEIN)
    assert render_svg(PT) == render_svg(PT)


def test_boundary_sits_on_the_unit_circle():
    P = points(group_body(render_svg(KLEIN), "boundary"))
    # canvas [0, 1000]^2 shows the chart square [-1.1, 1.1]^2, y flipped
    U = np.column_stack([P[:, 0] / 1000 * 2.2 - 1.1, 1.1 - P[:, 1] / 1000 * 2.2])
    assert np.abs(np.linalg.norm(U, axis=1) - 1.0).max() < 1e-5


# ---------- tilings ----------------------------------------------------------


def test_tiling_has_one_tile_per_word():
    tiles = group_body(render_svg(PT), "tiles")
    assert tiles.count("<polygon") == len(reduced_words(["a", "b"], 4)) == 161
    assert 'data-word="e"' in tiles


def test_fundamental_domain_has_sides():
    svg = render_svg(PT, "fundamental-domain")
    assert group_body(svg, "tiles").count("<polygon") == 1
    assert group_body(svg, "walls").count("<polyline") >= 4


# ---------- bent domains -----------------------------------------------------


def test_bent_boundary_turns_one_way():
    P = points(group_body(render_svg(bend_scene(0.3, 5)), "boundary"))[:-1]
    e = np.roll(P, -1, axis=0) - P
    turn = e[:, 0] * np.roll(e, -1, axis=0)[:, 1] - e[:, 1] * np.roll(e, -1, axis=0)[:, 0]
    turn /= np.linalg.norm(e, axis=1) * np.linalg.norm(np.roll(e, -1, axis=0), axis=1)
    assert turn.min() > -1e-6 or turn.max() < 1e-6


def test_bent_domain_progression():
    docs = render_svg(bend_scene(0.2, 3, [0.0, 0.1, 0.2, 0.3]), "bent-domain")
    assert len(docs) == 4
    assert all("<title>bent-domain t=" in d for d in docs)
    assert len(set(docs)) == 4


def test_bent_domain_needs_a_recipe():
    with pytest.raises(HilbendError):
        render_svg(KLEIN, "bent-domain")


# ---------- errors -----------------------------------------------------------


def test_three_dimensional_scene_is_unsupported():
    with pytest.raises(DimensionUnsupported):
        render_svg(parse_scene('{"schema": 1, "dimension": 3}'))


def test_unknown_rendering():
    with pytest.raises(HilbendError):
        render_svg(KLEIN, "mosaic")
