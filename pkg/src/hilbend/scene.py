"""Scene documents: a JSON description of a domain, an optional group, and
probe and render settings.

Parsing fills in defaults and validates everything up front, so a Scene
always serializes to the same canonical text.
"""

from __future__ import annotations

import json
import re
from dataclasses import asdict, dataclass, field

import numpy as np

from hilbend.errors import SchemaError

SCHEMA_VERSION = 1
DOMAIN_KINDS = ("ellipsoid", "polytope", "bend")
GROUPS = ("trivial", "punctured-torus")
BASE_REPS = ("punctured-torus",)

DEFAULT_COLORS = {"background": "#ffffff", "boundary": "#000000", "tile": "#3465a4", "wall": "#cc0000"}
DEFAULT_STROKES = {"boundary": 2.0, "tile": 0.5, "wall": 1.0}


@dataclass
class ProbeSettings:
    samples: int = 10000
    seed: int = 0
    geom_tol: float = 1e-9
    linalg_tol: float = 1e-12


@dataclass
class RenderSettings:
    chart: list | None = None
    viewport: list = field(default_factory=lambda: [-1.1, 1.1, -1.1, 1.1])
    colors: dict = field(default_factory=lambda: dict(DEFAULT_COLORS))
    stroke_widths: dict = field(default_factory=lambda: dict(DEFAULT_STROKES))
    word_length: int = 4
    boundary_samples: int = 720
    t_steps: list = field(default_factory=lambda: [0.0, 0.1, 0.2, 0.3])


@dataclass
class Scene:
    dimension: int
    domain: dict
    group: str = "trivial"
    probe: ProbeSettings = field(default_factory=ProbeSettings)
    render: RenderSettings = field(default_factory=RenderSettings)

    def to_dict(self):
        return {
            "schema": SCHEMA_VERSION,
            "dimension": self.dimension,
            "domain": self.domain,
            "group": self.group,
            "probe": asdict(self.probe),
            "render": asdict(self.render),
        }

    def with_seed(self, seed):
        probe = ProbeSettings(**{**asdict(self.probe), "seed": int(seed)})
        return Scene(self.dimension, self.domain, self.group, probe, self.render)


def serialize(scene: Scene) -> str:
    """Canonical text: sorted keys, two-space indent, trailing newline."""
    return json.dumps(scene.to_dict(), sort_keys=True, indent=2) + "\n"


def load_scene(path) -> Scene:
    with open(path, encoding="utf-8") as fh:
        return parse_scene(fh.read())


# -- parsing -----------------------------------------------------------------


class _Ctx:
    def __init__(self, text):
        self.text = text

    def line_of(self, path):
        """Best-effort line of a dotted field path: each key is searched after
        the position of its parent."""
        pos = 0
        for key in path.split("."):
            if key.isdigit():
                continue
            m = re.compile(r'"%s"\s*:' % re.escape(key)).search(self.text, pos)
            if m is None:
                return None
            pos = m.start()
        return self.text.count("\n", 0, pos) + 1

    def fail(self, message, path):
        raise SchemaError(message, path, self.line_of(path))


def parse_scene(text: str) -> Scene:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc.msg}", None, exc.lineno) from None
    ctx = _Ctx(text)
    if not isinstance(raw, dict):
        raise SchemaError("scene must be a JSON object", None, 1)
    _no_unknown(ctx, raw, {"schema", "dimension", "domain", "group", "probe", "render"}, "")
    if raw.get("schema") != SCHEMA_VERSION:
        ctx.fail(f"schema must be {SCHEMA_VERSION}", "schema")
    n = raw.get("dimension", 2)
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        ctx.fail("dimension must be a positive integer", "dimension")
    domain = _parse_domain(ctx, raw.get("domain", {"kind": "ellipsoid"}), n)
    group = raw.get("group", "trivial")
    if group not in GROUPS:
        ctx.fail(f"group must be one of {', '.join(GROUPS)}", "group")
    if group != "trivial" and (domain["kind"] != "ellipsoid" or n != 2):
        ctx.fail("a group needs a two-dimensional ellipsoid domain", "group")
    probe = _parse_section(ctx, raw.get("probe", {}), ProbeSettings(), "probe")
    render = _parse_section(ctx, raw.get("render", {}), RenderSettings(), "render")
    _check_probe(ctx, probe)
    _check_render(ctx, render, n)
    return Scene(n, domain, group, probe, render)


def _no_unknown(ctx, obj, allowed, prefix):
    for key in obj:
        if key not in allowed:
            ctx.fail(f"unknown field '{key}'", f"{prefix}{key}")


def _number(ctx, v, path):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not np.isfinite(v):
        ctx.fail("expected a finite number", path)
    return float(v)


def _vector(ctx, v, size, path):
    if not isinstance(v, list) or len(v) != size:
        ctx.fail(f"expected a list of {size} numbers", path)
    return [_number(ctx, x, f"{path}.{i}") for i, x in enumerate(v)]


def _parse_domain(ctx, d, n):
    if not isinstance(d, dict):
        ctx.fail("domain must be an object", "domain")
    kind = d.get("kind")
    if kind not in DOMAIN_KINDS:
        ctx.fail(f"domain.kind must be one of {', '.join(DOMAIN_KINDS)}", "domain.kind")
    if kind == "ellipsoid":
        _no_unknown(ctx, d, {"kind", "form", "orientation"}, "domain.")
        form = d.get("form", (np.diag([1.0] * n + [-1.0])).tolist())
        if not isinstance(form, list) or len(form) != n + 1:
            ctx.fail(f"form must be a {n + 1}x{n + 1} matrix", "domain.form")
        rows = [_vector(ctx, r, n + 1, "domain.form") for r in form]
        Q = np.array(rows)
        if np.abs(Q - Q.T).max() > 1e-12 * max(1.0, np.abs(Q).max()):
            ctx.fail("form must be symmetric", "domain.form")
        ev = np.linalg.eigvalsh(Q)
        tol = 1e-12 * np.abs(ev).max()
        if np.sum(ev < -tol) != 1 or np.sum(ev > tol) != n:
            ctx.fail(f"form must have signature ({n},1)", "domain.form")
        out = {"kind": kind, "form": rows}
        if "orientation" in d:
            out["orientation"] = _vector(ctx, d["orientation"], n + 1, "domain.orientation")
        return out
    if kind == "polytope":
        _no_unknown(ctx, d, {"kind", "walls", "phi"}, "domain.")
        walls = d.get("walls")
        if not isinstance(walls, list) or len(walls) < n + 1:
            ctx.fail(f"walls must list at least {n + 1} covectors", "domain.walls")
        out = {"kind": kind, "walls": [_vector(ctx, w, n + 1, "domain.walls") for w in walls]}
        if "phi" in d:
            out["phi"] = _vector(ctx, d["phi"], n + 1, "domain.phi")
        return out
    _no_unknown(ctx, d, {"kind", "base_rep", "t", "depth"}, "domain.")
    if n != 2:
        ctx.fail("bend recipes are two-dimensional", "dimension")
    rep = d.get("base_rep", "punctured-torus")
    if rep not in BASE_REPS:
        ctx.fail(f"base_rep must be one of {', '.join(BASE_REPS)}", "domain.base_rep")
    depth = d.get("depth", 6)
    if not isinstance(depth, int) or isinstance(depth, bool) or depth < 0:
        ctx.fail("depth must be a non-negative integer", "domain.depth")
    return {"kind": kind, "base_rep": rep, "t": _number(ctx, d.get("t", 0.0), "domain.t"), "depth": depth}


def _parse_section(ctx, d, defaults, name):
    if not isinstance(d, dict):
        ctx.fail(f"{name} must be an object", name)
    known = asdict(defaults)
    _no_unknown(ctx, d, set(known), f"{name}.")
    values = dict(known)
    values.update(d)
    return type(defaults)(**values)


def _check_probe(ctx, p):
    for key in ("samples", "seed"):
        v = getattr(p, key)
        if not isinstance(v, int) or isinstance(v, bool) or v < (1 if key == "samples" else 0):
            ctx.fail(f"{key} must be a {'positive' if key == 'samples' else 'non-negative'} integer", f"probe.{key}")
    for key in ("geom_tol", "linalg_tol"):
        v = _number(ctx, getattr(p, key), f"probe.{key}")
        if v <= 0:
            ctx.fail(f"{key} must be positive", f"probe.{key}")
        setattr(p, key, v)


def _check_render(ctx, r, n):
    if r.chart is not None:
        r.chart = _vector(ctx, r.chart, n + 1, "render.chart")
    r.viewport = _vector(ctx, r.viewport, 4, "render.viewport")
    if r.viewport[0] >= r.viewport[1] or r.viewport[2] >= r.viewport[3]:
        ctx.fail("viewport must be [xmin, xmax, ymin, ymax] with min < max", "render.viewport")
    for key, defaults in (("colors", DEFAULT_COLORS), ("stroke_widths", DEFAULT_STROKES)):
        d = getattr(r, key)
        if not isinstance(d, dict):
            ctx.fail(f"{key} must be an object", f"render.{key}")
        _no_unknown(ctx, d, set(defaults), f"render.{key}.")
        merged = dict(defaults)
        merged.update(d)
        for k, v in merged.items():
            if key == "colors":
                if not isinstance(v, str) or not re.fullmatch(r"#[0-9a-fA-F]{6}", v):
                    ctx.fail("colors are #rrggbb strings", f"render.{key}.{k}")
            elif _number(ctx, v, f"render.{key}.{k}") < 0:
                ctx.fail("stroke widths are non-negative", f"render.{key}.{k}")
            else:
                merged[k] = float(v)
        setattr(r, key, merged)
    for key in ("word_length", "boundary_samples"):
        v = getattr(r, key)
        if not isinstance(v, int) or isinstance(v, bool) or v < (0 if key == "word_length" else 8):
            ctx.fail(f"{key} is out of range", f"render.{key}")
    if not isinstance(r.t_steps, list) or not r.t_steps:
        ctx.fail("t_steps must be a non-empty list", "render.t_steps")
    r.t_steps = [_number(ctx, t, f"render.t_steps.{i}") for i, t in enumerate(r.t_steps)]


# -- building ------------------------------------------------------------------


def build_domain(scene: Scene):
    """``(domain, rep)`` for the scene; ``rep`` is ``None`` for the trivial
    group and the deformed representation for bend recipes."""
    from hilbend.convex import Polytope, QuadricDomain

    d = scene.domain
    if d["kind"] == "ellipsoid":
        orient = np.array(d["orientation"]) if "orientation" in d else None
        dom = QuadricDomain(np.array(d["form"]), orient)
        rep = None
        if scene.group == "punctured-torus":
            from hilbend.groups import punctured_torus_rep

            rep = punctured_torus_rep()
        return dom, rep
    if d["kind"] == "polytope":
        phi = np.array(d["phi"]) if "phi" in d else None
        return Polytope(np.array(d["walls"]), phi), None
    from hilbend.bend import punctured_torus_bend

    return punctured_torus_bend(d["t"], d["depth"])
