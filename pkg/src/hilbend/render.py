"""Deterministic SVG output for planar scenes.

The viewport ``[xmin, xmax] x [ymin, ymax]`` of the chart maps onto a
1000 x 1000 canvas with the y axis pointing up; every coordinate is
printed with six decimals so documents compare byte for byte.
"""

from __future__ import annotations

import numpy as np

from hilbend.errors import DimensionUnsupported, HilbendError
from hilbend.projcore import AffineChart, ProjHyperplane, canonical

CANVAS = 1000
FIT_MARGIN = 1.0
DIRICHLET_CENTER = (0.05, 0.03)
TILE_SAMPLES = 64


class _Canvas:
    def __init__(self, viewport, colors, strokes):
        self.x0, self.x1, self.y0, self.y1 = viewport
        self.colors = colors
        self.strokes = strokes
        self.groups = []

    def _fmt(self, P):
        X = (P[:, 0] - self.x0) / (self.x1 - self.x0) * CANVAS
        Y = (self.y1 - P[:, 1]) / (self.y1 - self.y0) * CANVAS
        return " ".join(f"{x:.6f},{y:.6f}" for x, y in zip(X, Y))

    def group(self, gid, style, elements):
        color = self.colors[style]
        width = self.strokes[style]
        body = "\n".join(elements)
        self.groups.append(
            f'<g id="{gid}" fill="none" stroke="{color}" stroke-width="{width:.6f}" stroke-linejoin="round">\n{body}\n</g>'
        )

    def polyline(self, P, closed=False, **attrs):
        if closed:
            P = np.vstack([P, P[:1]])
        extra = "".join(f' data-{k}="{v}"' for k, v in sorted(attrs.items()))
        return f'<polyline{extra} points="{self._fmt(P)}"/>'

    def polygon(self, P, **attrs):
        extra = "".join(f' data-{k}="{v}"' for k, v in sorted(attrs.items()))
        return f'<polygon{extra} points="{self._fmt(P)}"/>'

    def document(self, title):
        bg = self.colors["background"]
        head = (
            '<?xml version="1.0" encoding="UTF-8"?>\n'
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{CANVAS}" height="{CANVAS}" viewBox="0 0 {CANVAS} {CANVAS}">\n'
            f"<title>{title}</title>\n"
            f'<rect x="0" y="0" width="{CANVAS}" height="{CANVAS}" fill="{bg}"/>\n'
        )
        return head + "\n".join(self.groups) + "\n</svg>\n"


# -- geometry helpers -----------------------------------------------------------


def boundary_polyline(domain, chart: AffineChart, count):
    """Boundary points on ``count`` equally spaced chart rays from the
    interior point, as chart coordinates."""
    c = domain.interior_point()
    cu = chart.project_many(c[None, :])[0]
    ang = 2 * np.pi * np.arange(count) / count
    V = chart.embed_direction_many(np.stack([np.cos(ang), np.sin(ang)], axis=1))
    C = np.broadcast_to(chart.embed_many(cu[None, :])[0], V.shape)
    B = domain.boundary_points(C, V)
    return chart.project_many(B)


def fit_chart(domain, chart: AffineChart, viewport):
    """Chart rescaled so the domain's bounding box fits the viewport, or
    ``chart`` itself when it already does."""
    lo, hi = domain.bounding_box(chart)
    vx0, vx1, vy0, vy1 = viewport
    if lo[0] >= vx0 and hi[0] <= vx1 and lo[1] >= vy0 and hi[1] <= vy1:
        return chart
    center = 0.5 * (lo + hi)
    half = 0.5 * np.max(hi - lo) / FIT_MARGIN
    vc = np.array([0.5 * (vx0 + vx1), 0.5 * (vy0 + vy1)])
    vh = 0.5 * min(vx1 - vx0, vy1 - vy0)
    phi = chart.covector
    frame = (chart.frame - np.outer(center, phi)) * (vh / half) + np.outer(vc, phi)
    # the hyperplane canonicalizes phi; carry its sign into the frame
    sign = np.sign(canonical(phi) @ phi)
    return AffineChart(ProjHyperplane(phi), frame * sign)


def _chart_for(scene, domain):
    if scene.render.chart is not None:
        chart = AffineChart.from_covector(np.array(scene.render.chart))
    else:
        chart = domain.chart
    return fit_chart(domain, chart, scene.render.viewport)


def _canvas(scene):
    r = scene.render
    return _Canvas(r.viewport, r.colors, r.stroke_widths)


def _fundamental_domain(scene, domain, rep):
    """Dirichlet domain of the base representation, plus the map taking base
    points into ``domain`` (the developing map for bent domains)."""
    from hilbend.groups import dirichlet_domain

    base = getattr(domain, "base", domain)
    rep0 = getattr(domain, "rep0", rep)
    x0 = base.chart.embed_many(np.array([DIRICHLET_CENTER]))[0]
    F = dirichlet_domain(rep0, base, x0, scene.render.word_length)
    dev = domain.dev if hasattr(domain, "dev") else (lambda Y: Y)
    return F, rep0, dev


def _outline(F, count):
    return boundary_polyline(F, F.base.chart, count)


def _wall_segments(domain, count=16):
    """Chart-independent lifts of sampled points on every bending wall, as
    seen in the image."""
    out = []
    base = domain.base
    for w in range(len(domain.K)):
        k = domain.K[w]
        basis = np.linalg.svd(k[None, :])[2][1:]
        m = domain.wall_points()[w]
        d = basis[0] - (basis[0] @ base.phi) / (m @ base.phi) * m
        s_plus = base.exit_param(m[None, :], d[None, :])[0]
        s_minus = base.exit_param(m[None, :], -d[None, :])[0]
        s = np.linspace(-s_minus, s_plus, count)
        Y = m + s[:, None] * d
        out.append((domain.labels[w], Y @ domain.T[domain.parent[w] + 1].T))
    return out


# -- documents --------------------------------------------------------------------


def render_svg(scene, what="tiling"):
    """SVG text for ``what`` in {tiling, fundamental-domain}; for
    ``bent-domain`` a list with one document per ``render.t_steps`` entry."""
    from hilbend.scene import build_domain

    if scene.dimension != 2:
        raise DimensionUnsupported("rendering needs a two-dimensional scene")
    if what == "bent-domain":
        return _render_bent_steps(scene)
    if what not in ("tiling", "fundamental-domain"):
        raise HilbendError(f"unknown rendering '{what}'")
    domain, rep = build_domain(scene)
    chart = _chart_for(scene, domain)
    cv = _canvas(scene)
    n = scene.render.boundary_samples
    has_group = rep is not None
    if has_group:
        F, rep0, dev = _fundamental_domain(scene, domain, rep)
        outline = _outline(F, max(TILE_SAMPLES, n // 4))
        lift = F.base.chart.embed_many(outline)
        if what == "tiling":
            from hilbend.groups import reduced_words

            tiles = []
            for w in reduced_words(rep0.generators, scene.render.word_length):
                P = chart.project_many(dev(lift @ rep0.evaluate(w).T))
                tiles.append(cv.polygon(P, word=str(w) or "e"))
            cv.group("tiles", "tile", tiles)
        else:
            P = chart.project_many(dev(lift))
            cv.group("tiles", "tile", [cv.polygon(P, word="e")])
            sides = []
            for word, k in F.walls:
                sides.append(cv.polyline(chart.project_many(dev(_side_points(F, k))), word=str(word)))
            cv.group("walls", "wall", sides)
    if what == "tiling" and hasattr(domain, "K"):
        segs = [cv.polyline(chart.project_many(Y), word=str(lab)) for lab, Y in _wall_segments(domain)]
        cv.group("walls", "wall", segs)
    cv.group("boundary", "boundary", [cv.polyline(boundary_polyline(domain, chart, n), closed=True)])
    return cv.document(what)


def _side_points(F, k, count=32):
    """Sample of the side of the Dirichlet polygon ``F`` on the line ``k``."""
    out = _outline(F, 4096)
    lift = F.base.chart.embed_many(out)
    vals = np.abs(lift @ k) / np.linalg.norm(k) / np.linalg.norm(lift, axis=1)
    on = lift[vals < 1e-9]
    if len(on) < 2:
        return lift[np.argsort(vals)[:2]]
    # order along the side
    d = on[-1] - on[0]
    return on[np.argsort(on @ d)]


def _render_bent_steps(scene):
    from hilbend.bend import punctured_torus_bend

    if scene.domain["kind"] != "bend":
        raise HilbendError("bent-domain rendering needs a bend recipe")
    depth = scene.domain["depth"]
    doms = [punctured_torus_bend(t, depth)[0] for t in scene.render.t_steps]
    # one chart for the whole progression, fitted to the last stage
    if scene.render.chart is not None:
        chart = AffineChart.from_covector(np.array(scene.render.chart))
    else:
        chart = doms[-1].chart
    chart = fit_chart(doms[-1], chart, scene.render.viewport)
    docs = []
    for t, dom in zip(scene.render.t_steps, doms):
        cv = _canvas(scene)
        segs = [cv.polyline(chart.project_many(Y), word=str(lab)) for lab, Y in _wall_segments(dom)]
        cv.group("walls", "wall", segs)
        bd = boundary_polyline(dom, chart, scene.render.boundary_samples)
        cv.group("boundary", "boundary", [cv.polyline(bd, closed=True)])
        docs.append(cv.document(f"bent-domain t={t:.6f}"))
    return docs
