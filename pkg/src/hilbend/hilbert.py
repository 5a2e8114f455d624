"""Hilbert distance, Finsler norm, Busemann volume and slim-triangle estimates.

All routines take chart-normalized lifts internally: along a line
``X + s V`` with ``phi . X = 1`` and ``phi . V = 0`` the chart coordinates
are affine in ``s``, so cross ratios can be read off the exit parameters
directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from hilbend.convex import ConvexDomain, Position, sphere_directions
from hilbend.errors import GeometryError, NotInterior, RegionNotContained, ZeroVector
from hilbend.projcore import AffineChart, ProjPoint

DENSITY_ANGLES = 64
DENSITY_MC_DIRECTIONS = 256
SIDE_POINTS = 100
GOLDEN_ITERS = 40
STABILITY_RATIO = 0.06


@dataclass
class MetricContext:
    domain: ConvexDomain
    chart: AffineChart = None
    tol: float = 1e-9

    def __post_init__(self):
        if self.chart is None:
            self.chart = self.domain.chart
        elif self.chart is not self.domain.chart:
            c = self.domain.interior_point()
            D = self.domain.chart.embed_direction_many(sphere_directions(self.domain.dim, 64))
            P = self.domain.boundary_points(np.broadcast_to(c, D.shape), D)
            w = np.concatenate([P @ self.chart.covector, [c @ self.chart.covector]])
            if not (np.all(w > 0) or np.all(w < 0)):
                raise GeometryError("chart does not contain the closure of the domain")

    @property
    def dim(self):
        return self.domain.dim

    def lift(self, X):
        """Rows normalized to ``chart.covector . x = 1`` with the domain's sign."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        X = X * np.sign(X @ self.domain.phi)[:, None]
        w = X @ self.chart.covector
        return X / w[:, None]


def _rep(x):
    return x.rep if isinstance(x, ProjPoint) else np.asarray(x, dtype=float)


def _require_interior(ctx, *points):
    for x in points:
        if ctx.domain.position(x, ctx.tol) is not Position.INSIDE:
            raise NotInterior(f"{x!r} is not an interior point")


def distances(ctx: MetricContext, X, Y):
    """Row-wise Hilbert distances (no interiority check)."""
    X, Y = ctx.lift(X), ctx.lift(Y)
    V = Y - X
    out = np.zeros(X.shape[0])
    moving = np.linalg.norm(V, axis=1) > 1e-15 * np.linalg.norm(X, axis=1)
    if np.any(moving):
        Xm, Vm = X[moving], V[moving]
        sm, sp = ctx.domain.chord(Xm, Vm)
        # rows outside the domain come out nan
        with np.errstate(divide="ignore", invalid="ignore"):
            out[moving] = 0.5 * (np.log1p(1.0 / (-sm)) + np.log1p(1.0 / (sp - 1.0)))
    return out


def distance(ctx: MetricContext, x, y) -> float:
    """Half the log cross ratio of ``(p, x, y, q)`` on the chord through x, y."""
    _require_interior(ctx, x, y)
    return float(distances(ctx, _rep(x)[None, :], _rep(y)[None, :])[0])


def finsler_norms(ctx: MetricContext, X, Vchart):
    """Finsler norms at lifted rows ``X`` of chart directions ``Vchart``."""
    X = ctx.lift(X)
    V = ctx.chart.embed_direction_many(Vchart)
    sm, sp = ctx.domain.chord(X, V)
    return 0.5 * (1.0 / sp + 1.0 / (-sm))


def finsler_norm(ctx: MetricContext, x, v) -> float:
    v = np.asarray(v, dtype=float)
    if not np.any(v):
        raise ZeroVector("Finsler norm of the zero vector")
    _require_interior(ctx, x)
    return float(finsler_norms(ctx, _rep(x)[None, :], v[None, :])[0])


def _density_directions(n, seed):
    if n == 2:
        # the unit ball is symmetric, half the circle suffices
        a = np.linspace(0.0, np.pi, DENSITY_ANGLES // 2, endpoint=False)
        return np.stack([np.cos(a), np.sin(a)], axis=1)
    rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(2)[1])
    D = rng.standard_normal((DENSITY_MC_DIRECTIONS, n))
    return D / np.linalg.norm(D, axis=1, keepdims=True)


def busemann_density(ctx: MetricContext, X, seed=0, chunk=4096):
    """Density of the Busemann measure w.r.t. chart Lebesgue measure, normalized
    so the Euclidean unit ball of the chart has measure one per unit density:
    ``1 / mean_u r(u)^n`` with ``r(u) = 1 / F(x, u)``."""
    X = ctx.lift(X)
    n = ctx.dim
    D = _density_directions(n, seed)
    out = np.empty(X.shape[0])
    for start in range(0, X.shape[0], chunk):
        Xc = X[start:start + chunk]
        m = Xc.shape[0]
        XX = np.repeat(Xc, D.shape[0], axis=0)
        DD = np.tile(D, (m, 1))
        F = finsler_norms(ctx, XX, DD).reshape(m, D.shape[0])
        out[start:start + chunk] = 1.0 / np.mean(F ** (-float(n)), axis=1)
    return out


@dataclass
class HilbertBall:
    """Open Hilbert ball, usable as a volume region."""

    ctx: MetricContext
    center: np.ndarray
    radius: float
    _box: tuple = field(default=None, repr=False)

    def __post_init__(self):
        self.center = self.ctx.lift(_rep(self.center))[0]

    def mask_many(self, X):
        C = np.broadcast_to(self.center, np.shape(X))
        return distances(self.ctx, C, X) < self.radius

    def boundary_points(self, count=720):
        ctx = self.ctx
        D = sphere_directions(ctx.dim, count)
        V = ctx.chart.embed_direction_many(D)
        C = np.broadcast_to(self.center, V.shape)
        sm, sp = ctx.domain.chord(C, V)
        a, b = sm, sp
        k = np.exp(2 * self.radius) * (-a) / b
        lam = (a + k * b) / (1 + k)
        return C + lam[:, None] * V

    def bounding_box(self, chart=None, pad=0.02):
        chart = self.ctx.chart if chart is None else chart
        U = chart.project_many(self.boundary_points())
        lo, hi = U.min(axis=0), U.max(axis=0)
        m = pad * (hi - lo).max()
        return lo - m, hi + m


def point_at_distance(ctx: MetricContext, X, V, d):
    """Lifts at Hilbert distance ``d`` from ``X`` along ``+V`` (rows)."""
    X = ctx.lift(X)
    V = np.atleast_2d(V)
    a, b = ctx.domain.chord(X, V)
    k = np.exp(2 * np.asarray(d, float)) * (-a) / b
    lam = (a + k * b) / (1 + k)
    return X + lam[:, None] * V


def _region_mask_and_box(ctx, region, chart):
    if region is None:
        return None, None
    if isinstance(region, HilbertBall):
        return region.mask_many, region.bounding_box(chart)
    if isinstance(region, ConvexDomain):
        c = region.interior_point()
        D = region.chart.embed_direction_many(sphere_directions(region.dim, 256))
        P = region.boundary_points(np.broadcast_to(c, D.shape), D)
        inner = c + 0.999 * (P - c)
        if np.any(ctx.domain.position_many(inner) == Position.OUTSIDE):
            raise RegionNotContained("region is not contained in the domain")

        def mask(X):
            return region.position_many(X) == Position.INSIDE

        return mask, region.bounding_box(chart)
    mask, box = region
    return mask, box


def busemann_volume(ctx: MetricContext, region, samples, seed):
    """Monte-Carlo Busemann volume ``(estimate, stderr)`` of ``region``.

    ``region`` is a :class:`HilbertBall`, a :class:`ConvexDomain` contained in
    the domain, ``None`` (empty) or a ``(mask, (lo, hi))`` pair.
    """
    mask, box = _region_mask_and_box(ctx, region, ctx.chart)
    if mask is None:
        return 0.0, 0.0
    lo, hi = (np.asarray(b, float) for b in box)
    box_vol = float(np.prod(hi - lo))
    rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(2)[0])
    U = lo + (hi - lo) * rng.random((samples, ctx.dim))
    X = ctx.chart.embed_many(U)
    inside_dom = ctx.domain.position_many(X) == Position.INSIDE
    m = np.zeros(samples, dtype=bool)
    if np.any(inside_dom):
        m[inside_dom] = mask(X[inside_dom])
    vals = np.zeros(samples)
    if np.any(m):
        vals[m] = busemann_density(ctx, X[m], seed)
    est = box_vol * vals.mean()
    err = box_vol * vals.std(ddof=1) / np.sqrt(samples) if samples > 1 else float("inf")
    return float(est), float(err)


# -- slim triangles -------------------------------------------------------


def _side_points(ctx, Y, Z, count):
    """``count`` points equally spaced in Hilbert arclength on [Y, Z]."""
    V = (Z - Y)[None, :]
    total = distances(ctx, Y[None, :], Z[None, :])[0]
    d = np.linspace(0.0, total, count)
    a, b = ctx.domain.chord(Y[None, :], V)
    k = np.exp(2 * d) * (-a[0]) / b[0]
    lam = (a[0] + k * b[0]) / (1 + k)
    return Y + lam[:, None] * V[0], lam


def _distance_to_side(ctx, U, Y, Z, P, lam):
    """Distance from each row of ``U`` to the segment [Y, Z]: coarse minimum
    over the sampled points ``P`` then golden-section refinement."""
    m, k = U.shape[0], P.shape[0]
    D = distances(ctx, np.repeat(U, k, axis=0), np.tile(P, (m, 1))).reshape(m, k)
    j = np.argmin(D, axis=1)
    lo = lam[np.maximum(j - 1, 0)]
    hi = lam[np.minimum(j + 1, k - 1)]
    V = Z - Y
    g = (np.sqrt(5.0) - 1.0) / 2.0

    def f(s):
        return distances(ctx, U, Y + s[:, None] * V)

    a, b = lo.copy(), hi.copy()
    c1 = b - g * (b - a)
    c2 = a + g * (b - a)
    f1, f2 = f(c1), f(c2)
    for _ in range(GOLDEN_ITERS):
        left = f1 < f2
        b = np.where(left, c2, b)
        a = np.where(left, a, c1)
        nc1 = b - g * (b - a)
        nc2 = a + g * (b - a)
        c1, c2 = np.where(left, nc1, c2), np.where(left, c1, nc2)
        new = f(np.where(left, c1, c2))
        f1, f2 = np.where(left, new, f2), np.where(left, f1, new)
    return np.minimum(D.min(axis=1), np.minimum(f1, f2))


def triangle_defect(ctx: MetricContext, A, B, C, side_points=SIDE_POINTS):
    """Largest distance from a point of one side to the union of the other two."""
    verts = [ctx.lift(v)[0] for v in (A, B, C)]
    sides = [(verts[i], verts[(i + 1) % 3]) for i in range(3)]
    samples = [_side_points(ctx, Y, Z, side_points) for Y, Z in sides]
    worst = 0.0
    for i in range(3):
        U = samples[i][0]
        dist = np.full(U.shape[0], np.inf)
        for j in range(3):
            if j == i:
                continue
            Y, Z = sides[j]
            P, lam = samples[j]
            dist = np.minimum(dist, _distance_to_side(ctx, U, Y, Z, P, lam))
        worst = max(worst, float(dist.max()))
    return worst


def random_triangles(ctx: MetricContext, count, seed, radius, center=None, targets=None):
    """Vertices at Hilbert distance uniform in ``[radius/2, radius]`` from the
    center, in random chart directions. With ``targets`` (chart points, e.g.
    polytope vertices) each triangle aims at three distinct targets instead."""
    rng = np.random.default_rng(seed)
    c = ctx.lift(ctx.domain.interior_point() if center is None else _rep(center))[0]
    if targets is None:
        D = rng.standard_normal((3 * count, ctx.dim))
    else:
        targets = np.asarray(targets, float)
        cu = ctx.chart.project_many(c[None, :])[0]
        idx = np.array([rng.choice(len(targets), 3, replace=False) for _ in range(count)]).ravel()
        D = targets[idx] - cu
        # a tiny angular jitter keeps the rays off the exact corners
        D += 1e-3 * np.linalg.norm(D, axis=1, keepdims=True) * rng.standard_normal(D.shape)
    D /= np.linalg.norm(D, axis=1, keepdims=True)
    V = ctx.chart.embed_direction_many(D)
    d = radius * (0.5 + 0.5 * rng.random(3 * count))
    P = point_at_distance(ctx, np.broadcast_to(c, V.shape), V, d)
    return P.reshape(count, 3, -1)


def delta_estimate(ctx: MetricContext, triangles, seed, radius=4.0, side_points=SIDE_POINTS, center=None, targets=None):
    """Empirical slim-triangle constant over ``triangles`` random triangles."""
    T = random_triangles(ctx, triangles, seed, radius, center, targets)
    return max(triangle_defect(ctx, *tri, side_points=side_points) for tri in T)


@dataclass
class DeltaProfile:
    radii: list
    deltas: list

    @property
    def last_increase(self):
        a, b = self.deltas[-2], self.deltas[-1]
        return (b - a) / a if a > 0 else float("inf")

    @property
    def stable(self):
        return bool(np.isfinite(self.deltas[-1]) and self.last_increase < STABILITY_RATIO)


def delta_profile(ctx: MetricContext, triangles, seed, radii=(3.0, 4.5, 6.0), side_points=SIDE_POINTS, center=None, targets=None):
    """Estimates over growing triangle sizes; a Gromov-hyperbolic domain levels
    off while a flat one keeps growing."""
    ds = [delta_estimate(ctx, triangles, seed, r, side_points, center, targets) for r in radii]
    return DeltaProfile(list(radii), ds)
