"""Properly convex domains exposed through a ray-exit oracle.

Every domain works on homogeneous lifts in R^{n+1}. The one primitive a
subclass must provide is :meth:`ConvexDomain.exit_param`: for rows ``X``
inside the domain and directions ``V`` it returns the smallest ``s > 0``
with ``X + s V`` on the boundary. Containment, chords, bounding boxes and
the probes are built on top of it.
"""

from __future__ import annotations

import enum
import itertools

import numpy as np

from hilbend.errors import (
    GeometryError,
    NotInterior,
    NotOnBoundary,
    SignatureLost,
    SingularForm,
)
from hilbend.projcore import GEOM_TOL, AffineChart, ProjPoint, canonical

BOUNDARY_TOL = 1e-9
BOX_DIRECTIONS = 720
PROBE_RESOLUTION = 1e-3
SEGMENT_TOL = 1e-12


class Position(enum.Enum):
    INSIDE = "inside"
    BOUNDARY = "on-boundary"
    OUTSIDE = "outside"

    def __bool__(self):
        return self is Position.INSIDE


def _as_rows(X):
    return np.atleast_2d(np.asarray(X, dtype=float))


def sphere_directions(n, count, rng=None):
    """Unit directions in R^n: equally spaced angles when ``n == 2``,
    Gaussian samples otherwise (coordinate axes always included)."""
    if n == 1:
        return np.array([[1.0], [-1.0]])
    if n == 2:
        a = np.linspace(0.0, 2 * np.pi, count, endpoint=False)
        return np.stack([np.cos(a), np.sin(a)], axis=1)
    rng = np.random.default_rng(0) if rng is None else rng
    D = rng.standard_normal((count, n))
    D = np.vstack([np.eye(n), -np.eye(n), D])
    return D / np.linalg.norm(D, axis=1, keepdims=True)


class ConvexDomain:
    """Base class. Subclasses set ``dim`` and ``phi`` (a covector positive on
    the closure) and implement :meth:`exit_param` and :meth:`interior_point`."""

    dim: int
    phi: np.ndarray

    @property
    def chart(self) -> AffineChart:
        c = self.__dict__.get("_chart")
        if c is None:
            c = AffineChart.from_covector(self.phi)
            self.__dict__["_chart"] = c
        return c

    def exit_param(self, X, V):
        raise NotImplementedError

    def interior_point(self):
        """Lift (``phi . x = 1``) of a fixed interior point."""
        raise NotImplementedError

    # -- derived oracles -------------------------------------------------

    def lift(self, X):
        """Rows rescaled so that ``phi . x = 1``; rows with ``phi . x <= 0`` are
        returned as ``nan`` (they are not in the domain's cone)."""
        X = _as_rows(X)
        w = X @ self.phi
        out = X / np.where(w > 0, w, np.nan)[:, None]
        return out

    def chord(self, X, V):
        """Parameters ``(s_minus, s_plus)`` of the boundary along ``X + s V``."""
        X, V = _as_rows(X), _as_rows(V)
        return -self.exit_param(X, -V), self.exit_param(X, V)

    def boundary_gap(self, X):
        """Signed chart distance from the rows of ``X`` to the boundary along
        the ray from the interior point: positive inside, negative outside,
        ``-inf`` for points not in the domain's cone."""
        X = _as_rows(X)
        c = self.interior_point()
        L = self.lift(X)
        ok = np.all(np.isfinite(L), axis=1)
        gap = np.full(X.shape[0], -np.inf)
        if not np.any(ok):
            return gap
        V = L[ok] - c
        C = np.broadcast_to(c, V.shape)
        norms = np.linalg.norm(self.chart.project_many(L[ok]) - self.chart.project_many(c[None, :]), axis=1)
        g = np.zeros(V.shape[0])
        moving = norms > 0
        if np.any(moving):
            s = self.exit_param(C[moving], V[moving])
            g[moving] = (s - 1.0) * norms[moving]
        g[~moving] = np.inf
        gap[ok] = g
        return gap

    def position_many(self, X, tol=BOUNDARY_TOL):
        gap = self.boundary_gap(X)
        out = np.empty(gap.shape[0], dtype=object)
        out[:] = Position.OUTSIDE
        out[gap > tol] = Position.INSIDE
        out[np.abs(gap) <= tol] = Position.BOUNDARY
        return out

    def position(self, x, tol=BOUNDARY_TOL) -> Position:
        rep = x.rep if isinstance(x, ProjPoint) else np.asarray(x, dtype=float)
        return self.position_many(rep[None, :], tol)[0]

    def boundary_points(self, X, V):
        """Lifts of the forward boundary hits of ``X + s V``."""
        X, V = _as_rows(X), _as_rows(V)
        return X + self.exit_param(X, V)[:, None] * V

    def bounding_box(self, chart: AffineChart | None = None, directions=BOX_DIRECTIONS, pad=0.01):
        """Axis-aligned box in ``chart`` containing the domain's closure."""
        chart = self.chart if chart is None else chart
        c = self.interior_point()
        D = self.chart.embed_direction_many(sphere_directions(self.dim, directions))
        P = self.boundary_points(np.broadcast_to(c, D.shape), D)
        U = chart.project_many(P)
        lo, hi = U.min(axis=0), U.max(axis=0)
        margin = pad * (hi - lo).max()
        return lo - margin, hi + margin

    def sample_interior(self, count, rng, shrink=1.0):
        """Random interior lifts: random direction from the interior point,
        radius fraction ``shrink * u^(1/n)`` of the chord."""
        c = self.interior_point()
        D = rng.standard_normal((count, self.dim))
        D /= np.linalg.norm(D, axis=1, keepdims=True)
        V = self.chart.embed_direction_many(D)
        s = self.exit_param(np.broadcast_to(c, V.shape), V)
        u = shrink * rng.random(count) ** (1.0 / self.dim)
        return c + (u * s)[:, None] * V


def _smallest_positive_root(a, b, c, tol=0.0):
    """Smallest root > tol of ``a s^2 + 2 b s + c`` (``inf`` if none); stable form."""
    a, b, c = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float), np.asarray(c, float))
    disc = b * b - a * c
    out = np.full(a.shape, np.inf)
    real = disc >= 0
    sq = np.sqrt(np.where(real, disc, 0.0))
    q = -(b + np.where(b >= 0, sq, -sq))
    with np.errstate(divide="ignore", invalid="ignore"):
        r1 = np.where(a != 0, q / a, np.inf)
        r2 = np.where(q != 0, c / q, np.inf)
        # linear case
        lin = np.where(b != 0, -c / (2 * b), np.inf)
    r1 = np.where(a == 0, lin, r1)
    r2 = np.where(a == 0, np.inf, r2)
    for r in (r1, r2):
        good = real & np.isfinite(r) & (r > tol)
        out = np.where(good & (r < out), r, out)
    return out


class QuadricDomain(ConvexDomain):
    """Projectivized negative cone of a signature ``(n, 1)`` form ``Q``.

    ``orientation`` is a vector with ``v^T Q v < 0`` picking the cone
    component; by default ``Q^{-1} e_{n+1}`` (sign-adjusted).
    """

    def __init__(self, Q, orientation=None):
        Q = np.asarray(Q, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1] or not np.allclose(Q, Q.T, atol=1e-12):
            raise GeometryError("Q must be a symmetric square matrix")
        ev = np.linalg.eigvalsh(Q)
        scale = np.abs(ev).max()
        if np.abs(ev).min() < 1e-12 * scale:
            raise SingularForm("quadratic form is singular")
        if int(np.sum(ev < 0)) != 1:
            raise SignatureLost(f"form has signature ({int(np.sum(ev > 0))},{int(np.sum(ev < 0))}), expected (n,1)")
        self.Q = Q
        self.dim = Q.shape[0] - 1
        if orientation is None:
            orientation = np.linalg.solve(Q, np.eye(self.dim + 1)[-1])
            if orientation @ Q @ orientation >= 0:
                # the last coordinate hyperplane meets the quadric; use the negative eigenvector
                w, U = np.linalg.eigh(Q)
                orientation = U[:, 0]
            orientation = orientation * np.sign(orientation[np.argmax(np.abs(orientation))])
        c = np.asarray(orientation, dtype=float)
        if c @ Q @ c >= 0:
            raise GeometryError("orientation vector is not inside the cone")
        phi = -Q @ c
        self.phi = phi / np.linalg.norm(phi)
        self._center = c / (self.phi @ c)

    @classmethod
    def klein(cls, n):
        return cls(np.diag([1.0] * n + [-1.0]), np.eye(n + 1)[-1])

    def interior_point(self):
        return self._center

    def form_values(self, X):
        X = _as_rows(X)
        return np.einsum("ij,jk,ik->i", X, self.Q, X)

    def exit_param(self, X, V):
        X, V = _as_rows(X), _as_rows(V)
        QX = X @ self.Q
        a = np.einsum("ij,ij->i", V @ self.Q, V)
        b = np.einsum("ij,ij->i", QX, V)
        c = np.einsum("ij,ij->i", QX, X)
        return _smallest_positive_root(a, b, c)

    def exact_position(self, x, tol=GEOM_TOL):
        """Containment by the sign of the form (scale-free)."""
        rep = canonical(x.rep if isinstance(x, ProjPoint) else x)
        if rep @ self.phi <= 0:
            rep = -rep
        v = rep @ self.Q @ rep
        if abs(v) <= tol:
            return Position.BOUNDARY
        return Position.INSIDE if v < 0 else Position.OUTSIDE

    def tangent_covector(self, p):
        return self.Q @ (p.rep if isinstance(p, ProjPoint) else np.asarray(p, dtype=float))


class Polytope(ConvexDomain):
    """Intersection of half-spaces ``a . x >= 0`` (signed covectors) in the cone
    ``phi > 0``. ``halfspaces`` may be given as ``(ProjHyperplane, sign)``
    pairs or as an array of signed covectors."""

    def __init__(self, halfspaces, phi=None):
        rows = []
        for h in halfspaces:
            if isinstance(h, tuple):
                H, side = h
                rows.append(float(side) * np.asarray(H.covector, dtype=float))
            else:
                rows.append(np.asarray(h, dtype=float))
        A = np.array(rows)
        self.A = A / np.linalg.norm(A, axis=1, keepdims=True)
        self.dim = A.shape[1] - 1
        if phi is None:
            phi = np.eye(self.dim + 1)[-1]
        self.phi = np.asarray(phi, dtype=float)
        self._center = self._chebyshev_center()

    @classmethod
    def square(cls, half=1.0):
        """``[-half, half]^2`` in the standard chart."""
        return cls([[1, 0, half], [-1, 0, half], [0, 1, half], [0, -1, half]])

    @classmethod
    def box(cls, lo, hi):
        lo, hi = np.asarray(lo, float), np.asarray(hi, float)
        n = lo.shape[0]
        rows = []
        for i in range(n):
            e = np.zeros(n + 1)
            e[i], e[-1] = 1.0, -lo[i]
            rows.append(e)
            f = np.zeros(n + 1)
            f[i], f[-1] = -1.0, hi[i]
            rows.append(f)
        return cls(rows)

    def _chebyshev_center(self):
        from scipy.optimize import linprog

        chart = self.chart
        # constraints in chart coordinates u: a . embed(u) >= r * |grad|
        M = chart.embed_many(np.zeros(self.dim))[0]
        B = chart.embed_direction_many(np.eye(self.dim))
        G = self.A @ B.T  # gradient of a . x in u
        h = self.A @ M
        norms = np.linalg.norm(G, axis=1)
        c = np.zeros(self.dim + 1)
        c[-1] = -1.0
        A_ub = np.hstack([-G, norms[:, None]])
        res = linprog(c, A_ub=A_ub, b_ub=h, bounds=[(None, None)] * self.dim + [(0, None)], method="highs")
        if res.status == 3:
            raise GeometryError("polytope is unbounded in its chart")
        if res.status != 0 or res.x[-1] <= 1e-12:
            raise GeometryError("polytope has empty interior")
        return chart.embed_many(res.x[:-1])[0]

    def interior_point(self):
        return self._center

    def vertices(self, tol=1e-9):
        """Vertices as chart coordinates (one per distinct point)."""
        out = []
        for idx in itertools.combinations(range(len(self.A)), self.dim):
            M = np.vstack([self.A[list(idx)], self.phi])
            if abs(np.linalg.det(M)) < tol:
                continue
            x = np.linalg.solve(M, np.eye(self.dim + 1)[-1])
            if np.all(self.A @ x >= -tol * np.linalg.norm(x)):
                u = self.chart.project_many(x[None, :])[0]
                if not any(np.abs(u - v).max() < 1e-9 for v in out):
                    out.append(u)
        return np.array(out)

    def exit_param(self, X, V):
        X, V = _as_rows(X), _as_rows(V)
        a0 = X @ self.A.T
        a1 = V @ self.A.T
        with np.errstate(divide="ignore", invalid="ignore"):
            s = np.where(a1 < 0, -a0 / a1, np.inf)
        s = np.where(s > 0, s, np.where(a1 < 0, 0.0, np.inf))
        return s.min(axis=1)


class TransformedDomain(ConvexDomain):
    """Image ``g . base`` of a domain under a linear map."""

    def __init__(self, base: ConvexDomain, g):
        self.base = base
        self.g = np.asarray(getattr(g, "mat", g), dtype=float)
        self.ginv = np.linalg.inv(self.g)
        self.dim = base.dim
        phi = base.phi @ self.ginv
        self.phi = phi / np.linalg.norm(phi)

    def interior_point(self):
        c = self.g @ self.base.interior_point()
        return c / (self.phi @ c)

    def exit_param(self, X, V):
        X, V = _as_rows(X), _as_rows(V)
        return self.base.exit_param(X @ self.ginv.T, V @ self.ginv.T)


def _point_rep(x):
    return x.rep if isinstance(x, ProjPoint) else np.asarray(x, dtype=float)


def contains(domain: ConvexDomain, x) -> Position:
    return domain.position(x)


def ray_boundary(domain: ConvexDomain, x, v, chart: AffineChart | None = None):
    """Boundary points ``(p_minus, p_plus)`` of the chord through ``x`` in chart
    direction ``v`` (chart defaults to the domain's own)."""
    chart = domain.chart if chart is None else chart
    if domain.position(x) is not Position.INSIDE:
        raise NotInterior("ray_boundary needs an interior point")
    X = domain.lift(_point_rep(x))
    if chart is domain.chart:
        V = chart.embed_direction_many(v)
    else:
        # direction in another chart: move to the point x + v there and back
        u = chart.project_many(X)[0]
        Y = domain.lift(chart.embed_many(u + np.asarray(v, float)))
        V = Y - X
    sm, sp = domain.chord(X, V)
    if not (np.isfinite(sm[0]) and np.isfinite(sp[0])):
        raise GeometryError("chord does not meet the boundary")
    return ProjPoint(X[0] + sm[0] * V[0]), ProjPoint(X[0] + sp[0] * V[0])


def convexity_probe(domain: ConvexDomain, samples, seed, shrink=1.0):
    """Random interior pairs whose midpoint is outside. Returns the list of
    offending ``(x, y)`` lift pairs; a boundary-band midpoint is not counted."""
    rng = np.random.default_rng(seed)
    X = domain.sample_interior(samples, rng, shrink)
    Y = domain.sample_interior(samples, rng, shrink)
    M = 0.5 * (X + Y)
    pos = domain.position_many(M)
    bad = np.nonzero(pos == Position.OUTSIDE)[0]
    return [(X[i], Y[i]) for i in bad]


def strict_convexity_probe(domain: ConvexDomain, samples, seed, resolution=PROBE_RESOLUTION, tol=SEGMENT_TOL):
    """Search for flat boundary pieces.

    Pairs of boundary points are taken on nearby rays from the interior
    point so their chart separation falls in ``[resolution, 10*resolution]``.
    A pair whose midpoint is within ``tol`` of the boundary certifies a
    segment. Returns the list of ``(p, q, gap)`` triples found.
    """
    rng = np.random.default_rng(seed)
    chart = domain.chart
    c = domain.interior_point()
    cu = chart.project_many(c[None, :])[0]
    n = domain.dim
    D1 = rng.standard_normal((samples, n))
    D1 /= np.linalg.norm(D1, axis=1, keepdims=True)
    W = rng.standard_normal((samples, n))
    W -= np.einsum("ij,ij->i", W, D1)[:, None] * D1
    W /= np.linalg.norm(W, axis=1, keepdims=True)
    target = resolution * (1.0 + 9.0 * rng.random(samples))

    def hit(D):
        V = chart.embed_direction_many(D)
        C = np.broadcast_to(c, V.shape)
        return C + domain.exit_param(C, V)[:, None] * V

    P = hit(D1)
    r = np.linalg.norm(chart.project_many(P) - cu, axis=1)
    ang = target / r
    for _ in range(3):
        D2 = np.cos(ang)[:, None] * D1 + np.sin(ang)[:, None] * W
        Qp = hit(D2)
        sep = np.linalg.norm(chart.project_many(Qp) - chart.project_many(P), axis=1)
        ang = ang * np.where(sep > 0, target / sep, 1.0)
    sep = np.linalg.norm(chart.project_many(Qp) - chart.project_many(P), axis=1)
    keep = (sep >= resolution * (1 - 1e-9)) & (sep <= 10 * resolution * (1 + 1e-9))
    M = 0.5 * (P + Qp)
    gap = domain.boundary_gap(M)
    bad = np.nonzero(keep & (gap <= tol))[0]
    return [(P[i], Qp[i], float(gap[i])) for i in bad]


def pencil_ellipsoid(E: QuadricDomain, p, s, tol=BOUNDARY_TOL) -> QuadricDomain:
    """Member ``Q + s (Q p)(Q p)^T`` of the pencil tangent to ``E`` at ``p``.

    ``s > 0`` gives inner members, ``s < 0`` outer ones; ``p`` is taken with
    unit norm.
    """
    rep = canonical(_point_rep(p))
    if rep @ E.phi < 0:
        rep = -rep
    if abs(rep @ E.Q @ rep) > tol:
        raise NotOnBoundary("pencil base point is not on the quadric")
    if s == 0:
        return E
    t = E.Q @ rep
    Qs = E.Q + s * np.outer(t, t)
    ev = np.linalg.eigvalsh(Qs)
    if int(np.sum(ev < -1e-12 * np.abs(ev).max())) != 1 or np.abs(ev).min() < 1e-12 * np.abs(ev).max():
        raise SignatureLost(f"pencil member at s={s} left signature (n,1)")
    if s > 0:
        orient = -np.linalg.solve(Qs, E.phi)
        if orient @ Qs @ orient >= 0:
            raise SignatureLost("inner member lost its interior")
    else:
        orient = E.interior_point()
    return QuadricDomain(Qs, orient)


def fit_inner_pencil(E: QuadricDomain, p, domain: ConvexDomain, samples=2000, seed=0, s_max=1e6):
    """Smallest ``s > 0`` (up to a factor 2 bracket, refined by bisection) whose
    pencil member samples lie inside ``domain``."""
    rng = np.random.default_rng(seed)

    def inside(s):
        F = pencil_ellipsoid(E, p, s)
        X = F.sample_interior(samples, rng)
        return np.all(domain.position_many(X) != Position.OUTSIDE)

    hi = 1.0
    while not inside(hi):
        hi *= 2.0
        if hi > s_max:
            raise GeometryError("no inner pencil member fits in the domain")
    lo = 0.0
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        if inside(mid):
            hi = mid
        else:
            lo = mid
    return hi
