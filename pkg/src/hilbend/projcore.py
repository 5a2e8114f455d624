"""Linear algebra on the projective sphere.

Points and hyperplanes are stored through a canonical representative
(unit Euclidean norm, first non-negligible coordinate positive). Maps are
determinant-one matrices acting on representatives. Internally most of the
library works with raw homogeneous arrays; these classes are the public,
hashable surface.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from hilbend.errors import (
    AtInfinity,
    DegenerateConfiguration,
    GeometryError,
    NonCollinear,
    SingularForm,
    TangentWall,
)

GEOM_TOL = 1e-9
LINALG_TOL = 1e-12


def canonical(v, tol=LINALG_TOL):
    """Unit-norm representative of the line through ``v`` with its first
    non-negligible coordinate positive."""
    v = np.asarray(v, dtype=float)
    norm = np.linalg.norm(v)
    if norm == 0.0 or not np.isfinite(norm):
        raise GeometryError("cannot canonicalize the zero vector")
    u = v / norm
    for c in u:
        if abs(c) > tol:
            return u if c > 0 else -u
    return u


def _freeze(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ProjPoint:
    rep: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rep", _freeze(canonical(self.rep)))

    @classmethod
    def from_affine(cls, coords):
        """Point of the standard chart ``x_{n+1} = 1``."""
        return cls(np.append(np.asarray(coords, dtype=float), 1.0))

    @property
    def dim(self):
        return self.rep.shape[0] - 1

    def __eq__(self, other):
        if not isinstance(other, ProjPoint) or other.rep.shape != self.rep.shape:
            return NotImplemented
        return bool(np.allclose(self.rep, other.rep, atol=GEOM_TOL, rtol=0))

    def __hash__(self):
        return hash(tuple(np.round(self.rep, 8) + 0.0))

    def __repr__(self):
        return f"ProjPoint({np.array2string(self.rep, precision=6)})"


@dataclass(frozen=True, eq=False)
class ProjHyperplane:
    covector: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "covector", _freeze(canonical(self.covector)))

    @property
    def dim(self):
        return self.covector.shape[0] - 1

    def incident(self, x: ProjPoint, tol=GEOM_TOL):
        return abs(float(self.covector @ x.rep)) < tol

    def __eq__(self, other):
        if not isinstance(other, ProjHyperplane) or other.covector.shape != self.covector.shape:
            return NotImplemented
        return bool(np.allclose(self.covector, other.covector, atol=GEOM_TOL, rtol=0))

    def __hash__(self):
        return hash(tuple(np.round(self.covector, 8) + 0.0))

    def __repr__(self):
        return f"ProjHyperplane({np.array2string(self.covector, precision=6)})"


def normalize_det(m):
    """Rescale ``m`` to determinant one (negating first if needed so the
    real root exists)."""
    m = np.asarray(m, dtype=float)
    d = np.linalg.det(m)
    k = m.shape[0]
    if abs(d) < 1e-300:
        raise GeometryError("singular matrix")
    if d < 0:
        if k % 2 == 0:
            raise GeometryError("negative determinant in even dimension has no SL representative")
        m, d = -m, -d
    return m / d ** (1.0 / k)


@dataclass(frozen=True, eq=False)
class ProjMap:
    mat: np.ndarray

    def __post_init__(self):
        m = _freeze(self.mat)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise GeometryError("ProjMap needs a square matrix")
        if abs(np.linalg.det(m) - 1.0) > 1e-9:
            raise GeometryError(f"determinant {np.linalg.det(m)!r} is not 1")
        object.__setattr__(self, "mat", m)

    @classmethod
    def from_matrix(cls, m):
        return cls(normalize_det(m))

    @classmethod
    def identity(cls, size):
        return cls(np.eye(size))

    @property
    def dim(self):
        return self.mat.shape[0] - 1

    def __matmul__(self, other):
        if isinstance(other, ProjMap):
            return ProjMap.from_matrix(self.mat @ other.mat)
        if isinstance(other, ProjPoint):
            return apply_map(self, other)
        return NotImplemented

    def inverse(self):
        return ProjMap.from_matrix(np.linalg.inv(self.mat))

    def __repr__(self):
        return f"ProjMap({np.array2string(self.mat, precision=6)})"


def compose(g: ProjMap, h: ProjMap) -> ProjMap:
    return g @ h


def inverse(g: ProjMap) -> ProjMap:
    return g.inverse()


def apply_map(g: ProjMap, x: ProjPoint) -> ProjPoint:
    return ProjPoint(g.mat @ x.rep)


def apply_dual(g: ProjMap, h: ProjHyperplane) -> ProjHyperplane:
    """Image of a hyperplane: the covector transforms by ``g^{-T}``."""
    return ProjHyperplane(np.linalg.solve(g.mat.T, h.covector))


@dataclass(frozen=True, eq=False)
class AffineChart:
    """Complement of ``hyperplane_at_infinity`` with affine coordinates given by
    ``frame`` (n covectors). Together they form an invertible matrix ``M``:
    affine coordinates of ``x`` are ``(M x)[:n] / (M x)[n]``."""

    hyperplane_at_infinity: ProjHyperplane
    frame: np.ndarray = field(default=None)

    def __post_init__(self):
        phi = np.asarray(self.hyperplane_at_infinity.covector)
        if self.frame is None:
            # orthonormal complement, oriented so the standard chart is the identity
            k = phi.shape[0]
            if np.allclose(phi, np.eye(k)[-1]):
                frame = np.eye(k)[:-1]
            else:
                _, _, vt = np.linalg.svd(phi[None, :])
                frame = vt[1:]
        else:
            frame = np.asarray(self.frame, dtype=float)
        M = np.vstack([frame, phi])
        if abs(np.linalg.det(M)) < LINALG_TOL:
            raise GeometryError("chart frame is degenerate")
        object.__setattr__(self, "frame", _freeze(frame))
        object.__setattr__(self, "_M", _freeze(M))
        object.__setattr__(self, "_Minv", _freeze(np.linalg.inv(M)))

    @classmethod
    def standard(cls, n):
        return cls(ProjHyperplane(np.eye(n + 1)[-1]))

    @classmethod
    def from_covector(cls, phi):
        """Chart whose hyperplane at infinity is ``phi``; ``phi`` is used as
        given (not canonicalized) so that positive lifts keep their sign."""
        phi = np.asarray(phi, dtype=float)
        chart = cls(ProjHyperplane(phi))
        if chart.covector @ phi < 0:
            # canonicalization flipped the sign; undo it
            object.__setattr__(chart, "_M", _freeze(np.vstack([chart.frame, -chart.covector])))
            object.__setattr__(chart, "_Minv", _freeze(np.linalg.inv(chart._M)))
        return chart

    @property
    def covector(self):
        return self._M[-1]

    @property
    def n(self):
        return self.frame.shape[0]

    def project_many(self, X):
        """Affine coordinates of the rows of ``X``."""
        Y = np.asarray(X, dtype=float) @ self._M.T
        return Y[:, :-1] / Y[:, -1:]

    def embed_many(self, U):
        """Lifts of affine points, normalized so that ``covector . x = 1``."""
        U = np.atleast_2d(np.asarray(U, dtype=float))
        Y = np.hstack([U, np.ones((U.shape[0], 1))])
        return Y @ self._Minv.T

    def embed_direction_many(self, V):
        """Homogeneous vectors (on the hyperplane at infinity) of chart directions."""
        V = np.atleast_2d(np.asarray(V, dtype=float))
        Y = np.hstack([V, np.zeros((V.shape[0], 1))])
        return Y @ self._Minv.T

    def normalize_many(self, X, tol=LINALG_TOL):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        w = X @ self.covector
        scale = np.max(np.abs(X), axis=1)
        if np.any(np.abs(w) <= tol * scale):
            raise AtInfinity("point lies on the hyperplane at infinity of the chart")
        return X / w[:, None]


def chart_project(chart: AffineChart, x: ProjPoint, tol=LINALG_TOL):
    w = float(chart.covector @ x.rep)
    if abs(w) < tol:
        raise AtInfinity(f"{x} is on the hyperplane at infinity")
    return chart.project_many(x.rep[None, :])[0]


def chart_embed(chart: AffineChart, coords) -> ProjPoint:
    return ProjPoint(chart.embed_many(coords)[0])


def collinearity_residual(reps):
    """Relative third singular value of the stacked representatives; zero iff
    the points span at most a projective line."""
    R = np.array([canonical(r) for r in reps])
    s = np.linalg.svd(R, compute_uv=False)
    return 0.0 if s.shape[0] < 3 else float(s[2] / s[0])


def _line_coordinates(reps):
    """Affine coordinates of collinear points in a chart of their common line
    chosen to stay far from every point."""
    R = np.array([canonical(r) for r in reps])
    _, _, vt = np.linalg.svd(R)
    basis = vt[:2]
    P = R @ basis.T  # 2-vectors in the plane of the line
    P = P / np.linalg.norm(P, axis=1, keepdims=True)
    angles = np.linspace(0.0, np.pi, 720, endpoint=False)
    E = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    margin = np.min(np.abs(P @ E.T), axis=0)
    e = E[np.argmax(margin)]
    f = np.array([-e[1], e[0]])
    return (P @ f) / (P @ e)


def cross_ratio(p: ProjPoint, x: ProjPoint, y: ProjPoint, q: ProjPoint, tol=GEOM_TOL) -> float:
    """``(|p-y| |q-x|) / (|p-x| |q-y|)`` for four collinear points."""
    reps = [p.rep, x.rep, y.rep, q.rep]
    if collinearity_residual(reps) > tol:
        raise NonCollinear("cross ratio needs collinear points")
    if p == x or q == y:
        raise DegenerateConfiguration("p coincides with x or q with y")
    sp, sx, sy, sq = _line_coordinates(reps)
    return abs(sp - sy) * abs(sq - sx) / (abs(sp - sx) * abs(sq - sy))


def pole_vector(covector, Q, tol=LINALG_TOL):
    """Homogeneous vector ``Q^{-1} covector`` (no canonicalization)."""
    Q = np.asarray(Q, dtype=float)
    if np.linalg.cond(Q) > 1.0 / tol:
        raise SingularForm("quadratic form is numerically singular")
    return np.linalg.solve(Q, np.asarray(covector, dtype=float))


def pole(H: ProjHyperplane, Q, tol=GEOM_TOL) -> ProjPoint:
    """Point dual to ``H`` with respect to the quadratic form ``Q``."""
    v = pole_vector(H.covector, Q)
    v = v / np.linalg.norm(v)
    if abs(v @ np.asarray(Q) @ v) < tol:
        raise TangentWall("the pole lies on the quadric; the hyperplane is tangent")
    return ProjPoint(v)


def polar(x: ProjPoint, Q) -> ProjHyperplane:
    return ProjHyperplane(np.asarray(Q, dtype=float) @ x.rep)


def random_sl(size, rng, scale=1.0):
    """Random determinant-one matrix with Gaussian entries around the identity."""
    while True:
        m = np.eye(size) + scale * rng.standard_normal((size, size))
        d = np.linalg.det(m)
        if abs(d) < 1e-3:
            continue
        if d < 0:
            m[:, [0, 1]] = m[:, [1, 0]]
        return ProjMap.from_matrix(m)
