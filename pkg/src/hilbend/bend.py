"""Bending: the maps ``A_{H,p,t}``, the local fold of a domain along one wall,
deformed representations and the bent domain built from a wall orbit."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from hilbend.chambers import BentDomain, bending_matrix
from hilbend.convex import ConvexDomain, Position, QuadricDomain, sphere_directions
from hilbend.errors import (
    GeometryError,
    IncidentPolePlane,
    PoleInsideDomain,
    RelationViolated,
    WallMissesDomain,
)
from hilbend.groups import Representation, Word, reduced_words
from hilbend.projcore import ProjHyperplane, ProjMap, ProjPoint, canonical

RELATION_TOL = 1e-9
CONE_SAMPLES = 10_000
ROOT_OFFSET = 1e-2


@dataclass
class BendParams:
    t: float
    depth: int = 6
    n: int = 2


@dataclass
class WallSpec:
    """Wall ``H`` with apex ``p``; ``side`` is the sign of ``H.covector`` on
    the part left in place."""

    H: ProjHyperplane
    p: ProjPoint
    side: int = -1

    def __post_init__(self):
        if abs(self.H.covector @ self.p.rep) < 1e-12:
            raise IncidentPolePlane("apex lies on the wall")
        if self.side not in (-1, 1):
            raise ValueError("side must be +1 or -1")

    @property
    def oriented(self):
        """Covector negative on the unbent side."""
        return -self.side * self.H.covector


@dataclass
class Decomposition:
    """How the group splits along the wall.

    ``kind`` is ``"HNN"`` or ``"amalgam"``. For HNN, ``stable_letter`` is the
    generator name of alpha and ``pairs`` lists ``(gamma_g, gamma_d)`` words
    with ``gamma_g = alpha^-1 gamma_d alpha``. For an amalgam, ``side_g`` and
    ``side_d`` name the generators of each factor and ``pairs`` lists words
    of the two factors representing the same element of the wall subgroup.
    """

    kind: str
    wall_subgroup: list
    stable_letter: str | None = None
    pairs: list = field(default_factory=list)
    side_g: list = field(default_factory=list)
    side_d: list = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in ("HNN", "amalgam"):
            raise ValueError(f"unknown decomposition kind {self.kind!r}")
        if self.kind == "HNN" and not self.stable_letter:
            raise ValueError("HNN decomposition needs a stable letter")


def bending_map(H: ProjHyperplane, p: ProjPoint, t, n=None) -> ProjMap:
    nu = H.covector
    pv = p.rep
    if n is not None and n + 1 != nu.shape[0]:
        raise ValueError("dimension mismatch")
    if abs(nu @ pv) < 1e-12:
        raise IncidentPolePlane("apex lies on the wall")
    return ProjMap.from_matrix(bending_matrix(nu, pv, t))


def _rep(x):
    return x.rep if isinstance(x, ProjPoint) else np.asarray(x, dtype=float)


def _boundary_ring(domain, count=720):
    c = domain.interior_point()
    D = domain.chart.embed_direction_many(sphere_directions(domain.dim, count))
    return domain.boundary_points(np.broadcast_to(c, D.shape), D)


def cone_condition(domain: ConvexDomain, H: ProjHyperplane, p, samples=CONE_SAMPLES, seed=0, tol=1e-9) -> bool:
    """Sampled test that ``domain`` lies in the half-cone with apex ``p`` over
    ``H`` cut by the closure of the domain."""
    nu = H.covector
    pv = _rep(p)
    B = _boundary_ring(domain)
    vals = B @ nu
    if not (vals.max() > tol and vals.min() < -tol):
        raise WallMissesDomain("the wall does not meet the domain")
    if domain.position(pv) is not Position.OUTSIDE:
        raise PoleInsideDomain("the apex is not outside the closed domain")
    if abs(nu @ pv) < 1e-12:
        raise IncidentPolePlane("apex lies on the wall")
    rng = np.random.default_rng(seed)
    X = domain.sample_interior(samples, rng)
    M = X - np.outer((X @ nu) / (nu @ pv), pv)
    # same sign as the lift of x: x lies between the apex and the wall trace
    w = M @ domain.phi
    if np.any(w <= 0):
        return False
    gap = domain.boundary_gap(M)
    return bool(np.all(gap >= -tol))


def pli(domain: ConvexDomain, wall: WallSpec, t, samples=CONE_SAMPLES, seed=0, guard="raise"):
    """``domain`` with the far side of ``wall`` folded by ``A_{H,p,t}``."""
    ok = cone_condition(domain, wall.H, wall.p, samples, seed)
    if not ok:
        msg = "cone condition fails for this wall and apex"
        if guard == "raise":
            raise GeometryError(msg)
        warnings.warn(msg, stacklevel=2)
    k = wall.oriented
    pv = wall.p.rep
    c = domain.interior_point()
    if k @ c >= 0:
        # the reference point must sit on the unbent side
        X = domain.sample_interior(4000, np.random.default_rng(seed))
        X = X[X @ k < 0]
        if not len(X):
            raise GeometryError("no interior point on the unbent side")
        c = X[np.argsort(X @ k)[len(X) // 2]]
    return BentDomain(domain, k[None, :], pv[None, :], [1.0], t, c, labels=["wall"])


# -- deformed representations ---------------------------------------------


def deform(rep0: Representation, dec: Decomposition, a_t) -> Representation:
    a = np.asarray(getattr(a_t, "mat", a_t), dtype=float)
    ai = np.linalg.inv(a)
    images = {}
    for g, m in rep0.mats.items():
        if dec.kind == "HNN":
            images[g] = a @ m if g == dec.stable_letter else m
        else:
            images[g] = a @ m @ ai if g in dec.side_d else m
    return Representation(images, dec, name=rep0.name)


def relation_residuals(rep0: Representation, rep_t: Representation, dec: Decomposition):
    """Residuals of the decomposition relations for the deformed representation.

    HNN: ``rho_0(g) - rho_t(alpha)^-1 rho_0(d) rho_t(alpha)`` (the deformation
    is ``rho_0`` on the cut-open group) and ``rho_t(g) - rho_0(g)`` read
    through the generators. Amalgam: ``rho_t(g) - rho_t(d)``.
    """
    out = []
    for g, d in dec.pairs:
        if dec.kind == "HNN":
            al = rep_t.evaluate(dec.stable_letter)
            lhs = rep0.evaluate(g)
            rhs = np.linalg.solve(al, rep0.evaluate(d) @ al)
            out.append(float(np.abs(lhs - rhs).max()))
            out.append(float(np.abs(rep_t.evaluate(g) - lhs).max()))
        else:
            out.append(float(np.abs(rep_t.evaluate(g) - rep_t.evaluate(d)).max()))
    return out


def _root_side_word(dec: Decomposition, rep0: Representation, nu):
    if dec.kind == "HNN":
        return Word.parse(dec.stable_letter.upper())
    for g in dec.side_g:
        m = rep0.evaluate(g)
        moved = canonical(np.linalg.solve(m.T, nu))
        if np.abs(moved - canonical(nu)).max() > 1e-6:
            return Word.parse(g)
    raise GeometryError("no generator of the first factor moves the wall")


def wall_trace_point(E: ConvexDomain, k, pv):
    """Point of the wall ``k`` on the line from the base interior point to the apex."""
    c = E.interior_point()
    m = c - (k @ c) / (k @ pv) * pv
    return m * np.sign(m @ E.phi)


def hyperbolic_offset(E: QuadricDomain, m, direction, d):
    """Point at Hilbert distance ``d`` from ``m`` along ``direction``."""
    from hilbend.hilbert import MetricContext, point_at_distance

    ctx = MetricContext(E)
    X = ctx.lift(m)[0]
    V = direction - (direction @ ctx.chart.covector) * X
    return point_at_distance(ctx, X[None, :], V[None, :], d)[0]


def build_bent_domain(rep0: Representation, dec: Decomposition, base: QuadricDomain, wall0: WallSpec, params: BendParams, extra_words=(), check=True):
    """Deformed representation and truncated bent domain.

    Walls are the images ``rho_0(g) H`` for reduced words of length at most
    ``params.depth`` plus all prefixes of ``extra_words``. Returns
    ``(BentDomain, rho_t)``.
    """
    t = params.t
    nu = wall0.H.covector
    pv = wall0.p.rep
    a_t = bending_matrix(nu, pv, t)
    rep_t = deform(rep0, dec, a_t)
    if check:
        # the wall subgroup must preserve the wall
        for w in dec.wall_subgroup:
            m = rep0.evaluate(w)
            if np.abs(canonical(np.linalg.solve(m.T, nu)) - canonical(nu)).max() > 1e-9:
                raise GeometryError(f"wall subgroup element {w} moves the wall")
        res = relation_residuals(rep0, rep_t, dec)
        if res and max(res) > RELATION_TOL:
            raise RelationViolated(f"relation residual {max(res):.3g} exceeds {RELATION_TOL}")
    # orient: negative on the root side
    g_root = _root_side_word(dec, rep0, nu)
    q = rep0.evaluate(g_root)
    k_root = np.linalg.solve(q.T, nu)
    p_root = q @ pv
    probe = wall_trace_point(base, k_root, p_root)
    side = np.sign(nu @ probe)
    k0 = -side * nu  # root side negative
    if dec.kind == "HNN":
        other = rep0.evaluate(dec.stable_letter)
        probe2 = wall_trace_point(base, np.linalg.solve(other.T, nu), other @ pv)
        if np.sign(k0 @ probe2) <= 0:
            raise GeometryError("the stable letter does not move the wall across itself")
    # root point just on the root side of H
    m0 = wall_trace_point(base, k0, pv)
    dirn = -np.sign(k0 @ pv) * pv
    root = hyperbolic_offset(base, m0, dirn, ROOT_OFFSET)
    if k0 @ root >= 0:
        root = hyperbolic_offset(base, m0, -dirn, ROOT_OFFSET)
    words = reduced_words(rep0.generators, params.depth)
    for w in extra_words:
        words.extend(Word.coerce(w).prefixes())
    seen = {}
    for w in words:
        g = rep0.evaluate(w)
        gi = rep0.evaluate(w.inverse())
        k = k0 @ gi
        key = tuple(np.round(canonical(k), 9) + 0.0)
        if key not in seen:
            seen[key] = (w, k, g @ pv, g, gi)
    labels = [v[0] for v in seen.values()]
    K = np.array([v[1] for v in seen.values()])
    P = np.array([v[2] for v in seen.values()])
    sig = -np.sign(K @ root)
    K = K * sig[:, None]
    if t == 0:
        eye = np.eye(base.dim + 1)
        A = Ai = np.broadcast_to(eye, (len(K),) + eye.shape).copy()
        walls_mp = _conjugated_bends(rep0, labels, sig, nu, pv, t, k0)[2]
    else:
        A, Ai, walls_mp = _conjugated_bends(rep0, labels, sig, nu, pv, t, k0)
    dom = BentDomain(base, K, P, sig, t, root, labels=labels, bend_maps=(A, Ai), walls_mp=walls_mp)
    dom.rep0, dom.rep_t, dom.a_t = rep0, rep_t, a_t
    dom.wall0 = WallSpec(wall0.H, wall0.p, side=int(np.sign(wall0.H.covector @ root)))
    return dom, rep_t


MP_DIGITS = 50


def _conjugated_bends(rep0, labels, sig, nu, pv, t, k0):
    """Bending maps ``rho_0(w) a_{+-t} rho_0(w)^-1`` and the walls they fix,
    in extended precision."""
    import mpmath

    with mpmath.workdps(MP_DIGITS):
        k = len(nu)
        mnu = mpmath.matrix([[float(x) for x in nu]])
        mp_ = mpmath.matrix([float(x) for x in pv])
        outer = mp_ * mnu / (mnu * mp_)[0]
        mt = mpmath.mpf(float(t))

        def a(s):
            return mpmath.exp(-s) * (mpmath.eye(k) + mpmath.expm1(k * s) * outer)

        a_plus, a_minus = a(mt), a(-mt)
        gens = {g: mpmath.matrix(m.tolist()) for g, m in rep0.mats.items()}
        ginv = {g: mpmath.matrix(m.tolist()) ** -1 for g, m in rep0.mats.items()}
        mk0 = mpmath.matrix([[float(x) for x in k0]])
        A, Ai, Kw = [], [], []
        for w, s in zip(labels, sig):
            g = mpmath.eye(k)
            gi = mpmath.eye(k)
            for name, e in w.letters:
                g = g * (gens[name] if e > 0 else ginv[name])
                gi = (ginv[name] if e > 0 else gens[name]) * gi
            A.append(g * (a_plus if s > 0 else a_minus) * gi)
            Ai.append(g * (a_minus if s > 0 else a_plus) * gi)
            Kw.append(mk0 * gi * int(s))
    return A, Ai, Kw


def punctured_torus_bend(t, depth=6, extra_words=()):
    """Bent domain and deformed representation for the punctured-torus group."""
    from hilbend.groups import KLEIN_FORM, punctured_torus_rep

    rep0 = punctured_torus_rep()
    E = QuadricDomain(KLEIN_FORM, np.array([0.0, 0.0, 1.0]))
    wall0 = punctured_torus_wall()
    return build_bent_domain(rep0, rep0.decomposition, E, wall0, BendParams(t, depth, 2), extra_words)


def punctured_torus_wall():
    """Wall through the axis endpoints of ``a`` with its pole (the eigenvalue-1
    direction)."""
    from hilbend.groups import PT_A, sl2_adjoint

    m = sl2_adjoint(PT_A)
    w, V = np.linalg.eig(m)
    k = int(np.argmin(np.abs(w - 1.0)))
    pv = np.real(V[:, k])
    nu = np.diag([1.0, 1.0, -1.0]) @ pv
    return WallSpec(ProjHyperplane(nu), ProjPoint(pv))
