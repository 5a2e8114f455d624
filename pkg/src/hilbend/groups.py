"""Finitely generated representations and the questions asked about them.

Words are written over single-letter generator names; an upper-case letter
is the inverse of its lower-case generator (``"aB"`` is ``a b^-1``).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from hilbend.convex import ConvexDomain, Position, QuadricDomain
from hilbend.errors import (
    GeometryError,
    NoHyperbolicFound,
    NotOnBoundary,
    StabilizerNontrivial,
)
from hilbend.projcore import ProjMap, ProjPoint, canonical

RANK_TOL = 1e-8
CLASSIFY_TOL = 1e-6
CLUSTER_TOL = 1e-4
KLEIN_FORM = np.diag([1.0, 1.0, -1.0])


# -- words ----------------------------------------------------------------


@dataclass(frozen=True)
class Word:
    letters: tuple = ()

    @classmethod
    def parse(cls, text):
        out = []
        for ch in text:
            if not ch.isalpha():
                raise ValueError(f"bad letter {ch!r} in word {text!r}")
            out.append((ch.lower(), -1 if ch.isupper() else 1))
        return cls(tuple(out))

    @classmethod
    def coerce(cls, w):
        return w if isinstance(w, Word) else cls.parse(w)

    def __str__(self):
        return "".join(g if e > 0 else g.upper() for g, e in self.letters)

    def __len__(self):
        return len(self.letters)

    def __mul__(self, other):
        return Word(self.letters + Word.coerce(other).letters).reduced()

    def __pow__(self, k):
        if k < 0:
            return self.inverse() ** (-k)
        return Word(self.letters * k).reduced()

    def inverse(self):
        return Word(tuple((g, -e) for g, e in reversed(self.letters)))

    def reduced(self):
        out = []
        for g, e in self.letters:
            if out and out[-1][0] == g and out[-1][1] == -e:
                out.pop()
            else:
                out.append((g, e))
        return Word(tuple(out))

    def prefixes(self):
        return [Word(self.letters[:k]) for k in range(len(self.letters) + 1)]


def reduced_words(generators, max_len, min_len=0):
    """All freely reduced words of length in ``[min_len, max_len]``, shortlex order."""
    letters = [(g, 1) for g in generators] + [(g, -1) for g in generators]
    level = [()]
    out = [Word(())] if min_len == 0 else []
    for length in range(1, max_len + 1):
        nxt = []
        for w in level:
            for g, e in letters:
                if w and w[-1] == (g, -e):
                    continue
                nxt.append(w + ((g, e),))
        level = nxt
        if length >= min_len:
            out.extend(Word(w) for w in level)
    return out


def random_words(generators, count, max_len, seed, min_len=1):
    """Uniform random reduced words, lengths uniform in ``[min_len, max_len]``."""
    rng = np.random.default_rng(seed)
    letters = [(g, 1) for g in generators] + [(g, -1) for g in generators]
    out = []
    for _ in range(count):
        n = int(rng.integers(min_len, max_len + 1))
        w = []
        while len(w) < n:
            g, e = letters[int(rng.integers(len(letters)))]
            if w and w[-1] == (g, -e):
                continue
            w.append((g, e))
        out.append(Word(tuple(w)))
    return out


# -- representations ------------------------------------------------------


class Representation:
    """Generator name -> determinant-one matrix, with an optional
    decomposition describing where the group splits."""

    def __init__(self, images, decomposition=None, name=None):
        self.mats = {}
        for g, m in images.items():
            m = np.asarray(getattr(m, "mat", m), dtype=float)
            if abs(np.linalg.det(m) - 1.0) > 1e-9:
                raise GeometryError(f"image of {g!r} has determinant {np.linalg.det(m)}")
            self.mats[g] = m
        self.inv = {g: np.linalg.inv(m) for g, m in self.mats.items()}
        self.decomposition = decomposition
        self.name = name

    @property
    def generators(self):
        return list(self.mats)

    @property
    def images(self):
        return {g: ProjMap(m) for g, m in self.mats.items()}

    @property
    def size(self):
        return next(iter(self.mats.values())).shape[0]

    def __call__(self, word):
        return self.evaluate(word)

    def evaluate(self, word):
        out = np.eye(self.size)
        for g, e in Word.coerce(word).letters:
            out = out @ (self.mats[g] if e > 0 else self.inv[g])
        return out

    def map(self, word) -> ProjMap:
        return ProjMap.from_matrix(self.evaluate(word))


def sl2_adjoint(g):
    """Adjoint action of ``g`` in SL2 on sl2 with coordinates (a, b, c) for
    ``[[a, b + c], [b - c, -a]]``; the invariant form is ``diag(1, 1, -1)``."""
    g = np.asarray(g, dtype=float)
    gi = np.linalg.inv(g)
    basis = [np.array([[1.0, 0], [0, -1]]), np.array([[0.0, 1], [1, 0]]), np.array([[0.0, 1], [-1, 0]])]
    cols = []
    for X in basis:
        Y = g @ X @ gi
        cols.append([Y[0, 0], 0.5 * (Y[0, 1] + Y[1, 0]), 0.5 * (Y[0, 1] - Y[1, 0])])
    return np.array(cols).T


PT_A = np.array([[1.0, 1.0], [1.0, 2.0]])
PT_B = np.array([[1.0, -1.0], [-1.0, 2.0]])


def punctured_torus_rep():
    """Once-punctured torus group in SO(2,1) with its non-separating splitting
    along the closed geodesic of ``a``; ``b`` is the stable letter."""
    from hilbend.bend import Decomposition

    dec = Decomposition(
        kind="HNN",
        wall_subgroup=["a"],
        stable_letter="b",
        pairs=[("Bab", "a")] + [("B" + "a" * k + "b", "a" * k) for k in (2, 3)],
    )
    return Representation({"a": sl2_adjoint(PT_A), "b": sl2_adjoint(PT_B)}, dec, name="punctured-torus")


def so_q_membership(g, q, tol=1e-9) -> bool:
    g = np.asarray(getattr(g, "mat", g), dtype=float)
    q = np.asarray(q, dtype=float)
    return bool(np.linalg.norm(g.T @ q @ g - q) < tol)


# -- classification -------------------------------------------------------


class ElementKind(enum.Enum):
    HYPERBOLIC = "Hyperbolic"
    PARABOLIC = "Parabolic/Unipotent"
    ELLIPTIC = "EllipticOrIdentity"


@dataclass
class Classification:
    kind: ElementKind
    eigenvalues: np.ndarray
    loxodromic: bool
    attracting: ProjPoint | None = None
    repelling: ProjPoint | None = None


def clustered_eigenvalues(m, cluster_tol=CLUSTER_TOL):
    """Eigenvalues with near-coincident groups replaced by their mean.

    A defective eigenvalue of multiplicity k is perturbed by O(eps^(1/k)) in
    floating point while the group mean stays O(eps) accurate.
    """
    m = np.asarray(m, dtype=float)
    ev = np.linalg.eigvals(m)
    # a k-fold defective eigenvalue moves by about (eps |m|)^(1/k)
    cluster_tol = max(cluster_tol, 10 * (np.finfo(float).eps * np.linalg.norm(m, 2)) ** (1 / len(m)))
    order = np.argsort(-np.abs(ev), kind="stable")
    ev = ev[order]
    out = ev.copy()
    used = np.zeros(len(ev), dtype=bool)
    for i in range(len(ev)):
        if used[i]:
            continue
        grp = np.nonzero(~used & (np.abs(ev - ev[i]) < cluster_tol * max(1.0, abs(ev[i]))))[0]
        out[grp] = ev[grp].mean()
        used[grp] = True
    return out


def _real_eigvec(m, lam):
    w, V = np.linalg.eig(m)
    k = int(np.argmin(np.abs(w - lam)))
    v = np.real(V[:, k])
    return v / np.linalg.norm(v)


def classify_element(g, tol=CLASSIFY_TOL) -> Classification:
    m = np.asarray(getattr(g, "mat", g), dtype=float)
    ev = clustered_eigenvalues(m)
    mod = np.abs(ev)
    ev2 = clustered_eigenvalues(m @ m)
    simple = len(ev2) == len(np.unique(np.round(ev2, 8)))
    lox = bool(simple and np.all(np.abs(ev2.imag) < tol) and np.all(ev2.real > 0))
    rho = mod.max()
    top = ev[int(np.argmax(mod))]
    if rho > 1 + tol and abs(top.imag) < tol * rho and top.real > 0:
        low = ev[int(np.argmin(mod))]
        att = ProjPoint(_real_eigvec(m, top.real))
        rep = ProjPoint(_real_eigvec(m, low.real)) if abs(low.imag) < tol else None
        return Classification(ElementKind.HYPERBOLIC, ev, lox, att, rep)
    if np.all(np.abs(ev - 1.0) < tol):
        if np.abs(m - np.eye(len(m))).max() < tol * max(1.0, np.abs(m).max()):
            return Classification(ElementKind.ELLIPTIC, ev, lox)
        return Classification(ElementKind.PARABOLIC, ev, lox)
    return Classification(ElementKind.ELLIPTIC, ev, lox)


def irreducibility_dimension(rep: Representation, max_word_len) -> int:
    """Dimension of the span of the images of all words of length at most
    ``max_word_len``; the full matrix dimension certifies irreducibility."""
    words = reduced_words(rep.generators, max_word_len)
    M = np.array([rep.evaluate(w).ravel() for w in words])
    s = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(s > RANK_TOL * s[0]))


# -- limit set ------------------------------------------------------------


def attracting_point(rep: Representation, word, domain: ConvexDomain | None = None):
    """Attracting eigenline of a hyperbolic word, signed into ``domain``'s cone."""
    c = classify_element(rep.evaluate(word))
    if c.kind is not ElementKind.HYPERBOLIC:
        return None
    v = c.attracting.rep
    if domain is not None and v @ domain.phi < 0:
        v = -v
    return v


def limit_set_sample(rep: Representation, domain: ConvexDomain, word_len, count, seed, tol=1e-6, check=True, words=None):
    """Attracting points of ``count`` random hyperbolic words (non-hyperbolic
    draws are skipped). With ``check`` every point must be within ``tol`` of
    the boundary of ``domain``."""
    if words is None:
        words = random_words(rep.generators, 4 * count, word_len, seed)
    pts = []
    for w in words:
        v = attracting_point(rep, w, domain)
        if v is not None:
            pts.append(v)
        if len(pts) == count:
            break
    if not pts:
        raise NoHyperbolicFound("no sampled word is hyperbolic")
    P = np.array(pts)
    if check:
        gap = domain.boundary_gap(P)
        if np.any(np.abs(gap) > tol):
            raise NotOnBoundary(f"limit point off the boundary by {np.abs(gap).max():.3g}")
    return [ProjPoint(p) for p in P]


# -- Dirichlet domains ----------------------------------------------------


def hyperboloid_lift(E: QuadricDomain, X):
    """Rows rescaled to ``x^T Q x = -1`` in the domain's component."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    X = X * np.sign(X @ E.phi)[:, None]
    return X / np.sqrt(-E.form_values(X))[:, None]


def bisector(E: QuadricDomain, x0, y0):
    """Covector of the hyperbolic bisector, positive on the side of ``x0``."""
    xh, yh = hyperboloid_lift(E, np.array([x0, y0]))
    return E.Q @ (xh - yh)


class DirichletDomain(ConvexDomain):
    """``{x in E : d(x, x0) <= d(x, g x0)}`` over the sampled words ``g``.

    ``walls`` holds ``(word, covector)`` for the active bisectors only.
    """

    def __init__(self, base: QuadricDomain, x0, walls):
        self.base = base
        self.dim = base.dim
        self.phi = base.phi
        self.x0 = base.lift(x0)[0]
        self.walls = walls
        self.A = np.array([k for _, k in walls]).reshape(len(walls), self.dim + 1)

    def interior_point(self):
        return self.x0

    def exit_param(self, X, V):
        X, V = np.atleast_2d(X), np.atleast_2d(V)
        s = self.base.exit_param(X, V)
        if len(self.walls):
            a0, a1 = X @ self.A.T, V @ self.A.T
            with np.errstate(divide="ignore", invalid="ignore"):
                h = np.where(a1 < 0, -a0 / a1, np.inf)
            h = np.where(h > 0, h, np.where(a1 < 0, 0.0, np.inf))
            s = np.minimum(s, h.min(axis=1))
        return s

    def translate(self, g):
        from hilbend.convex import TransformedDomain

        return TransformedDomain(self, g)


def _wall_active(E, k, others, tol=1e-12, samples=4000, rng=None):
    """Does the hyperplane ``k`` carry a facet of ``E ∩ {others >= 0}``?"""
    n = E.dim
    # parameterize the wall's slice of E: base point = closest point to the center
    c = E.interior_point()
    basis = np.linalg.svd(k[None, :])[2][1:]  # vectors spanning ker k
    if n == 2:
        # the slice is a segment; clip it by the other half-planes exactly
        u, w = basis
        # find the two endpoints of the wall in E along u + s w
        a = w @ E.Q @ w
        b = u @ E.Q @ w
        cc = u @ E.Q @ u
        disc = b * b - a * cc
        if disc <= 0:
            return False
        r = np.sqrt(disc)
        P = np.array([u + ((-b + r) / a) * w, u + ((-b - r) / a) * w])
        P = P * np.sign(P @ E.phi)[:, None]
        P = P / (P @ E.phi)[:, None]
        lo, hi = 0.0, 1.0
        d0, d1 = P[0], P[1] - P[0]
        for o in others:
            a0, a1 = o @ d0, o @ d1
            if abs(a1) < 1e-300:
                if a0 < 0:
                    return False
                continue
            s = -a0 / a1
            if a1 > 0:
                lo = max(lo, s)
            else:
                hi = min(hi, s)
        return hi - lo > 1e-9
    rng = np.random.default_rng(0) if rng is None else rng
    # sample the wall slice: rays from the projection of c inside the hyperplane
    m = c - (k @ c) / (k @ k) * k
    if m @ E.Q @ m >= 0:
        return False
    D = rng.standard_normal((samples, n - 1)) @ basis[: n - 1] if n > 1 else np.zeros((samples, n + 1))
    D -= np.outer(D @ E.phi, m) / (m @ E.phi)
    s = E.exit_param(np.broadcast_to(m, D.shape), D)
    P = m + (rng.random(samples) * s)[:, None] * D
    if not len(others):
        return True
    ok = np.all(P @ np.array(others).T >= -tol, axis=1)
    return bool(np.any(ok))


def dirichlet_domain(rep: Representation, E: QuadricDomain, x0, word_len, retries=5, seed=0, tol=1e-9):
    """Dirichlet domain of ``rep`` centred at ``x0`` over reduced words of length
    ``1..word_len``. ``x0`` is perturbed when a word fixes it."""
    rng = np.random.default_rng(seed)
    x = E.lift(x0.rep if isinstance(x0, ProjPoint) else x0)[0]
    if E.position(x) is not Position.INSIDE:
        raise GeometryError("Dirichlet centre must be interior")
    words = reduced_words(rep.generators, word_len, min_len=1)
    for _attempt in range(retries + 1):
        images = {}
        fixed = False
        for w in words:
            m = rep.evaluate(w)
            if np.abs(m - np.eye(len(m))).max() < tol:
                # acts trivially: no bisector
                continue
            y = m @ x
            y = y * np.sign(y @ E.phi)
            key = tuple(np.round(canonical(y), 10))
            if np.linalg.norm(canonical(y) - canonical(x)) < tol:
                fixed = True
                break
            images.setdefault(key, (w, y))
        if not fixed:
            break
        x = E.lift(x + 1e-3 * rng.standard_normal(x.shape) * np.linalg.norm(x))[0]
    else:
        raise StabilizerNontrivial("every perturbation of the centre has a nontrivial stabilizer")
    cand = [(w, bisector(E, x, y)) for w, y in images.values()]
    cand = [(w, k / np.linalg.norm(k)) for w, k in cand]
    active = []
    for i, (w, k) in enumerate(cand):
        others = [kk for j, (_, kk) in enumerate(cand) if j != i]
        if _wall_active(E, k, others, rng=np.random.default_rng(seed + i)):
            active.append((w, k))
    return DirichletDomain(E, x, active)
