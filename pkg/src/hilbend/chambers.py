"""Piecewise-projective domains obtained by bending a base domain along a
finite family of disjoint walls.

Chamber 0 is the root (identity map). Chamber ``i + 1`` is the piece beyond
wall ``i`` as seen from the root; its map is the parent's map composed with
the bending transformation of wall ``i``. Wall covectors are oriented so
the root side is negative.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from hilbend.convex import ConvexDomain, QuadricDomain, _as_rows
from hilbend.errors import GeometryError, NumericalFailure, WallsIntersect
from hilbend.projcore import ProjHyperplane, ProjMap

MAX_CROSSINGS = 4096
POLYGON_VERTICES = 8192
POLISH_COND = 1e6
ARC_SLACK = 1e-9


def bending_matrix(nu, p, t):
    """``exp(-t) (I + (exp((n+1) t) - 1) p nu^T / (nu . p))``."""
    nu = np.asarray(nu, dtype=float)
    p = np.asarray(p, dtype=float)
    k = nu.shape[0]
    return np.exp(-t) * (np.eye(k) + np.expm1(k * t) * np.outer(p, nu) / (nu @ p))


@dataclass
class Chamber:
    id: int
    map: ProjMap
    base_walls: list
    parent: tuple | None  # (chamber id, wall index)


class BentDomain(ConvexDomain):
    """Base domain bent along walls.

    Parameters
    ----------
    base : ConvexDomain
    covectors : (W, n+1) array, root side negative
    poles : (W, n+1) array of bending apexes
    signs : (W,) array of +-1 multiplying ``t`` at each wall
    t : float
    root : lift of a point in the root chamber
    labels : optional per-wall labels (words)
    bend_maps : optional pair of (W, n+1, n+1) arrays with each wall's bending
        map and its inverse, for callers that can form them more accurately
        than the rank-one formula (e.g. by conjugating a fixed map)
    """

    def __init__(self, base: ConvexDomain, covectors, poles, signs, t, root, labels=None, phi=None, check_disjoint=True, bend_maps=None, walls_mp=None):
        self.base = base
        self.dim = base.dim
        self.t = float(t)
        K = np.atleast_2d(np.asarray(covectors, dtype=float)).reshape(-1, self.dim + 1)
        self.K = K / np.linalg.norm(K, axis=1, keepdims=True)
        self.P = np.atleast_2d(np.asarray(poles, dtype=float)).reshape(-1, self.dim + 1)
        self.signs = np.asarray(signs, dtype=float).reshape(-1)
        self.labels = list(labels) if labels is not None else [None] * len(self.K)
        self.root = base.lift(root)[0]
        self._bend_maps = bend_maps
        self._walls_mp = walls_mp
        self._Cimg = None
        self._conic_mp = {}
        if np.any(self.K @ self.root >= 0):
            raise GeometryError("root point is not on the root side of every wall")
        if check_disjoint and isinstance(base, QuadricDomain):
            self._check_disjoint()
        self._build_tree()
        self._build_maps()
        self._arcs = None
        if isinstance(base, QuadricDomain) and self.dim == 2:
            self._build_arcs()
        if phi is None:
            phi = self._choose_phi()
        self.phi = phi / np.linalg.norm(phi)
        c = self.dev(base.interior_point()[None, :])[0]
        self._center = c / (self.phi @ c)

    # -- construction ----------------------------------------------------

    def _check_disjoint(self):
        Qi = np.linalg.inv(self.base.Q)
        G = self.K @ Qi @ self.K.T
        d = np.diag(G)
        cross = G ** 2 < np.outer(d, d) * (1 - 1e-9)
        np.fill_diagonal(cross, False)
        bad = np.argwhere(np.triu(cross, 1))
        if len(bad) and self._walls_mp is not None:
            # nearly tangent tiny walls are beyond float resolution
            bad = [b for b in bad if self._crosses_mp(*b)]
        if len(bad):
            i, j = bad[0]
            raise WallsIntersect(f"walls {self.labels[i]} and {self.labels[j]} cross inside the base")

    def _crosses_mp(self, i, j):
        import mpmath

        with mpmath.workdps(50):
            Qi = mpmath.matrix(np.linalg.inv(self.base.Q).tolist())
            a, b = self._walls_mp[i], self._walls_mp[j]
            g = [[(u * Qi * v.T)[0] for v in (a, b)] for u in (a, b)]
            return g[0][1] ** 2 < g[0][0] * g[1][1]

    def wall_points(self):
        """One point of each wall inside the base: the wall's trace on the
        line from the root to its pole."""
        r = self.root
        M = r - ((self.K @ r) / np.einsum("ij,ij->i", self.K, self.P))[:, None] * self.P
        return M * np.sign(M @ self.base.phi)[:, None]

    def _last_crossed(self, Y, exclude=None):
        """For each row of ``Y`` the index of the last wall crossed on the
        segment from the root (``-1`` when none)."""
        r = self.root
        kr = self.K @ r  # negative
        Yn = Y / (Y @ self.base.phi)[:, None]
        ky = Yn @ self.K.T  # (m, W)
        sep = ky > 0
        if exclude is not None:
            sep[np.arange(len(exclude)), exclude] = False
        with np.errstate(divide="ignore", invalid="ignore"):
            s = np.where(sep, kr / (kr - ky), -np.inf)
        idx = np.argmax(s, axis=1)
        return np.where(np.isfinite(s[np.arange(len(idx)), idx]), idx, -1)

    def _build_tree(self):
        W = len(self.K)
        parents = np.full(W, -1)
        M = self.wall_points()
        for start in range(0, W, 512):
            sl = slice(start, min(W, start + 512))
            parents[sl] = self._last_crossed(M[sl], exclude=np.arange(sl.start, sl.stop))
        self.parent = parents
        depth = np.zeros(W, dtype=int)
        order = []
        children = [[] for _ in range(W + 1)]
        for w in range(W):
            children[parents[w] + 1].append(w)
        stack = [(-1, 0)]
        while stack:
            node, d = stack.pop()
            for w in children[node + 1]:
                depth[w] = d + 1
                order.append(w)
                stack.append((w, d + 1))
        if len(order) != W:
            raise GeometryError("wall tree is not connected")
        self.tree_depth = depth
        self.children = children
        self._order = order

    def _build_maps(self):
        W = len(self.K)
        k = self.dim + 1
        T = np.empty((W + 1, k, k))
        Ti = np.empty((W + 1, k, k))
        T[0] = Ti[0] = np.eye(k)
        if self._bend_maps is not None and not isinstance(self._bend_maps[0], np.ndarray):
            self._build_maps_mp(T, Ti)
        for w in self._order if not getattr(self, "_mp_done", False) else ():
            if self._bend_maps is not None:
                A, Ai = self._bend_maps[0][w], self._bend_maps[1][w]
            else:
                A = bending_matrix(self.K[w], self.P[w], self.signs[w] * self.t)
                Ai = bending_matrix(self.K[w], self.P[w], -self.signs[w] * self.t)
            T[w + 1] = T[self.parent[w] + 1] @ A
            Ti[w + 1] = Ai @ Ti[self.parent[w] + 1]
        self.T = T
        self.Tinv = Ti
        if not getattr(self, "_mp_done", False):
            L = np.einsum("wj,wjk->wk", self.K, Ti[self.parent + 1]) if W else np.zeros((0, k))
            self._Limg = L / np.linalg.norm(L, axis=1, keepdims=True)
            if isinstance(self.base, QuadricDomain):
                C = np.einsum("cji,jk,ckl->cil", Ti, self.base.Q, Ti)
                self._Cimg = C / np.abs(C).max(axis=(1, 2), keepdims=True)
        # padded child table for vectorized walks
        width = max(1, max(len(c) for c in self.children))
        self._child_table = np.full((W + 1, width), -1)
        for c, ch in enumerate(self.children):
            self._child_table[c, : len(ch)] = ch

    def _build_maps_mp(self, T, Ti):
        """Tree products in extended precision; deep chamber maps are very
        ill-conditioned and float64 products lose every digit."""
        import mpmath

        A, Ai = self._bend_maps
        k = self.dim + 1
        with mpmath.workdps(50):
            Tm = {-1: mpmath.eye(k)}
            Tim = {-1: mpmath.eye(k)}
            for w in self._order:
                par = int(self.parent[w])
                Tm[w] = Tm[par] * A[w]
                Tim[w] = Ai[w] * Tim[par]
                T[w + 1] = np.array(Tm[w].tolist(), dtype=float)
                Ti[w + 1] = np.array(Tim[w].tolist(), dtype=float)
        self._mp_done = True
        self._T_mp = Tm
        self._Tinv_mp = Tim
        # image-space walls and conics, rounded only at the end
        W = len(self._order)
        k = self.dim + 1
        L = np.zeros((W, k))
        with mpmath.workdps(50):
            for w in range(W):
                kw = self._walls_mp[w] if self._walls_mp is not None else mpmath.matrix([self.K[w].tolist()])
                v = kw * Tim[int(self.parent[w])]
                L[w] = [float(x / mpmath.norm(v)) for x in v]
            self._Limg = L
            if isinstance(self.base, QuadricDomain):
                cond = np.linalg.norm(T, axis=(1, 2)) * np.linalg.norm(Ti, axis=(1, 2))
                Q = mpmath.matrix(self.base.Q.tolist())
                C = np.empty((W + 1, k, k))
                C[0] = self.base.Q / np.abs(self.base.Q).max()
                self._conic_mp = {}
                for w in range(W):
                    M = Tim[w].T * Q * Tim[w]
                    M = M / mpmath.mnorm(M, 1)
                    C[w + 1] = np.array(M.tolist(), dtype=float)
                    if cond[w + 1] > POLISH_COND:
                        self._conic_mp[w] = M
                self._Cimg = C

    def _choose_phi(self):
        V = self._boundary_samples()
        V = V / np.linalg.norm(V, axis=1, keepdims=True)
        phi = self.base.phi
        if np.min(V @ phi) > 1e-3:
            return phi
        from scipy.optimize import linprog

        k = self.dim + 1
        c = np.zeros(k + 1)
        c[-1] = -1.0
        A_ub = np.hstack([-V, np.ones((len(V), 1))])
        res = linprog(c, A_ub=A_ub, b_ub=np.zeros(len(V)), bounds=[(-1, 1)] * k + [(None, 1)], method="highs")
        if res.status != 0 or res.x[-1] <= 0:
            raise GeometryError("bent domain is not properly convex in any chart")
        return res.x[:k]

    def _boundary_samples(self):
        if self._arcs is not None:
            return self._poly_lifts
        c = self.base.interior_point()
        from hilbend.convex import sphere_directions

        D = self.base.chart.embed_direction_many(sphere_directions(self.dim, 2048, np.random.default_rng(0)))
        B = self.base.boundary_points(np.broadcast_to(c, D.shape), D)
        return self.dev(B)

    # -- chamber lookup --------------------------------------------------

    def chamber_of_base(self, Y):
        """Chamber index of base-coordinate rows (0 = root)."""
        return self._last_crossed(_as_rows(Y)) + 1

    def dev(self, Y):
        """Developing map on base-coordinate rows."""
        Y = _as_rows(Y)
        c = self.chamber_of_base(Y)
        return np.einsum("mij,mj->mi", self.T[c], Y)

    def locate(self, X):
        """Chamber index of image-space rows by walking down the tree."""
        X = _as_rows(X)
        cur = np.zeros(len(X), dtype=int)
        active = np.ones(len(X), dtype=bool)
        for _ in range(len(self.K) + 1):
            if not np.any(active):
                break
            idx = np.nonzero(active)[0]
            ch = self._child_table[cur[idx]]
            vals = np.einsum("mcj,mj->mc", self._Limg[np.maximum(ch, 0)], X[idx])
            vals = np.where(ch >= 0, vals, -np.inf)
            j = np.argmax(vals, axis=1)
            move = vals[np.arange(len(idx)), j] > 0
            cur[idx[move]] = ch[np.nonzero(move)[0], j[move]] + 1
            active[idx[~move]] = False
        return cur

    @property
    def chambers(self):
        out = [Chamber(0, ProjMap.from_matrix(self.T[0]), [ProjHyperplane(self.K[w]) for w in self.children[0]], None)]
        for w in range(len(self.K)):
            walls = [ProjHyperplane(self.K[w])] + [ProjHyperplane(self.K[c]) for c in self.children[w + 1]]
            out.append(Chamber(w + 1, ProjMap.from_matrix(self.T[w + 1]), walls, (int(self.parent[w]) + 1, w)))
        return out

    def interior_point(self):
        return self._center

    # -- exit oracle -----------------------------------------------------

    def exit_param(self, X, V):
        X, V = _as_rows(X), _as_rows(V)
        if self._arcs is not None:
            return self._exit_arcs(X, V)
        if self._Cimg is not None:
            return self._exit_image(X, V)
        return self._exit_walk(X, V)

    def _exit_image(self, X, V):
        """Walk along the ray in image space: chamber walls are image lines
        and each chamber's boundary piece is an image conic."""
        m = len(X)
        cur = self.locate(X)
        s0 = np.zeros(m)
        out = np.full(m, np.inf)
        active = np.ones(m, dtype=bool)
        rows = np.arange(m)
        for _ in range(MAX_CROSSINGS):
            if not np.any(active):
                return out
            idx = rows[active]
            c = cur[idx]
            Z = X[idx] + s0[idx, None] * V[idx]
            W = V[idx]
            r = _conic_exit(self._Cimg[c], Z, W)
            best = r
            nxt = np.full(len(idx), -2)
            wall_r = np.full(len(idx), np.inf)
            wall_n = np.full(len(idx), -2)
            own = c - 1
            has_own = own >= 0
            L = self._Limg[np.maximum(own, 0)]
            l0 = np.einsum("mj,mj->m", L, Z)
            l1 = np.einsum("mj,mj->m", L, W)
            with np.errstate(divide="ignore", invalid="ignore"):
                sw = np.where(has_own & (l1 < 0), np.maximum(-l0 / l1, 0.0), np.inf)
            wall_r, wall_n = sw, np.where(np.isfinite(sw), self.parent[np.maximum(own, 0)] + 1, -2)
            ch = self._child_table[c]
            L = self._Limg[np.maximum(ch, 0)]
            l0 = np.einsum("mcj,mj->mc", L, Z)
            l1 = np.einsum("mcj,mj->mc", L, W)
            with np.errstate(divide="ignore", invalid="ignore"):
                sw = np.where((ch >= 0) & (l1 > 0), np.maximum(-l0 / l1, 0.0), np.inf)
            j = np.argmin(sw, axis=1)
            swj = sw[np.arange(len(idx)), j]
            take = swj < wall_r
            wall_r = np.where(take, swj, wall_r)
            wall_n = np.where(take, ch[np.arange(len(idx)), j] + 1, wall_n)
            # polish conic exits in ill-conditioned chambers before deciding
            if self._conic_mp:
                # float conic roots are only good to ~1e-8 of the ray scale here
                margin = 1e-6 * np.linalg.norm(Z, axis=1) / np.linalg.norm(W, axis=1)
                for i in np.nonzero(c > 0)[0]:
                    C = self._conic_mp.get(int(c[i]) - 1)
                    if C is not None and not r[i] > wall_r[i] + margin[i]:
                        g = idx[i]
                        best[i] = _mp_conic_exit(C, X[g] + s0[g] * V[g], V[g])
            take = wall_r < best
            best = np.where(take, wall_r, best)
            nxt = np.where(take, wall_n, nxt)
            # entered through a wall at the boundary itself
            best = np.where(~np.isfinite(best) & (s0[idx] > 0), 0.0, best)
            done = nxt == -2
            out[idx[done]] = s0[idx[done]] + best[done]
            active[idx[done]] = False
            mv = idx[~done]
            s0[mv] = s0[mv] + best[~done]
            cur[mv] = nxt[~done]
        raise NumericalFailure("chamber walk did not terminate")

    def _exit_walk(self, X, V):
        m = len(X)
        cur = self.locate(X)
        s0 = np.zeros(m)
        out = np.full(m, np.inf)
        active = np.ones(m, dtype=bool)
        for _ in range(MAX_CROSSINGS):
            if not np.any(active):
                return out
            idx = np.nonzero(active)[0]
            c = cur[idx]
            Ti = self.Tinv[c]
            Y = np.einsum("mij,mj->mi", Ti, X[idx] + s0[idx, None] * V[idx])
            Wd = np.einsum("mij,mj->mi", Ti, V[idx])
            sb = self.base.exit_param(Y, Wd)
            # rounding can leave a crossing point just outside a leaf chamber: exit there
            sb = np.where(~np.isfinite(sb) & (s0[idx] > 0), 0.0, sb)
            # walls bounding the chamber: own wall (leaving towards the parent) and children
            ch = self._child_table[c]
            best = sb.copy()
            nxt = np.full(len(idx), -2)
            own = c - 1
            has_own = own >= 0
            if np.any(has_own):
                k = self.K[np.maximum(own, 0)]
                a0 = np.einsum("mj,mj->m", k, Y)
                a1 = np.einsum("mj,mj->m", k, Wd)
                with np.errstate(divide="ignore", invalid="ignore"):
                    sw = np.where(has_own & (a1 < 0), -a0 / a1, np.inf)
                sw = np.maximum(sw, 0.0)
                take = sw < best
                best = np.where(take, sw, best)
                nxt = np.where(take, self.parent[np.maximum(own, 0)] + 1, nxt)
            kc = self.K[np.maximum(ch, 0)]
            a0 = np.einsum("mcj,mj->mc", kc, Y)
            a1 = np.einsum("mcj,mj->mc", kc, Wd)
            with np.errstate(divide="ignore", invalid="ignore"):
                sw = np.where((ch >= 0) & (a1 > 0), -a0 / a1, np.inf)
            sw = np.maximum(sw, 0.0)
            j = np.argmin(sw, axis=1)
            swj = sw[np.arange(len(idx)), j]
            take = swj < best
            best = np.where(take, swj, best)
            nxt = np.where(take, ch[np.arange(len(idx)), j] + 1, nxt)
            done = nxt == -2
            out[idx[done]] = s0[idx[done]] + best[done]
            active[idx[done]] = False
            mv = idx[~done]
            s0[mv] = s0[mv] + best[~done]
            cur[mv] = nxt[~done]
        raise NumericalFailure("chamber walk did not terminate")

    # -- boundary polygon (planar quadric base) ---------------------------

    def _build_arcs(self):
        """Boundary arcs as rational quadratic Bezier curves in image space.

        Arc endpoints are the wall traces on the base conic, ordered by angle
        around the base center; chambers follow from a stack sweep over the
        nested wall caps. Everything is computed in extended precision and
        rounded only as image-space control points.
        """
        import mpmath

        base = self.base
        W = len(self.K)
        with mpmath.workdps(50):
            Q = mpmath.matrix(base.Q.tolist())
            Qi = Q ** -1
            M = mpmath.matrix(base.chart._M.tolist())
            phi = mpmath.matrix([base.phi.tolist()])
            cu = base.chart.project_many(base.interior_point()[None, :])[0]
            cu = [mpmath.mpf(float(v)) for v in cu]

            def norm_pt(y):
                return y / (phi * y)[0]

            def angle(y):
                z = M * y
                return mpmath.atan2(z[1] / z[2] - cu[1], z[0] / z[2] - cu[0]) % (2 * mpmath.pi)

            def on_ray(alpha):
                x = base.chart.embed_many(np.array([[float(cu[0]), float(cu[1])]]))[0]
                v = base.chart.embed_direction_many(np.array([[float(mpmath.cos(alpha)), float(mpmath.sin(alpha))]]))[0]
                xm, vm = mpmath.matrix(x.tolist()), mpmath.matrix(v.tolist())
                qa, qb, qc = (vm.T * Q * vm)[0], (xm.T * Q * vm)[0], (xm.T * Q * xm)[0]
                r = (-qb + mpmath.sqrt(qb * qb - qa * qc)) / qa
                return norm_pt(xm + r * vm)

            events = []
            for w in range(W):
                k = self._walls_mp[w] if self._walls_mp is not None else mpmath.matrix([self.K[w].tolist()])
                for e in _conic_line_points(Q, k):
                    e = norm_pt(e)
                    events.append((angle(e), w, e))
            events.sort(key=lambda ev: ev[0])

            # start the sweep in the widest gap, whose chamber float can settle
            if events:
                angs = [ev[0] for ev in events]
                gaps = [(angs[(i + 1) % len(angs)] - angs[i]) % (2 * mpmath.pi) for i in range(len(angs))]
                if len(angs) == 1:
                    gaps = [2 * mpmath.pi]
                g = max(range(len(gaps)), key=lambda i: gaps[i])
                y = on_ray(angs[g] + gaps[g] / 2)
                c = int(self.chamber_of_base(np.array([float(v) for v in y])[None, :])[0])
                stack = []
                while c > 0:
                    stack.append(c - 1)
                    c = int(self.parent[c - 1]) + 1
                stack.reverse()
                events = events[g + 1:] + events[: g + 1]
            else:
                stack = []
                events = [(mpmath.mpf(0), -1, on_ray(mpmath.mpf(0)))]

            start = list(stack)
            pts, cham = [], []
            for i, (ang, w, e) in enumerate(events):
                if w >= 0:
                    if stack and stack[-1] == w:
                        stack.pop()
                    elif int(self.parent[w]) == (stack[-1] if stack else -1):
                        stack.append(w)
                    else:
                        raise NumericalFailure("wall traces are not nested along the boundary")
                ch = stack[-1] + 1 if stack else 0
                nxt = events[(i + 1) % len(events)][0]
                span = (nxt - ang) % (2 * mpmath.pi) or 2 * mpmath.pi
                pieces = int(mpmath.ceil(span / (mpmath.pi / 4)))
                pts.append(e)
                cham.append(ch)
                for j in range(1, pieces):
                    pts.append(on_ray(ang + span * j / pieces))
                    cham.append(ch)
            if stack != start:
                raise NumericalFailure("boundary sweep did not close")

            ctrl = np.empty((len(pts), 3, self.dim + 1))
            Tm = getattr(self, "_T_mp", None)
            for i in range(len(pts)):
                h0, h2 = pts[i], pts[(i + 1) % len(pts)]
                m = Qi * _mp_cross(h0, h2)
                lam = mpmath.sqrt(-(h0.T * Q * h2)[0] / (2 * (m.T * Q * m)[0]))
                if (phi * m)[0] < 0:
                    lam = -lam
                T = Tm[cham[i] - 1] if Tm is not None else mpmath.matrix(self.T[cham[i]].tolist())
                G = [T * h for h in (h0, lam * m, h2)]
                ctrl[i] = [[float(v) for v in g] for g in G]
        self._arc_ctrl = ctrl
        self._arc_cham = np.asarray(cham)
        self._arcs = True
        mids = ctrl[:, 0] + 2 * ctrl[:, 1] + ctrl[:, 2]
        self._poly_lifts = np.concatenate([ctrl[:, 0], mids])

    def _arc_chart(self):
        S = self.__dict__.get("_arc_starts")
        if S is None:
            S = self.chart.project_many(self._arc_ctrl[:, 0])
            x, y = S[:, 0], S[:, 1]
            area = np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
            self._arc_flip = area < 0
            self.__dict__["_arc_starts"] = S
        return S

    def _exit_arcs(self, X, V, chunk=20000):
        out = np.empty(len(X))
        for s in range(0, len(X), chunk):
            out[s:s + chunk] = self._exit_arcs_chunk(X[s:s + chunk], V[s:s + chunk])
        return out

    def _exit_arcs_chunk(self, X, V):
        m = len(X)
        S = self._arc_chart()
        nA = len(S)
        Mx = self.chart._M
        hx = X @ Mx.T
        hv = V @ Mx.T
        x0 = hx[:, :-1] / hx[:, -1:]
        d = hv[:, :-1] * hx[:, -1:] - hx[:, :-1] * hv[:, -1:]
        sgn = -1.0 if self._arc_flip else 1.0

        def rel_angle(vec, ref):
            cr = ref[:, 0] * vec[:, 1] - ref[:, 1] * vec[:, 0]
            dt = np.einsum("ij,ij->i", ref, vec)
            return np.mod(sgn * np.arctan2(cr, dt), 2 * np.pi)

        ref = S[0] - x0
        target = rel_angle(d, ref)
        lo = np.zeros(m, dtype=int)
        hi = np.full(m, nA)
        while np.any(hi - lo > 1):
            mid = (lo + hi) // 2
            go = rel_angle(S[mid] - x0, ref) <= target
            lo = np.where(go, mid, lo)
            hi = np.where(go, hi, mid)
        best = np.full(m, np.inf)
        for off in (0, -1, 1):
            best = np.minimum(best, self._arc_hit(X, V, (lo + off) % nA))
        miss = ~np.isfinite(best)
        if np.any(miss):
            best[miss] = self._exit_image(X[miss], V[miss])
        return best

    def _arc_hit(self, X, V, arcs):
        """Forward parameter where each ray meets its arc, ``inf`` if not."""
        G = self._arc_ctrl[arcs]
        ell = np.cross(X, V)
        l0, l1, l2 = (np.einsum("mj,mj->m", ell, G[:, i]) for i in range(3))
        a = l0 - 2 * l1 + l2
        b = 2 * (l1 - l0)
        c = l0
        disc = b * b - 4 * a * c
        sq = np.sqrt(np.maximum(disc, 0.0))
        q = -0.5 * (b + np.where(b >= 0, sq, -sq))
        with np.errstate(divide="ignore", invalid="ignore"):
            roots = (np.where(a != 0, q / a, np.inf), np.where(q != 0, c / q, np.inf))
        XV = ell
        nXV = np.einsum("mj,mj->m", XV, XV)
        best = np.full(len(X), np.inf)
        for u in roots:
            ok = (disc >= 0) & np.isfinite(u) & (u >= -ARC_SLACK) & (u <= 1 + ARC_SLACK)
            u = np.clip(np.where(ok, u, 0.5), 0.0, 1.0)
            P = ((1 - u) ** 2)[:, None] * G[:, 0] + (2 * u * (1 - u))[:, None] * G[:, 1] + (u ** 2)[:, None] * G[:, 2]
            al = np.einsum("mj,mj->m", np.cross(P, V), XV) / nXV
            be = -np.einsum("mj,mj->m", np.cross(P, X), XV) / nXV
            with np.errstate(divide="ignore", invalid="ignore"):
                sv = be / al
            ok &= (al > 0) & (sv >= -ARC_SLACK * (1 + np.abs(sv)))
            best = np.minimum(best, np.where(ok, np.maximum(sv, 0.0), np.inf))
        return best

    # -- consistency ------------------------------------------------------

    def edge_residuals(self, samples=100, seed=0):
        """Max disagreement of parent and child maps on sampled wall points,
        per tree edge. Maps built in extended precision are compared in
        extended precision."""
        rng = np.random.default_rng(seed)
        Tm = getattr(self, "_T_mp", None)
        res = np.zeros(len(self.K))
        M = self.wall_points()
        for w in range(len(self.K)):
            k = self.K[w]
            basis = np.linalg.svd(k[None, :])[2][1:]
            D = rng.standard_normal((samples, self.dim)) @ basis
            D -= np.outer(D @ self.base.phi, M[w]) / (M[w] @ self.base.phi)
            s = self.base.exit_param(np.broadcast_to(M[w], D.shape), D)
            Y = M[w] + (rng.random(samples) * s)[:, None] * D
            if Tm is not None:
                A, B = _mp_apply(Tm[int(self.parent[w])], Tm[w], Y)
            else:
                A = Y @ self.T[self.parent[w] + 1].T
                B = Y @ self.T[w + 1].T
            A = A / np.linalg.norm(A, axis=1, keepdims=True)
            B = B / np.linalg.norm(B, axis=1, keepdims=True)
            res[w] = np.abs(A - B).max()
        return res


def _mp_apply(Ta, Tb, Y):
    import mpmath

    A = np.empty_like(Y)
    B = np.empty_like(Y)
    with mpmath.workdps(50):
        for i, y in enumerate(Y):
            ym = mpmath.matrix(y.tolist())
            A[i] = [float(v) for v in Ta * ym]
            B[i] = [float(v) for v in Tb * ym]
    return A, B


def _mp_conic_exit(C, z, w):
    """Extended-precision version of :func:`_conic_exit` for one ray."""
    import mpmath

    with mpmath.workdps(50):
        zm = mpmath.matrix(z.tolist())
        wm = mpmath.matrix(w.tolist())
        Cw = C * wm
        a = (wm.T * Cw)[0]
        b = (zm.T * Cw)[0]
        c = (zm.T * C * zm)[0]
        disc = b * b - a * c
        if disc < 0:
            return np.inf
        sq = mpmath.sqrt(disc)
        if b >= 0:
            r = c / (-b - sq) if (b + sq) != 0 else mpmath.inf
        else:
            r = (-b + sq) / a
        r = float(r)
    scale = np.linalg.norm(z) / np.linalg.norm(w)
    if r < -1e-9 * scale:
        return np.inf if c < 0 else 0.0
    return max(r, 0.0)


def _conic_exit(C, Z, W):
    """Forward exit parameter of ``Z + r W`` from the negative region of the
    conics ``C`` (rows); ``inf`` when the ray stays inside."""
    a = np.einsum("mi,mij,mj->m", W, C, W)
    b = np.einsum("mi,mij,mj->m", Z, C, W)
    c = np.einsum("mi,mij,mj->m", Z, C, Z)
    disc = b * b - a * c
    sq = np.sqrt(np.maximum(disc, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        # the exiting root is (-b + sq) / a, written stably
        r = np.where(b >= 0, c / (-b - sq), (-b + sq) / a)
    scale = np.linalg.norm(Z, axis=1) / np.linalg.norm(W, axis=1)
    r = np.where(disc < 0, np.inf, r)
    behind = r < -1e-9 * scale
    r = np.where(behind, np.where(c < 0, np.inf, 0.0), np.maximum(r, 0.0))
    return np.where(np.isnan(r), np.inf, r)


def _conic_line_points(Q, k):
    """The two points where the line ``k`` meets the conic ``Q`` (mpmath)."""
    import mpmath

    kk = [k[0, i] for i in range(3)]
    basis = [_mp_cross(mpmath.matrix(kk), mpmath.matrix([1 if j == i else 0 for j in range(3)])) for i in range(3)]
    basis.sort(key=lambda v: -mpmath.norm(v))
    u1, u2 = basis[0], basis[1]
    a = (u2.T * Q * u2)[0]
    b = (u1.T * Q * u2)[0]
    c = (u1.T * Q * u1)[0]
    disc = b * b - a * c
    if disc <= 0:
        raise GeometryError("wall misses the base conic")
    sq = mpmath.sqrt(disc)
    if a == 0:
        return [u2, u1 - c / (2 * b) * u2]
    return [u1 + (-b + sq) / a * u2, u1 + (-b - sq) / a * u2]


def _mp_cross(x, y):
    import mpmath

    return mpmath.matrix([x[1] * y[2] - x[2] * y[1], x[2] * y[0] - x[0] * y[2], x[0] * y[1] - x[1] * y[0]])
