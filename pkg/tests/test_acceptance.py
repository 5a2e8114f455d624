"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest -v tests/test_acceptance.py`` (lines are printed even under
capture) or ``python3 tests/test_acceptance.py`` for the summary alone.
"""

import math
import time
from pathlib import Path

import numpy as np
import pytest
from scipy.linalg import expm

from hilbend.bend import punctured_torus_bend, relation_residuals
from hilbend.chambers import bending_matrix
from hilbend.cli import main
from hilbend.convex import (
    Polytope,
    QuadricDomain,
    TransformedDomain,
    convexity_probe,
    pencil_ellipsoid,
    strict_convexity_probe,
)
from hilbend.groups import (
    ElementKind,
    Representation,
    classify_element,
    irreducibility_dimension,
    limit_set_sample,
    punctured_torus_rep,
    reduced_words,
)
from hilbend.hilbert import HilbertBall, MetricContext, busemann_volume, delta_estimate, delta_profile, distances
from hilbend.projcore import random_sl

from oracles import klein_distance
from shared import bent

SCENES = Path(__file__).resolve().parent.parent / "scenes"
KLEIN = QuadricDomain.klein(2)


@pytest.fixture
def report(capsys):
    """``report(n, ok, detail)`` prints the criterion line and asserts."""

    def _report(n, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {n:2d}: {detail}")
        assert ok, detail

    return _report


def ball_points(n, count, rng, r=0.95):
    D = rng.standard_normal((count, n))
    D /= np.linalg.norm(D, axis=1, keepdims=True)
    return D * (r * rng.random(count) ** (1 / n))[:, None]


def lorentz_block(n, rng):
    J = np.diag([1.0] * (n - 1) + [-1.0])
    A = rng.standard_normal((n, n))
    h = np.eye(n + 1)
    h[1:, 1:] = expm(J @ (A - A.T) * 0.5)
    return h


# ---------- metric -----------------------------------------------------------


def test_c01_klein_model(report):
    t0 = time.perf_counter()
    worst = 0.0
    for n in (2, 3):
        ctx = MetricContext(QuadricDomain.klein(n))
        rng = np.random.default_rng(100 + n)
        U, V = ball_points(n, 1000, rng), ball_points(n, 1000, rng)
        one = np.ones((1000, 1))
        d = distances(ctx, np.hstack([U, one]), np.hstack([V, one]))
        ref = np.array([klein_distance(u, v) for u, v in zip(U, V)])
        worst = max(worst, np.abs(d - ref).max())
    dt = time.perf_counter() - t0
    report(1, worst < 1e-9 and dt < 5, f"Klein closed form, max err {worst:.2e} (< 1e-9), {dt:.2f} s (< 5 s)")


def test_c02_projective_invariance(report):
    rng = np.random.default_rng(2)
    worst = 0.0
    for dom in (KLEIN, Polytope([[1, 0, 1], [-1, 0, 1], [0, 1, 1], [0, -1, 1], [1, 1, 1.5]])):
        ctx = MetricContext(dom)
        for _ in range(100):
            g = random_sl(3, rng, 0.3).mat
            X, Y = dom.sample_interior(100, rng, 0.95), dom.sample_interior(100, rng, 0.95)
            d = distances(ctx, X, Y)
            dg = distances(MetricContext(TransformedDomain(dom, g)), X @ g.T, Y @ g.T)
            worst = max(worst, np.abs(d - dg).max())
    report(2, worst < 1e-9, f"projective invariance over 2 x 100 g x 100 pairs, max err {worst:.2e} (< 1e-9)")


# ---------- bending ----------------------------------------------------------


def test_c03_centralizer(report):
    worst = 0.0
    for n in (2, 3, 4):
        rng = np.random.default_rng(30 + n)
        e = np.eye(n + 1)[0]
        for t in (0.1, 1.0):
            a = bending_matrix(e, e, t)
            for _ in range(100):
                h = lorentz_block(n, rng)
                worst = max(worst, np.abs(a @ h - h @ a).max() / max(1.0, np.abs(h).max()))
    report(3, worst < 1e-12, f"centralizer, max |a h - h a| / max(1, |h|) = {worst:.2e} (< 1e-12)")


def test_c04_relations(report):
    worst = 0.0
    for t in (0.0, 0.1, 0.2, 0.5):
        dom, rep_t = bent(t)
        worst = max(worst, max(relation_residuals(dom.rep0, rep_t, dom.rep0.decomposition)))
    dom, rep_t = bent(0.0)
    same_rep = all(np.array_equal(rep_t.evaluate(g), dom.rep0.evaluate(g)) for g in rep_t.generators)
    same_maps = all(np.array_equal(T, np.eye(3)) for T in dom.T)
    rng = np.random.default_rng(4)
    X = KLEIN.sample_interior(500, rng, 0.9)
    V = KLEIN.chart.embed_direction_many(rng.standard_normal((500, 2)))
    chord = np.abs(dom.exit_param(X, V) - KLEIN.exit_param(X, V)).max()
    ok = worst < 1e-9 and same_rep and same_maps and chord < 1e-9
    report(4, ok, f"relations max residual {worst:.2e} (< 1e-9); t=0 rep exact {same_rep}, maps identity {same_maps}, chord gap {chord:.1e}")


def test_c05_convexity(report):
    lines, ok = [], True
    for t in (0.1, 0.2, 0.5):
        t0 = time.perf_counter()
        # uncached: the budget covers the build and the probe
        dom, _ = punctured_torus_bend(t, 6)
        bad = convexity_probe(dom, 10_000, 50)
        dt = time.perf_counter() - t0
        ok = ok and not bad and dt < 60
        lines.append(f"t={t}: {len(bad)} violations, {dt:.1f} s")
    report(5, ok, "convexity at depth 6, 1e4 chords; " + "; ".join(lines) + " (0, < 60 s)")


def test_c06_strict_convexity(report):
    dom, _ = bent(0.2)
    bent_segments = len(strict_convexity_probe(dom, 10_000, 6))
    square_segments = len(strict_convexity_probe(Polytope.square(), 10_000, 6))
    ok = bent_segments == 0 and square_segments >= 1
    report(6, ok, f"strict convexity at res 1e-3: bent {bent_segments} segments (0), square {square_segments} (>= 1)")


# ---------- volume -----------------------------------------------------------


def test_c07_volume_comparison(report):
    rng = np.random.default_rng(7)
    c = KLEIN.interior_point()
    fails, worst = 0, -math.inf
    for i in range(100):
        d = rng.standard_normal(2)
        V = KLEIN.chart.embed_direction_many(d[None, :] / np.linalg.norm(d))
        p = KLEIN.boundary_points(c[None, :], V)[0]
        outer = pencil_ellipsoid(KLEIN, p, -rng.uniform(0.0, 0.5))
        inner = pencil_ellipsoid(KLEIN, p, rng.uniform(0.1, 1.5))
        ci, co = MetricContext(inner, chart=KLEIN.chart), MetricContext(outer, chart=KLEIN.chart)
        region = HilbertBall(ci, inner.interior_point(), 1.0)
        mi, ei = busemann_volume(ci, region, 4000, 700 + i)
        mo, _ = busemann_volume(co, region, 4000, 700 + i)
        excess = (mo - mi * (1 + 3 * ei / mi)) / mi
        worst = max(worst, excess)
        fails += excess > 0
    report(7, fails == 0, f"volume comparison on 100 pencil pairs: {fails} failures, worst relative excess {worst:.3f} (<= 0)")


def test_c08_busemann_ball(report):
    exact = 2 * math.pi * (math.cosh(1.5) - 1)
    t0 = time.perf_counter()
    ctx = MetricContext(KLEIN)
    mu, err = busemann_volume(ctx, HilbertBall(ctx, KLEIN.interior_point(), 1.5), 1_000_000, 8)
    dt = time.perf_counter() - t0
    rel = abs(mu - exact) / exact
    report(8, rel < 0.02 and dt < 60, f"ball R=1.5 area {mu:.4f} +- {err:.4f} vs {exact:.4f}, rel err {rel:.4f} (< 0.02), {dt:.1f} s (< 60 s)")


# ---------- groups -----------------------------------------------------------


def test_c09_trace_separation(report):
    dom, rep_t = bent(0.2)
    sep, word = max((abs(np.trace(rep_t.evaluate(w)) - np.trace(dom.rep0.evaluate(w))), str(w)) for w in reduced_words(["a", "b"], 4))
    report(9, sep > 1e-3, f"trace separation at t=0.2: {sep:.4f} on word {word} (> 1e-3)")


def test_c10_irreducibility(report):
    _, rep_t = bent(0.2)
    span = irreducibility_dimension(rep_t, 4)
    a = bending_matrix(np.eye(3)[0], np.eye(3)[0], 0.2)
    control = irreducibility_dimension(Representation({"a": a}), 4)
    report(10, span == 9 and control <= 3, f"span dimension {span} (= 9), diagonal control {control} (<= 3)")


def test_c11_unipotent_cusp(report):
    cl = classify_element(punctured_torus_rep().evaluate("abAB"))
    gap = float(np.abs(np.asarray(cl.eigenvalues) - 1.0).max())
    ok = gap < 1e-6 and cl.kind is ElementKind.PARABOLIC
    report(11, ok, f"commutator eigenvalues within {gap:.1e} of 1 (< 1e-6), kind {cl.kind.name}")


def test_c12_limit_set(report):
    dom, rep_t = bent(0.2)
    pts = limit_set_sample(rep_t, dom, 4, 100, 12, check=False)
    P = np.array([p.rep for p in pts])
    P *= np.sign(P @ dom.phi)[:, None]
    gap = np.abs(dom.boundary_gap(P)).max()
    report(12, len(pts) == 100 and gap < 1e-6, f"{len(pts)} limit points, max boundary gap {gap:.2e} (< 1e-6)")


# ---------- hyperbolicity ----------------------------------------------------


def test_c13_delta_hyperbolic(report):
    t0 = time.perf_counter()
    dom, _ = bent(0.2)
    d_bent = delta_estimate(MetricContext(dom), 6, 13, radius=4.0)
    d_disk = delta_estimate(MetricContext(KLEIN), 6, 13, radius=4.0)
    sq = Polytope.square()
    prof = delta_profile(MetricContext(sq), 6, 13, targets=sq.vertices())
    dt = time.perf_counter() - t0
    ratio = d_bent / d_disk
    ok = np.isfinite(d_bent) and 0.5 <= ratio <= 2.0 and not prof.stable and dt < 120
    report(
        13,
        ok,
        f"delta bent {d_bent:.3f} vs disk {d_disk:.3f} (ratio {ratio:.2f}, within 2x); "
        f"square last increase {prof.last_increase:.2f} (unstable {not prof.stable}); {dt:.1f} s (< 120 s)",
    )


# ---------- command line -----------------------------------------------------


def test_c14_cli_determinism(report, tmp_path, capsys):
    outputs = []
    for run in range(2):
        d = tmp_path / str(run)
        d.mkdir()
        main(["check", str(SCENES / "klein.json"), "--seed", "14", "-o", str(d / "klein.jsonl")])
        main(["check", str(SCENES / "punctured-torus.json"), "--suite", "groups", "--seed", "14", "-o", str(d / "pt.jsonl")])
        main(["tile", str(SCENES / "punctured-torus.json"), "-o", str(d / "pt.svg")])
        main(["tile", str(SCENES / "square.json"), "-o", str(d / "sq.svg")])
        outputs.append({p.name: p.read_bytes() for p in sorted(d.iterdir())})
    same = outputs[0] == outputs[1] and len(outputs[0]) == 4
    report(14, same, f"hb check / hb tile byte-identical across two runs over {len(outputs[0])} files")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
