import numpy as np
import pytest

from hilbend.errors import AtInfinity, DegenerateConfiguration, GeometryError, NonCollinear
from hilbend.projcore import (
    AffineChart,
    ProjHyperplane,
    ProjMap,
    ProjPoint,
    apply_map,
    canonical,
    chart_embed,
    chart_project,
    compose,
    cross_ratio,
    inverse,
    pole,
    random_sl,
)

from oracles import cross_ratio_affine

KLEIN = np.diag([1.0, 1.0, -1.0])


def aff(*u):
    return ProjPoint.from_affine(u)


# ---------- points and hyperplanes ------------------------------------------


def test_canonical_is_unit_and_idempotent():
    rng = np.random.default_rng(1)
    for v in rng.standard_normal((50, 4)):
        c = canonical(v)
        assert abs(np.linalg.norm(c) - 1.0) < 1e-12
        np.testing.assert_allclose(canonical(c), c, rtol=0, atol=1e-15)


def test_points_equal_up_to_scale():
    assert ProjPoint([1.0, 2.0, 3.0]) == ProjPoint([-2.0, -4.0, -6.0])
    assert ProjPoint([1.0, 2.0, 3.0]) != ProjPoint([1.0, 2.1, 3.0])


def test_zero_vector_rejected():
    with pytest.raises(GeometryError):
        ProjPoint([0.0, 0.0, 0.0])


def test_incidence():
    H = ProjHyperplane([1.0, 0.0, -0.5])
    assert H.incident(aff(0.5, 3.0))
    assert not H.incident(aff(0.6, 3.0))


# ---------- maps -------------------------------------------------------------


def test_inverse_composes_to_identity():
    rng = np.random.default_rng(2)
    for _ in range(20):
        g = random_sl(4, rng)
        np.testing.assert_allclose(compose(inverse(g), g).mat, np.eye(4), atol=1e-9)


def test_apply_identity():
    x = aff(0.2, -0.7)
    assert apply_map(ProjMap.identity(3), x) == x


def test_apply_composition():
    rng = np.random.default_rng(3)
    for _ in range(20):
        g, h = random_sl(3, rng), random_sl(3, rng)
        x = ProjPoint(rng.standard_normal(3))
        a = apply_map(compose(g, h), x)
        b = apply_map(g, apply_map(h, x))
        np.testing.assert_allclose(a.rep, b.rep, atol=1e-9)


def test_bending_matrix_fixes_its_apex():
    t = 0.4
    a = ProjMap(np.diag([np.exp(2 * t), np.exp(-t), np.exp(-t)]))
    assert apply_map(a, ProjPoint([1.0, 0.0, 0.0])) == ProjPoint([1.0, 0.0, 0.0])


def test_from_matrix_normalizes_determinant():
    g = ProjMap.from_matrix(np.diag([2.0, 3.0, 5.0]))
    assert abs(np.linalg.det(g.mat) - 1.0) < 1e-12


# ---------- charts -----------------------------------------------------------


def test_chart_project_dehomogenizes():
    ch = AffineChart.standard(2)
    np.testing.assert_allclose(chart_project(ch, ProjPoint([0.3, -0.4, 1.0])), [0.3, -0.4], atol=1e-15)


def test_point_at_infinity():
    with pytest.raises(AtInfinity):
        chart_project(AffineChart.standard(2), ProjPoint([1.0, 0.0, 0.0]))


@pytest.mark.parametrize("phi", [[0.0, 0.0, 1.0], [0.3, -0.2, 1.0], [1.0, 2.0, 0.5, 0.1]])
def test_chart_round_trip(phi):
    ch = AffineChart.from_covector(np.array(phi))
    U = np.random.default_rng(4).uniform(-3, 3, (1000, len(phi) - 1))
    assert np.abs(ch.project_many(ch.embed_many(U)) - U).max() < 1e-12
    np.testing.assert_allclose(chart_project(ch, chart_embed(ch, U[:1])), U[0], atol=1e-12)


# ---------- cross ratio ------------------------------------------------------


def test_cross_ratio_on_a_line():
    p, x, y, q = (aff(s, 0.0) for s in (0.0, 1.0, 2.0, 4.0))
    assert cross_ratio(p, x, y, q) == pytest.approx(3.0, abs=1e-12)


def test_cross_ratio_coincident_middle():
    p, x, q = aff(0.0, 0.0), aff(1.0, 1.0), aff(3.0, 3.0)
    assert cross_ratio(p, x, x, q) == pytest.approx(1.0, abs=1e-12)


def test_cross_ratio_invariant():
    rng = np.random.default_rng(5)
    base, d = np.array([0.1, 0.2]), np.array([0.6, -0.8])
    for _ in range(20):
        s = np.sort(rng.uniform(-2, 2, 4))
        pts = [aff(*(base + t * d)) for t in s]
        g = random_sl(3, rng, 0.3)
        moved = [apply_map(g, x) for x in pts]
        ref = cross_ratio_affine(*s)
        assert cross_ratio(*pts) == pytest.approx(ref, rel=1e-9)
        assert cross_ratio(*moved) == pytest.approx(ref, rel=1e-9)


def test_cross_ratio_errors():
    with pytest.raises(NonCollinear):
        cross_ratio(aff(0, 0), aff(1, 0), aff(2, 1), aff(3, 0))
    with pytest.raises(DegenerateConfiguration):
        cross_ratio(aff(0, 0), aff(0, 0), aff(2, 0), aff(3, 0))


# ---------- poles ------------------------------------------------------------


def test_pole_of_a_diameter_is_at_infinity():
    assert pole(ProjHyperplane([1.0, 0.0, 0.0]), KLEIN) == ProjPoint([1.0, 0.0, 0.0])


def test_pole_outside_disk_with_tangents_through_trace():
    p = pole(ProjHyperplane([1.0, 0.0, -0.5]), KLEIN)
    u = chart_project(AffineChart.standard(2), p)
    np.testing.assert_allclose(u, [2.0, 0.0], atol=1e-12)
    # the chord x = 0.5 meets the circle at (0.5, +-sqrt(3)/2); the lines from
    # (2, 0) to those points are tangent there
    for sgn in (1, -1):
        t = np.array([0.5, sgn * np.sqrt(3) / 2])
        assert abs((t - u) @ t) < 1e-12


def test_pole_equivariance():
    rng = np.random.default_rng(6)
    for _ in range(20):
        g = random_sl(3, rng, 0.3).mat
        gi = np.linalg.inv(g)
        k = rng.standard_normal(3)
        lhs = pole(ProjHyperplane(gi.T @ k), gi.T @ KLEIN @ gi)
        rhs = ProjPoint(g @ pole(ProjHyperplane(k), KLEIN).rep)
        np.testing.assert_allclose(lhs.rep, rhs.rep, atol=1e-9)
