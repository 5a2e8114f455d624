import numpy as np
import pytest

from hilbend.chambers import bending_matrix
from hilbend.convex import Position, QuadricDomain
from hilbend.errors import GeometryError, NoHyperbolicFound
from hilbend.groups import (
    KLEIN_FORM,
    PT_A,
    PT_B,
    ElementKind,
    Representation,
    Word,
    classify_element,
    dirichlet_domain,
    irreducibility_dimension,
    limit_set_sample,
    punctured_torus_rep,
    random_words,
    reduced_words,
    sl2_adjoint,
    so_q_membership,
)

from oracles import sym2
from shared import bent

KLEIN = QuadricDomain.klein(2)
PT = punctured_torus_rep()
GOLDEN_SQ = ((3 + np.sqrt(5)) / 2) ** 2  # 6.854101966249685


# ---------- words ------------------------------------------------------------


def test_word_round_trip_and_reduction():
    w = Word.parse("abBAa")
    assert str(w) == "abBAa"
    assert str(w.reduced()) == "a"
    assert str(Word.parse("ab").inverse()) == "BA"


def test_word_rejects_non_letters():
    with pytest.raises(ValueError):
        Word.parse("a1")


def test_reduced_word_counts():
    # 1 + 4 + 4*3 + 4*9 + 4*27 reduced words of length <= 4 in F2
    assert len(reduced_words(["a", "b"], 4)) == 161


def test_evaluation_is_associative():
    for w in random_words(PT.generators, 30, 8, 0):
        k = len(w) // 2
        left, right = Word(w.letters[:k]), Word(w.letters[k:])
        np.testing.assert_allclose(PT.evaluate(w), PT.evaluate(left) @ PT.evaluate(right), rtol=1e-9, atol=1e-9)


def test_images_have_unit_determinant():
    for w in reduced_words(PT.generators, 3):
        assert abs(np.linalg.det(PT.evaluate(w)) - 1.0) < 1e-9


def test_representation_rejects_non_sl():
    with pytest.raises(GeometryError):
        Representation({"a": 2 * np.eye(3)})


# ---------- the punctured torus ----------------------------------------------


def test_sl2_commutator_trace():
    c = PT_A @ PT_B @ np.linalg.inv(PT_A) @ np.linalg.inv(PT_B)
    assert np.trace(c) == pytest.approx(-2.0, abs=1e-12)


def test_adjoint_preserves_the_form():
    for m in PT.mats.values():
        assert np.abs(m.T @ KLEIN_FORM @ m - KLEIN_FORM).max() < 1e-12


def test_adjoint_is_conjugate_to_sym2():
    rng = np.random.default_rng(0)
    for _ in range(10):
        g = rng.standard_normal((2, 2))
        g /= np.sqrt(abs(np.linalg.det(g)))
        if np.linalg.det(g) < 0:
            g[:, 0] *= -1
        a, b = sl2_adjoint(g), sym2(g)
        assert np.trace(a) == pytest.approx(np.trace(b), rel=1e-9)
        assert np.trace(a @ a) == pytest.approx(np.trace(b @ b), rel=1e-9)


def test_orbit_of_center_stays_in_the_disk():
    c = KLEIN.interior_point()
    words = random_words(PT.generators, 1000, 6, 1)
    X = np.array([PT.evaluate(w) @ c for w in words])
    # long words land within the boundary band; the form sign is the definition
    q = np.einsum("ij,jk,ik->i", X, KLEIN.Q, X) / np.einsum("ij,ij->i", X, X)
    assert np.all(q < 0)
    assert np.all(KLEIN.position_many(X) != Position.OUTSIDE)


# ---------- form membership --------------------------------------------------


def test_so_q_membership():
    assert so_q_membership(np.eye(3), KLEIN_FORM)
    assert not so_q_membership(bending_matrix(np.eye(3)[0], np.eye(3)[0], 0.3), KLEIN_FORM)
    for m in PT.mats.values():
        assert so_q_membership(m, KLEIN_FORM)


def test_so_q_membership_for_a_conjugated_form():
    P = np.array([[2.0, 1.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    Pi = np.linalg.inv(P)
    q = Pi.T @ KLEIN_FORM @ Pi
    for m in PT.mats.values():
        assert so_q_membership(P @ m @ Pi, q)


# ---------- classification ---------------------------------------------------


def test_identity_is_elliptic():
    assert classify_element(np.eye(3)).kind is ElementKind.ELLIPTIC


def test_hyperbolic_generator():
    cl = classify_element(sym2(PT_A))
    assert cl.kind is ElementKind.HYPERBOLIC
    np.testing.assert_allclose(np.sort(np.real(cl.eigenvalues)), [1 / GOLDEN_SQ, 1.0, GOLDEN_SQ], rtol=1e-9)


def test_commutator_is_unipotent():
    cl = classify_element(PT.evaluate("abAB"))
    assert cl.kind is ElementKind.PARABOLIC
    assert np.abs(np.asarray(cl.eigenvalues) - 1.0).max() < 1e-6


def test_rotation_is_elliptic():
    th = 0.7
    r = np.array([[np.cos(th), -np.sin(th), 0], [np.sin(th), np.cos(th), 0], [0, 0, 1]])
    assert classify_element(r).kind is ElementKind.ELLIPTIC


# ---------- irreducibility ---------------------------------------------------


def test_trivial_rep_spans_one_dimension():
    assert irreducibility_dimension(Representation({"a": np.eye(3), "b": np.eye(3)}), 3) == 1


def test_diagonal_generator_spans_at_most_three():
    a = bending_matrix(np.eye(3)[0], np.eye(3)[0], 0.2)
    assert irreducibility_dimension(Representation({"a": a}), 4) <= 3


def test_bent_representation_is_irreducible():
    _, rep_t = bent(0.2)
    assert irreducibility_dimension(rep_t, 4) == 9


# ---------- limit sets -------------------------------------------------------


def test_cyclic_group_has_two_limit_points():
    rep = Representation({"a": PT.mats["a"]})
    pts = limit_set_sample(rep, KLEIN, 4, 20, 0)
    distinct = {tuple(np.round(p.rep, 8)) for p in pts}
    assert len(distinct) == 2


def test_elliptic_group_has_no_limit_points():
    th = 0.7
    r = np.array([[np.cos(th), -np.sin(th), 0], [np.sin(th), np.cos(th), 0], [0, 0, 1]])
    with pytest.raises(NoHyperbolicFound):
        limit_set_sample(Representation({"r": r}), KLEIN, 3, 10, 0)


def _gaps(domain, pts):
    P = np.array([p.rep for p in pts])
    P *= np.sign(P @ domain.phi)[:, None]
    return np.abs(domain.boundary_gap(P))


def test_limit_points_on_the_circle():
    pts = limit_set_sample(PT, KLEIN, 4, 100, 0)
    assert len(pts) == 100
    assert _gaps(KLEIN, pts).max() < 1e-6


def test_limit_points_on_the_bent_boundary():
    dom, rep_t = bent(0.2)
    pts = limit_set_sample(rep_t, dom, 4, 100, 0)
    assert _gaps(dom, pts).max() < 1e-6


# ---------- Dirichlet domains ------------------------------------------------


X0 = np.array([0.05, 0.03, 1.0])


def test_trivial_group_dirichlet_is_everything():
    F = dirichlet_domain(Representation({"e": np.eye(3)}), KLEIN, X0, 3)
    assert F.walls == []


def test_cyclic_dirichlet_has_two_walls():
    F = dirichlet_domain(Representation({"a": PT.mats["a"]}), KLEIN, X0, 4)
    assert sorted(str(w) for w, _ in F.walls) == ["A", "a"]


def test_punctured_torus_dirichlet_covers():
    F = dirichlet_domain(PT, KLEIN, X0, 3)
    assert F.position(X0) is Position.INSIDE
    rng = np.random.default_rng(5)
    Y = KLEIN.sample_interior(500, rng, 0.6)
    covered = np.zeros(len(Y), dtype=bool)
    for w in reduced_words(PT.generators, 3):
        # y is in the translate g F iff g^-1 y is in F
        Z = Y @ PT.evaluate(w.inverse()).T
        Z *= np.sign(Z @ KLEIN.phi)[:, None]
        covered |= F.position_many(Z) != Position.OUTSIDE
    assert covered.all()
