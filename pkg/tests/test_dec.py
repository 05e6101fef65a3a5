import numpy as np
import pytest

from torusgauge.dec import (
    Cochain, CochainError, basis, boundary, coboundary, hodge_star, inner, psi_embed, psi_matrix,
    star_matrix, zeros,
)
from torusgauge.polycomplex import canonical_dual, cube, hex_torus, joined_complex, tetrahedron


@pytest.fixture(params=["tetrahedron", "cube", "torus"])
def pair(request):
    K = {"tetrahedron": tetrahedron, "cube": cube, "torus": lambda: hex_torus(2, 2)}[request.param]()
    return canonical_dual(K)


def test_dd_zero(pair):
    rng = np.random.default_rng(0)
    for K in (pair.base, pair.dual):
        c = Cochain(K, 0, rng.integers(-9, 10, (K.n_faces(0), 3)).astype(float))
        assert not np.any(coboundary(coboundary(c)).values)


def test_coboundary_adjoint_to_boundary(pair):
    rng = np.random.default_rng(1)
    K = pair.base
    for p in (0, 1):
        a = Cochain(K, p, rng.integers(-4, 5, K.n_faces(p)).astype(float))
        b = Cochain(K, p + 1, rng.integers(-4, 5, K.n_faces(p + 1)).astype(float))
        assert inner(coboundary(a), b) == inner(a, boundary(b))


def test_star_star_sign(pair):
    rng = np.random.default_rng(2)
    for p in range(3):
        a = Cochain(pair.base, p, rng.normal(size=pair.base.n_faces(p)))
        twice = hodge_star(hodge_star(a, pair), pair)
        assert np.array_equal(twice.values, (-1) ** (p * (2 - p)) * a.values)
        assert np.array_equal(star_matrix(pair, p, "dual") @ star_matrix(pair, 2 - p, "base"),
                              (-1) ** (p * (2 - p)) * np.eye(pair.base.n_faces(2 - p)))


def test_star_is_isometry(pair):
    rng = np.random.default_rng(3)
    a = Cochain(pair.base, 1, rng.normal(size=pair.base.n_faces(1)))
    assert np.isclose(inner(a, a), inner(hodge_star(a, pair), hodge_star(a, pair)))


def test_psi_doubles_norm():
    J = joined_complex(cube())
    rng = np.random.default_rng(4)
    for side, K in (("base", J.pair.base), ("dual", J.pair.dual)):
        a = Cochain(K, 1, rng.normal(size=K.n_faces(1)))
        assert np.isclose(inner(psi_embed(a, J), psi_embed(a, J)), 2 * inner(a, a))
        P = psi_matrix(J, side)
        assert np.array_equal(P.T @ P, 2 * np.eye(K.n_faces(1)))
    # base and dual half-edges are disjoint
    assert not np.any(psi_matrix(J, "base").T @ psi_matrix(J, "dual"))


def test_errors_and_csv():
    K = tetrahedron()
    with pytest.raises(CochainError):
        Cochain(K, 1, np.zeros(3))
    with pytest.raises(CochainError):
        boundary(zeros(K, 0))
    with pytest.raises(CochainError):
        coboundary(zeros(K, 2))
    text = basis(K, 1, K.faces[1][0]).to_csv()
    assert text.splitlines()[0] == "face,c0"
    assert len(text.splitlines()) == K.n_faces(1) + 1
