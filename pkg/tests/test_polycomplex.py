import json

import numpy as np
import pytest

from torusgauge.polycomplex import (
    ComplexError, build_complex, canonical_dual, cube, get_complex, hex_torus, icosahedron,
    joined_complex, load_complex, product_with_zn, tetrahedron,
)

SURFACES = [tetrahedron, cube, icosahedron, lambda: hex_torus(3, 4)]


@pytest.mark.parametrize("make", SURFACES)
def test_closed_surface_and_boundary_squared(make):
    K = make()
    K.check(closed_surface=True)
    assert not np.any(K.boundary_matrix(1) @ K.boundary_matrix(2))


def test_euler_characteristics():
    assert [K.euler_characteristic() for K in (tetrahedron(), cube(), icosahedron())] == [2, 2, 2]
    assert hex_torus(3, 4).euler_characteristic() == 0


@pytest.mark.parametrize("make", SURFACES)
def test_dual_counts_swap(make):
    K = make()
    D = canonical_dual(K).dual
    assert [D.n_faces(p) for p in range(3)] == [K.n_faces(2 - p) for p in range(3)]
    D.check(closed_surface=True)


@pytest.mark.parametrize("make", SURFACES)
def test_qk_is_quadrangulation(make):
    K = make()
    J = joined_complex(K)
    Q = J.complex
    assert Q.n_faces(0) == sum(K.n_faces(p) for p in range(3))
    assert Q.n_faces(2) == 2 * K.n_faces(1)
    assert all(len(bd) == 4 for bd in Q.incidence[2])
    assert Q.euler_characteristic() == K.euler_characteristic()
    for corners in J.corners:
        kinds = sorted(J.vertex_kind[v] for v in corners)
        assert kinds == [0, 1, 1, 2]


def test_product_is_closed_torus_bundle(tetra_joined):
    Q = tetra_joined.complex
    for N in (1, 2, 3):
        P = product_with_zn(Q, N)
        C = P.complex
        assert C.n_faces(0) == N * Q.n_faces(0)
        assert C.euler_characteristic() == 0
        assert not np.any(C.boundary_matrix(1) @ C.boundary_matrix(2))
        assert not np.any(C.boundary_matrix(2) @ C.boundary_matrix(3))
        q, i, t, vertical = P.cell[1][5]
        assert P.lookup(q, i, t, vertical) == (1, 5)


def test_product_face_boundaries_are_cycles(tetra_product):
    C = tetra_product[2].complex
    for i in range(C.n_faces(2)):
        cycle = C.face_vertex_cycle(i)
        assert len(cycle) == len(C.incidence[2][i])
        for (e, s), v in zip(C.incidence[2][i], cycle):
            a, b = C.edge_endpoints(e)
            assert v == (a if s > 0 else b)


def test_description_round_trip(tmp_path):
    K = cube()
    path = tmp_path / "cube.json"
    path.write_text(json.dumps(K.to_description()))
    L = load_complex(str(path))
    for p in range(3):
        assert np.array_equal(K.boundary_matrix(p), L.boundary_matrix(p))
    assert get_complex(str(path)).n_faces(2) == 6


def test_rejects_bad_input(tmp_path):
    desc = tetrahedron().to_description()
    desc["faces"][0]["boundary"][0][0] = "nope"
    with pytest.raises(ComplexError):
        build_complex(desc)
    with pytest.raises(ComplexError):
        hex_torus(1, 3)
    with pytest.raises((ComplexError, FileNotFoundError)):
        get_complex(str(tmp_path / "missing.json"))


def test_unknown_face_id():
    with pytest.raises(ComplexError):
        tetrahedron().index(1, "no-such-edge")
