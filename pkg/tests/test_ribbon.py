import json

import pytest

from torusgauge.ribbon import (
    RibbonError, build_link, find_bands, lifted_band_faces, link_from_json, link_to_json, load_link,
    project_ribbon, regions, validate_ribbon, vertical_ribbon_faces,
)

EDGES = ("e:e0:2", "e:e1:2", "e:e3:2")


def free_vertex(Q, band):
    foot = set().union(*(Q.closure_vertices(2, f) for f in band))
    return next(v for v in range(Q.n_faces(0)) if v not in foot)


@pytest.mark.parametrize("N", [2, 3])
def test_vertical_ribbon(tetra_joined, tetra_product, N):
    Q, P = tetra_joined.complex, tetra_product[N]
    e = Q.index(1, EDGES[0])
    R = validate_ribbon(vertical_ribbon_faces(P, e), P.complex)
    proj = project_ribbon(R, P)
    assert proj.kind == "vertical" and proj.edge == e
    assert len(R.loop_left.steps) == N == len(R.loop_right.steps)


def test_bands_exist(tetra_joined):
    bands = find_bands(tetra_joined.complex)
    assert bands and all(len(b) >= 2 for b in bands)


@pytest.mark.parametrize("N", [2, 3])
def test_generic_ribbon_gleam_convention(tetra_joined, tetra_product, N):
    Q, P = tetra_joined.complex, tetra_product[N]
    band = find_bands(Q)[0]
    s0 = free_vertex(Q, band)
    faces = lifted_band_faces(P, band, list(range(N)))
    link = build_link(tetra_joined, N, [faces], [1], s0, P)
    assert link.projections[0].winding(N) == 1
    rd = regions(link)
    assert rd.count == 2 and sorted(rd.gleam) == [-1, 1]
    (_, plus, minus, color), = rd.edges
    assert rd.gleam[plus] == 1 and rd.gleam[minus] == -1 and color == 1
    assert sum(rd.euler) == Q.euler_characteristic()
    # walking the ribbon backwards keeps the sides; flipping the surface swaps them
    backwards = build_link(tetra_joined, N, [faces[::-1]], [1], s0, P)
    assert regions(backwards).gleam == rd.gleam
    assert regions(link, -1).gleam == [-g for g in rd.gleam]
    flat = build_link(tetra_joined, N, [lifted_band_faces(P, band, [])], [1], s0, P)
    assert regions(flat).gleam == [0, 0]


def test_validation_errors(tetra_joined, tetra_product):
    Q, P = tetra_joined.complex, tetra_product[2]
    faces = vertical_ribbon_faces(P, Q.index(1, EDGES[0]))
    with pytest.raises(RibbonError, match="at least two"):
        validate_ribbon(faces[:1], P.complex)
    with pytest.raises(RibbonError):
        build_link(tetra_joined, 2, [faces, faces], [1, 1], "v:0", P)
    band = find_bands(Q)[0]
    foot = set().union(*(Q.closure_vertices(2, f) for f in band))
    on_band = Q.faces[0][next(iter(foot))]
    with pytest.raises(RibbonError, match="sigma0"):
        build_link(tetra_joined, 2, [lifted_band_faces(P, band, [])], [1], on_band, P)
    with pytest.raises(RibbonError):
        lifted_band_faces(P, band, [0])


def test_json_round_trip(tmp_path, tetra_joined):
    data = {"ambient": "tetrahedron", "N": 2, "sigma0": "v:0",
            "ribbons": [{"edge": e, "color": c} for e, c in zip(EDGES, (1, 2, 1))]}
    link = link_from_json(data)
    assert link.is_vertical and link.colors == [1, 2, 1]
    path = tmp_path / "link.json"
    path.write_text(json.dumps(link_to_json(link, "tetrahedron")))
    again = load_link(str(path))
    assert [R.faces for R in again.ribbons] == [R.faces for R in link.ribbons]
    with pytest.raises(FileNotFoundError, match="link file not found"):
        load_link(str(tmp_path / "missing.json"))
