import itertools

import numpy as np
import pytest

from torusgauge.lie import SU2, build_level, fusion_rule_su2
from torusgauge.ribbon import RegionDecomposition, build_link, find_bands, lifted_band_faces
from torusgauge.shadow import (
    ShadowError, empty_decomposition, link_shadow, shadow_invariant, shadow_vs_verlinde,
    verlinde_partition, vertical_decomposition,
)


@pytest.mark.parametrize("k", [3, 4, 5])
def test_empty_sphere(k):
    lev = build_level(SU2, k)
    value = shadow_invariant(empty_decomposition(2), lev).value
    assert np.isclose(value * lev.S[0, 0] ** 2, 1.0)


@pytest.mark.parametrize("k", [3, 4, 5, 6])
def test_vertical_triples_give_fusion_numbers(k):
    lev = build_level(SU2, k)
    for colors in itertools.product(lev.colors, repeat=3):
        rep = shadow_vs_verlinde(lev, colors)
        assert rep["fusion_number"] == fusion_rule_su2(k, *colors)
        assert abs(rep["shadow_ratio"][0] - rep["fusion_number"]) < 1e-9


def test_verlinde_torus_counts_colors():
    lev = build_level(SU2, 5)
    assert np.isclose(verlinde_partition(lev, 0), len(lev.colors))
    assert np.isclose(shadow_invariant(empty_decomposition(0), lev).value, len(lev.colors))


def test_mismatch_raises():
    lev = build_level(SU2, 4)
    wrong = vertical_decomposition(2, [1])
    wrong = RegionDecomposition(wrong.face_region, [2], [1], [], wrong.marks, 0)
    with pytest.raises(ShadowError):
        shadow_vs_verlinde(lev, [1], decomp=wrong)


def test_bad_color():
    with pytest.raises(ValueError):
        shadow_invariant(vertical_decomposition(2, [7]), build_level(SU2, 4))


def test_generic_band_sum(tetra_joined, tetra_product):
    Q, P = tetra_joined.complex, tetra_product[2]
    band = find_bands(Q)[0]
    lev = build_level(SU2, 4)
    d = lev.dims
    link = build_link(tetra_joined, 2, [lifted_band_faces(P, band, [])], [1], "v:0", P)
    expected = sum(d[a] * d[b] * lev.fusion_table[b, 1, a] for a in lev.colors for b in lev.colors)
    assert np.isclose(link_shadow(link, lev).value, expected)
    twisted = build_link(tetra_joined, 2, [lifted_band_faces(P, band, [0, 1])], [1], "v:0", P)
    a, b = link_shadow(twisted, lev).value, link_shadow(twisted, lev, -1).value
    assert np.isclose(a, np.conj(b))
