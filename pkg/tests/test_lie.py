import itertools

import numpy as np
import pytest

from torusgauge.lie import (
    SU2, LieError, build_level, character, character_of_matrix, fusion, fusion_rule_su2, killing_form,
    level_to_json, mollifier, smoothstep,
)


def test_killing_normalization():
    tau = SU2.cartan[0]
    assert np.isclose(killing_form(tau, tau), 2 / (4 * np.pi ** 2))
    # lattice generator 2 pi tau against tau gives 1/pi, so the level-k frequency is 2k
    assert np.isclose(SU2.inner_torus([2 * np.pi], [1.0]), 1 / np.pi)


def test_fp_density_matches_diagonalization():
    xs = np.linspace(0.1, 6.0, 17)
    dens = np.ravel(SU2.fp_density(xs[:, None]))
    assert np.allclose(dens, 4 * np.sin(xs) ** 2)
    for x in xs[:4]:
        assert np.isclose(SU2.fp_density_by_diagonalization(np.array([x])), 4 * np.sin(x) ** 2)


def test_affine_weyl_invariance():
    rng = np.random.default_rng(0)
    for _ in range(10):
        c = rng.uniform(-4, 4, 1)
        moved = SU2.random_affine_weyl(c, rng)
        assert np.isclose(np.ravel(SU2.fp_density(moved))[0], np.ravel(SU2.fp_density(c))[0])


def test_smoothstep_and_mollifier():
    u = np.linspace(-1, 2, 31)
    v = smoothstep(u)
    assert v.min() == 0 and v.max() == 1 and np.all(np.diff(v) >= 0)
    s = 0.2
    pts = np.array([[0.0], [0.05], [np.pi / 2], [np.pi]])
    vals = np.ravel(mollifier(s, pts))
    assert vals[0] == 0 and vals[2] == 1 and vals[3] == 0


@pytest.mark.parametrize("k", range(3, 9))
def test_level_data(k):
    lev = build_level(SU2, k)
    S = lev.S
    assert np.allclose(S @ S.conj().T, np.eye(k - 1), atol=1e-12)
    assert np.allclose(S, S.T)
    assert np.allclose(lev.dims, np.sin(np.pi * (np.arange(k - 1) + 1) / k) / np.sin(np.pi / k))
    for a, b, c in itertools.product(lev.colors, repeat=3):
        assert fusion(lev, a, b, c) == fusion_rule_su2(k, a, b, c)
    assert np.isclose(lev.casimir(1), 1.5)
    assert np.isclose(lev.twist(2), np.exp(1j * np.pi * 4 / k))


def test_level_errors_and_json():
    with pytest.raises(LieError):
        build_level(SU2, 1)
    lev = build_level(SU2, 4)
    with pytest.raises(LieError):
        lev.dim(3)
    data = level_to_json(lev)
    assert data["schema"] == "v1" and data["colors"] == [0, 1, 2]


def test_characters():
    rng = np.random.default_rng(5)
    for n in range(5):
        x = rng.uniform(0, 2 * np.pi)
        U = np.diag([np.exp(1j * x), np.exp(-1j * x)])
        V = np.linalg.qr(rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)))[0]
        assert np.isclose(character_of_matrix(n, V @ U @ V.conj().T), character(n, x))
    assert np.isclose(character(2, np.pi / 3), 1 + 2 * np.cos(2 * np.pi / 3))
