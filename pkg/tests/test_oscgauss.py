import numpy as np
import pytest

from torusgauge.oscgauss import (
    DivergenceError, ExpPoly, OscGaussMeasure, coupling_measure, from_action, improper_integral,
    improper_integral_exp_linear, offdiag_block_reduce, periodic_kernel_mean, quadrature_oracle,
)


@pytest.mark.parametrize("a,j", [(1.0, 0.0), (2.0, 0.7), (-3.0, 0.4)])
def test_one_dimensional_closed_form(a, j):
    mu = OscGaussMeasure(np.array([[a]]))
    expected = np.sqrt(2 * np.pi / abs(a)) * np.exp(-1j * np.pi * np.sign(a) / 4) * np.exp(1j * j * j / (2 * a))
    assert np.isclose(improper_integral(mu, ExpPoly.single([j])), expected)


def test_signature_and_kernel():
    mu = OscGaussMeasure(np.diag([1.0, -2.0, 0.0, 3.0]))
    assert mu.signature == 1 and mu.kernel_dim == 1


def test_degenerate_normalization_is_one():
    assert improper_integral(OscGaussMeasure(np.zeros((3, 3))), ExpPoly.single(np.zeros(3))) == 1


def test_frequency_along_kernel_gives_zero():
    mu = OscGaussMeasure(np.diag([1.0, 0.0]))
    assert improper_integral(mu, ExpPoly.single([0.3, 0.5])) == 0


def test_quadratic_growth_along_kernel_diverges():
    mu = OscGaussMeasure(np.diag([1.0, 0.0]))
    with pytest.raises(DivergenceError):
        improper_integral_exp_linear(mu, A=np.diag([0.0, 1.0]))


def test_rejects_nonsymmetric():
    with pytest.raises(ValueError):
        OscGaussMeasure(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_from_action_sign():
    # exp(i q x^2) corresponds to S = -2q
    mu = from_action(np.array([[0.5]]))
    assert np.allclose(mu.S, [[-1.0]])
    assert mu.signature == -1


def test_second_moment_matches_oracle():
    mu = OscGaussMeasure(np.diag([2.0, -1.5]), np.array([0.2, -0.1]), 1.5 - 0.5j)
    f = ExpPoly.single([0.3, -0.2], 0.5, [1.0, 0.5], [[1.0, 0.2], [0.2, -0.7]])
    exact = improper_integral(mu, f)
    assert abs(exact - quadrature_oracle(mu, f)) < 1e-4 * abs(exact)


def test_oracle_on_plain_callable():
    mu = OscGaussMeasure(np.array([[1.3]]))
    f = lambda x: np.exp(0.4j * x[..., 0])
    exact = improper_integral(mu, ExpPoly.single([0.4]))
    assert abs(quadrature_oracle(mu, f) - exact) < 1e-3 * abs(exact)


def test_coupling_reduction_matches_gaussian():
    rng = np.random.default_rng(3)
    C = rng.normal(size=(3, 3))
    red = offdiag_block_reduce(C)
    assert red.kernel_basis.shape[1] == 0
    full = improper_integral(coupling_measure(C), ExpPoly.single(np.zeros(6)))
    assert np.isclose(full, red.prefactor)
    # a phase depending on B alone is evaluated at B = 0
    j = np.concatenate([np.zeros(3), rng.normal(size=3)])
    assert np.isclose(improper_integral(coupling_measure(C), ExpPoly.single(j)), red.prefactor)


def test_reduction_with_kernel():
    C = np.array([[1.0, -1.0], [2.0, -2.0]])
    red = offdiag_block_reduce(C)
    assert red.kernel_basis.shape[1] == 1
    assert np.allclose(C @ red.kernel_basis, 0)
    with pytest.raises(ValueError):
        red.apply(lambda B: 1.0)
    pointwise = lambda g: periodic_kernel_mean(np.vectorize(g), np.pi)
    value = red.apply(lambda B: np.cos(B[0] * np.sqrt(2)) ** 2, pointwise)
    assert np.isclose(value, 0.5 * red.prefactor)


def test_periodic_mean():
    assert np.isclose(periodic_kernel_mean(lambda t: 2 + np.sin(t) ** 2, 2 * np.pi), 2.5)
