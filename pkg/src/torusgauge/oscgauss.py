"""Oscillatory Gauss-type measures and their improper integrals.

A measure is dmu(x) = Z^-1 exp(-(i/2) <x-m, S(x-m)>) dx on R^d.  The improper
integral of f is

    lim_{eps->0} (eps/pi)^{n/2} int f(x) exp(-eps |x|^2) dmu(x),   n = dim ker S.

Two independent evaluation routes are provided: an exact spectral formula for
(polynomial of degree <= 2) x exp(i<j,x>) integrands, and a numerical oracle
that integrates the eps-damped integrand at several eps and extrapolates.
Chern-Simons type weights exp(+i Q(x)) correspond to S = -2Q; use
``from_action`` for that conversion.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

KERNEL_RTOL = 1e-10


class DivergenceError(ArithmeticError):
    pass


class ExtrapolationError(ArithmeticError):
    pass


@dataclass(frozen=True, eq=False)
class OscGaussMeasure:
    S: np.ndarray
    mean: Optional[np.ndarray] = None
    Z: complex = 1.0

    def __post_init__(self):
        S = np.atleast_2d(np.asarray(self.S, dtype=float))
        if S.shape[0] != S.shape[1] or np.max(np.abs(S - S.T), initial=0.0) > 1e-12 * max(1.0, np.abs(S).max(initial=0)):
            raise ValueError("S must be a symmetric square matrix")
        object.__setattr__(self, "S", (S + S.T) / 2)
        m = np.zeros(S.shape[0]) if self.mean is None else np.asarray(self.mean, dtype=float)
        object.__setattr__(self, "mean", m)
        if self.Z == 0:
            raise ValueError("normalization must be nonzero")

    @property
    def dim(self) -> int:
        return self.S.shape[0]

    @cached_property
    def spectrum(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(eigenvalues, eigenvectors as columns, kernel mask)."""
        lam, Q = np.linalg.eigh(self.S)
        scale = np.abs(lam).max(initial=0.0)
        kernel = np.abs(lam) <= KERNEL_RTOL * scale if scale > 0 else np.ones(len(lam), bool)
        lam = np.where(kernel, 0.0, lam)
        return lam, Q, kernel

    @property
    def kernel_dim(self) -> int:
        return int(self.spectrum[2].sum())

    @property
    def signature(self) -> int:
        lam = self.spectrum[0]
        return int(np.sum(lam > 0) - np.sum(lam < 0))


def from_action(Q: np.ndarray, Z: complex = 1.0) -> OscGaussMeasure:
    """Measure proportional to exp(+i <x, Q x>) dx."""
    return OscGaussMeasure(-2.0 * np.asarray(Q, dtype=float), None, Z)


@dataclass
class ExpPoly:
    """Finite sum of terms coeff * (c + b.x + x.A.x) * exp(i j.x)."""
    terms: List[Tuple[complex, np.ndarray, complex, np.ndarray, np.ndarray]] = field(default_factory=list)

    @classmethod
    def single(cls, j, c=1.0, b=None, A=None, coeff=1.0):
        j = np.atleast_1d(np.asarray(j, dtype=float))
        d = len(j)
        b = np.zeros(d) if b is None else np.asarray(b, dtype=complex)
        A = np.zeros((d, d)) if A is None else np.asarray(A, dtype=complex)
        return cls([(complex(coeff), j, complex(c), b, (A + A.T) / 2)])

    def __add__(self, other: "ExpPoly") -> "ExpPoly":
        return ExpPoly(self.terms + other.terms)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = 0j
        for coeff, j, c, b, A in self.terms:
            poly = c + x @ b + np.einsum("...i,ij,...j->...", x, A, x)
            out = out + coeff * poly * np.exp(1j * (x @ j))
        return out


# --------------------------------------------------------------------------
# exact spectral route
# --------------------------------------------------------------------------

def improper_integral_exp_linear(mu: OscGaussMeasure, j=None, c=1.0, b=None, A=None) -> complex:
    """Improper integral of (c + b.x + x.A.x) exp(i j.x) against mu."""
    d = mu.dim
    j = np.zeros(d) if j is None else np.atleast_1d(np.asarray(j, dtype=float))
    b = np.zeros(d) if b is None else np.asarray(b, dtype=complex)
    A = np.zeros((d, d)) if A is None else np.asarray(A, dtype=complex)
    A = (A + A.T) / 2
    lam, Q, ker = mu.spectrum
    jy, my = Q.T @ j, Q.T @ mu.mean
    scale = max(1.0, np.abs(j).max(initial=0.0))
    if np.any(np.abs(jy[ker]) > 1e-12 * scale):
        # exp(-j0^2 / (4 eps)) beats any power of 1/eps: the limit is zero
        return 0j
    Ay = Q.T @ A @ Q
    if np.any(np.abs(Ay[np.ix_(ker, ker)]) > 1e-12 * max(1.0, np.abs(A).max(initial=0.0))):
        raise DivergenceError("quadratic growth along the kernel of S is not improperly integrable")
    nz = ~ker
    l = lam[nz]
    value = np.prod(np.sqrt(2 * np.pi / np.abs(l)) * np.exp(-1j * np.pi * np.sign(l) / 4)
                    * np.exp(1j * jy[nz] * my[nz] + 1j * jy[nz] ** 2 / (2 * l)))
    mean_y = np.zeros(d)
    mean_y[nz] = my[nz] + jy[nz] / l
    cov_y = np.zeros((d, d), dtype=complex)
    cov_y[nz, nz] = -1j / l
    by = Q.T @ b
    expectation = c + by @ mean_y + np.trace(Ay @ (cov_y + np.outer(mean_y, mean_y)))
    return complex(value * expectation / mu.Z)


def improper_integral(mu: OscGaussMeasure, f: ExpPoly) -> complex:
    return sum(coeff * improper_integral_exp_linear(mu, j, c, b, A) for coeff, j, c, b, A in f.terms)


# --------------------------------------------------------------------------
# numerical oracle
# --------------------------------------------------------------------------

_GL_X, _GL_W = np.polynomial.legendre.leggauss(10)


def _panel_nodes(lo: float, hi: float, width: float) -> Tuple[np.ndarray, np.ndarray]:
    n = max(1, int(np.ceil((hi - lo) / width)))
    edges = np.linspace(lo, hi, n + 1)
    half = (edges[1:] - edges[:-1])[:, None] / 2
    mid = (edges[1:] + edges[:-1])[:, None] / 2
    return (mid + half * _GL_X).ravel(), (half * _GL_W).ravel()


def _axis_rule(lam: float, shift: float, freq: float, eps: float, refine: int) -> Tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes for one eigen-axis, panels resolving the local phase."""
    Y = np.sqrt(45.0 / eps) + abs(shift)
    max_rate = abs(lam) * (Y + abs(shift)) + freq + 1.0
    width = min(1.0 / np.sqrt(eps), np.pi / max_rate) / 2 ** refine
    return _panel_nodes(-Y, Y, width)


def _moments_1d(lam, m, j, eps, refine):
    x, w = _axis_rule(lam, m, abs(j), eps, refine)
    g = w * np.exp(-0.5j * lam * (x - m) ** 2 + 1j * j * x - eps * x ** 2)
    return np.array([g.sum(), (g * x).sum(), (g * x * x).sum()])


def _richardson(eps: Sequence[float], values: Sequence[complex]) -> complex:
    """Polynomial extrapolation to eps = 0 (Neville), after a ratio test on
    successive differences."""
    eps = np.asarray(eps, dtype=float)
    vals = np.asarray(values, dtype=complex)
    if len(vals) >= 3:
        d1, d2 = vals[-2] - vals[-3], vals[-1] - vals[-2]
        scale = max(np.abs(vals).max(), 1.0)
        if abs(d2) > 1e-12 * scale and abs(d2) > 0.5 * abs(d1):
            raise ExtrapolationError("eps extrapolation does not converge")
    table = vals.copy()
    for level in range(1, len(vals)):
        for i in range(len(vals) - level):
            a, b = eps[i], eps[i + level]
            table[i] = (a * table[i + 1] - b * table[i]) / (a - b)
    return complex(table[0])


def _stable(compute: Callable[[int], np.ndarray], rtol: float) -> np.ndarray:
    prev = compute(0)
    for refine in range(1, 4):
        cur = compute(refine)
        if np.all(np.abs(cur - prev) <= rtol * np.maximum(1.0, np.abs(cur))):
            return cur
        prev = cur
    return cur


def axis_scale(lam: float, j: float) -> float:
    """Size of eps below which the eps-dependence of one eigen-axis is perturbative."""
    if lam == 0:
        return 1.0
    return min(1.0, abs(lam) / (1.0 + j * j / abs(lam)))


def regularized_integral(mu: OscGaussMeasure, f: Callable, eps: float, refine: int = 0) -> complex:
    """(eps/pi)^{n/2} int f exp(-eps|x|^2) dmu on a tensor grid (d <= 3)."""
    lam, Q, ker = mu.spectrum
    my = Q.T @ mu.mean
    norm = (eps / np.pi) ** (mu.kernel_dim / 2) / mu.Z
    d = mu.dim
    if d > 3:
        raise ValueError("oracle is limited to three dimensions")
    rules = [_axis_rule(lam[k], my[k], 0.0, eps, refine) for k in range(d)]
    if np.prod([len(r[0]) for r in rules]) > 4e7:
        raise ValueError("oscillation too fast for a tensor grid; use an ExpPoly integrand or larger eps")
    grids = np.meshgrid(*[r[0] for r in rules], indexing="ij")
    weights = np.ones_like(grids[0])
    phase = np.zeros_like(grids[0], dtype=complex)
    for k in range(d):
        shape = [1] * d
        shape[k] = -1
        weights = weights * rules[k][1].reshape(shape)
        phase += -0.5j * lam[k] * (grids[k] - my[k]) ** 2 - eps * grids[k] ** 2
    y = np.stack(grids, axis=-1)
    x = y @ Q.T
    return complex(norm * np.sum(weights * np.exp(phase) * f(x)))


def quadrature_oracle(mu: OscGaussMeasure, f, eps_schedule: Sequence[float] = (1e-1, 1e-2, 1e-3),
                      rtol: float = 1e-10) -> complex:
    """Improper integral by eps-regularized quadrature and extrapolation eps -> 0.

    For an ExpPoly integrand the damped integral factorizes over the eigen-axes
    of S; each axis moment int y^a exp(i j y - (i/2) lam (y-m)^2 - eps y^2) dy
    (a = 0, 1, 2) is integrated numerically and extrapolated on the schedule
    rescaled by ``axis_scale``.  A general vectorized callable is integrated on
    a tensor grid at the given schedule.  Each regularized value is refined by
    panel halving until stable to ``rtol``.
    """
    eps = sorted(eps_schedule, reverse=True)
    lam, Q, ker = mu.spectrum
    my = Q.T @ mu.mean
    if not isinstance(f, ExpPoly):
        values = [_stable(lambda r, e=e: np.array([regularized_integral(mu, f, e, r)]), rtol)[0] for e in eps]
        return _richardson(eps, values)
    d = mu.dim
    total = 0j
    for coeff, j, c, b, A in f.terms:
        jy, by, Ay = Q.T @ j, Q.T @ b, Q.T @ A @ Q
        cut = 1e-12 * max(1.0, np.abs(A).max(initial=0.0), np.abs(b).max(initial=0.0))
        by = np.where(np.abs(by) > cut, by, 0)
        Ay = np.where(np.abs(Ay) > cut, Ay, 0)
        limits = np.zeros((d, 3), dtype=complex)
        for k in range(d):
            sched = [e * axis_scale(lam[k], jy[k]) for e in eps]
            raw = [_stable(lambda r, e=e: _moments_1d(lam[k], my[k], jy[k], e, r), rtol)
                   * ((e / np.pi) ** 0.5 if ker[k] else 1.0) for e in sched]
            raw = np.array(raw)
            for a in range(3):
                try:
                    limits[k, a] = _richardson(sched, raw[:, a])
                except ExtrapolationError:
                    limits[k, a] = np.nan
        def prod_except(*skip):
            return np.prod([limits[r, 0] for r in range(d) if r not in skip])
        value = c * prod_except()
        for k in range(d):
            if by[k] != 0:
                value += by[k] * limits[k, 1] * prod_except(k)
            if Ay[k, k] != 0:
                value += Ay[k, k] * limits[k, 2] * prod_except(k)
            for l in range(d):
                if l != k and Ay[k, l] != 0:
                    value += Ay[k, l] * limits[k, 1] * limits[l, 1] * prod_except(k, l)
        if np.isnan(value):
            raise ExtrapolationError("eps extrapolation does not converge")
        total += coeff * value
    return complex(total / mu.Z)


# --------------------------------------------------------------------------
# reduction of off-diagonal couplings
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ReducedIntegral:
    """Result of integrating out exp(i <a, C B>) over (a, B).

    The improper integral of f(B) equals ``prefactor`` times the improper
    integral of f restricted to ker C (coordinates along ``kernel_basis``).
    """
    prefactor: float
    kernel_basis: np.ndarray  # columns, orthonormal, in B-space
    range_basis: np.ndarray
    singular_values: np.ndarray

    def apply(self, f: Callable[[np.ndarray], complex], kernel_integral: Optional[Callable] = None) -> complex:
        if self.kernel_basis.shape[1] == 0:
            return self.prefactor * f(np.zeros(self.kernel_basis.shape[0]))
        if kernel_integral is None:
            raise ValueError("a kernel integration rule is required when ker C is nontrivial")
        return self.prefactor * kernel_integral(lambda t: f(self.kernel_basis @ np.atleast_1d(t)))


def offdiag_block_reduce(C: np.ndarray, rtol: float = 1e-10) -> ReducedIntegral:
    C = np.atleast_2d(np.asarray(C, dtype=float))
    U, s, Vt = np.linalg.svd(C, full_matrices=True)
    tol = rtol * s.max(initial=0.0)
    rank = int(np.sum(s > tol)) if s.size and s.max() > 0 else 0
    sig = s[:rank]
    prefactor = float((2 * np.pi) ** rank / np.prod(sig))
    return ReducedIntegral(prefactor, Vt[rank:].T, Vt[:rank].T, sig)


def coupling_measure(C: np.ndarray) -> OscGaussMeasure:
    """Measure on (a, B) with density exp(i <a, C B>), for cross-checks."""
    C = np.atleast_2d(np.asarray(C, dtype=float))
    m, n = C.shape
    S = np.zeros((m + n, m + n))
    S[:m, m:] = -C
    S[m:, :m] = -C.T
    return OscGaussMeasure(S)


def periodic_kernel_mean(g: Callable[[np.ndarray], np.ndarray], period: float, n: int = 2048) -> complex:
    """Improper integral along a line of a periodic, smooth function: its period mean."""
    t = np.arange(n) * (period / n)
    return complex(np.mean(g(t)))
