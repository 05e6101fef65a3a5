"""Torus data and level-k quantum data for SU(n), complete for SU(2).

Points of the Cartan subalgebra t are handled in Cartan coordinates c with
b = sum_j c_j H_j, H_j = i(E_jj - E_{j+1,j+1}).  For SU(2) this is b = x*tau
with tau = diag(i, -i), and the integral lattice ker(exp|_t) is 2*pi*Z^r.
The invariant form is <A, B> = -Tr(AB) / (4 pi^2).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, List, Sequence

import numpy as np
from scipy.linalg import expm


class LieError(ValueError):
    pass


def killing_form(A: np.ndarray, B: np.ndarray) -> float:
    return float(np.real(-np.trace(A @ B) / (4 * np.pi ** 2)))


def _gram_schmidt(mats: List[np.ndarray]) -> List[np.ndarray]:
    out: List[np.ndarray] = []
    for M in mats:
        v = M.astype(complex)
        for Q in out:
            v = v - killing_form(v, Q) * Q
        out.append(v / np.sqrt(killing_form(v, v)))
    return out


@dataclass(frozen=True, eq=False)
class LieData:
    n: int  # SU(n)

    @property
    def rank(self) -> int:
        return self.n - 1

    @property
    def dim(self) -> int:
        return self.n * self.n - 1

    @property
    def dual_coxeter(self) -> int:
        return self.n

    @cached_property
    def cartan(self) -> List[np.ndarray]:
        H = []
        for j in range(self.rank):
            M = np.zeros((self.n, self.n), dtype=complex)
            M[j, j], M[j + 1, j + 1] = 1j, -1j
            H.append(M)
        return H

    @cached_property
    def basis(self) -> List[np.ndarray]:
        """Basis of g, orthonormal for the invariant form: t part first, then k."""
        off = []
        for a in range(self.n):
            for b in range(a + 1, self.n):
                X = np.zeros((self.n, self.n), dtype=complex)
                X[a, b], X[b, a] = -1, 1
                Y = np.zeros((self.n, self.n), dtype=complex)
                Y[a, b], Y[b, a] = 1j, 1j
                off += [X, Y]
        return _gram_schmidt(self.cartan) + _gram_schmidt(off)

    @property
    def t_slice(self) -> slice:
        return slice(0, self.rank)

    @property
    def k_slice(self) -> slice:
        return slice(self.rank, self.dim)

    @cached_property
    def cartan_to_basis(self) -> np.ndarray:
        """Matrix sending Cartan coordinates to coefficients in the orthonormal basis."""
        T = self.basis[: self.rank]
        return np.array([[killing_form(H, Q) for H in self.cartan] for Q in T])

    @cached_property
    def torus_metric(self) -> np.ndarray:
        """Gram matrix <H_i, H_j> of the Cartan coordinates."""
        return np.array([[killing_form(a, b) for b in self.cartan] for a in self.cartan])

    @cached_property
    def _structure(self) -> np.ndarray:
        # ad_tensor[a][:, :] is the matrix of ad(basis[a]) in the orthonormal basis
        B = self.basis
        ad = np.zeros((self.dim, self.dim, self.dim))
        for a, X in enumerate(B):
            for b, Y in enumerate(B):
                C = X @ Y - Y @ X
                for c, Z in enumerate(B):
                    ad[a, c, b] = killing_form(C, Z)
        return ad

    def matrix(self, coeffs: Sequence[float]) -> np.ndarray:
        return sum(c * M for c, M in zip(coeffs, self.basis))

    def coefficients(self, M: np.ndarray) -> np.ndarray:
        return np.array([killing_form(M, Q) for Q in self.basis])

    def torus_matrix(self, c: Sequence[float]) -> np.ndarray:
        return sum(x * H for x, H in zip(np.atleast_1d(c), self.cartan))

    def ad(self, coeffs: Sequence[float]) -> np.ndarray:
        return np.tensordot(np.asarray(coeffs, dtype=float), self._structure, axes=(0, 0))

    def ad_torus(self, c) -> np.ndarray:
        """ad(b) on g for b given in Cartan coordinates."""
        full = np.zeros(self.dim)
        full[self.t_slice] = self.cartan_to_basis @ np.atleast_1d(c)
        return self.ad(full)

    def inner_torus(self, c1, c2) -> float:
        return float(np.atleast_1d(c1) @ self.torus_metric @ np.atleast_1d(c2))

    # roots: alpha_{ab}(b) = theta_a - theta_b with diag(b) = i*theta
    def _thetas(self, c: np.ndarray) -> np.ndarray:
        c = np.asarray(c, dtype=float)
        pad = np.zeros(c.shape[:-1] + (1,))
        full = np.concatenate([pad, c, pad], axis=-1)
        return full[..., 1:] - full[..., :-1]

    def root_angles(self, c) -> np.ndarray:
        """Values theta_a - theta_b (a < b) of the positive roots; last axis indexes roots."""
        th = self._thetas(_as_points(c, self.rank))
        cols = [th[..., a] - th[..., b] for a in range(self.n) for b in range(a + 1, self.n)]
        return np.stack(cols, axis=-1)

    def fp_density(self, c) -> np.ndarray:
        """det(1 - exp(ad b)) restricted to k."""
        ang = self.root_angles(c)
        return np.prod(4 * np.sin(ang / 2) ** 2, axis=-1)

    def fp_density_by_diagonalization(self, c) -> float:
        A = self.ad_torus(c)[self.k_slice, self.k_slice]
        return float(np.real(np.linalg.det(np.eye(A.shape[0]) - expm(A))))

    def wall_distance(self, c) -> np.ndarray:
        half = self.root_angles(c) / 2
        return np.min(np.abs(half - np.pi * np.round(half / np.pi)), axis=-1)

    def is_regular(self, c, tol: float = 1e-12) -> np.ndarray:
        return self.wall_distance(c) > tol

    def affine_weyl_generators(self) -> List[Callable[[np.ndarray], np.ndarray]]:
        """Generators acting on Cartan coordinates: simple reflections and lattice shifts."""
        gens = []
        for j in range(self.rank):
            def refl(c, j=j):
                th = self._thetas(_as_points(c, self.rank)).copy()
                th[..., [j, j + 1]] = th[..., [j + 1, j]]
                return np.cumsum(th, axis=-1)[..., :-1]
            gens.append(refl)

            for sign in (1, -1):
                def shift(c, j=j, sign=sign):
                    out = _as_points(c, self.rank).astype(float).copy()
                    out[..., j] += sign * 2 * np.pi
                    return out
                gens.append(shift)
        return gens

    def random_affine_weyl(self, c, rng: np.random.Generator, length: int = 6) -> np.ndarray:
        gens = self.affine_weyl_generators()
        out = _as_points(c, self.rank)
        for _ in range(length):
            out = gens[rng.integers(len(gens))](out)
        return out

    @cached_property
    def weight_lattice(self) -> np.ndarray:
        """Rows: fundamental weights (basis of the lattice dual to I = 2 pi Z^r), as
        elements of t in Cartan coordinates."""
        return np.linalg.inv(2 * np.pi * self.torus_metric)

    @cached_property
    def weyl_vector(self) -> np.ndarray:
        # fundamental weights are the rows of weight_lattice (dual to simple coroots 2 pi H_j)
        return self.weight_lattice.sum(axis=0)


def _as_points(c, rank: int) -> np.ndarray:
    arr = np.asarray(c, dtype=float)
    if rank == 1 and (arr.ndim == 0 or arr.shape[-1] != 1):
        arr = arr[..., None]
    return arr


SU2 = LieData(2)


def smoothstep(u):
    """C-infinity step: 0 for u <= 0, 1 for u >= 1."""
    u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(u > 0, np.exp(-1.0 / np.where(u > 0, u, 1)), 0.0)
        b = np.where(u < 1, np.exp(-1.0 / np.where(u < 1, 1 - u, 1)), 0.0)
    return a / (a + b)


def mollifier(s: float, c, lie: LieData = SU2):
    """Smooth cut-off of the regular set: 0 within s/2 of a wall, 1 beyond s."""
    if not s > 0:
        raise LieError("mollifier width must be positive")
    d = lie.wall_distance(c)
    return 1.0 - smoothstep((s - d) / (s / 2))


# --------------------------------------------------------------------------
# level data (SU(2))
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LevelData:
    lie: LieData
    k: int
    colors: tuple
    S: np.ndarray
    dims: np.ndarray
    fusion_table: np.ndarray  # fusion_table[lam, mu, nu] = N^lam_{mu nu}

    def check_color(self, *cols) -> None:
        for c in cols:
            if c not in self.colors:
                raise LieError(f"color {c} outside 0..{self.k - 2}")

    def dim(self, lam: int) -> float:
        self.check_color(lam)
        return float(self.dims[lam])

    def casimir(self, lam: int) -> float:
        """<lam w, lam w + 2 rho> for the highest weight lam * (fundamental weight)."""
        w = self.lie.weight_lattice[0] * lam
        return self.lie.inner_torus(w, w + 2 * self.lie.weyl_vector)

    def twist(self, lam: int) -> complex:
        return complex(np.exp(1j * np.pi / self.k * self.casimir(lam)))

    def shifted_point(self, lam: int) -> np.ndarray:
        """(lam + rho) / k in Cartan coordinates."""
        return (self.lie.weight_lattice[0] * lam + self.lie.weyl_vector) / self.k


def build_level(lie: LieData, k: int) -> LevelData:
    if lie.n != 2:
        raise NotImplementedError("level data is only implemented for SU(2)")
    if k < lie.dual_coxeter:
        raise LieError("empty color set")
    colors = tuple(range(k - 1))
    idx = np.arange(1, k)
    S = np.sqrt(2.0 / k) * np.sin(np.pi * np.outer(idx, idx) / k)
    dims = S[:, 0] / S[0, 0]
    n = len(colors)
    raw = np.einsum("ms,ns,ls,s->lmn", S, S, S.conj(), 1.0 / S[0, :])
    table = np.rint(raw.real).astype(int)
    if np.max(np.abs(raw - table)) > 1e-6 or table.min() < 0:
        raise LieError("Verlinde sums are not integral")
    return LevelData(lie, k, colors, S.astype(complex), dims, table)


def fusion(level: LevelData, mu: int, nu: int, lam: int) -> int:
    """N^lam_{mu nu}."""
    level.check_color(mu, nu, lam)
    return int(level.fusion_table[lam, mu, nu])


def fusion_rule_su2(k: int, mu: int, nu: int, lam: int) -> int:
    """Closed truncated Clebsch-Gordan rule, used as an independent check."""
    return int(abs(mu - nu) <= lam <= min(mu + nu, 2 * (k - 2) - mu - nu) and (lam - mu - nu) % 2 == 0)


def character(n: int, x):
    """Character of the spin n/2 representation of SU(2) at exp(x tau)."""
    x = np.asarray(x, dtype=float)
    j = np.arange(n + 1)
    return np.exp(1j * np.multiply.outer(x, n - 2 * j)).sum(axis=-1)


def exp_weight_trace(level: LevelData, mu: int, c) -> complex:
    level.check_color(mu)
    x = _as_points(c, 1)[..., 0]
    return character(mu, x)


def character_of_matrix(n: int, U: np.ndarray) -> complex:
    """Character of the spin n/2 representation at U in SU(2), via Chebyshev recursion."""
    t = np.trace(U)
    prev, cur = 1.0 + 0j, t
    if n == 0:
        return prev
    for _ in range(n - 1):
        prev, cur = cur, t * cur - prev
    return cur


def level_to_json(level: LevelData) -> dict:
    return {
        "schema": "v1",
        "group": f"su{level.lie.n}",
        "k": level.k,
        "colors": list(level.colors),
        "S": [[float(v.real) for v in row] for row in level.S],
        "dims": [float(d) for d in level.dims],
        "fusion": [[[int(level.fusion_table[l, m, n]) for l in level.colors] for n in level.colors]
                   for m in level.colors],
    }
