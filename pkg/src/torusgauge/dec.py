"""Cochains with vector coefficients, (co)boundaries, the half-edge embedding
of C^1(K1) and C^1(K2) into C^1(qK), and Hodge stars of a dual pair."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .polycomplex import DualPairing, JoinedComplex, PolyComplex


class CochainError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Cochain:
    complex: PolyComplex
    degree: int
    values: np.ndarray  # shape (n_faces, coeff_dim)

    def __post_init__(self):
        vals = np.asarray(self.values)
        if vals.ndim == 1:
            vals = vals[:, None]
        if vals.shape[0] != self.complex.n_faces(self.degree):
            raise CochainError("values do not match the number of faces")
        object.__setattr__(self, "values", vals)

    @property
    def coeff_dim(self) -> int:
        return self.values.shape[1]

    def __add__(self, other: "Cochain") -> "Cochain":
        return Cochain(self.complex, self.degree, self.values + other.values)

    def __rmul__(self, scalar) -> "Cochain":
        return Cochain(self.complex, self.degree, scalar * self.values)

    def to_csv(self, fh=None) -> str:
        buf = fh if fh is not None else io.StringIO()
        w = csv.writer(buf)
        w.writerow(["face"] + [f"c{k}" for k in range(self.coeff_dim)])
        for fid, row in zip(self.complex.faces[self.degree], self.values):
            w.writerow([fid] + [repr(float(x)) for x in row])
        return buf.getvalue() if fh is None else ""


def zeros(K: PolyComplex, p: int, coeff_dim: int = 1) -> Cochain:
    return Cochain(K, p, np.zeros((K.n_faces(p), coeff_dim)))


def basis(K: PolyComplex, p: int, face_id: str, coeff_dim: int = 1, component: int = 0) -> Cochain:
    c = zeros(K, p, coeff_dim)
    c.values[K.index(p, face_id), component] = 1.0
    return c


def boundary(c: Cochain) -> Cochain:
    if c.degree < 1:
        raise CochainError("boundary of a 0-chain is undefined")
    return Cochain(c.complex, c.degree - 1, c.complex.boundary_matrix(c.degree) @ c.values)


def coboundary(c: Cochain) -> Cochain:
    if c.degree >= c.complex.dim:
        raise CochainError("coboundary of a top-degree cochain is undefined")
    return Cochain(c.complex, c.degree + 1, c.complex.boundary_matrix(c.degree + 1).T @ c.values)


def inner(a: Cochain, b: Cochain, metric: Optional[np.ndarray] = None) -> float:
    if a.complex is not b.complex or a.degree != b.degree:
        raise CochainError("cochains live on different spaces")
    if metric is None:
        return float(np.sum(a.values * b.values))
    return float(np.einsum("fi,ij,fj->", a.values, metric, b.values))


def psi_matrix(joined: JoinedComplex, side: str) -> np.ndarray:
    """Matrix of the embedding C^1(K_side) -> C^1(qK), side in {'base','dual'}."""
    halves = joined.base_halves if side == "base" else joined.dual_halves
    mat = np.zeros((joined.complex.n_faces(1), len(halves)))
    for e, (h1, h2) in enumerate(halves):
        mat[h1, e] = 1.0
        mat[h2, e] = 1.0
    return mat


def psi_embed(a: Cochain, joined: JoinedComplex) -> Cochain:
    if a.degree != 1:
        raise CochainError("only 1-cochains are embedded")
    if a.complex is joined.pair.base:
        side = "base"
    elif a.complex is joined.pair.dual:
        side = "dual"
    else:
        raise CochainError("unregistered complex")
    return Cochain(joined.complex, 1, psi_matrix(joined, side) @ a.values)


def star_matrix(pair: DualPairing, p: int, source: str = "base") -> np.ndarray:
    """Signed permutation matrix of the Hodge star on p-cochains.

    ``source='base'`` maps C^p(K1) -> C^{2-p}(K2); ``source='dual'`` maps
    C^p(K2) -> C^{2-p}(K1) and equals (-1)^{p(2-p)} times the inverse of the
    base star in degree 2-p.
    """
    if source == "base":
        n = pair.base.n_faces(p)
        mat = np.zeros((pair.dual.n_faces(2 - p), n))
        for i in range(n):
            mat[pair.face_map[p][i], i] = pair.star_sign[p][i]
        return mat
    if source == "dual":
        forward = star_matrix(pair, 2 - p, "base")
        return (-1) ** (p * (2 - p)) * forward.T
    raise CochainError("source must be 'base' or 'dual'")


def hodge_star(a: Cochain, pair: DualPairing) -> Cochain:
    if a.complex is pair.base:
        src, target = "base", pair.dual
    elif a.complex is pair.dual:
        src, target = "dual", pair.base
    else:
        raise CochainError("unregistered complex")
    return Cochain(target, 2 - a.degree, star_matrix(pair, a.degree, src) @ a.values)
