"""Discrete Chern-Simons path integral in torus gauge on qK x Z_N.

Field layout: an element of A_perp(K) is stored as a real array of shape
(2, E, N, dim g): side (0 = K1 edge, 1 = K2 edge), edge, time, and
coefficients in the orthonormal Lie basis.  Flattened in C order, each
(side, edge) pair is a contiguous block of size N * dim g.  B-fields are
arrays of Cartan coordinates, one row per vertex of qK.

Normalizations: <<A, A'>> = (1/N) sum_t <psi A(t), psi A'(t)> on qK, which is
2/N times the flat dot product of the raw arrays.  Gaussian coordinates are
orthonormal for this product.
"""
from __future__ import annotations

import math
import weakref
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import block_diag, expm, null_space

from .dec import psi_matrix, star_matrix
from .lie import SU2, LevelData, LieData, character_of_matrix, mollifier
from .oscgauss import ReducedIntegral, offdiag_block_reduce
from .polycomplex import JoinedComplex
from .ribbon import RibbonLink, SimplicialLoop, SimplicialRibbon


class CSPathError(ArithmeticError):
    pass


# --------------------------------------------------------------------------
# operators on Map(Z_N, g)
# --------------------------------------------------------------------------

def _shift(N: int, x: int) -> np.ndarray:
    """tau_x on Map(Z_N, R): (tau_x f)(t) = f(t + x)."""
    T = np.zeros((N, N))
    for t in range(N):
        T[t, (t + x) % N] = 1.0
    return T


def _ad_exp(b, N: int, lie: LieData, sign: int = 1) -> np.ndarray:
    return expm(sign * lie.ad_torus(b) / N)


def lhat_op(b, N: int, lie: LieData = SU2) -> np.ndarray:
    """N (tau_1 e^{ad(b)/N} - 1), acting on the flattened (t, a) index."""
    return N * (np.kron(_shift(N, 1), _ad_exp(b, N, lie)) - np.eye(N * lie.dim))


def lcheck_op(b, N: int, lie: LieData = SU2) -> np.ndarray:
    """N (1 - tau_{-1} e^{-ad(b)/N})."""
    return N * (np.eye(N * lie.dim) - np.kron(_shift(N, -1), _ad_exp(b, N, lie, -1)))


def lbar_op(b, N: int, lie: LieData = SU2) -> np.ndarray:
    if N % 2:
        raise CSPathError("the symmetric operator needs an even N")
    return N / 2 * (np.kron(_shift(N, 1), _ad_exp(b, N, lie)) - np.kron(_shift(N, -1), _ad_exp(b, N, lie, -1)))


def naive_difference_ops(N: int, dim: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Forward, backward and (even N) central differences on Map(Z_N, R^dim)."""
    I = np.eye(N * dim)
    fwd = N * (np.kron(_shift(N, 1), np.eye(dim)) - I)
    bwd = N * (I - np.kron(_shift(N, -1), np.eye(dim)))
    ctr = N / 2 * np.kron(_shift(N, 1) - _shift(N, -1), np.eye(dim))
    return fwd, bwd, ctr


def restrict_to_k(op: np.ndarray, N: int, lie: LieData = SU2) -> np.ndarray:
    """Restriction of an operator on Map(Z_N, g) to Map(Z_N, k)."""
    keep = [t * lie.dim + a for t in range(N) for a in range(lie.rank, lie.dim)]
    return op[np.ix_(keep, keep)]


def s_inverse_op(b, N: int, lie: LieData = SU2) -> np.ndarray:
    """Discrete inverse of lhat restricted to Map(Z_N, k) for regular b:
    (e^{ad b}|_k - 1)^{-1} (1/N) sum_j e^{(j/N) ad b} f(t + j)."""
    ks = lie.k_slice
    E = _ad_exp(b, N, lie)[ks, ks]
    pre = np.linalg.inv(np.linalg.matrix_power(E, N) - np.eye(E.shape[0]))
    out = np.zeros((N * E.shape[0], N * E.shape[0]))
    for j in range(N):
        out += np.kron(_shift(N, j), pre @ np.linalg.matrix_power(E, j)) / N
    return out


# --------------------------------------------------------------------------
# field spaces
# --------------------------------------------------------------------------

@dataclass(eq=False)
class FieldSpaces:
    joined: JoinedComplex
    N: int
    sigma0: int
    lie: LieData = SU2

    @property
    def E(self) -> int:
        return self.joined.pair.base.n_faces(1)

    @property
    def block(self) -> int:
        return self.N * self.lie.dim

    @property
    def size(self) -> int:
        return 2 * self.E * self.block

    @property
    def qk(self):
        return self.joined.complex

    def gram(self) -> float:
        return 2.0 / self.N

    @cached_property
    def star_k(self) -> np.ndarray:
        """Hodge star on A_Sigma(K) = C^1(K1) + C^1(K2), per (side, edge) index."""
        pair = self.joined.pair
        E = self.E
        S = np.zeros((2 * E, 2 * E))
        S[:E, E:] = star_matrix(pair, 1, "dual")
        S[E:, :E] = star_matrix(pair, 1, "base")
        return S

    @cached_property
    def psi(self) -> np.ndarray:
        """Embedding A_Sigma(K) -> C^1(qK) on the (side, edge) index."""
        return np.hstack([psi_matrix(self.joined, "base"), psi_matrix(self.joined, "dual")])

    @cached_property
    def midpoint_of(self) -> List[int]:
        """qK vertex index of the midpoint of each (side, edge)."""
        Q = self.qk
        halves = list(self.joined.base_halves) + list(self.joined.dual_halves)
        return [Q.edge_endpoints(h1)[1] for h1, _ in halves]

    @cached_property
    def qk_edge_slot(self) -> Dict[int, int]:
        halves = list(self.joined.base_halves) + list(self.joined.dual_halves)
        return {h: i for i, pair in enumerate(halves) for h in pair}

    @cached_property
    def midpoint_groups(self) -> List[Tuple[int, ...]]:
        groups: Dict[int, List[int]] = {}
        for i, m in enumerate(self.midpoint_of):
            groups.setdefault(m, []).append(i)
        out = [tuple(g) for g in groups.values()]
        for g in out:
            outside = np.delete(self.star_k[list(g)], list(g), axis=1)
            if np.any(outside):
                raise CSPathError("Hodge star couples different midpoints")
        return out

    @cached_property
    def check_block_basis(self) -> np.ndarray:
        """Orthonormal basis of {f in Map(Z_N, g): sum_t f(t) in k}."""
        cons = np.zeros((self.lie.rank, self.block))
        for a in range(self.lie.rank):
            cons[a, a::self.lie.dim] = 1.0
        return null_space(cons)

    @cached_property
    def check_basis(self) -> np.ndarray:
        return block_diag(*([self.check_block_basis] * (2 * self.E)))

    @cached_property
    def const_basis(self) -> np.ndarray:
        """Raw embedding of orthonormal coordinates of A_perp_c (constant, t-valued)."""
        g, r, N = self.lie.dim, self.lie.rank, self.N
        cols = []
        for i in range(2 * self.E):
            for a in range(r):
                v = np.zeros((2 * self.E, N, g))
                v[i, :, a] = 1.0
                cols.append(v.ravel())
        M = np.array(cols).T
        return M / np.sqrt(self.gram() * N)

    def inner(self, A1: np.ndarray, A2: np.ndarray) -> float:
        return self.gram() * float(np.dot(np.ravel(A1), np.ravel(A2)))


# --------------------------------------------------------------------------
# B-space with Mod2 and Mod3
# --------------------------------------------------------------------------

def sigma0_neighbourhood(joined: JoinedComplex, sigma0: int) -> List[int]:
    Q = joined.complex
    out = {sigma0}
    for f in range(Q.n_faces(2)):
        verts = Q.closure_vertices(2, f)
        if sigma0 in verts:
            out |= verts
    return sorted(out)


@dataclass(eq=False)
class BSpace:
    """Mod2 (affine on tetragons) and Mod3 (constant near sigma0) constrained
    t-valued 0-cochains on qK, with orthonormal coordinates."""
    spaces: FieldSpaces

    @cached_property
    def constraints(self) -> np.ndarray:
        J, s0 = self.spaces.joined, self.spaces.sigma0
        V = J.complex.n_faces(0)
        rows = []
        for v1, v2, m1, m2 in J.corners:
            row = np.zeros(V)
            row[[v1, v2]] += 1
            row[[m1, m2]] -= 1
            rows.append(row)
        for x in sigma0_neighbourhood(J, s0):
            if x != s0:
                row = np.zeros(V)
                row[x], row[s0] = 1, -1
                rows.append(row)
        return np.array(rows)

    @cached_property
    def vertex_basis(self) -> np.ndarray:
        """Columns: orthonormal basis of admissible vertex-value vectors (one t direction)."""
        return null_space(self.constraints)

    @property
    def dim(self) -> int:
        return self.vertex_basis.shape[1] * self.spaces.lie.rank

    def to_cartan(self, coords: np.ndarray) -> np.ndarray:
        """Orthonormal B-space coordinates -> vertex Cartan coordinates (V, r)."""
        lie = self.spaces.lie
        n = self.vertex_basis.shape[1]
        ortho = self.vertex_basis @ np.asarray(coords).reshape(lie.rank, n).T
        return np.linalg.solve(lie.cartan_to_basis, ortho.T).T

    def contains(self, B: np.ndarray, tol: float = 1e-9) -> bool:
        B = np.asarray(B).reshape(self.constraints.shape[1], -1)
        return bool(np.max(np.abs(self.constraints @ B), initial=0.0) <= tol)


# --------------------------------------------------------------------------
# the discrete action
# --------------------------------------------------------------------------

def build_ln(B: np.ndarray, spaces: FieldSpaces) -> np.ndarray:
    """L^(N)(B) on A_perp(K): lhat on K1 edges, lcheck on K2 edges, at midpoint values."""
    B = np.asarray(B, dtype=float).reshape(spaces.qk.n_faces(0), -1)
    blocks = []
    for i, m in enumerate(spaces.midpoint_of):
        op = lhat_op if i < spaces.E else lcheck_op
        blocks.append(op(B[m], spaces.N, spaces.lie))
    return block_diag(*blocks)


def star_l(B: np.ndarray, spaces: FieldSpaces) -> np.ndarray:
    return np.kron(spaces.star_k, np.eye(spaces.block)) @ build_ln(B, spaces)


def exterior_derivative_b(B: np.ndarray, spaces: FieldSpaces) -> np.ndarray:
    """d_qK B as g-coefficients per qK edge (t components only)."""
    Q, lie = spaces.qk, spaces.lie
    B = np.asarray(B, dtype=float).reshape(Q.n_faces(0), -1)
    dB = Q.boundary_matrix(1).T @ B
    out = np.zeros((Q.n_faces(1), lie.dim))
    out[:, lie.t_slice] = dB @ lie.cartan_to_basis.T
    return out


def discrete_action(A: np.ndarray, B: np.ndarray, spaces: FieldSpaces, k: int) -> float:
    """pi k <<A, *L(B) A>> + 2 pi k <<*_K A, d_qK B>>."""
    A = np.asarray(A, dtype=float).ravel()
    quad = np.pi * k * spaces.inner(A, star_l(B, spaces) @ A)
    Ar = A.reshape(2 * spaces.E, spaces.N, spaces.lie.dim)
    starA = np.einsum("ij,jtg->itg", spaces.star_k, Ar)
    on_qk = np.einsum("qi,itg->tqg", spaces.psi, starA)
    dB = exterior_derivative_b(B, spaces)
    lin = 2 * np.pi * k * float(np.einsum("tqg,qg->", on_qk, dB)) / spaces.N
    return quad + lin


def split_field(A: np.ndarray, spaces: FieldSpaces) -> Tuple[np.ndarray, np.ndarray]:
    """Orthogonal split A = A_check + A_c."""
    A = np.asarray(A, dtype=float).ravel()
    P = spaces.const_basis
    coeff = spaces.gram() * (P.T @ A)
    Ac = P @ coeff
    return A - Ac, Ac


def m_check(B: np.ndarray, spaces: FieldSpaces, k: int) -> np.ndarray:
    """pi k (*_K L(B)) on the orthonormal coordinates of the check space."""
    P = spaces.check_basis
    M = np.pi * k * P.T @ star_l(B, spaces) @ P
    return (M + M.T) / 2


def m_check_blocks(B: np.ndarray, spaces: FieldSpaces, k: int) -> List[np.ndarray]:
    """The same form split into independent blocks, one per midpoint."""
    B = np.asarray(B, dtype=float).reshape(spaces.qk.n_faces(0), -1)
    Pb = spaces.check_block_basis
    out, seen = [], {}
    for group in spaces.midpoint_groups:
        key = (tuple(tuple(B[spaces.midpoint_of[i]].tolist()) for i in group),
               spaces.star_k[np.ix_(group, group)].tobytes(), tuple(i < spaces.E for i in group))
        if key in seen:
            out.append(seen[key])
            continue
        ops = []
        for i in group:
            op = lhat_op if i < spaces.E else lcheck_op
            ops.append(op(B[spaces.midpoint_of[i]], spaces.N, spaces.lie))
        star = np.kron(spaces.star_k[np.ix_(group, group)], np.eye(spaces.block))
        P = block_diag(*([Pb] * len(group)))
        M = np.pi * k * P.T @ star @ block_diag(*ops) @ P
        seen[key] = (M + M.T) / 2
        out.append(seen[key])
    return out


def coupling_matrix(spaces: FieldSpaces, bspace: BSpace, k: int) -> np.ndarray:
    """C with <a, C beta> = 2 pi k <<*_K a, d_qK B(beta)>>, both sides in orthonormal coordinates."""
    lie = spaces.lie
    D0 = spaces.qk.boundary_matrix(1).T.astype(float)
    raw = (spaces.psi @ spaces.star_k).T @ D0 @ bspace.vertex_basis  # (2E, nb)
    scale = 2 * np.pi * k / np.sqrt(spaces.gram() * spaces.N)
    return scale * np.kron(raw, np.eye(lie.rank)).reshape(2 * spaces.E * lie.rank, -1)


def action_quadratic_forms(B: np.ndarray, spaces: FieldSpaces, bspace: BSpace, k: int):
    return m_check(B, spaces, k), coupling_matrix(spaces, bspace, k)


# --------------------------------------------------------------------------
# Faddeev-Popov factor and the inner Gaussian
# --------------------------------------------------------------------------

def det_fp(B: np.ndarray, lie: LieData = SU2, exponent: float = 0.5) -> float:
    """Product over qK vertices of fp_density(B(x))**exponent (exponent 1/2 is Mod1)."""
    vals = lie.fp_density(np.asarray(B, dtype=float).reshape(-1, lie.rank))
    return float(np.prod(np.maximum(vals, 0.0) ** exponent))


def det_fp_mod1(B: np.ndarray, lie: LieData = SU2) -> float:
    return det_fp(B, lie, 0.5)


def log_gaussian_factor(B: np.ndarray, spaces: FieldSpaces, k: int) -> Tuple[float, int, int]:
    """(log |Z(B)|, signature, dimension) of the check-space Fresnel integral,
    Z = |det M|^{-1/2} e^{i pi sig/4} (2 pi)^{dim/2}."""
    logabs, sig, dim = 0.0, 0, 0
    for M in m_check_blocks(B, spaces, k):
        ev = np.linalg.eigvalsh(M)
        if np.min(np.abs(ev)) <= 1e-12 * max(np.max(np.abs(ev)), 1.0):
            raise CSPathError("degenerate quadratic form: a midpoint value lies on a wall")
        logabs += -0.5 * float(np.sum(np.log(np.abs(ev))))
        sig += int(np.sum(np.sign(ev)))
        dim += len(ev)
    logabs += 0.5 * dim * math.log(2 * math.pi)
    return logabs, sig, dim


# --------------------------------------------------------------------------
# holonomies
# --------------------------------------------------------------------------

def _step_data(loop: SimplicialLoop, link: RibbonLink, k_step: int):
    P = link.product
    v = loop.vertices[k_step]
    e, sign = loop.steps[k_step]
    _, x, t, _ = P.cell[0][v]
    _, i, _, vertical = P.cell[1][e]
    return x, t, i, sign, vertical


def _step_generator(loop, link, k_step, A, B, spaces, weight):
    lie = spaces.lie
    x, t, i, sign, vertical = _step_data(loop, link, k_step)
    if vertical:
        return weight * sign / link.N * lie.torus_matrix(B[x])
    if A is None:
        return np.zeros((lie.n, lie.n), dtype=complex)
    slot = spaces.qk_edge_slot[i]
    return weight * sign * lie.matrix(A[slot, t])


def _expm(X: np.ndarray) -> np.ndarray:
    """Matrix exponential; closed form for traceless 2x2 matrices (X^2 = -det X)."""
    if X.shape == (2, 2) and abs(X[0, 0] + X[1, 1]) < 1e-14:
        q = np.sqrt(complex(-np.linalg.det(X)))
        if abs(q) < 1e-8:
            return np.eye(2) + X + X @ X / 2
        return np.cosh(q) * np.eye(2) + np.sinh(q) / q * X
    return expm(X)


def disc_holonomy_loop(loop: SimplicialLoop, link: RibbonLink, A: Optional[np.ndarray], B: np.ndarray,
                       spaces: FieldSpaces) -> np.ndarray:
    """Ordered product of exp(A(t)(l_Sigma) + B(x) dt(l_S1)) along one loop."""
    B = np.asarray(B, dtype=float).reshape(spaces.qk.n_faces(0), -1)
    A = None if A is None else np.asarray(A, dtype=float).reshape(2 * spaces.E, spaces.N, spaces.lie.dim)
    U = np.eye(spaces.lie.n, dtype=complex)
    for k_step in range(len(loop.steps)):
        U = U @ _expm(_step_generator(loop, link, k_step, A, B, spaces, 1.0))
    return U


def disc_holonomy_ribbon(R: SimplicialRibbon, link: RibbonLink, A: Optional[np.ndarray], B: np.ndarray,
                         spaces: FieldSpaces) -> np.ndarray:
    """Ordered product over faces of exp of the average of the two boundary-loop steps."""
    B = np.asarray(B, dtype=float).reshape(spaces.qk.n_faces(0), -1)
    A = None if A is None else np.asarray(A, dtype=float).reshape(2 * spaces.E, spaces.N, spaces.lie.dim)
    n = spaces.lie.n
    U = np.eye(n, dtype=complex)
    for k_step in range(len(R.faces)):
        X = np.zeros((n, n), dtype=complex)
        for loop in (R.loop_right, R.loop_left):
            X = X + _step_generator(loop, link, k_step, A, B, spaces, 0.5)
        U = U @ _expm(X)
    return U


def holonomy_trace(U: np.ndarray, color: int, level: LevelData) -> complex:
    level.check_color(color)
    return complex(character_of_matrix(color, U))


# --------------------------------------------------------------------------
# the outer integral
# --------------------------------------------------------------------------

@dataclass
class OuterResult:
    value: complex
    mode: str
    s: float
    cutoff: Optional[int] = None
    cutoff_change: float = 0.0
    quad_error: float = 0.0


@dataclass(eq=False)
class WLOEngine:
    """Staged evaluation of the discrete rigorous WLO for links whose
    holonomies depend on B only (vertical ribbons), on a connected surface.

    Integrating out (A_c, B) leaves B on ker C, which here is the line of
    globally constant B; the integrand is 2 pi periodic along it, so its
    improper integral is the period mean.  Integrand values along the line
    are computed in batches.
    """
    joined: JoinedComplex
    N: int
    sigma0: int
    k: int
    level: LevelData
    lie: LieData = SU2
    grid_size: int = 2 ** 16
    _base: Dict[int, np.ndarray] = field(default_factory=dict)
    _empty: Dict[tuple, "OuterResult"] = field(default_factory=dict)
    _traces: "weakref.WeakKeyDictionary" = field(default_factory=weakref.WeakKeyDictionary)

    def __post_init__(self):
        if self.lie.rank != 1:
            raise NotImplementedError("the outer integral is implemented for rank one")
        self.spaces = FieldSpaces(self.joined, self.N, self.sigma0, self.lie)
        self.bspace = BSpace(self.spaces)
        self.C = coupling_matrix(self.spaces, self.bspace, self.k)
        self.reduction: ReducedIntegral = offdiag_block_reduce(self.C)
        ker = self.bspace.vertex_basis @ self.reduction.kernel_basis
        if ker.shape[1] != 1:
            raise CSPathError(f"ker C has dimension {ker.shape[1]}; only a one-dimensional kernel is handled")
        u = ker[:, 0]
        if np.ptp(u) > 1e-9 * np.max(np.abs(u)):
            raise CSPathError("ker C is not the line of constant B")
        self.n_vertices = self.spaces.qk.n_faces(0)
        self.offset = float(self.log_base(np.array([np.pi / 2]))[0])

    def constant_b(self, theta: float) -> np.ndarray:
        return np.full((self.n_vertices, 1), float(theta))

    # ---- batched pieces along the constant line

    def _block_patterns(self) -> Dict[tuple, int]:
        sp = self.spaces
        out: Dict[tuple, int] = {}
        for group in sp.midpoint_groups:
            key = (tuple(i < sp.E for i in group), tuple(map(tuple, sp.star_k[np.ix_(group, group)])))
            out[key] = out.get(key, 0) + 1
        return out

    def _log_gaussian_batch(self, theta: np.ndarray) -> np.ndarray:
        """log |Z| at constant B = theta for regular theta (signature checked to be 0)."""
        sp, N, lie = self.spaces, self.N, self.lie
        ad1 = lie.ad_torus([1.0])
        fwd = expm(theta[:, None, None] * ad1[None] / N)
        bwd = expm(-theta[:, None, None] * ad1[None] / N)
        n = sp.block
        eye = np.eye(n)
        kron = lambda S, E: np.einsum("ij,tkl->tikjl", S, E).reshape(len(theta), n, n)
        lhat = N * (kron(_shift(N, 1), fwd) - eye)
        lchk = N * (eye - kron(_shift(N, -1), bwd))
        Pb = sp.check_block_basis
        total = np.zeros(len(theta))
        dim = 0
        for (sides, star), mult in self._block_patterns().items():
            g = len(sides)
            ops = np.zeros((len(theta), g * n, g * n))
            for j, is_base in enumerate(sides):
                ops[:, j * n:(j + 1) * n, j * n:(j + 1) * n] = lhat if is_base else lchk
            star_m = np.kron(np.array(star), eye)
            P = block_diag(*([Pb] * g))
            M = np.pi * self.k * np.einsum("ia,ij,tjk,kb->tab", P, star_m, ops, P, optimize=True)
            ev = np.linalg.eigvalsh((M + np.swapaxes(M, 1, 2)) / 2)
            scale = np.max(np.abs(ev), axis=1, keepdims=True)
            if np.any(np.min(np.abs(ev), axis=1) <= 1e-12 * np.maximum(scale[:, 0], 1.0)):
                raise CSPathError("degenerate quadratic form: a midpoint value lies on a wall")
            if np.any(np.sum(np.sign(ev), axis=1) != 0):
                raise CSPathError("nonzero signature on the constant line")
            total += mult * (-0.5) * np.sum(np.log(np.abs(ev)), axis=1)
            dim += mult * ev.shape[1]
        return total + 0.5 * dim * math.log(2 * math.pi)

    def log_base(self, theta: np.ndarray, chunk: int = 4096) -> np.ndarray:
        """log of det_fp_mod1 * |Z| at constant B = theta; -inf on the walls."""
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        out = np.full(theta.shape, -np.inf)
        reg = np.nonzero(np.atleast_1d(self.lie.is_regular(theta[:, None], 1e-9)))[0]
        for lo in range(0, len(reg), chunk):
            idx = reg[lo:lo + chunk]
            fp = np.ravel(self.lie.fp_density(theta[idx][:, None]))
            out[idx] = 0.5 * self.n_vertices * np.log(fp) + self._log_gaussian_batch(theta[idx])
        return out

    def _grid(self, G: int) -> np.ndarray:
        return 2 * np.pi * np.arange(G) / G

    def _base_on_grid(self, G: int) -> np.ndarray:
        if G not in self._base:
            finer = [H for H in self._base if H > G and H % G == 0]
            if finer:
                H = min(finer)
                self._base[G] = self._base[H][:: H // G]
            else:
                self._base[G] = np.exp(self.log_base(self._grid(G)) - self.offset)
        return self._base[G]

    def link_traces(self, link: RibbonLink, theta: np.ndarray) -> np.ndarray:
        """Product over ribbons of the colored holonomy traces at constant B = theta.

        With A = 0 every step generator is linear in B, so the holonomy at
        B = theta is the ordered product of exp(theta X_k) with X_k taken at B = 1.
        """
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        ones = self.constant_b(1.0)
        out = np.ones(theta.shape, dtype=complex)
        for R, proj, color in zip(link.ribbons, link.projections, link.colors):
            if proj.kind != "vertical":
                raise CSPathError("generic ribbons need the Gaussian expansion route")
            self.level.check_color(color)
            U = np.broadcast_to(np.eye(self.lie.n, dtype=complex), theta.shape + (self.lie.n,) * 2)
            for k_step in range(len(R.faces)):
                X = sum(_step_generator(loop, link, k_step, None, ones, self.spaces, 0.5)
                        for loop in (R.loop_right, R.loop_left))
                U = U @ expm(theta[:, None, None] * X[None])
            t = np.trace(U, axis1=-2, axis2=-1)
            prev, cur = np.ones_like(t), t
            if color == 0:
                cur = prev
            for _ in range(max(color - 1, 0)):
                prev, cur = cur, t * cur - prev
            out *= cur
        return out

    def _traces_on_grid(self, link: RibbonLink, G: int) -> np.ndarray:
        cache = self._traces.setdefault(link, {})
        if G not in cache:
            finer = [H for H in cache if H > G and H % G == 0]
            cache[G] = cache[min(finer)][:: min(finer) // G] if finer else self.link_traces(link, self._grid(G))
        return cache[G]

    def integrand(self, theta, link: Optional[RibbonLink], s: Optional[float]) -> np.ndarray:
        """f_s(theta) without the lattice sum, up to a fixed positive constant."""
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        val = np.exp(self.log_base(theta) - self.offset).astype(complex)
        if s is not None:
            val *= np.ravel(mollifier(s, theta[:, None], self.lie)) ** self.n_vertices
        if link is not None:
            val *= self.link_traces(link, theta)
        return val

    def _integrand_on_grid(self, link, s, G) -> np.ndarray:
        theta = self._grid(G)
        val = self._base_on_grid(G) * np.ravel(mollifier(s, theta[:, None], self.lie)) ** self.n_vertices
        if link is not None:
            val = val * self._traces_on_grid(link, G)
        return val.astype(complex)

    # ---- the lattice sum

    def lattice_frequency(self) -> float:
        """exp(-2 pi i k <y, B(sigma0)>) = exp(-i m w theta) for y = 2 pi m."""
        return 2 * np.pi * self.k * self.lie.inner_torus([2 * np.pi], [1.0])

    def poisson(self, link: Optional[RibbonLink], s: float) -> OuterResult:
        """Resummed lattice sum: a Dirac comb at the points theta = 2 pi n / w."""
        w = self.lattice_frequency()
        count = int(round(w))
        total = np.sum(self.integrand(2 * np.pi * np.arange(count) / w, link, s))
        return OuterResult(self.reduction.prefactor * complex(total) / count, "poisson", s)

    def damping_schedule(self, s: float) -> Tuple[float, float, float]:
        """Damping strengths for the lattice sum.  The damped sum smears each
        lattice point over a Gaussian of width sqrt(2 eps)/w in theta; keeping
        that width below s/8 stops the peaks on the walls from reaching the
        mollifier transition, which would spoil the power series in eps."""
        w = self.lattice_frequency()
        eps0 = min(4e-3, (w * s / 8) ** 2 / 2)
        return (eps0, eps0 / 2, eps0 / 4)

    def mode_coefficients(self, link, s: float, G: int) -> np.ndarray:
        """Period means of f_s(theta) e^{-i n theta}, n = 0..G-1 (mod G), by the
        trapezoid rule on G points (spectrally accurate for periodic f)."""
        return np.fft.fft(self._integrand_on_grid(link, s, G)) / G

    def _damped_sums(self, coeffs: np.ndarray, G: int, damping, cutoff, tol):
        w = int(round(self.lattice_frequency()))
        sums, worst, used = [], 0.0, 0
        for eps in damping:
            M = cutoff if cutoff is not None else 2 ** int(np.ceil(np.log2(np.sqrt(25.0 / eps))))

            def partial(M):
                if 2 * M * w >= G:
                    raise CSPathError("lattice cutoff exceeds the resolution of the theta grid")
                m = np.arange(-M, M + 1)
                return complex(np.sum(np.exp(-eps * m.astype(float) ** 2) * coeffs[(m * w) % G]))

            prev = partial(M)
            while True:
                M *= 2
                cur = partial(M)
                change = abs(cur - prev)
                if change <= tol * max(abs(cur), 1e-300) or change <= 1e-15:
                    break
                prev = cur
            sums.append(cur)
            worst, used = max(worst, change / max(abs(cur), 1e-300)), max(used, M)
        return sums, worst, used

    def direct(self, link: Optional[RibbonLink], s: float, damping: Optional[Sequence[float]] = None,
               cutoff: Optional[int] = None, tol: float = 1e-9) -> OuterResult:
        """Lattice sum over y = 2 pi m taken as a truncated series of mode
        coefficients.

        The sharply truncated sum converges slowly, so the term m is weighted
        by exp(-eps m^2); for each eps the cutoff M is doubled until the sum
        settles, and eps -> 0 is reached by polynomial (Richardson)
        extrapolation, the error being a power series in eps.  The quadrature
        error is estimated by repeating on a grid of half the size.
        """
        if damping is None:
            damping = self.damping_schedule(s)
        G = self.grid_size
        sums, worst, used = self._damped_sums(self.mode_coefficients(link, s, G), G, damping, cutoff, tol)
        coarse, _, _ = self._damped_sums(self.mode_coefficients(link, s, G // 2), G // 2, damping, cutoff, tol)
        value = _richardson_polynomial(list(damping), sums)
        extrap = abs(value - _richardson_polynomial(list(damping[1:]), sums[1:]))
        qerr = abs(value - _richardson_polynomial(list(damping), coarse))
        return OuterResult(self.reduction.prefactor * value, "direct", s, used, worst, qerr + extrap)

    def outer_integral(self, link: Optional[RibbonLink], s: float, mode: str = "poisson", **kw) -> OuterResult:
        if link is None:
            key = (s, mode, tuple(sorted(kw.items())))
            if key not in self._empty:
                self._empty[key] = self._outer(None, s, mode, **kw)
            return self._empty[key]
        return self._outer(link, s, mode, **kw)

    def _outer(self, link, s, mode, **kw) -> OuterResult:
        if mode == "poisson":
            return self.poisson(link, s)
        if mode == "direct":
            return self.direct(link, s, **kw)
        raise ValueError("mode must be 'direct' or 'poisson'")


@dataclass
class WLOResult:
    numerator: complex
    denominator: complex
    ratio: complex
    s_values: List[float]
    ratios_per_s: List[complex]
    extrapolation_error: float
    mode: str
    diagnostics: Dict = field(default_factory=dict)


def _richardson_polynomial(xs: Sequence[float], values: Sequence[complex]) -> complex:
    """Value at x = 0 of the interpolating polynomial through (xs, values)."""
    xs = list(xs)
    total = 0j
    for i, (xi, vi) in enumerate(zip(xs, values)):
        w = 1.0
        for j, xj in enumerate(xs):
            if j != i:
                w *= (0 - xj) / (xi - xj)
        total += w * vi
    return total


def richardson_in_s(s_values: Sequence[float], values: Sequence[complex]) -> Tuple[complex, float]:
    """Linear extrapolation to s = 0 from the two smallest widths."""
    order = np.argsort(s_values)
    s1, s2 = s_values[order[0]], s_values[order[1]]
    v1, v2 = values[order[0]], values[order[1]]
    est = (s2 * v1 - s1 * v2) / (s2 - s1)
    return est, abs(est - v1)


def wlo_rig(link: Optional[RibbonLink], engine: WLOEngine, s_schedule: Sequence[float] = (0.2, 0.1, 0.05),
            mode: str = "poisson", **kw) -> WLOResult:
    if link is not None and (link.N != engine.N or link.sigma0 != engine.sigma0
                             or link.joined is not engine.joined):
        raise CSPathError("numerator and denominator must share complex, N and sigma0")
    nums, dens, ratios, diag = [], [], [], []
    for s in s_schedule:
        num = engine.outer_integral(link, s, mode, **kw)
        den = engine.outer_integral(None, s, mode, **kw)
        if abs(den.value) < 1e-12:
            raise CSPathError("denominator vanishes")
        nums.append(num.value)
        dens.append(den.value)
        ratios.append(num.value / den.value)
        diag.append({"s": s, "cutoff": num.cutoff, "cutoff_change": num.cutoff_change,
                     "quad_error": num.quad_error})
    ratio, err = richardson_in_s(list(s_schedule), ratios)
    num, _ = richardson_in_s(list(s_schedule), nums)
    den, _ = richardson_in_s(list(s_schedule), dens)
    return WLOResult(num, den, ratio, list(s_schedule), ratios, err, mode, {"per_s": diag})
