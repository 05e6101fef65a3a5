"""Finite oriented polyhedral cell complexes.

A complex is stored combinatorially: for each dimension a list of face ids and,
for p >= 1, the signed list of (p-1)-faces in its boundary.  For 2-faces of a
surface the boundary list is kept in cyclic traversal order, which is what the
dual and the joined complex qK need.

Orientation convention (used everywhere in the package):

* 2-faces of a surface complex K1 are oriented coherently; this fixes the
  surface orientation.
* The dual edge of e runs from the face on the right of e to the face on its
  left, so that (e, dual e) is a positive frame.  The face on the left of e is
  the one whose boundary contains e with sign +1.
* Dual 2-faces (around primal vertices) and all 2-faces of qK are oriented by
  the surface orientation.
"""
from __future__ import annotations

import json
import re
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np


class ComplexError(ValueError):
    pass


def _natural_key(s: str):
    return tuple(int(t) if t.isdigit() else t for t in re.split(r"(\d+)", str(s)))


@dataclass(frozen=True, eq=False)
class PolyComplex:
    dim: int
    faces: Tuple[Tuple[str, ...], ...]
    # incidence[p][i] -> tuple of (index of (p-1)-face, sign); incidence[0] is empty
    incidence: Tuple[Tuple[Tuple[Tuple[int, int], ...], ...], ...]
    geometry: Optional[np.ndarray] = None
    name: str = ""
    _index: Tuple[Dict[str, int], ...] = field(default=(), repr=False)

    def __post_init__(self):
        idx = tuple({f: i for i, f in enumerate(fs)} for fs in self.faces)
        object.__setattr__(self, "_index", idx)

    # basic queries
    def n_faces(self, p: int) -> int:
        if p < 0 or p > self.dim:
            return 0
        return len(self.faces[p])

    def index(self, p: int, face_id: str) -> int:
        try:
            return self._index[p][str(face_id)]
        except KeyError:
            raise ComplexError(f"unknown {p}-face {face_id!r}") from None

    def boundary_of(self, p: int, i: int) -> Tuple[Tuple[int, int], ...]:
        return self.incidence[p][i]

    def boundary_matrix(self, p: int) -> np.ndarray:
        """Integer matrix of the boundary map C_p -> C_{p-1}."""
        mat = np.zeros((self.n_faces(p - 1), self.n_faces(p)), dtype=np.int64)
        if p < 1 or p > self.dim:
            return mat
        for j, bd in enumerate(self.incidence[p]):
            for i, s in bd:
                mat[i, j] += s
        return mat

    def euler_characteristic(self) -> int:
        return sum((-1) ** p * self.n_faces(p) for p in range(self.dim + 1))

    def edge_endpoints(self, i: int) -> Tuple[int, int]:
        """(start, end) vertex indices of edge i."""
        start = end = None
        for v, s in self.incidence[1][i]:
            if s < 0:
                start = v
            else:
                end = v
        if start is None or end is None:  # loop edge
            v = self.incidence[1][i][0][0] if self.incidence[1][i] else None
            return (v, v)
        return start, end

    def face_vertex_cycle(self, i: int) -> List[int]:
        """Vertices of 2-face i in traversal order (start of each boundary edge)."""
        out = []
        for e, s in self.incidence[2][i]:
            a, b = self.edge_endpoints(e)
            out.append(a if s > 0 else b)
        return out

    def closure_vertices(self, p: int, i: int) -> set:
        if p == 0:
            return {i}
        out = set()
        for j, _ in self.incidence[p][i]:
            out |= self.closure_vertices(p - 1, j)
        return out

    def check(self, closed_surface: bool = False) -> None:
        for p in range(1, self.dim + 1):
            n_low = self.n_faces(p - 1)
            for bd in self.incidence[p]:
                for j, s in bd:
                    if not (0 <= j < n_low) or s not in (1, -1):
                        raise ComplexError("dangling face reference")
        for p in range(2, self.dim + 1):
            if np.any(self.boundary_matrix(p - 1) @ self.boundary_matrix(p)):
                raise ComplexError("boundary of boundary is not zero")
        if closed_surface:
            if self.dim != 2:
                raise ComplexError("non-surface input")
            count = np.abs(self.boundary_matrix(2)).sum(axis=1)
            if np.any(count != 2):
                raise ComplexError("non-surface edge")

    def to_description(self) -> dict:
        desc = {"schema": "v1", "dim": self.dim, "vertices": list(self.faces[0])}
        if self.dim >= 1:
            edges = []
            for i, eid in enumerate(self.faces[1]):
                a, b = self.edge_endpoints(i)
                edges.append({"id": eid, "src": self.faces[0][a], "dst": self.faces[0][b]})
            desc["edges"] = edges
        if self.dim >= 2:
            desc["faces"] = [
                {"id": fid, "boundary": [[self.faces[1][e], s] for e, s in self.incidence[2][i]]}
                for i, fid in enumerate(self.faces[2])
            ]
        return desc


# --------------------------------------------------------------------------
# construction from descriptions
# --------------------------------------------------------------------------

def _parse_signed(entry) -> Tuple[str, int]:
    if isinstance(entry, (list, tuple)) and len(entry) == 2:
        return str(entry[0]), int(entry[1])
    if isinstance(entry, dict):
        return str(entry["edge"]), int(entry.get("sign", 1))
    if isinstance(entry, int):
        if entry == 0:
            raise ComplexError("signed integer edge references must be nonzero")
        return str(abs(entry)), (1 if entry > 0 else -1)
    s = str(entry)
    if s.startswith("-"):
        return s[1:], -1
    return s.lstrip("+"), 1


def build_complex(description: dict, name: str = "") -> PolyComplex:
    """Validate a JSON-style description and build the complex.

    Faces of each dimension are indexed in natural sort order of their ids.
    """
    dim = int(description.get("dim", 2))
    raw_vertices = description.get("vertices", [])
    coords = {}
    vids = []
    for v in raw_vertices:
        if isinstance(v, dict):
            vids.append(str(v["id"]))
            if "xyz" in v:
                coords[str(v["id"])] = v["xyz"]
        else:
            vids.append(str(v))
    vids = sorted(set(vids), key=_natural_key)
    vindex = {v: i for i, v in enumerate(vids)}

    edges = sorted(description.get("edges", []), key=lambda e: _natural_key(str(e["id"])))
    eids = [str(e["id"]) for e in edges]
    eindex = {e: i for i, e in enumerate(eids)}
    inc1 = []
    for e in edges:
        src, dst = str(e["src"]), str(e["dst"])
        if src not in vindex or dst not in vindex:
            raise ComplexError("dangling face reference")
        inc1.append(((vindex[src], -1), (vindex[dst], 1)))

    faces = sorted(description.get("faces", []), key=lambda f: _natural_key(str(f["id"])))
    fids = [str(f["id"]) for f in faces]
    inc2 = []
    for f in faces:
        bd = []
        for entry in f["boundary"]:
            eid, s = _parse_signed(entry)
            if eid not in eindex:
                raise ComplexError("dangling face reference")
            bd.append((eindex[eid], s))
        inc2.append(tuple(bd))

    geometry = None
    if coords and len(coords) == len(vids):
        geometry = np.array([coords[v] for v in vids], dtype=float)

    all_faces = [tuple(vids), tuple(eids), tuple(fids)][: dim + 1]
    incidence = [(), tuple(inc1), tuple(inc2)][: dim + 1]
    K = PolyComplex(dim, tuple(all_faces), tuple(incidence), geometry, name)
    K.check(closed_surface=bool(description.get("closed_surface", False)))
    return K


def load_complex(path: str) -> PolyComplex:
    with open(path) as fh:
        return build_complex(json.load(fh), name=str(path))


def surface_from_polygons(
    n_vertices: int,
    polygons: Sequence[Sequence[int]],
    coords: Optional[np.ndarray] = None,
    name: str = "",
) -> PolyComplex:
    """Closed surface from coherently oriented vertex cycles.

    Edges are created on first use, oriented from the smaller to the larger
    vertex index.
    """
    vids = tuple(str(i) for i in range(n_vertices))
    edge_of: Dict[Tuple[int, int], int] = {}
    inc1: List[Tuple[Tuple[int, int], ...]] = []
    inc2 = []
    for poly in polygons:
        bd = []
        for a, b in zip(poly, list(poly[1:]) + [poly[0]]):
            key = (min(a, b), max(a, b))
            if key not in edge_of:
                edge_of[key] = len(inc1)
                inc1.append(((key[0], -1), (key[1], 1)))
            bd.append((edge_of[key], 1 if a < b else -1))
        inc2.append(tuple(bd))
    eids = tuple(f"e{i}" for i in range(len(inc1)))
    fids = tuple(f"f{i}" for i in range(len(inc2)))
    K = PolyComplex(2, (vids, eids, fids), ((), tuple(inc1), tuple(inc2)), coords, name)
    K.check(closed_surface=True)
    return K


def _orient_outward(coords: np.ndarray, polygons) -> List[List[int]]:
    out = []
    for poly in polygons:
        pts = coords[list(poly)]
        c = pts.mean(axis=0)
        normal = np.cross(pts[1] - pts[0], pts[2] - pts[0])
        out.append(list(poly) if np.dot(normal, c) > 0 else list(poly)[::-1])
    return out


def tetrahedron() -> PolyComplex:
    coords = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float)
    polys = _orient_outward(coords, [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)])
    return surface_from_polygons(4, polys, coords, "tetrahedron")


def cube() -> PolyComplex:
    coords = np.array([[x, y, z] for x in (-1, 1) for y in (-1, 1) for z in (-1, 1)], dtype=float)
    polys = [(0, 1, 3, 2), (4, 5, 7, 6), (0, 1, 5, 4), (2, 3, 7, 6), (0, 2, 6, 4), (1, 3, 7, 5)]
    return surface_from_polygons(8, _orient_outward(coords, polys), coords, "cube")


def icosahedron() -> PolyComplex:
    from scipy.spatial import ConvexHull

    g = (1 + 5 ** 0.5) / 2
    pts = []
    for a in (-1, 1):
        for b in (-g, g):
            pts += [(0, a, b), (a, b, 0), (b, 0, a)]
    coords = np.array(pts, dtype=float)
    hull = ConvexHull(coords)
    return surface_from_polygons(12, _orient_outward(coords, hull.simplices), coords, "icosahedron")


def hex_torus(n: int, m: int) -> PolyComplex:
    """Honeycomb on a torus with n*m hexagons (brick-wall model); m must be even."""
    if n < 2 or m < 2 or m % 2:
        raise ComplexError("hex torus needs n >= 2 and even m >= 2")
    W, H = 2 * n, m
    vid = lambda i, j: (i % W) + W * (j % H)
    polys = []
    for j in range(H):
        for i in range(W):
            if (i + j) % 2 == 0:
                polys.append([vid(i, j), vid(i + 1, j), vid(i + 2, j),
                              vid(i + 2, j + 1), vid(i + 1, j + 1), vid(i, j + 1)])
    coords = np.array([[i, j, 0.0] for j in range(H) for i in range(W)], dtype=float)
    return surface_from_polygons(W * H, polys, coords, f"hex_torus_{n}x{m}")


BUILTIN = {
    "tetrahedron": tetrahedron,
    "cube": cube,
    "icosahedron": icosahedron,
    "hex_torus": lambda: hex_torus(3, 4),
}


def get_complex(source: str) -> PolyComplex:
    """Builtin name (optionally 'hex_torus:n:m') or path to a JSON description."""
    if source in BUILTIN:
        return BUILTIN[source]()
    if source.startswith("hex_torus:"):
        _, n, m = source.split(":")
        return hex_torus(int(n), int(m))
    return load_complex(source)


# --------------------------------------------------------------------------
# dual pairing and qK
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DualPairing:
    base: PolyComplex
    dual: PolyComplex
    # face_map[p][i] = index of the dual (2-p)-face of base p-face i
    face_map: Tuple[Tuple[int, ...], ...]
    midpoints: Tuple[str, ...]
    # sign of the star K1 -> K2 on each p-face (dual orientation vs induced one)
    star_sign: Tuple[Tuple[int, ...], ...]
    # for each base edge: (index of face on its left, index of face on its right)
    sides: Tuple[Tuple[int, int], ...]

    def inverse_map(self, p: int) -> Tuple[int, ...]:
        """Index of the base (2-p)-face dual to each dual p-face."""
        fm = self.face_map[2 - p]
        inv = [0] * len(fm)
        for i, j in enumerate(fm):
            inv[j] = i
        return tuple(inv)


def _edge_sides(K: PolyComplex) -> List[Tuple[int, int]]:
    left = [None] * K.n_faces(1)
    right = [None] * K.n_faces(1)
    for f, bd in enumerate(K.incidence[2]):
        for e, s in bd:
            if s > 0:
                if left[e] is not None:
                    raise ComplexError("inconsistent face orientation")
                left[e] = f
            else:
                if right[e] is not None:
                    raise ComplexError("inconsistent face orientation")
                right[e] = f
    if any(x is None for x in left + right):
        raise ComplexError("non-surface input")
    return list(zip(left, right))


def canonical_dual(K: PolyComplex, flip_dual_edges: Iterable[str] = ()) -> DualPairing:
    """Dual complex K2 of a closed oriented surface K1.

    ``flip_dual_edges`` lists base edge ids whose dual edge is stored with the
    opposite of the induced orientation (the Hodge star then carries a sign).
    """
    if K.dim != 2:
        raise ComplexError("non-surface input")
    try:
        K.check(closed_surface=True)
    except ComplexError:
        raise ComplexError("non-surface input") from None
    sides = _edge_sides(K)
    flips = {K.index(1, e) for e in flip_dual_edges}

    nV, nE, nF = K.n_faces(0), K.n_faces(1), K.n_faces(2)
    dv = tuple(f"d:{f}" for f in K.faces[2])
    de = tuple(f"d:{e}" for e in K.faces[1])
    df = tuple(f"d:{v}" for v in K.faces[0])
    inc1 = []
    for e in range(nE):
        left, right = sides[e]
        start, end = (right, left) if e not in flips else (left, right)
        inc1.append(((start, -1), (end, 1)))
    # dual face around v: induced dual edges leave... sign +1 if e starts at v
    around: Dict[int, List[Tuple[int, int]]] = defaultdict(list)
    for e in range(nE):
        a, b = K.edge_endpoints(e)
        flip = -1 if e in flips else 1
        around[a].append((e, flip))
        around[b].append((e, -flip))
    inc2 = []
    for v in range(nV):
        inc2.append(tuple(_cyclic_order(inc1, around[v])))
    geometry = None
    if K.geometry is not None:
        geometry = np.array([K.geometry[sorted(K.closure_vertices(2, f))].mean(axis=0) for f in range(nF)])
    D = PolyComplex(2, (dv, de, df), ((), tuple(inc1), tuple(inc2)), geometry, f"dual({K.name})")
    D.check(closed_surface=True)
    face_map = (tuple(range(nV)), tuple(range(nE)), tuple(range(nF)))
    star_sign = ((1,) * nV, tuple(-1 if e in flips else 1 for e in range(nE)), (1,) * nF)
    mids = tuple(f"m:{e}" for e in K.faces[1])
    return DualPairing(K, D, face_map, mids, star_sign, tuple(sides))


def _cyclic_order(inc1, signed_edges: List[Tuple[int, int]]) -> List[Tuple[int, int]]:
    """Arrange signed edges so that consecutive ones chain head to tail."""
    def ends(e, s):
        (a, sa), (b, sb) = inc1[e]
        start, end = (a, b) if sa < 0 else (b, a)
        return (start, end) if s > 0 else (end, start)

    remaining = list(signed_edges)
    out = [remaining.pop(0)]
    while remaining:
        tail = ends(*out[-1])[1]
        for k, (e, s) in enumerate(remaining):
            if ends(e, s)[0] == tail:
                out.append(remaining.pop(k))
                break
        else:
            raise ComplexError("dual face boundary is not a cycle")
    return out


@dataclass(frozen=True, eq=False)
class JoinedComplex:
    """qK together with the bookkeeping that relates it to K1 and K2."""
    complex: PolyComplex
    pair: DualPairing
    # vertex kind: 0 = K1 vertex, 1 = midpoint, 2 = K2 vertex
    vertex_kind: Tuple[int, ...]
    vertex_origin: Tuple[int, ...]
    # half edges of base edge e: (first, second) qK edge indices; likewise for dual edges
    base_halves: Tuple[Tuple[int, int], ...]
    dual_halves: Tuple[Tuple[int, int], ...]
    # for each qK face: (K1 vertex, K2 vertex, midpoint, midpoint) qK vertex indices
    corners: Tuple[Tuple[int, int, int, int], ...]


def build_qk(pair: DualPairing) -> JoinedComplex:
    K, D = pair.base, pair.dual
    nV, nE, nF = K.n_faces(0), K.n_faces(1), K.n_faces(2)
    vids = [f"v:{v}" for v in K.faces[0]] + [f"m:{e}" for e in K.faces[1]] + [f"f:{f}" for f in K.faces[2]]
    kind = [0] * nV + [1] * nE + [2] * nF
    origin = list(range(nV)) + list(range(nE)) + list(range(nF))
    vK1 = lambda v: v
    vmid = lambda e: nV + e
    vK2 = lambda f: nV + nE + f

    eids, inc1 = [], []
    pair_index: Dict[Tuple[int, int], int] = {}

    def add_edge(name, a, b):
        pair_index[(a, b)] = len(inc1)
        pair_index[(b, a)] = len(inc1)
        eids.append(name)
        inc1.append(((a, -1), (b, 1)))
        return len(inc1) - 1

    base_halves, dual_halves = [], []
    for e in range(nE):
        a, b = K.edge_endpoints(e)
        name = K.faces[1][e]
        base_halves.append((add_edge(f"e:{name}:1", vK1(a), vmid(e)),
                            add_edge(f"e:{name}:2", vmid(e), vK1(b))))
    for e in range(nE):
        a, b = D.edge_endpoints(e)
        name = K.faces[1][e]
        dual_halves.append((add_edge(f"e:d:{name}:1", vK2(a), vmid(e)),
                            add_edge(f"e:d:{name}:2", vmid(e), vK2(b))))

    fids, inc2, corners = [], [], []
    for f in range(nF):
        bd = K.incidence[2][f]
        cyc = K.face_vertex_cycle(f)
        m = len(bd)
        for i in range(m):
            ea, eb = bd[i][0], bd[(i + 1) % m][0]
            v = cyc[(i + 1) % m]
            loop = [vmid(ea), vK1(v), vmid(eb), vK2(f)]
            signed = []
            for x, y in zip(loop, loop[1:] + loop[:1]):
                j = pair_index[(x, y)]
                start = inc1[j][0][0]
                signed.append((j, 1 if start == x else -1))
            fids.append(f"q:{K.faces[0][v]}:{K.faces[2][f]}")
            inc2.append(tuple(signed))
            corners.append((vK1(v), vK2(f), vmid(ea), vmid(eb)))

    geometry = None
    if K.geometry is not None and D.geometry is not None:
        mids = np.array([K.geometry[list(K.edge_endpoints(e))].mean(axis=0) for e in range(nE)])
        geometry = np.vstack([K.geometry, mids, D.geometry])
    Q = PolyComplex(2, (tuple(vids), tuple(eids), tuple(fids)), ((), tuple(inc1), tuple(inc2)),
                    geometry, f"qK({K.name})")
    Q.check(closed_surface=True)
    return JoinedComplex(Q, pair, tuple(kind), tuple(origin), tuple(base_halves),
                         tuple(dual_halves), tuple(corners))


def joined_complex(K: PolyComplex, flip_dual_edges: Iterable[str] = ()) -> JoinedComplex:
    return build_qk(canonical_dual(K, flip_dual_edges))


# --------------------------------------------------------------------------
# products with the cyclic group
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ProductComplex:
    """P x Z_N; ``cell[p][i] = (q, index in P, t, is_vertical)``."""
    complex: PolyComplex
    base: PolyComplex
    N: int
    cell: Tuple[Tuple[Tuple[int, int, int, bool], ...], ...]

    def lookup(self, q: int, i: int, t: int, vertical: bool) -> Tuple[int, int]:
        """(dimension, index) of the product cell."""
        p = q + (1 if vertical else 0)
        nq = self.base.n_faces(q)
        offset = 0 if not vertical else self.N * self.base.n_faces(p)
        return p, offset + (t % self.N) * nq + i


def cyclic_group_complex(N: int) -> PolyComplex:
    if N < 1:
        raise ComplexError("N must be a positive integer")
    vids = tuple(str(t) for t in range(N))
    eids = tuple(f"{t}+" for t in range(N))
    inc1 = tuple(((t, -1), ((t + 1) % N, 1)) if N > 1 else () for t in range(N))
    return PolyComplex(1, (vids, eids), ((), inc1), None, f"Z{N}")


def product_with_zn(P: PolyComplex, N: int) -> ProductComplex:
    if not isinstance(N, (int, np.integer)) or N < 1:
        raise ComplexError("N must be a positive integer")
    dim = P.dim + 1
    faces: List[List[str]] = [[] for _ in range(dim + 1)]
    cells: List[List[Tuple[int, int, int, bool]]] = [[] for _ in range(dim + 1)]
    for p in range(dim + 1):
        if p <= P.dim:
            for t in range(N):
                for i, fid in enumerate(P.faces[p]):
                    faces[p].append(f"{fid}@{t}")
                    cells[p].append((p, i, t, False))
        if p >= 1:
            for t in range(N):
                for i, fid in enumerate(P.faces[p - 1]):
                    faces[p].append(f"{fid}@{t}+")
                    cells[p].append((p - 1, i, t, True))

    prod = ProductComplex(None, P, N, tuple(tuple(c) for c in cells))  # type: ignore[arg-type]
    incidence: List[Tuple] = [()]
    for p in range(1, dim + 1):
        rows = []
        for q, i, t, vertical in cells[p]:
            acc: Dict[int, int] = defaultdict(int)
            for j, s in (P.incidence[q][i] if q >= 1 else ()):
                acc[prod.lookup(q - 1, j, t, vertical)[1]] += s
            if vertical:
                sign = (-1) ** q
                acc[prod.lookup(q, i, t + 1, False)[1]] += sign
                acc[prod.lookup(q, i, t, False)[1]] -= sign
            row = [(j, s) for j, s in sorted(acc.items()) if s != 0]
            if p == 2 and N > 1:
                row = _cyclic_order(incidence[1], row)
            rows.append(tuple(row))
        incidence.append(tuple(rows))
    C = PolyComplex(dim, tuple(tuple(f) for f in faces), tuple(incidence), None, f"{P.name}xZ{N}")
    C.check()
    return ProductComplex(C, P, N, prod.cell)
