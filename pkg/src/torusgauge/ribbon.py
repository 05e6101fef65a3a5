"""Simplicial loops and ribbons in qK x Z_N, ribbon links, projections to the
surface, and the region/gleam data needed by the shadow state sum.

Side convention: walking along a ribbon in the order of its faces, the loop l'
is the boundary on the left and l the one on the right, where left/right are
read off from the orientation of the face (for faces of qK this is the surface
orientation).  The region on the l' side of a generic ribbon is Y+ and the one
on the l side is Y-; gleam(Y) sums (+1 for Y+, -1 for Y-) times the S^1
winding of the ribbon.  Reversing a ribbon flips both signs, so gleams are
unchanged; flipping the surface orientation negates them.
"""
from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .polycomplex import ComplexError, JoinedComplex, PolyComplex, ProductComplex, get_complex, joined_complex, product_with_zn


class RibbonError(ValueError):
    pass


@dataclass(frozen=True)
class SimplicialLoop:
    """Cyclic sequence of generalized edges: (edge index, sign) or None for the empty edge."""
    vertices: Tuple[int, ...]  # start vertex of each step
    steps: Tuple[Optional[Tuple[int, int]], ...]

    def check(self, K: PolyComplex) -> None:
        n = len(self.steps)
        for k, step in enumerate(self.steps):
            start, nxt = self.vertices[k], self.vertices[(k + 1) % n]
            if step is None:
                if start != nxt:
                    raise RibbonError("empty step must not move the base point")
                continue
            a, b = K.edge_endpoints(step[0])
            if (a, b)[::step[1]] != (start, nxt):
                raise RibbonError("loop steps are not consecutive")


@dataclass(frozen=True)
class SimplicialRibbon:
    ambient: PolyComplex
    faces: Tuple[int, ...]
    rungs: Tuple[int, ...]  # rungs[i] = edge shared by faces i and i+1
    loop_right: SimplicialLoop  # l
    loop_left: SimplicialLoop  # l'

    def __len__(self):
        return len(self.faces)


def _tetragon(K: PolyComplex, f: int) -> Tuple[List[int], List[int]]:
    bd = K.incidence[2][f]
    edges = [e for e, _ in bd]
    verts = K.face_vertex_cycle(f)
    if len(edges) != 4 or len(set(verts)) != 4 or len(set(edges)) != 4:
        raise RibbonError("face is not a tetragon")
    return edges, verts


def validate_ribbon(faces: Sequence, ambient: PolyComplex) -> SimplicialRibbon:
    """Check (SR1)/(SR2) for a cyclic face sequence and extract (l, l')."""
    K = ambient
    idx = [K.index(2, f) if isinstance(f, str) else int(f) for f in faces]
    n = len(idx)
    if n < 2 or len(set(idx)) != n:
        raise RibbonError("a ribbon needs at least two distinct faces")
    tet = [_tetragon(K, f) for f in idx]
    vsets = [set(v) for _, v in tet]
    esets = [set(e) for e, _ in tet]
    for i in range(n):
        for j in range(i + 1, n):
            adjacent = (j - i) % n in (1, n - 1)
            if not adjacent and vsets[i] & vsets[j]:
                raise RibbonError("illegal intersection pattern: non-adjacent faces meet")
    rungs: List[int] = []
    for i in range(n):
        j = (i + 1) % n
        shared = esets[i] & esets[j]
        if n == 2:
            shared_list = sorted(shared)
            if len(shared_list) != 2:
                raise RibbonError("illegal intersection pattern: faces must share two opposite edges")
            rungs.append(shared_list[i])
            continue
        if len(shared) != 1:
            raise RibbonError("illegal intersection pattern: consecutive faces must share one full edge")
        e = next(iter(shared))
        if vsets[i] & vsets[j] != set(K.edge_endpoints(e)):
            raise RibbonError("illegal intersection pattern: consecutive faces touch outside their common edge")
        rungs.append(e)
    # consecutive rungs must be opposite edges in each face
    for i in range(n):
        a, b = rungs[i - 1], rungs[i]
        if a == b or set(K.edge_endpoints(a)) & set(K.edge_endpoints(b)):
            raise RibbonError("illegal intersection pattern: rungs are not opposite edges")
    right, left = _boundary_loops(K, idx, rungs, tet)
    return SimplicialRibbon(K, tuple(idx), tuple(rungs), right, left)


def _boundary_loops(K, idx, rungs, tet):
    n = len(idx)
    # side assignment in face 0: traverse the oriented boundary of F_0; the side
    # edge leaving the incoming rung r_{-1} in the positive direction is the right side
    edges0, verts0 = tet[0]
    bd0 = K.incidence[2][idx[0]]
    r_in = rungs[-1]
    pos = [e for e, _ in bd0].index(r_in)
    e_side, s_side = bd0[(pos + 1) % 4]
    a, b = K.edge_endpoints(e_side)
    start_right = a if s_side > 0 else b  # vertex of r_in where the right side starts
    if start_right not in K.edge_endpoints(r_in):
        raise RibbonError("inconsistent tetragon")
    r0 = K.edge_endpoints(r_in)
    start_left = r0[0] if r0[1] == start_right else r0[1]

    def walk(v0):
        verts, steps = [], []
        v = v0
        for i in range(n):
            edges, _ = tet[i]
            side = [e for e in edges if e not in (rungs[i - 1], rungs[i]) and v in K.edge_endpoints(e)]
            if len(side) != 1:
                raise RibbonError("illegal intersection pattern: cannot follow ribbon boundary")
            e = side[0]
            p, q = K.edge_endpoints(e)
            verts.append(v)
            steps.append((e, 1) if p == v else (e, -1))
            v = q if p == v else p
        return verts, steps, v

    rv, rs, rend = walk(start_right)
    lv, ls, lend = walk(start_left)
    if rend != start_right or lend != start_left:
        raise RibbonError("ribbon is a Moebius band, not an annulus")
    if set(rv) & set(lv):
        raise RibbonError("boundary loops of the ribbon intersect")
    right = SimplicialLoop(tuple(rv), tuple(rs))
    left = SimplicialLoop(tuple(lv), tuple(ls))
    right.check(K)
    left.check(K)
    return right, left


# --------------------------------------------------------------------------
# projection to the surface
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Projection:
    kind: str  # "vertical" or "generic"
    edge: Optional[int]  # qK edge for vertical ribbons
    faces: Tuple[int, ...]  # qK faces of the parallel subsequence
    # per boundary loop and step: (qK edge or None, sign), (Z_N edge or None, sign), start qK vertex, start time
    right_steps: Tuple[tuple, ...]
    left_steps: Tuple[tuple, ...]

    def winding(self, N: int) -> int:
        total = sum(s for _, (t, s), _, _ in self.right_steps if t is not None)
        if total % N:
            raise RibbonError("boundary loop does not close in the circle direction")
        return total // N


def _project_loop(P: ProductComplex, loop: SimplicialLoop):
    out = []
    for v, step in zip(loop.vertices, loop.steps):
        q, x, t, _ = P.cell[0][v]
        q1, i, t1, vertical = P.cell[1][step[0]]
        if vertical:
            out.append(((None, 0), (t1, step[1]), x, t))
        else:
            out.append(((i, step[1]), (None, 0), x, t))
    return tuple(out)


def project_ribbon(R: SimplicialRibbon, P: ProductComplex) -> Projection:
    parallel, vertical_edges = [], set()
    for f in R.faces:
        q, i, t, vertical = P.cell[2][f]
        if vertical:
            vertical_edges.add(i)
        else:
            parallel.append(i)
    right, left = _project_loop(P, R.loop_right), _project_loop(P, R.loop_left)
    if not parallel:
        if len(vertical_edges) != 1:
            raise RibbonError("vertical ribbon must stay over one edge")
        return Projection("vertical", vertical_edges.pop(), (), right, left)
    return Projection("generic", None, tuple(parallel), right, left)


# --------------------------------------------------------------------------
# links
# --------------------------------------------------------------------------

@dataclass(eq=False)
class RibbonLink:
    joined: JoinedComplex
    product: ProductComplex
    ribbons: List[SimplicialRibbon]
    colors: List[int]
    sigma0: int  # qK vertex index
    projections: List[Projection] = field(default_factory=list)
    bands: List[Optional[SimplicialRibbon]] = field(default_factory=list)

    @property
    def N(self) -> int:
        return self.product.N

    @property
    def qk(self) -> PolyComplex:
        return self.joined.complex

    def vertical_indices(self) -> List[int]:
        return [i for i, p in enumerate(self.projections) if p.kind == "vertical"]

    def generic_indices(self) -> List[int]:
        return [i for i, p in enumerate(self.projections) if p.kind == "generic"]

    def is_vertical(self) -> bool:
        return all(p.kind == "vertical" for p in self.projections)


def _footprint(Q: PolyComplex, proj: Projection) -> set:
    if proj.kind == "vertical":
        return set(Q.edge_endpoints(proj.edge))
    out = set()
    for f in proj.faces:
        out |= Q.closure_vertices(2, f)
    return out


def build_link(joined: JoinedComplex, N: int, ribbons: Sequence[Sequence], colors: Sequence[int],
               sigma0, product: Optional[ProductComplex] = None) -> RibbonLink:
    P = product if product is not None else product_with_zn(joined.complex, N)
    Q = joined.complex
    s0 = Q.index(0, sigma0) if isinstance(sigma0, str) else int(sigma0)
    if len(colors) != len(ribbons):
        raise RibbonError("one color per ribbon is required")
    rs = [validate_ribbon(faces, P.complex) for faces in ribbons]
    for i in range(len(rs)):
        for j in range(i + 1, len(rs)):
            vi = set().union(*(P.complex.closure_vertices(2, f) for f in rs[i].faces))
            vj = set().union(*(P.complex.closure_vertices(2, f) for f in rs[j].faces))
            if vi & vj:
                raise RibbonError("ribbons intersect each other")
    projections = [project_ribbon(R, P) for R in rs]
    bands: List[Optional[SimplicialRibbon]] = []
    for proj in projections:
        if proj.kind == "generic":
            try:
                band = validate_ribbon(proj.faces, Q)
            except RibbonError as exc:
                raise RibbonError(f"projection violates the no-crossing condition: {exc}") from None
            _check_null_homologous(Q, band)
            bands.append(band)
        else:
            bands.append(None)
    feet = [_footprint(Q, p) for p in projections]
    for i in range(len(feet)):
        for j in range(i + 1, len(feet)):
            if feet[i] & feet[j]:
                raise RibbonError("projected ribbons intersect each other")
    if any(s0 in f for f in feet):
        raise RibbonError("sigma0 lies on a projected ribbon")
    return RibbonLink(joined, P, rs, list(colors), s0, projections, bands)


def _check_null_homologous(Q: PolyComplex, band: SimplicialRibbon) -> None:
    chain = np.zeros(Q.n_faces(1))
    for e, s in band.loop_right.steps:
        chain[e] += s
    D2 = Q.boundary_matrix(2).astype(float)
    sol, *_ = np.linalg.lstsq(D2, chain, rcond=None)
    if np.max(np.abs(D2 @ sol - chain)) > 1e-9:
        raise RibbonError("projected ribbon is not null-homologous")


def vertical_ribbon_faces(P: ProductComplex, qk_edge: int) -> List[int]:
    """Faces e x [t, t+1], t = 0..N-1, of the vertical ribbon over a qK edge."""
    return [P.lookup(1, qk_edge, t, True)[1] for t in range(P.N)]


def lifted_band_faces(P: ProductComplex, band_faces: Sequence[int], lifts: Sequence[int]) -> List[int]:
    """Ribbon in qK x Z_N following a band of qK faces, climbing one time step
    across the rung after each position listed in ``lifts``.

    The number of lifts must be a multiple of N for the ribbon to close.
    """
    Q = P.base
    band = validate_ribbon(list(band_faces), Q)
    n = len(band.faces)
    if len(lifts) % P.N:
        raise RibbonError("number of lifts must be a multiple of N")
    out, t = [], 0
    for i in range(n):
        out.append(P.lookup(2, band.faces[i], t, False)[1])
        for _ in range(list(lifts).count(i)):
            out.append(P.lookup(1, band.rungs[i], t, True)[1])
            t += 1
    return out


def find_bands(Q: PolyComplex, max_len: int = 64) -> List[List[int]]:
    """All closed chains of tetragons through opposite edges (quad strips) that
    satisfy the ribbon conditions, each listed once."""
    found, seen = [], set()
    for f0 in range(Q.n_faces(2)):
        edges0, _ = _tetragon(Q, f0)
        for start_edge in edges0[:2]:
            seq, e_in, f = [f0], start_edge, f0
            while len(seq) <= max_len:
                edges, _ = _tetragon(Q, f)
                k = edges.index(e_in)
                e_out = edges[(k + 2) % 4]
                nxt = [g for g in range(Q.n_faces(2)) if g != f and e_out in [e for e, _ in Q.incidence[2][g]]]
                g = nxt[0]
                if g == f0:
                    break
                if g in seq:
                    seq = None
                    break
                seq.append(g)
                e_in, f = e_out, g
            if not seq or frozenset(seq) in seen:
                continue
            seen.add(frozenset(seq))
            try:
                validate_ribbon(seq, Q)
            except RibbonError:
                continue
            found.append(seq)
    return found


# --------------------------------------------------------------------------
# regions and gleams
# --------------------------------------------------------------------------

@dataclass
class RegionDecomposition:
    face_region: List[int]  # region index per qK face (-1 for band faces)
    euler: List[int]
    gleam: List[int]
    # one entry per generic ribbon: (ribbon index, Y+, Y-, color)
    edges: List[Tuple[int, int, int, int]]
    # one entry per vertical ribbon: (ribbon index, region, color)
    marks: List[Tuple[int, int, int]]
    sigma0_region: int

    @property
    def count(self) -> int:
        return len(self.euler)


def _closure_euler(Q: PolyComplex, faces: Sequence[int]) -> int:
    edges, verts = set(), set()
    for f in faces:
        for e, _ in Q.incidence[2][f]:
            edges.add(e)
            verts |= set(Q.edge_endpoints(e))
    return len(verts) - len(edges) + len(faces)


def regions(link: RibbonLink, orientation: int = 1) -> RegionDecomposition:
    """Flood fill of qK faces outside the projected generic bands.

    ``orientation=-1`` evaluates sides for the reversed surface orientation.
    """
    Q = link.qk
    band_faces = set()
    for b in link.bands:
        if b is not None:
            band_faces |= set(b.faces)
    edge_faces: Dict[int, List[int]] = defaultdict(list)
    for f in range(Q.n_faces(2)):
        for e, _ in Q.incidence[2][f]:
            edge_faces[e].append(f)
    label = [-1] * Q.n_faces(2)
    n_regions = 0
    for f0 in range(Q.n_faces(2)):
        if f0 in band_faces or label[f0] >= 0:
            continue
        stack = [f0]
        label[f0] = n_regions
        while stack:
            f = stack.pop()
            for e, _ in Q.incidence[2][f]:
                for g in edge_faces[e]:
                    if g not in band_faces and label[g] < 0:
                        label[g] = n_regions
                        stack.append(g)
        n_regions += 1
    members = [[f for f in range(Q.n_faces(2)) if label[f] == r] for r in range(n_regions)]
    euler = [_closure_euler(Q, m) for m in members]

    def region_of_edge(e: int) -> int:
        regs = {label[f] for f in edge_faces[e] if label[f] >= 0}
        if len(regs) != 1:
            raise RibbonError("could not locate the region next to a ribbon boundary")
        return regs.pop()

    gleam = [0] * n_regions
    edges_out, marks = [], []
    for i, (proj, band) in enumerate(zip(link.projections, link.bands)):
        if proj.kind == "vertical":
            marks.append((i, region_of_edge(proj.edge), link.colors[i]))
            continue
        y_left = region_of_edge(band.loop_left.steps[0][0])
        y_right = region_of_edge(band.loop_right.steps[0][0])
        y_plus, y_minus = (y_left, y_right) if orientation > 0 else (y_right, y_left)
        w = proj.winding(link.N)
        gleam[y_plus] += w
        gleam[y_minus] -= w
        edges_out.append((i, y_plus, y_minus, link.colors[i]))
    s0_faces = [f for f in range(Q.n_faces(2)) if link.sigma0 in Q.closure_vertices(2, f)]
    s0_region = label[s0_faces[0]] if s0_faces else -1
    return RegionDecomposition(label, euler, gleam, edges_out, marks, s0_region)


# --------------------------------------------------------------------------
# JSON
# --------------------------------------------------------------------------

def link_from_json(data: dict) -> RibbonLink:
    """Link description: ambient complex name/path, N, ribbons and sigma0.

    Each ribbon gives either "faces" (ids of 2-faces of qK x Z_N) or "edge"
    (a qK edge id, shorthand for the vertical ribbon over it), plus a color.
    """
    try:
        K = get_complex(str(data["ambient"]))
    except FileNotFoundError:
        raise RibbonError("ambient complex not found") from None
    joined = joined_complex(K)
    N = int(data.get("N", 2))
    P = product_with_zn(joined.complex, N)
    faces, colors = [], []
    for r in data.get("ribbons", []):
        if "edge" in r:
            faces.append(vertical_ribbon_faces(P, joined.complex.index(1, str(r["edge"]))))
        else:
            faces.append([P.complex.index(2, str(f)) for f in r["faces"]])
        colors.append(int(r.get("color", 1)))
    return build_link(joined, N, faces, colors, str(data["sigma0"]), P)


def link_to_json(link: RibbonLink, ambient: str) -> dict:
    F = link.product.complex.faces[2]
    return {
        "schema": "v1",
        "ambient": ambient,
        "N": link.N,
        "ribbons": [{"faces": [F[f] for f in R.faces], "color": c} for R, c in zip(link.ribbons, link.colors)],
        "sigma0": link.qk.faces[0][link.sigma0],
    }


def load_link(path: str) -> RibbonLink:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise FileNotFoundError("link file not found") from None
    return link_from_json(data)
