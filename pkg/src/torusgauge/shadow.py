"""Shadow state sum |L| for links without crossings, and Verlinde-type sums."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .lie import LevelData, fusion_rule_su2
from .ribbon import RegionDecomposition, RibbonLink, regions


class ShadowError(ValueError):
    pass


@dataclass
class ShadowResult:
    value: complex
    colorings: int  # number of colorings visited after pruning
    nonzero: int
    # up to ``keep`` leading terms: (coloring, |L|_1, |L|_2, |L|_3, vertical factor)
    terms: List[Tuple[Tuple[int, ...], float, complex, int, complex]] = field(default_factory=list)


def _edge_checks(decomp: RegionDecomposition) -> Dict[int, List[Tuple[int, int, int]]]:
    """For each region r, the fusion constraints whose later endpoint is r."""
    out: Dict[int, List[Tuple[int, int, int]]] = {}
    for _, y_plus, y_minus, color in decomp.edges:
        last = max(y_plus, y_minus)
        out.setdefault(last, []).append((y_plus, y_minus, color))
    return out


def shadow_invariant(decomp: RegionDecomposition, level: LevelData, keep: int = 16) -> ShadowResult:
    """Sum over colorings phi of the regions of
    prod dim(phi(Y))^chi(Y) * prod twist(phi(Y))^gleam(Y) * prod N^{phi(Y-)}_{gamma phi(Y+)}
    times prod S_{phi(Y_i) mu_i} / S_{phi(Y_i) 0} over vertical components."""
    n = decomp.count
    cols = level.colors
    for _, _, _, c in decomp.edges:
        level.check_color(c)
    for _, _, c in decomp.marks:
        level.check_color(c)
    S = level.S
    checks = _edge_checks(decomp)
    marks_at: Dict[int, List[int]] = {}
    for _, r, mu in decomp.marks:
        marks_at.setdefault(r, []).append(mu)

    total = 0j
    visited = nonzero = 0
    terms = []
    phi = [0] * n

    def local(r: int, lam: int) -> Tuple[float, complex, complex]:
        d = level.dims[lam] ** decomp.euler[r]
        tw = level.twist(lam) ** decomp.gleam[r]
        v = complex(np.prod([S[lam, mu] / S[lam, 0] for mu in marks_at.get(r, [])]))
        return d, tw, v

    def rec(r: int, l1: float, l2: complex, l3: int, lv: complex):
        nonlocal total, visited, nonzero
        if r == n:
            visited += 1
            term = l1 * l2 * l3 * lv
            if term != 0:
                nonzero += 1
                total += term
                if len(terms) < keep:
                    terms.append((tuple(phi), l1, l2, l3, lv))
            return
        for lam in cols:
            phi[r] = lam
            f3 = l3
            for y_plus, y_minus, gamma in checks.get(r, []):
                f3 *= int(level.fusion_table[phi[y_minus], gamma, phi[y_plus]])
                if f3 == 0:
                    break
            if f3 == 0:
                visited += 1
                continue
            d, tw, v = local(r, lam)
            rec(r + 1, l1 * d, l2 * tw, f3, lv * v)

    rec(0, 1.0, 1 + 0j, 1, 1 + 0j)
    return ShadowResult(total, visited, nonzero, terms)


def link_shadow(link: RibbonLink, level: LevelData, orientation: int = 1) -> ShadowResult:
    return shadow_invariant(regions(link, orientation), level)


def empty_decomposition(euler: int) -> RegionDecomposition:
    """Region data of the empty link on a closed surface with the given Euler characteristic."""
    return RegionDecomposition([], [euler], [0], [], [], 0)


def vertical_decomposition(euler: int, colors: Sequence[int]) -> RegionDecomposition:
    return RegionDecomposition([], [euler], [0], [], [(i, 0, c) for i, c in enumerate(colors)], 0)


def verlinde_partition(level: LevelData, euler: int, marks: Sequence[int] = ()) -> complex:
    """sum_lam (prod_i S_{lam mu_i} / S_{lam 0}) S_{lam 0}^euler."""
    level.check_color(*marks)
    S = level.S
    total = 0j
    for lam in level.colors:
        total += np.prod([S[lam, mu] / S[lam, 0] for mu in marks]) * S[lam, 0] ** euler
    return complex(total)


def shadow_vs_verlinde(level: LevelData, colors: Sequence[int], tol: float = 1e-9,
                       decomp: Optional[RegionDecomposition] = None, euler: int = 2) -> dict:
    """Compare |L|/|empty| for vertical ribbons with the Verlinde ratio."""
    decomp = decomp if decomp is not None else vertical_decomposition(euler, colors)
    chi = sum(decomp.euler)
    shadow = shadow_invariant(decomp, level).value / shadow_invariant(empty_decomposition(chi), level).value
    verl = verlinde_partition(level, chi, colors) / verlinde_partition(level, chi)
    diff = abs(shadow - verl)
    report = {"schema": "v1", "k": level.k, "colors": list(colors), "shadow_ratio": [shadow.real, shadow.imag],
              "verlinde_ratio": [verl.real, verl.imag], "difference": diff, "ok": diff <= tol}
    if len(colors) == 3 and chi == 2:
        report["fusion_number"] = fusion_rule_su2(level.k, *colors)
    if diff > tol:
        raise ShadowError(f"shadow and Verlinde ratios differ by {diff:.3e}")
    return report
