"""Acceptance criteria 1-7, one PASS/FAIL line each.

Run under pytest, or directly: ``python3 tests/test_acceptance.py``.
"""
from __future__ import annotations

import itertools
import sys
import time
from functools import lru_cache

import numpy as np
import pytest

from torusgauge.cli import structure_report
from torusgauge.cspath import FieldSpaces, WLOEngine, build_ln, star_l, wlo_rig
from torusgauge.lie import SU2, build_level, fusion_rule_su2
from torusgauge.oscgauss import ExpPoly, OscGaussMeasure, improper_integral, quadrature_oracle
from torusgauge.polycomplex import get_complex, joined_complex, product_with_zn, tetrahedron
from torusgauge.ribbon import build_link, vertical_ribbon_faces
from torusgauge.shadow import empty_decomposition, link_shadow, shadow_invariant, shadow_vs_verlinde

WLO_TOL = 1e-3
MODE_TOL = 1e-4
VERTICAL_EDGES = ("e:e0:2", "e:e1:2", "e:e3:2")


def report(number: int, ok: bool, detail: str, elapsed: float) -> None:
    print(f"criterion {number}: {'PASS' if ok else 'FAIL'} ({detail}; {elapsed:.1f} s)", flush=True)


# --------------------------------------------------------------------------

def criterion_1():
    t0 = time.time()
    reports = [structure_report(get_complex(name)) for name in ("tetrahedron", "cube", "hex_torus:3:4")]
    ok = all(r["ok"] for r in reports)
    elapsed = time.time() - t0
    return ok and elapsed < 5, f"exact identities on {len(reports)} complexes", elapsed


def criterion_2():
    t0 = time.time()
    rng = np.random.default_rng(2)
    J = joined_complex(tetrahedron())
    Q = J.complex
    worst_sym, min_regular, drops = 0.0, np.inf, 0
    for N in (2, 3):
        sp = FieldSpaces(J, N, Q.index(0, "v:0"))
        for trial in range(25):
            B = rng.uniform(0.05, np.pi - 0.05, (Q.n_faces(0), 1)) * rng.choice([-1, 1], (Q.n_faces(0), 1))
            SL = star_l(B, sp)
            worst_sym = max(worst_sym, np.max(np.abs(SL - SL.T)))
            sv = np.linalg.svd(build_ln(B, sp) @ sp.check_basis, compute_uv=False)
            min_regular = min(min_regular, sv.min())
            wall = B.copy()
            wall[sp.midpoint_of[trial % len(sp.midpoint_of)]] = np.pi * rng.integers(-1, 2)
            sv_wall = np.linalg.svd(build_ln(wall, sp) @ sp.check_basis, compute_uv=False)
            drops += int(sv_wall.min() < 1e-10)
    elapsed = time.time() - t0
    ok = worst_sym <= 1e-12 and min_regular >= 1e-8 and drops == 50 and elapsed < 30
    return ok, f"asym {worst_sym:.1e}, min sv {min_regular:.2e}, wall rank drops {drops}/50", elapsed


def random_instance(rng):
    d = int(rng.integers(1, 4))
    while True:
        lam = rng.uniform(-5, 5, d)
        if np.all(np.abs(lam) > 0.1):
            break
    if rng.random() < 0.3:
        lam[0] = 0.0
    Q, _ = np.linalg.qr(rng.normal(size=(d, d)))
    ker = Q[:, lam == 0]
    project = lambda v: v - ker @ (ker.T @ v)
    S = Q @ np.diag(lam) @ Q.T
    mean = project(rng.normal(size=d) * 0.5)
    j = project(rng.normal(size=d))
    b = rng.normal(size=d)
    A = rng.normal(size=(d, d))
    A = A + A.T
    A = A - ker @ ker.T @ A @ ker @ ker.T
    return OscGaussMeasure(S, mean, 1.0 + 0.5j), ExpPoly.single(j, 1.0, b, A)


def criterion_3():
    t0 = time.time()
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(50):
        mu, f = random_instance(rng)
        exact = improper_integral(mu, f)
        worst = max(worst, abs(exact - quadrature_oracle(mu, f)) / abs(exact))
    unit = improper_integral(OscGaussMeasure(np.zeros((2, 2))), ExpPoly.single([0.0, 0.0]))
    elapsed = time.time() - t0
    ok = worst < 1e-3 and unit == 1 and elapsed < 120
    return ok, f"worst relative error {worst:.1e}, degenerate normalization {unit.real:g}", elapsed


def criterion_4():
    t0 = time.time()
    worst_unitary = worst_sym = 0.0
    assoc = integral = True
    for k in range(3, 9):
        lev = build_level(SU2, k)
        S = lev.S
        worst_unitary = max(worst_unitary, np.max(np.abs(S @ S.conj().T - np.eye(len(S)))))
        worst_sym = max(worst_sym, np.max(np.abs(S - S.T)))
        F = lev.fusion_table
        integral &= bool(np.all(F >= 0)) and F.dtype.kind == "i"
        # (a b) c versus a (b c), as exact integer sums
        left = np.einsum("xab,lxc->labc", F, F)
        right = np.einsum("ybc,lay->labc", F, F)
        assoc &= bool(np.array_equal(left, right))
    elapsed = time.time() - t0
    ok = worst_unitary <= 1e-10 and worst_sym <= 1e-10 and assoc and integral and elapsed < 5
    return ok, f"unitarity {worst_unitary:.1e}, symmetry {worst_sym:.1e}, associativity exact {assoc}", elapsed


def criterion_5():
    t0 = time.time()
    worst, count = 0.0, 0
    for k in range(3, 7):
        lev = build_level(SU2, k)
        for colors in itertools.product(lev.colors, repeat=3):
            rep = shadow_vs_verlinde(lev, colors, tol=1e-9)
            worst = max(worst, abs(rep["shadow_ratio"][0] - fusion_rule_su2(k, *colors)), abs(rep["shadow_ratio"][1]))
            count += 1
    elapsed = time.time() - t0
    return worst <= 1e-9 and elapsed < 10, f"{count} triples, worst deviation {worst:.1e}", elapsed


def vertical_links(J, N, k):
    """Empty link, one vertical ribbon per color, three vertical ribbons for all triples."""
    Q = J.complex
    P = product_with_zn(Q, N)
    edges = [Q.index(1, e) for e in VERTICAL_EDGES]
    colors = build_level(SU2, k).colors
    out = [None]
    for c in colors:
        out.append(build_link(J, N, [vertical_ribbon_faces(P, edges[0])], [c], "v:0", P))
    for triple in itertools.product(colors, repeat=3):
        out.append(build_link(J, N, [vertical_ribbon_faces(P, e) for e in edges], list(triple), "v:0", P))
    return out


def shadow_ratio(link, level) -> complex:
    empty = shadow_invariant(empty_decomposition(2), level).value
    if link is None:
        return 1.0 + 0j
    return link_shadow(link, level).value / empty


@lru_cache(maxsize=1)
def wlo_table():
    """(N, k, link, direct ratio, poisson ratio) for every link of criterion 6."""
    t0 = time.time()
    J = joined_complex(tetrahedron())
    rows = []
    for N in (2, 3):
        for k in (3, 4):
            engine = WLOEngine(J, N, J.complex.index(0, "v:0"), k, build_level(SU2, k))
            for link in vertical_links(J, N, k):
                direct = wlo_rig(link, engine, mode="direct").ratio
                poisson = wlo_rig(link, engine, mode="poisson").ratio
                rows.append((N, k, link, direct, poisson))
    return rows, time.time() - t0


def criterion_6():
    rows, elapsed = wlo_table()
    worst_theorem = worst_modes = 0.0
    for N, k, link, direct, poisson in rows:
        target = shadow_ratio(link, build_level(SU2, k))
        worst_theorem = max(worst_theorem, abs(direct - target), abs(poisson - target))
        worst_modes = max(worst_modes, abs(direct - poisson))
    ok = worst_theorem <= WLO_TOL and worst_modes <= MODE_TOL and elapsed < 1800
    detail = (f"{len(rows)} links, worst |WLO - shadow ratio| {worst_theorem:.1e}, "
              f"worst direct/poisson gap {worst_modes:.1e}; generic-ribbon extension not enabled")
    return ok, detail, elapsed


def criterion_7():
    rows, _ = wlo_table()
    t0 = time.time()
    worst = 0.0
    for N, k, link, direct, poisson in rows:
        shifted = shadow_ratio(link, build_level(SU2, k + SU2.dual_coxeter))
        worst = max(worst, abs(poisson - shifted))
    elapsed = time.time() - t0
    return worst > 10 * WLO_TOL, f"shifted-level oracle misses by up to {worst:.2f} (threshold {10 * WLO_TOL:g})", elapsed


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7]


@pytest.mark.parametrize("number", range(1, 8))
def test_criterion(number, capsys):
    ok, detail, elapsed = CRITERIA[number - 1]()
    with capsys.disabled():
        print()
        report(number, ok, detail, elapsed)
    assert ok, detail


if __name__ == "__main__":
    results = []
    for i, crit in enumerate(CRITERIA, 1):
        ok, detail, elapsed = crit()
        report(i, ok, detail, elapsed)
        results.append(ok)
    sys.exit(0 if all(results) else 1)
