"""Command-line driver.

Exit codes: 0 success, 1 numerical tolerance failure, 2 input error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence

import numpy as np

from .cspath import CSPathError, WLOEngine, wlo_rig
from .dec import star_matrix
from .lie import SU2, LieError, build_level, level_to_json
from .oscgauss import DivergenceError, ExtrapolationError
from .polycomplex import ComplexError, PolyComplex, canonical_dual, get_complex, joined_complex
from .ribbon import RibbonError, build_link, link_from_json, link_to_json, load_link, regions, vertical_ribbon_faces
from .shadow import ShadowError, empty_decomposition, link_shadow, shadow_invariant

log = logging.getLogger("torusgauge")

EXIT_OK, EXIT_NUMERIC, EXIT_INPUT = 0, 1, 2


class InputError(ValueError):
    pass


def _write_json(data: dict, path: Optional[str]) -> None:
    text = json.dumps(data, indent=2)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _cplx(z: complex) -> List[float]:
    return [float(np.real(z)), float(np.imag(z))]


# --------------------------------------------------------------------------
# structure checks
# --------------------------------------------------------------------------

def structure_report(K: PolyComplex) -> dict:
    """Exact combinatorial identities on a closed surface complex, its dual and qK."""
    pair = canonical_dual(K)
    J = joined_complex(K)
    Q = J.complex
    out = {"complex": K.name, "faces": [K.n_faces(p) for p in range(3)],
           "qk_faces": [Q.n_faces(p) for p in range(3)], "euler": K.euler_characteristic(),
           "qk_euler": Q.euler_characteristic()}
    dd = all(not np.any(C.boundary_matrix(1) @ C.boundary_matrix(2)) for C in (K, pair.dual, Q))
    out["boundary_boundary_zero"] = bool(dd)
    out["d_d_zero"] = bool(all(not np.any(C.boundary_matrix(2).T @ C.boundary_matrix(1).T) for C in (K, Q)))
    rng = np.random.default_rng(0)
    adj = True
    for p in (1, 2):
        a = rng.integers(-5, 6, K.n_faces(p - 1))
        b = rng.integers(-5, 6, K.n_faces(p))
        adj &= int((K.boundary_matrix(p).T @ a) @ b) == int(a @ (K.boundary_matrix(p) @ b))
    out["d_adjoint_of_boundary"] = bool(adj)
    star_ok = True
    for p in range(3):
        fwd = star_matrix(pair, p, "base")
        back = star_matrix(pair, 2 - p, "dual")
        star_ok &= np.array_equal(back @ fwd, (-1) ** (p * (2 - p)) * np.eye(K.n_faces(p)))
    out["star_star_sign"] = bool(star_ok)
    from .dec import psi_matrix
    psi = psi_matrix(J, "base")
    out["psi_norm_doubling"] = bool(np.array_equal(psi.T @ psi, 2 * np.eye(K.n_faces(1))))
    out["euler_preserved"] = out["euler"] == out["qk_euler"]
    out["ok"] = all(v for key, v in out.items() if isinstance(v, bool))
    return out


# --------------------------------------------------------------------------
# subcommand implementations
# --------------------------------------------------------------------------

def cmd_complex(args) -> int:
    K = get_complex(args.complex)
    if args.action == "check":
        rep = structure_report(K)
        _write_json(rep, args.json)
        return EXIT_OK if rep["ok"] else EXIT_NUMERIC
    target = joined_complex(K).complex if args.qk else K
    desc = target.to_description()
    desc["euler"] = target.euler_characteristic()
    _write_json(desc, args.json)
    return EXIT_OK


def cmd_lie(args) -> int:
    _write_json(level_to_json(build_level(SU2, args.k)), args.json)
    return EXIT_OK


def _load_link(path: str):
    if not os.path.exists(path):
        raise FileNotFoundError("link file not found")
    return load_link(path)


def link_report(link) -> dict:
    rd = regions(link)
    return {
        "schema": "v1",
        "N": link.N,
        "ribbons": [{"kind": p.kind, "faces": len(R.faces), "color": c,
                     "winding": p.winding(link.N) if p.kind == "generic" else None}
                    for R, p, c in zip(link.ribbons, link.projections, link.colors)],
        "regions": [{"euler": e, "gleam": g} for e, g in zip(rd.euler, rd.gleam)],
        "edges": [{"ribbon": i, "plus": a, "minus": b, "color": c} for i, a, b, c in rd.edges],
        "marks": [{"ribbon": i, "region": r, "color": c} for i, r, c in rd.marks],
        "sigma0_region": rd.sigma0_region,
    }


def cmd_link(args) -> int:
    if args.action == "vertical":
        K = get_complex(args.complex)
        J = joined_complex(K)
        from .polycomplex import product_with_zn
        P = product_with_zn(J.complex, args.n)
        edges = [J.complex.index(1, e) for e in args.edges.split(",") if e]
        colors = [int(c) for c in args.colors.split(",") if c]
        link = build_link(J, args.n, [vertical_ribbon_faces(P, e) for e in edges], colors, args.sigma0, P)
        _write_json(link_to_json(link, args.complex), args.out)
        return EXIT_OK
    link = _load_link(args.link)
    _write_json(link_report(link), args.json)
    return EXIT_OK


def shadow_report(link, k: int) -> dict:
    level = build_level(SU2, k)
    res = link_shadow(link, level)
    chi = link.qk.euler_characteristic()
    empty = shadow_invariant(empty_decomposition(chi), level).value
    return {
        "schema": "v1", "k": k, "value": _cplx(res.value), "empty": _cplx(empty),
        "ratio": _cplx(res.value / empty), "colorings": res.colorings, "nonzero": res.nonzero,
        "terms": [{"coloring": list(c), "dims": l1, "twists": _cplx(l2), "fusion": l3, "vertical": _cplx(lv)}
                  for c, l1, l2, l3, lv in res.terms],
    }


def cmd_shadow(args) -> int:
    link = _load_link(args.link)
    _write_json(shadow_report(link, args.k + (2 if args.k_shift else 0)), args.report)
    return EXIT_OK


def wlo_report(link, k: int, modes: Sequence[str], s_schedule, cutoff, csv_path=None) -> dict:
    level = build_level(SU2, k)
    engine = WLOEngine(link.joined, link.N, link.sigma0, k, level)
    out = {"schema": "v1", "k": k, "N": link.N, "s_schedule": list(s_schedule), "modes": {}}
    for mode in modes:
        kw = {"cutoff": cutoff} if (mode == "direct" and cutoff) else {}
        res = wlo_rig(link, engine, s_schedule, mode, **kw)
        out["modes"][mode] = {
            "numerator": _cplx(res.numerator), "denominator": _cplx(res.denominator),
            "ratio": _cplx(res.ratio), "ratios_per_s": [_cplx(r) for r in res.ratios_per_s],
            "extrapolation_error": res.extrapolation_error, "diagnostics": res.diagnostics,
        }
    if len(modes) == 2:
        a, b = (complex(*out["modes"][m]["ratio"]) for m in modes)
        out["mode_difference"] = abs(a - b)
    if csv_path:
        theta = np.linspace(0, 2 * np.pi, 721)
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["theta"] + [f"re_s{s}" for s in s_schedule] + [f"im_s{s}" for s in s_schedule])
            vals = [engine.integrand(theta, link, s) for s in s_schedule]
            for i, t in enumerate(theta):
                w.writerow([t] + [v[i].real for v in vals] + [v[i].imag for v in vals])
    return out


def _modes(mode: str) -> List[str]:
    return ["direct", "poisson"] if mode == "both" else [mode]


def cmd_wlo(args) -> int:
    link = _load_link(args.link)
    if args.n is not None and args.n != link.N:
        raise InputError("--n does not match the link file")
    if args.complex is not None:
        K = get_complex(args.complex)
        if K.n_faces(1) != link.joined.pair.base.n_faces(1) or K.n_faces(0) != link.joined.pair.base.n_faces(0):
            raise InputError("--complex does not match the link's ambient complex")
    rep = wlo_report(link, args.k, _modes(args.mode), args.s_schedule, args.y_cutoff, args.csv)
    _write_json(rep, args.report)
    if "mode_difference" in rep and rep["mode_difference"] > args.tol:
        return EXIT_NUMERIC
    return EXIT_OK


def theorem_report(link, k: int, s_schedule, cutoff, tol: float, shift: bool = False) -> dict:
    wlo = wlo_report(link, k, ["direct", "poisson"], s_schedule, cutoff)
    sh = shadow_report(link, k + (2 if shift else 0))
    ratio = complex(*wlo["modes"]["poisson"]["ratio"])
    target = complex(*sh["ratio"])
    diff = abs(ratio - target)
    return {"schema": "v1", "k": k, "N": link.N, "wlo_ratio": _cplx(ratio), "shadow_ratio": _cplx(target),
            "difference": diff, "mode_difference": wlo["mode_difference"],
            "ok": bool(diff <= tol and wlo["mode_difference"] <= 1e-4), "wlo": wlo, "shadow": sh}


def cmd_check(args) -> int:
    if args.action == "structure":
        rep = structure_report(get_complex(args.complex))
        _write_json(rep, args.report)
        return EXIT_OK if rep["ok"] else EXIT_NUMERIC
    link = _load_link(args.link)
    rep = theorem_report(link, args.k, args.s_schedule, args.y_cutoff, args.tol, args.k_shift)
    _write_json(rep, args.report)
    return EXIT_OK if rep["ok"] else EXIT_NUMERIC


# --------------------------------------------------------------------------
# experiments
# --------------------------------------------------------------------------

PIPELINES = ("structure-tests", "shadow", "wlo", "theorem-check")


def run_experiment(config_path: str, threads: int = 1) -> dict:
    """Run a named pipeline described by a JSON config and write its reports.

    Config keys: "schema" ("v1"), "pipeline", "output" (directory), and per
    pipeline "complexes", "links" (paths), "k" (list), "mode",
    "s_schedule", "y_cutoff", "tol", "csv" (bool).
    """
    if not os.path.exists(config_path):
        raise FileNotFoundError("config file not found")
    with open(config_path) as fh:
        cfg = json.load(fh)
    if cfg.get("schema") != "v1":
        raise InputError("config schema must be v1")
    pipeline = cfg.get("pipeline")
    if pipeline not in PIPELINES:
        raise InputError(f"unknown pipeline {pipeline!r}")
    base = os.path.dirname(os.path.abspath(config_path))
    outdir = os.path.join(base, cfg.get("output", "reports"))
    os.makedirs(outdir, exist_ok=True)
    resolve = lambda p: p if os.path.isabs(p) or not os.path.exists(os.path.join(base, p)) else os.path.join(base, p)
    ks = cfg.get("k", [4])
    ks = ks if isinstance(ks, list) else [ks]
    s_schedule = cfg.get("s_schedule", [0.2, 0.1, 0.05])
    tol = float(cfg.get("tol", 1e-3))

    jobs = []
    if pipeline == "structure-tests":
        for name in cfg.get("complexes", ["tetrahedron", "cube", "hex_torus"]):
            jobs.append((f"structure_{os.path.basename(name)}", lambda name=name: structure_report(get_complex(resolve(name)))))
    else:
        for path in cfg.get("links", []):
            p = resolve(path)
            if not os.path.exists(p):
                raise FileNotFoundError("link file not found")
            for k in ks:
                stem = f"{pipeline}_{os.path.splitext(os.path.basename(p))[0]}_k{k}"
                if pipeline == "shadow":
                    jobs.append((stem, lambda p=p, k=k: shadow_report(load_link(p), k)))
                elif pipeline == "wlo":
                    csv_path = os.path.join(outdir, stem + "_integrand.csv") if cfg.get("csv") else None
                    jobs.append((stem, lambda p=p, k=k, c=csv_path: wlo_report(
                        load_link(p), k, _modes(cfg.get("mode", "both")), s_schedule, cfg.get("y_cutoff"), c)))
                else:
                    jobs.append((stem, lambda p=p, k=k: theorem_report(load_link(p), k, s_schedule,
                                                                        cfg.get("y_cutoff"), tol)))
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        results = list(pool.map(lambda job: (job[0], job[1]()), jobs))
    summary = {"schema": "v1", "pipeline": pipeline, "reports": []}
    for stem, rep in results:
        path = os.path.join(outdir, stem + ".json")
        _write_json(rep, path)
        entry = {"name": stem, "path": path}
        if "ok" in rep:
            entry["ok"] = rep["ok"]
        summary["reports"].append(entry)
    summary["ok"] = all(r.get("ok", True) for r in summary["reports"])
    _write_json(summary, os.path.join(outdir, f"{pipeline}_summary.json"))
    return summary


def cmd_run(args) -> int:
    summary = run_experiment(args.config, args.threads)
    print(json.dumps({"ok": summary["ok"], "reports": len(summary["reports"])}))
    return EXIT_OK if summary["ok"] else EXIT_NUMERIC


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------

def _floats(text: str) -> List[float]:
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError("expected a comma separated list of numbers") from None
    if len(vals) < 2 or any(v <= 0 for v in vals):
        raise argparse.ArgumentTypeError("need at least two positive widths")
    return vals


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=1, help="worker threads for experiment pipelines")
    common.add_argument("--tol", type=float, default=1e-3, help="tolerance for pass/fail decisions")
    common.add_argument("--s-schedule", type=_floats, default=[0.2, 0.1, 0.05], help="mollifier widths, e.g. 0.2,0.1,0.05")
    common.add_argument("--y-cutoff", type=int, default=None, help="initial lattice cutoff for the direct mode")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="torusgauge", description="Discrete torus-gauge Chern-Simons toolkit",
                                parents=[common])
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("complex", parents=[common], help="inspect and check cell complexes")
    c.add_argument("action", choices=["show", "check"])
    c.add_argument("complex", help="builtin name (tetrahedron, cube, icosahedron, hex_torus[:n:m]) or JSON path")
    c.add_argument("--qk", action="store_true", help="show the joined complex qK instead")
    c.add_argument("--json", default=None, help="output file (default stdout)")
    c.set_defaults(func=cmd_complex)

    lv = sub.add_parser("lie", parents=[common], help="level-k data for SU(2)")
    lv.add_argument("action", choices=["level"])
    lv.add_argument("--k", type=int, required=True)
    lv.add_argument("--json", default=None)
    lv.set_defaults(func=cmd_lie)

    lk = sub.add_parser("link", parents=[common], help="validate links or create vertical ones")
    lk.add_argument("action", choices=["check", "vertical"])
    lk.add_argument("--link", default=None)
    lk.add_argument("--complex", default="tetrahedron")
    lk.add_argument("--n", type=int, default=2)
    lk.add_argument("--edges", default="", help="comma separated qK edge ids")
    lk.add_argument("--colors", default="")
    lk.add_argument("--sigma0", default="v:0")
    lk.add_argument("--out", default=None)
    lk.add_argument("--json", default=None)
    lk.set_defaults(func=cmd_link)

    sh = sub.add_parser("shadow", parents=[common], help="shadow invariant of a link")
    sh.add_argument("action", choices=["eval"])
    sh.add_argument("--link", required=True)
    sh.add_argument("--k", type=int, required=True)
    sh.add_argument("--k-shift", action="store_true", help="evaluate at k + 2 (convention check)")
    sh.add_argument("--report", default=None)
    sh.set_defaults(func=cmd_shadow)

    w = sub.add_parser("wlo", parents=[common], help="discrete Wilson loop observable")
    w.add_argument("action", choices=["eval"])
    w.add_argument("--link", required=True)
    w.add_argument("--k", type=int, required=True)
    w.add_argument("--complex", default=None)
    w.add_argument("--n", type=int, default=None)
    w.add_argument("--mode", choices=["direct", "poisson", "both"], default="both")
    w.add_argument("--report", default=None)
    w.add_argument("--csv", default=None, help="write integrand samples along the kernel line")
    w.set_defaults(func=cmd_wlo)

    ck = sub.add_parser("check", parents=[common], help="structure checks or WLO versus shadow")
    ck.add_argument("action", choices=["structure", "theorem"])
    ck.add_argument("--complex", default="tetrahedron")
    ck.add_argument("--link", default=None)
    ck.add_argument("--k", type=int, default=4)
    ck.add_argument("--k-shift", action="store_true")
    ck.add_argument("--report", default=None)
    ck.set_defaults(func=cmd_check)

    r = sub.add_parser("run", parents=[common], help="run an experiment config")
    r.add_argument("config")
    r.set_defaults(func=cmd_run)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if getattr(args, "action", None) == "check" and args.command == "link" and not args.link:
        print("error: --link is required", file=sys.stderr)
        return EXIT_INPUT
    if args.command == "check" and args.action == "theorem" and not args.link:
        print("error: --link is required", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        msg = str(exc) if "not found" in str(exc) else f"file not found: {exc.filename}"
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_INPUT
    except (ComplexError, RibbonError, LieError, InputError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (CSPathError, DivergenceError, ExtrapolationError, ShadowError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
