"""Command-line interface: ``fanoguide <subcommand> ...``.

Exit codes: 0 success, 2 invalid configuration or input, 3 solver failure,
4 search target not found.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .config import load_config, run, validate_config
from .errors import (
    ConfigError,
    DomainError,
    FanoguideError,
    InconsistentMatrixError,
    MeshError,
    MeshParseError,
    MeshResolutionError,
    MissingTagError,
    OrientationError,
    NotFoundError,
    SolverError,
)
from .geometry import disk_geometry, lshape_geometry, straight_geometry
from .graph1d import Junction1DConfig, phase_sweep, solve_junction
from .mesh import export_mesh, generate_mesh, import_mesh
from .sweep import max_workers

log = logging.getLogger("fanoguide")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_NOT_FOUND = 0, 2, 3, 4

DESK_H = 0.02
_L_STAR = 2.5524
_FULL_BAND = [0.05, 3.1]

FIGURES = {
    "fig2": {"task": "graph1d", "geometry": {"variant": "junction1d"},
             "epsilons": [0.0, 0.1, 0.05, 0.025], "k_window": [0.01, math.pi - 0.01], "n": 2001},
    "fig3": {"task": "graph1d", "geometry": {"variant": "junction1d"},
             "epsilons": [0.1, 0.05, 0.025], "k_window": [0.01, math.pi - 0.01], "n": 4001},
    "fig4": {"task": "graph1d", "geometry": {"variant": "junction1d"},
             "epsilons": [round(e, 6) for e in np.linspace(-0.2, 0.2, 81)],
             "k_window": [math.pi / 2 - 0.4, math.pi / 2 + 0.4], "n": 201},
    "trapped-lshape": {"task": "trapped", "geometry": {"variant": "lshape", "L": _L_STAR},
                       "search_window": [2.5, 2.6]},
    "trapped-disk": {"task": "trapped", "geometry": {"variant": "disk"}, "search_window": [2.6, 2.9]},
    "fig6": {"task": "sweep", "geometry": {"variant": "lshape", "L": _L_STAR},
             "epsilons": [0.0, 0.025, 0.05], "k_window": _FULL_BAND, "n": 156},
    "fig8": {"task": "field", "geometry": {"variant": "lshape", "L": _L_STAR}, "epsilons": [0.05],
             "k": 2.46402, "tune": "R", "k_window": [2.455, 2.475], "n": 21},
    "fig9": {"task": "field", "geometry": {"variant": "lshape", "L": _L_STAR}, "epsilons": [0.05],
             "k": 2.4666602, "tune": "T", "k_window": [2.455, 2.475], "n": 21},
    "fig10": {"task": "sweep", "geometry": {"variant": "disk"},
              "epsilons": [0.0, 0.025, 0.05], "k_window": _FULL_BAND, "n": 156},
    "fig11": {"task": "field", "geometry": {"variant": "disk"}, "epsilons": [0.05],
              "k": 2.751, "tune": "R", "k_window": [2.74, 2.76], "n": 21},
    "fig12": {"task": "field", "geometry": {"variant": "disk"}, "epsilons": [0.05],
              "k": 2.75495, "tune": "T", "k_window": [2.74, 2.76], "n": 21},
}


def figure_config(fig_id: str, h: float = DESK_H, output_dir: str = ".") -> dict:
    if fig_id not in FIGURES:
        raise ConfigError(f"unknown figure id {fig_id!r}; choose from {', '.join(FIGURES)}")
    raw = json.loads(json.dumps(FIGURES[fig_id]))
    if raw["geometry"]["variant"] != "junction1d":
        raw["h"] = h
    raw["output_dir"] = str(Path(output_dir) / fig_id)
    return raw


# ------------------------------------------------------------- arguments

def _add_geometry(p, default="lshape"):
    p.add_argument("--geometry", choices=["lshape", "disk", "straight"], default=default)
    p.add_argument("--L", type=float, help="branch length of the L-shape")
    p.add_argument("--k0", type=float, help="design wavenumber of the L-shape (branch width pi/k0)")
    p.add_argument("--h", type=float, default=0.05, help="mesh size")
    p.add_argument("--n-terms", type=int, default=None, help="transverse modes in the face condition")
    p.add_argument("--out-dir", default=".")


def _eps_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad epsilon list {text!r}") from None


def _window(text):
    try:
        lo, hi = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a,b but got {text!r}") from None
    return [lo, hi]


def _profile_arg(text):
    if text in ("constant", "bump", "vertical-shift"):
        return {"kind": text}
    try:
        return json.loads(Path(text).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise argparse.ArgumentTypeError(f"profile {text!r} is neither a builtin nor a JSON file: {exc}") from None


def _add_search(p):
    p.add_argument("--param", choices=["L", "k"],
                   help="searched parameter: branch length L (L-shape) or wavenumber k")
    p.add_argument("--window", type=_window, metavar="A,B", dest="search_window",
                   help="search interval of the parameter")


def _raw_from_args(args, task) -> dict:
    geo = {"variant": args.geometry}
    if getattr(args, "L", None) is not None:
        geo["L"] = args.L
    if getattr(args, "k0", None) is not None:
        geo["k0"] = args.k0
    raw = {"task": task, "geometry": geo, "h": args.h, "output_dir": args.out_dir}
    if args.n_terms is not None:
        raw["n_terms"] = args.n_terms
    if getattr(args, "full", False):
        raw["full"] = True
    for name in ("k", "n", "target", "param", "profile"):
        if getattr(args, name, None) is not None:
            raw[name] = getattr(args, name)
    if getattr(args, "eps", None) is not None:
        raw["epsilons"] = args.eps
    for name in ("k_window", "search_window"):
        if getattr(args, name, None) is not None:
            raw[name] = list(getattr(args, name))
    return raw


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fanoguide", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("graph1d", help="reflection coefficient of the 1D junction")
    gsub = p.add_subparsers(dest="graph1d_command", required=True)
    g = gsub.add_parser("sweep", help="CSV table of R(k) and its phase on stdout or --out")
    g.add_argument("--eps", type=float, default=0.0)
    g.add_argument("--kmin", type=float, default=0.01)
    g.add_argument("--kmax", type=float, default=math.pi - 0.01)
    g.add_argument("--n", type=int, default=201)
    g.add_argument("--out", help="write the table here instead of stdout")
    g = gsub.add_parser("point", help="R at one wavenumber as JSON")
    g.add_argument("--eps", type=_eps_list, default=[0.0])
    g.add_argument("--k", type=float, required=True)

    p = sub.add_parser("mesh", help="generate, check or export meshes")
    msub = p.add_subparsers(dest="mesh_command", required=True)
    g = msub.add_parser("gen")
    _add_geometry(g)
    g.add_argument("--eps", type=float, default=0.0)
    g.add_argument("--out", required=True)
    c = msub.add_parser("check")
    c.add_argument("path")
    e = msub.add_parser("export", help="write node and triangle tables as CSV")
    e.add_argument("path")
    e.add_argument("--out-dir", default=".")

    p = sub.add_parser("scatter", help="half-guide scattering matrices and composed R, T at one k")
    _add_geometry(p)
    p.add_argument("--k", type=float, required=True)
    p.add_argument("--eps", type=_eps_list, default=[0.0])
    p.add_argument("--full", action="store_true", help="also solve the mirrored full guide directly")

    p = sub.add_parser("trapped", help="locate a trapped mode")
    _add_geometry(p)
    _add_search(p)

    p = sub.add_parser("fano-predict", help="trapped mode and first-order Fano coefficients")
    _add_geometry(p)
    _add_search(p)
    p.add_argument("--profile", type=_profile_arg,
                   help="constant, bump, vertical-shift, or a JSON file holding a profile object")
    p.add_argument("--eps", type=_eps_list, default=[0.05])

    p = sub.add_parser("sweep", help="frequency sweep of R^N, R^D, R and T")
    _add_geometry(p)
    p.add_argument("--eps", type=_eps_list, default=[0.05])
    p.add_argument("--k-window", type=float, nargs=2, required=True, metavar=("KMIN", "KMAX"))
    p.add_argument("--n", type=int, default=61)

    p = sub.add_parser("find-zero", help="frequency where R or T vanishes")
    _add_geometry(p)
    p.add_argument("--target", choices=["R", "T"], default="R")
    p.add_argument("--eps", type=_eps_list, default=[0.05])
    p.add_argument("--k-window", type=float, nargs=2, required=True, metavar=("KMIN", "KMAX"))
    p.add_argument("--n", type=int, default=61)

    p = sub.add_parser("reproduce", help="run a frozen experiment")
    p.add_argument("figure", choices=sorted(FIGURES))
    p.add_argument("--h", type=float, default=DESK_H)
    p.add_argument("--out-dir", default=".")

    p = sub.add_parser("run", help="run a JSON configuration file")
    p.add_argument("config")
    return parser


# -------------------------------------------------------------- commands

def _emit(payload):
    print(json.dumps(payload, indent=2, sort_keys=True, default=str))


def _cmd_graph1d(args):
    if args.graph1d_command == "point":
        out = []
        for eps in args.eps:
            sol = solve_junction(Junction1DConfig(eps, args.k))
            out.append({"epsilon": eps, "k": args.k, "R": [sol.R.real, sol.R.imag],
                        "resonant": sol.is_resonant})
        _emit(out)
        return
    if not 0 < args.kmin < args.kmax or args.n < 2:
        raise ConfigError(f"need 0 < kmin < kmax and n >= 2, got {args.kmin}, {args.kmax}, {args.n}")
    lines = ["k [1/length],Re R [-],Im R [-],theta [rad]"]
    for k, re, im, th in phase_sweep(args.eps, np.linspace(args.kmin, args.kmax, args.n)):
        lines.append(f"{k:.10f},{re:.12e},{im:.12e},{th:.12f}")
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _geometry_from_args(args):
    if args.geometry == "lshape":
        return lshape_geometry((args.L or 2.5524) + args.eps, args.k0 or 0.8 * math.pi,
                               L_ref=args.L or 2.5524)
    if args.geometry == "disk":
        return disk_geometry(args.eps)
    if args.eps:
        raise ConfigError("--eps is not supported for the straight guide mesh")
    return straight_geometry()


def _cmd_mesh(args):
    if args.mesh_command == "gen":
        if not args.h > 0:
            raise ConfigError("--h must be positive")
        mesh = generate_mesh(_geometry_from_args(args), args.h)
        export_mesh(mesh, args.out)
        _emit({"path": args.out, **mesh.stats()})
    elif args.mesh_command == "check":
        mesh = import_mesh(args.path).validate()
        _emit({"path": args.path, "valid": True, **mesh.stats()})
    else:
        mesh = import_mesh(args.path)
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        stem = Path(args.path).stem
        header = f"# fanoguide mesh {stem} nodes={mesh.n_nodes} triangles={mesh.n_triangles}"
        with (out / f"{stem}_nodes.csv").open("w") as fh:
            fh.write(header + "\nx [length],y [length]\n")
            np.savetxt(fh, mesh.nodes, delimiter=",", fmt="%.17g")
        with (out / f"{stem}_triangles.csv").open("w") as fh:
            fh.write(header + "\nn0,n1,n2,n3,n4,n5\n")
            np.savetxt(fh, mesh.triangles, delimiter=",", fmt="%d")
        _emit({"files": [str(out / f"{stem}_nodes.csv"), str(out / f"{stem}_triangles.csv")]})


def _summarize(result: dict) -> dict:
    keep = {}
    for key, value in result.items():
        if key in ("tables", "record", "coefficients"):
            continue
        keep[key] = value
    if "coefficients" in result:
        keep["coefficients"] = result["coefficients"].to_dict()
    if "record" in result:
        keep["trapped"] = result["record"].summary()
    return keep


def _cmd_task(args, task):
    _emit(_summarize(run(validate_config(_raw_from_args(args, task)))))


def _cmd_reproduce(args):
    raw = figure_config(args.figure, args.h, args.out_dir)
    cfg = validate_config(raw)
    Path(cfg.output_dir).mkdir(parents=True, exist_ok=True)
    (Path(cfg.output_dir) / "config.json").write_text(json.dumps(raw, indent=2, sort_keys=True) + "\n")
    _emit(_summarize(run(cfg)))


def _cmd_run(args):
    _emit(_summarize(run(load_config(args.config))))


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, NotFoundError):
        return EXIT_NOT_FOUND
    if isinstance(exc, (ConfigError, MeshParseError, MeshResolutionError, OrientationError,
                        MissingTagError)):
        return EXIT_CONFIG
    if isinstance(exc, (SolverError, InconsistentMatrixError, MeshError)):
        return EXIT_SOLVER
    if isinstance(exc, DomainError):
        return EXIT_CONFIG
    return EXIT_SOLVER


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    handlers = {"graph1d": _cmd_graph1d, "mesh": _cmd_mesh, "reproduce": _cmd_reproduce,
                "run": _cmd_run}
    try:
        max_workers()
        if args.command in handlers:
            handlers[args.command](args)
        else:
            _cmd_task(args, args.command)
    except FanoguideError as exc:
        code = exit_code(exc)
        print(f"fanoguide: error: {exc}", file=sys.stderr)
        table = getattr(exc, "table", None)
        if table:
            print("scan table:", file=sys.stderr)
            for row in table:
                print("  " + "  ".join(f"{v:.8g}" for v in row), file=sys.stderr)
        return code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
