"""Run configurations: JSON schema, validation and task execution.

A run configuration is a JSON object with a ``task`` and a ``geometry``
section; all output files go to ``output_dir`` and start with a metadata
comment line carrying the configuration hash and mesh statistics (no
timestamps, so identical configurations give identical files).
"""
from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np

from . import __version__
from .errors import ConfigError, DomainError
from .fano import fano_coefficients
from .fem import DEFAULT_TERMS, compute_augmented_matrix, compute_scattering_matrix, export_field_csv
from .geometry import (
    ProfileH,
    WaveguideGeometry,
    bump_profile,
    constant_profile,
    disk_geometry,
    displace_boundary,
    lshape_geometry,
    straight_geometry,
    vertical_shift_profile,
)
from .graph1d import phase_sweep
from .mesh import generate_mesh, mirror_mesh
from .modal import reduce_augmented
from .scattering import compose_full, full_guide_solve, incident_field
from .sweep import PerturbedFamily, find_nonreflection, find_perfect_reflection, frequency_sweep
from .trapped import disk_frequency_family, frequency_family, locate_trapped, lshape_length_family

log = logging.getLogger(__name__)

TASKS = ("graph1d", "scatter", "trapped", "fano-predict", "sweep", "find-zero", "field")

_NUM = {"type": "number"}
_WINDOW = {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}

SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "title": "fanoguide run configuration",
    "type": "object",
    "required": ["geometry"],
    "additionalProperties": False,
    "properties": {
        "task": {"enum": list(TASKS)},
        "geometry": {
            "type": "object",
            "required": ["variant"],
            "additionalProperties": False,
            "properties": {
                "variant": {"enum": ["lshape", "disk", "straight", "junction1d"]},
                "L": {"type": "number", "exclusiveMinimum": 1},
                "k0": {"type": "number", "exclusiveMinimum": 0},
                "L_ref": {"type": "number", "exclusiveMinimum": 1},
                "radius": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 0.5},
                "center_x": {"type": "number", "exclusiveMinimum": 0},
                "d": {"type": "number", "exclusiveMinimum": 0},
                "R_trunc": {"oneOf": [{"const": "auto"}, {"type": "number", "exclusiveMinimum": 0}]},
            },
        },
        "profile": {
            "type": "object",
            "required": ["kind"],
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["constant", "bump", "vertical-shift", "piecewise"]},
                "value": _NUM,
                "a": _NUM,
                "b": _NUM,
                "amplitude": _NUM,
                "pieces": {
                    "type": "array",
                    "minItems": 1,
                    "items": {
                        "type": "object",
                        "required": ["s0", "s1", "coeffs"],
                        "additionalProperties": False,
                        "properties": {"s0": _NUM, "s1": _NUM,
                                       "coeffs": {"type": "array", "items": _NUM, "minItems": 1}},
                    },
                },
            },
        },
        "epsilons": {"type": "array", "items": _NUM, "minItems": 1},
        "k": {"type": "number", "exclusiveMinimum": 0},
        "k_window": _WINDOW,
        "lambda_window": _WINDOW,
        "search_window": _WINDOW,
        "n": {"type": "integer", "minimum": 2},
        "h": {"type": "number", "exclusiveMinimum": 0},
        "n_terms": {"type": "integer", "minimum": 2},
        "target": {"enum": ["R", "T"]},
        "param": {"enum": ["L", "k"]},
        "tune": {"enum": ["R", "T"]},
        "refine": {"type": "boolean"},
        "full": {"type": "boolean"},
        "output_dir": {"type": "string"},
        "seed": {"type": "integer"},
    },
}

_VALIDATOR = jsonschema.Draft7Validator(SCHEMA)


@dataclass
class RunConfig:
    geometry: dict
    task: str = "sweep"
    profile: Optional[dict] = None
    epsilons: list = field(default_factory=lambda: [0.0])
    k: Optional[float] = None
    k_window: Optional[tuple] = None
    search_window: Optional[tuple] = None
    n: int = 61
    h: float = 0.05
    n_terms: int = DEFAULT_TERMS
    target: str = "R"
    param: Optional[str] = None
    tune: Optional[str] = None
    refine: bool = True
    full: bool = False
    output_dir: str = "."
    seed: int = 0
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def digest(self) -> str:
        return config_hash(self.raw)


def config_hash(raw: dict) -> str:
    """Hash of everything that affects results (the output location does not)."""
    raw = {k: v for k, v in raw.items() if k != "output_dir"}
    blob = json.dumps(raw, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _path(err) -> str:
    parts = list(err.absolute_path)
    if err.validator == "required":
        missing = err.message.split("'")[1]
        parts.append(missing)
    return "/".join(str(p) for p in parts) or "<root>"


def validate_config(raw) -> RunConfig:
    """Check a parsed JSON document and convert it to a :class:`RunConfig`.

    Raises :class:`ConfigError` listing every violation with its field path."""
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a JSON object")
    errors = sorted(_VALIDATOR.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        lines = [f"{_path(e)}: {e.message}" for e in errors]
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(lines))
    cfg = RunConfig(**{k: (tuple(v) if k.endswith("window") else v) for k, v in raw.items()
                       if k != "lambda_window"}, raw=raw)
    if "lambda_window" in raw:
        if cfg.k_window is not None:
            raise ConfigError("give k_window or lambda_window, not both")
        lo, hi = raw["lambda_window"]
        if lo <= 0:
            raise ConfigError("lambda_window: lower end must be positive")
        cfg.k_window = (math.sqrt(lo), math.sqrt(hi))
    _check_ranges(cfg)
    return cfg


def _check_ranges(cfg: RunConfig):
    variant = cfg.geometry["variant"]
    for name in ("k_window", "search_window"):
        w = getattr(cfg, name)
        if w is not None and not w[0] < w[1]:
            raise ConfigError(f"{name}: lower end {w[0]} must be below upper end {w[1]}")
    if variant == "junction1d":
        if cfg.task != "graph1d":
            raise ConfigError("geometry/variant: junction1d only supports task graph1d")
        return
    if cfg.task == "graph1d":
        raise ConfigError("task graph1d needs geometry/variant junction1d")
    if cfg.k_window is not None and not 0 < cfg.k_window[0] < cfg.k_window[1] < math.pi:
        raise ConfigError(f"k_window {list(cfg.k_window)} must lie inside the monomode band (0, pi)")
    if cfg.k is not None and not 0 < cfg.k < math.pi:
        raise ConfigError(f"k={cfg.k} must lie inside the monomode band (0, pi)")
    if cfg.task in ("sweep", "find-zero") and cfg.k_window is None:
        raise ConfigError(f"k_window: required by task {cfg.task}")
    if cfg.task in ("scatter", "field") and cfg.k is None:
        raise ConfigError(f"k: required by task {cfg.task}")


def load_config(path) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read configuration {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"configuration {path} is not valid JSON: {exc}") from exc
    return validate_config(raw)


# ---------------------------------------------------------------- builders

def base_geometry(gcfg: dict, abc: str = "neumann") -> WaveguideGeometry:
    g = dict(gcfg)
    variant = g.pop("variant")
    R = g.pop("R_trunc", "auto")
    R = None if R == "auto" else R
    if variant == "lshape":
        return lshape_geometry(g.get("L", 2.5524), g.get("k0", 0.8 * math.pi), abc, R,
                               g.get("L_ref", 2.55))
    if variant == "disk":
        return disk_geometry(0.0, g.get("radius", 0.25), g.get("center_x", 1.0), abc, R)
    if variant == "straight":
        return straight_geometry(None, 0.0, abc, g.get("d", 1.0), R)
    raise ConfigError(f"geometry/variant: {variant!r} has no 2D geometry")


def piecewise_profile(arc, pieces) -> ProfileH:
    """H(s) = sum_j c_j (s - s0)^j on each piece [s0, s1), zero elsewhere."""
    for p in pieces:
        if not 0 <= p["s0"] < p["s1"] <= arc.length + 1e-12:
            raise ConfigError(f"profile/pieces: [{p['s0']}, {p['s1']}] not inside the arc [0, {arc.length:g}]")

    def f(s):
        out = np.zeros_like(s)
        for p in pieces:
            sel = (s >= p["s0"]) & (s < p["s1"])
            out[sel] = np.polynomial.polynomial.polyval(s[sel] - p["s0"], p["coeffs"])
        return out

    return ProfileH(arc, f, name="piecewise")


def build_profile(pcfg: Optional[dict], geo: WaveguideGeometry) -> ProfileH:
    """Profile on the natural arc of each variant (branch end, inclusion, top wall)."""
    if geo.variant == "lshape":
        arc = geo.branch_end_arc()
    elif geo.variant == "disk":
        arc = geo.inclusion_arc()
    else:
        arc = geo.top_wall_arc()
    if pcfg is None:
        if geo.variant == "lshape":
            return constant_profile(arc, 1.0)
        if geo.variant == "disk":
            return vertical_shift_profile(arc)
        return bump_profile(arc, 0.25 * arc.length, 0.75 * arc.length)
    kind = pcfg["kind"]
    try:
        if kind == "constant":
            return constant_profile(arc, pcfg.get("value", 1.0))
        if kind == "bump":
            return bump_profile(arc, pcfg.get("a", 0.25 * arc.length), pcfg.get("b", 0.75 * arc.length),
                                pcfg.get("amplitude", 1.0))
        if kind == "vertical-shift":
            if geo.variant != "disk":
                raise ConfigError("profile/kind: vertical-shift applies to the disk inclusion only")
            return vertical_shift_profile(arc)
        if "pieces" not in pcfg:
            raise ConfigError("profile/pieces: required for a piecewise profile")
        return piecewise_profile(arc, pcfg["pieces"])
    except DomainError as exc:
        raise ConfigError(f"profile: {exc}") from exc


def family_from_config(cfg: RunConfig, abc: str = "neumann") -> PerturbedFamily:
    """eps -> mesh of the geometry displaced by eps*H (meshes are cached)."""
    geo = base_geometry(cfg.geometry, abc)
    H = build_profile(cfg.profile, geo)
    cache = {}

    def build(eps):
        if eps not in cache:
            cache[eps] = generate_mesh(displace_boundary(geo, H, eps), cfg.h)
        return cache[eps]

    return PerturbedFamily(geo.variant, build, cfg.geometry.get("k0"))


# ------------------------------------------------------------------ output

def metadata_line(cfg: RunConfig, mesh=None, **extra) -> str:
    parts = [f"fanoguide {__version__}", f"config={cfg.digest}", f"task={cfg.task}"]
    if mesh is not None:
        st = mesh.stats()
        parts += [f"nodes={st['nodes']}", f"triangles={st['triangles']}", f"h={mesh.h!r}"]
    parts += [f"{k}={v}" for k, v in extra.items()]
    return "# " + " ".join(parts)


def _cpx(z) -> list:
    return [float(np.real(z)), float(np.imag(z))]


def write_json(path: Path, payload: dict) -> Path:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def _out(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ------------------------------------------------------------------- tasks

def task_graph1d(cfg: RunConfig) -> dict:
    a, b = cfg.k_window or (0.01, math.pi - 0.01)
    ks = np.linspace(a, b, cfg.n)
    path = _out(cfg) / "graph1d.csv"
    with path.open("w") as fh:
        fh.write(metadata_line(cfg) + "\n")
        fh.write("epsilon [-],k [1/length],Re R [-],Im R [-],theta [rad]\n")
        for eps in cfg.epsilons:
            for k, re, im, th in phase_sweep(eps, ks):
                fh.write(f"{eps!r},{k:.10f},{re:.12e},{im:.12e},{th:.12f}\n")
    return {"files": [str(path)]}


def task_scatter(cfg: RunConfig) -> dict:
    lam = cfg.k ** 2
    fam_n, fam_d = family_from_config(cfg, "neumann"), family_from_config(cfg, "dirichlet")
    results = []
    for eps in cfg.epsilons:
        mesh = fam_n.mesh(eps)
        s = compute_scattering_matrix(mesh, lam, "neumann", cfg.n_terms)
        S = compute_augmented_matrix(mesh, lam, "neumann", cfg.n_terms)
        RD = compute_scattering_matrix(fam_d.mesh(eps), lam, "dirichlet", cfg.n_terms).entries[0, 0]
        red = reduce_augmented(S)
        rt = compose_full(s.entries[0, 0], RD, lam, eps)
        results.append({
            "epsilon": eps, "k": cfg.k, "lambda": lam,
            "s": [[_cpx(z) for z in row] for row in s.entries],
            "S_augmented": [[_cpx(z) for z in row] for row in S.entries],
            "s_unitarity_defect": s.unitarity_defect, "s_symmetry_defect": s.symmetry_defect,
            "S_unitarity_defect": S.unitarity_defect, "S_symmetry_defect": S.symmetry_defect,
            "reduction_mismatch": float(np.abs(red.entries - s.entries).max()),
            "RN": _cpx(s.entries[0, 0]), "RD": _cpx(RD), "R": _cpx(rt.R), "T": _cpx(rt.T),
            "energy_defect": rt.energy_defect, "mesh": mesh.stats(),
        })
        if cfg.full:
            direct = full_guide_solve(mirror_mesh(mesh, "x", 0.0), lam, eps, cfg.n_terms)
            results[-1]["direct"] = {"R": _cpx(direct.R), "T": _cpx(direct.T),
                                     "energy_defect": direct.energy_defect,
                                     "composition_mismatch": max(abs(direct.R - rt.R), abs(direct.T - rt.T))}
    path = write_json(_out(cfg) / "scatter.json", {"config": cfg.digest, "results": results})
    return {"files": [str(path)], "results": results}


def _trapped_family(cfg: RunConfig):
    """Length search for the L-shape by default, frequency search otherwise."""
    geo = base_geometry(cfg.geometry)
    param = cfg.param or ("L" if geo.variant == "lshape" else "k")
    if param == "L":
        if geo.variant != "lshape":
            raise ConfigError("param: a length search needs geometry/variant lshape")
        k0 = cfg.geometry.get("k0", 0.8 * math.pi)
        window = cfg.search_window or (geo.L - 0.1, geo.L + 0.1)
        return lshape_length_family(cfg.h, k0, geo.L_ref), window
    if geo.variant == "disk":
        return disk_frequency_family(cfg.h), cfg.search_window or (2.6, 2.9)
    window = cfg.search_window or cfg.k_window
    if window is None:
        raise ConfigError(f"search_window: required for a frequency search on the {geo.variant} geometry")
    return frequency_family(generate_mesh(geo, cfg.h)), window


def locate_from_config(cfg: RunConfig):
    family, window = _trapped_family(cfg)
    return locate_trapped(family, window, n_terms=cfg.n_terms)


def task_trapped(cfg: RunConfig) -> dict:
    rec = locate_from_config(cfg)
    out = _out(cfg)
    field_path = out / "trapped_field.csv"
    export_field_csv(rec.field, field_path, metadata_line(cfg, rec.mesh, lambda0=repr(rec.lambda0)))
    summary = rec.summary()
    summary["scan"] = [list(r) for r in rec.scan]
    path = write_json(out / "trapped.json", {"config": cfg.digest, "trapped": summary})
    return {"files": [str(path), str(field_path)], "trapped": summary, "record": rec}


def task_fano_predict(cfg: RunConfig) -> dict:
    rec = locate_from_config(cfg)
    geo = base_geometry(cfg.geometry)
    if geo.variant == "lshape":
        geo = lshape_geometry(rec.param_value, math.pi / geo.branch_width, L_ref=geo.L_ref)
    H = build_profile(cfg.profile, geo)
    coeffs = fano_coefficients(rec, H, cfg.n_terms)
    payload = {"config": cfg.digest, "trapped": rec.summary(), "coefficients": coeffs.to_dict(),
               "predicted_centers": [{"epsilon": e, "lambda": coeffs.center(e),
                                      "k": math.sqrt(coeffs.center(e))} for e in cfg.epsilons]}
    path = write_json(_out(cfg) / "fano.json", payload)
    return {"files": [str(path)], "coefficients": coeffs, "record": rec}


def task_sweep(cfg: RunConfig) -> dict:
    family = family_from_config(cfg)
    out = _out(cfg)
    tables, summary = [], []
    path = out / "sweep.csv"
    with path.open("w") as fh:
        for i, eps in enumerate(cfg.epsilons):
            table = frequency_sweep(family, eps, cfg.k_window, cfg.n, cfg.refine, cfg.n_terms)
            text = table.to_csv(metadata_line(cfg, family.mesh(eps), epsilon=repr(eps)) if i == 0 else "")
            fh.write(text if i == 0 else text.split("\n", 1)[1])
            tables.append(table)
            summary.append({"epsilon": eps, "rows": len(table.rows), "flagged": table.flagged,
                            "winding": table.winding(table.flagged) if table.flagged else 0,
                            "max_energy_defect": float(table.energy_defect.max()),
                            "skipped": table.failures})
    jpath = write_json(out / "sweep.json", {"config": cfg.digest, "sweeps": summary})
    return {"files": [str(path), str(jpath)], "tables": tables, "summary": summary}


def _root(family, eps, cfg, target):
    finder = find_nonreflection if target == "R" else find_perfect_reflection
    return finder(family, eps, cfg.k_window, cfg.n, cfg.n_terms)


def task_find_zero(cfg: RunConfig) -> dict:
    family = family_from_config(cfg)
    roots = []
    for eps in cfg.epsilons:
        k_star, residual, row = _root(family, eps, cfg, cfg.target)
        mesh = family.mesh(eps)
        roots.append({"epsilon": eps, "target": cfg.target, "k": k_star, "lambda": k_star ** 2,
                      "residual": residual, "R": _cpx(row.R), "T": _cpx(row.T),
                      "energy_defect": row.energy_defect, "mesh": mesh.stats(), "n_terms": cfg.n_terms})
    path = write_json(_out(cfg) / f"zero_{cfg.target}.json", {"config": cfg.digest, "roots": roots})
    return {"files": [str(path)], "roots": roots}


def task_field(cfg: RunConfig) -> dict:
    """Total and scattered full-guide fields at k (optionally tuned to a zero)."""
    family = family_from_config(cfg)
    out = _out(cfg)
    files, fields = [], []
    for eps in cfg.epsilons:
        k = cfg.k
        if cfg.tune is not None:
            window = cfg.k_window or (k - 5e-3, k + 5e-3)
            k = _root(family, eps, RunConfig(**{**cfg.__dict__, "k_window": window}), cfg.tune)[0]
        lam = k * k
        full = mirror_mesh(family.mesh(eps), "x", 0.0)
        rt, total = full_guide_solve(full, lam, eps, cfg.n_terms, return_field=True)
        scattered = total.values - incident_field(full, lam).values
        meta = metadata_line(cfg, full, epsilon=repr(eps), k=repr(k))
        p1 = out / f"field_total_eps{eps:g}.csv"
        p2 = out / f"field_scattered_eps{eps:g}.csv"
        export_field_csv(total, p1, meta)
        export_field_csv(type(total)(scattered, full, lam, {"kind": "scattered"}), p2, meta)
        files += [str(p1), str(p2)]
        fields.append({"epsilon": eps, "k": k, "R": _cpx(rt.R), "T": _cpx(rt.T),
                       "energy_defect": rt.energy_defect})
    path = write_json(out / "field.json", {"config": cfg.digest, "fields": fields})
    return {"files": [str(path)] + files, "fields": fields}


RUNNERS = {
    "graph1d": task_graph1d, "scatter": task_scatter, "trapped": task_trapped,
    "fano-predict": task_fano_predict, "sweep": task_sweep, "find-zero": task_find_zero,
    "field": task_field,
}


def run(cfg: RunConfig) -> dict:
    log.info("running task %s (config %s)", cfg.task, cfg.digest)
    return RUNNERS[cfg.task](cfg)
