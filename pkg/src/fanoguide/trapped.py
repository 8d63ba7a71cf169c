"""Trapped-mode search and normalization.

A trapped mode exists exactly when the augmented scattering matrix has
``S_mm = -1``. The search minimizes ``|S_mm + 1|^2`` over a geometric or
spectral parameter; the field is then recovered as the near-null vector of
the standard (decaying) system at the located point, rotated to be real,
L2-normalized and signed so that its decay amplitude ``K`` is positive.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import DomainError, NotFoundError
from .fem import (
    DEFAULT_TERMS,
    DiscreteField,
    HelmholtzSystem,
    RadiationCondition,
    compute_augmented_matrix,
    face_operator,
    field_l2_norm,
    line_projection,
    mass_matrix,
)
from .geometry import disk_geometry, lshape_geometry
from .mesh import Mesh, generate_mesh
from .modal import AugmentedScatteringMatrix, build_mode_set

log = logging.getLogger(__name__)

TRAPPED_TOL = 1e-3
K_MIN = 1e-6
N_SCAN = 21


class ZeroDecayAmplitudeError(DomainError):
    """The slowest transverse harmonic is absent from the trapped field."""


@dataclass(frozen=True)
class ParameterFamily:
    """Maps a scalar parameter to a (mesh, lam) pair."""

    name: str
    build: Callable[[float], tuple]
    abc: str = "neumann"

    def __call__(self, p: float):
        return self.build(float(p))


def lshape_length_family(h: float, k0: float = 0.8 * math.pi, L_ref: float = 2.55,
                         abc: str = "neumann") -> ParameterFamily:
    """Branch length L varies at fixed frequency k0 (mesh rows frozen at L_ref)."""
    lam = k0 * k0

    def build(L):
        return generate_mesh(lshape_geometry(L, k0, abc, L_ref=L_ref), h), lam

    return ParameterFamily("L", build, abc)


def frequency_family(mesh: Mesh, abc: str = "neumann") -> ParameterFamily:
    """Wavenumber k varies on a fixed mesh (lam = k^2)."""
    return ParameterFamily("k", lambda k: (mesh, k * k), abc)


def disk_frequency_family(h: float, epsilon: float = 0.0, abc: str = "neumann") -> ParameterFamily:
    return frequency_family(generate_mesh(disk_geometry(epsilon, abc=abc), h), abc)


@dataclass
class TrappedModeRecord:
    lambda0: float
    param_name: str
    param_value: float
    field: DiscreteField
    K: float
    residual: float
    alpha_m: float
    m: int
    S: AugmentedScatteringMatrix
    mesh: Mesh
    abc: str = "neumann"
    null_residual: float = float("nan")
    scan: list = field(default_factory=list)
    augmented_fields: list = field(default_factory=list, repr=False)

    def summary(self) -> dict:
        return {"lambda0": self.lambda0, "k0": math.sqrt(self.lambda0), self.param_name: self.param_value,
                "K": self.K, "residual": self.residual, "alpha_m": self.alpha_m, "m": self.m,
                "null_residual": self.null_residual, "abc": self.abc}


def mode_m_residual(mesh: Mesh, lam: float, abc: str = "neumann", n_terms: int = DEFAULT_TERMS):
    S = compute_augmented_matrix(mesh, lam, abc, n_terms)
    return abs(S.S_mm + 1), S


def _scan(family: ParameterFamily, window, n_scan, n_terms):
    a, b = window
    if not b > a:
        raise DomainError(f"empty search window {window}")
    table = []
    for p in np.linspace(a, b, n_scan):
        mesh, lam = family(p)
        res, S = mode_m_residual(mesh, lam, family.abc, n_terms)
        table.append((float(p), res, float(np.angle(S.S_mm))))
    return table


def locate_trapped(family: ParameterFamily, window: Sequence[float], tol: float = TRAPPED_TOL,
                   n_scan: int = N_SCAN, n_terms: int = DEFAULT_TERMS, xtol: float = 1e-7):
    """Minimize |S_mm + 1|^2 over the family parameter inside ``window``.

    A coarse scan seeds a golden-section search on the bracketing triple
    around the best sample."""
    table = _scan(family, window, n_scan, n_terms)
    res = np.array([r for _, r, _ in table])
    i = int(np.argmin(res))
    if i == 0 or i == len(table) - 1:
        raise NotFoundError(
            f"|S_mm+1| has no interior minimum in {tuple(window)} (smallest {res[i]:.3e} at the edge)",
            table)
    bracket = (table[i - 1][0], table[i][0], table[i + 1][0])

    def objective(p):
        mesh, lam = family(p)
        return mode_m_residual(mesh, lam, family.abc, n_terms)[0] ** 2

    opt = minimize_scalar(objective, bracket=bracket, method="golden",
                          options={"xtol": xtol / max(1.0, abs(bracket[1]))})
    p_star = float(opt.x)
    mesh, lam = family(p_star)
    S, fields, _ = compute_augmented_matrix(mesh, lam, family.abc, n_terms, return_fields=True)
    residual = abs(S.S_mm + 1)
    log.info("trapped-mode search: %s=%.8f residual %.3e", family.name, p_star, residual)
    if residual > tol:
        raise NotFoundError(
            f"smallest |S_mm+1| = {residual:.3e} at {family.name}={p_star:.6f} exceeds {tol}", table)
    fld, K, null_res = trapped_field(mesh, lam, family.abc, n_terms, guess=fields[-1].values)
    modes = build_mode_set(lam)
    return TrappedModeRecord(lam, family.name, p_star, fld, K, residual, modes.alpha_m, modes.m,
                             S, mesh, family.abc, null_res, table, fields)


def _fix_phase(u: np.ndarray, M) -> np.ndarray:
    """Rotate so that the real part carries the largest possible L2 norm."""
    phi = -0.5 * np.angle(u @ (M @ u))
    return u * np.exp(1j * phi)


def trapped_field(mesh: Mesh, lam: float, abc: str = "neumann", n_terms: int = DEFAULT_TERMS,
                  guess: Optional[np.ndarray] = None, iterations: int = 3):
    """Normalized trapped field at (near-)resonance and its amplitude K.

    Inverse iteration on the standard system, which is nearly singular at a
    trapped-mode point; its near-null vector decays in every mode beyond the
    truncation face."""
    system = HelmholtzSystem(mesh, lam, RadiationCondition("standard", n_terms), abc, pivot_rtol=0.0)
    M = mass_matrix(mesh)
    u = np.asarray(guess, dtype=complex) if guess is not None else np.random.default_rng(0).standard_normal(mesh.n_nodes) + 0j
    if abc == "dirichlet":
        u = u.copy()
        u[~system.free] = 0
    for _ in range(iterations):
        u = system.solve_rhs(M @ u)[:, 0]
        u /= math.sqrt(abs(np.vdot(u, M @ u)))
    null_res = float(np.linalg.norm(system.matrix @ u) / np.linalg.norm(M @ u))
    u = _fix_phase(u, M)
    fld = DiscreteField(u, mesh, lam, {"kind": "trapped"})
    u = u / field_l2_norm(fld, tail=True, n_terms=n_terms)
    fld = DiscreteField(u, mesh, lam, {"kind": "trapped"})
    K = extract_K(fld, n_terms=n_terms, allow_zero=True)
    if K < 0:
        fld = DiscreteField(-u, mesh, lam, {"kind": "trapped"})
        K = -K
    if abs(K) < K_MIN:
        raise ZeroDecayAmplitudeError(f"decay amplitude K={K:.2e} vanishes")
    return fld, K, null_res


def extract_K(fld: DiscreteField, d: Optional[float] = None, n_terms: int = DEFAULT_TERMS,
              allow_zero: bool = False) -> float:
    """Amplitude K of K exp(-alpha_m x) cos(pi m y) in the field.

    The cos(pi m y) coefficient is read on the truncation face (``d=None``)
    or on the vertical line ``x = d`` and transported back to ``x = 0``."""
    modes = build_mode_set(fld.lam)
    m, al = modes.m, modes.alpha_m
    if d is None:
        face = face_operator(fld.mesh, n_terms)
        Um = face.P[:, m] @ fld.values[face.nodes]
        x = face.x
    else:
        Um = line_projection(fld, d, m + 1)[m]
        x = d
    # phi_m = sqrt(2) cos(pi m y): the cos coefficient is sqrt(2) * U_m
    K = complex(math.sqrt(2) * Um * math.exp(al * x))
    if abs(K.imag) > 1e-6 * max(1.0, abs(K)):
        log.warning("decay amplitude has an imaginary part %.2e (field not phase-fixed?)", K.imag)
    if abs(K) < K_MIN and not allow_zero:
        raise ZeroDecayAmplitudeError(f"decay amplitude K={abs(K):.2e} below {K_MIN}")
    return float(K.real)


def locate_lshape(h: float = 0.02, window=(2.3, 2.8), k0: float = 0.8 * math.pi, **kw):
    return locate_trapped(lshape_length_family(h, k0), window, **kw)


def locate_disk(h: float = 0.02, window=(2.6, 2.9), **kw):
    return locate_trapped(disk_frequency_family(h), window, **kw)
