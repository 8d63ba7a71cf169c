"""Reflection and transmission in the symmetric full guide.

The full guide is the union of a half-guide and its mirror image across
``x = 0``. An incident piston wave splits into a part symmetric in ``x``
(Neumann on Upsilon) and an antisymmetric part (Dirichlet on Upsilon), so
``R = (R^N + R^D)/2`` and ``T = (R^N - R^D)/2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .fem import (
    DEFAULT_TERMS,
    DiscreteField,
    HelmholtzSystem,
    RadiationCondition,
    _mode_face_values,
    compute_augmented_matrix,
    compute_scattering_matrix,
)
from .mesh import Mesh
from .modal import build_mode_set, eval_mode, reduce_augmented

COMPOSE_TOL = 1e-2


@dataclass(frozen=True)
class RTPair:
    R: complex
    T: complex
    lam: float
    epsilon: float = 0.0
    source: str = "composed"

    @property
    def energy_defect(self) -> float:
        return abs(abs(self.R) ** 2 + abs(self.T) ** 2 - 1)


def wrap_phase(z: complex) -> float:
    """Argument in [-pi, pi)."""
    th = math.atan2(z.imag, z.real)
    return -math.pi if th >= math.pi else th


def _check_monomode(lam):
    modes = build_mode_set(lam)
    if not modes.monomode:
        raise DomainError(f"lam={lam} is outside the monomode band (0, pi^2)")
    return modes


def half_guide_reflection(mesh: Mesh, lam: float, abc: str = "neumann",
                          n_terms: int = DEFAULT_TERMS, via_augmented: bool = False) -> complex:
    """R^N (``abc='neumann'``) or R^D (``abc='dirichlet'``) of the half guide.

    With ``via_augmented`` the value comes from the augmented matrix through
    the reduction formula, which stays well conditioned across a trapped
    mode of the half guide."""
    _check_monomode(lam)
    if abc not in ("neumann", "dirichlet"):
        raise DomainError(f"half-guide reflection needs a Neumann or Dirichlet ABC, got {abc!r}")
    if via_augmented:
        S = compute_augmented_matrix(mesh, lam, abc, n_terms)
        return complex(reduce_augmented(S).entries[0, 0])
    return complex(compute_scattering_matrix(mesh, lam, abc, n_terms).entries[0, 0])


def compose_full(RN: complex, RD: complex, lam: float = float("nan"), epsilon: float = 0.0,
                 tol: float = COMPOSE_TOL) -> RTPair:
    if abs(abs(RN) - 1) > tol or abs(abs(RD) - 1) > tol:
        raise DomainError(f"half-guide coefficients off the unit circle: |RN|={abs(RN):.4f}, |RD|={abs(RD):.4f}")
    return RTPair((RN + RD) / 2, (RN - RD) / 2, lam, epsilon, "composed")


def full_guide_solve(mesh: Mesh, lam: float, epsilon: float = 0.0,
                     n_terms: int = DEFAULT_TERMS, return_field: bool = False):
    """Direct solve on a mirrored mesh with modal conditions on both faces.

    The incident piston wave w_0^- comes from ``+infinity``; R is read on the
    right face and T on the left face. With ``return_field`` the total field
    is returned as well."""
    _check_monomode(lam)
    if not np.any(mesh.tags == "sigma_minus"):
        raise DomainError("full-guide solve needs a mirrored mesh with a sigma_minus face")
    system = HelmholtzSystem(mesh, lam, RadiationCondition("standard", n_terms), "none")
    u = system.solve_rhs(system.incident_rhs(0))[:, 0]
    right, left = system.faces
    U_r = system.face_coefficients(u, 0)[0]
    U_l = system.face_coefficients(u, 1)[0]
    inc_r = _mode_face_values(system.modes, 0, -1, right.x, 1.0)[0]
    out_r = _mode_face_values(system.modes, 0, +1, right.x, 1.0)[0]
    through_l = _mode_face_values(system.modes, 0, -1, left.x, -1.0)[0]
    R = (U_r - inc_r) / out_r
    T = U_l / through_l
    rt = RTPair(complex(R), complex(T), float(lam), epsilon, "direct")
    if return_field:
        return rt, DiscreteField(u, mesh, float(lam), {"kind": "total", "epsilon": epsilon})
    return rt


def incident_field(mesh: Mesh, lam: float) -> DiscreteField:
    """Piston wave w_0^- sampled at the mesh nodes."""
    modes = _check_monomode(lam)
    x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
    return DiscreteField(eval_mode(modes, 0, -1, x, y).astype(complex), mesh, float(lam), {"kind": "incident"})
