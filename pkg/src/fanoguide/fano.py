"""First-order Fano coefficients and the asymptotic limit of the scattering
matrix near a perturbed trapped mode.

With the boundary moved by ``eps*H`` and ``lam = lam0 + eps*lam'``, the
augmented matrix expands as ``S = S0 + eps S' + eps^2 S'' + ...`` where

    S'_mm    = -2i alpha_m^-1 K^-2 (lam' - ell_m),
    S'_m.    = -sqrt(2/alpha_m) K^-1 (lam' t - ell_.) s,
    Re S''_mm = alpha_m^-1 K^-2 |ell_. - ell_m t|^2,

with ``ell_m = int H (|d_s u_tr|^2 - lam0 |u_tr|^2) ds``,
``ell_. = int H (d_s u_tr conj(d_s zeta) - lam0 u_tr conj(zeta)) ds`` and
``t = int u_tr conj(zeta)`` over the half-guide, ``zeta`` being the scattering
solutions at ``lam0`` stripped of their ``v_m^-`` component.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .fem import (
    DEFAULT_TERMS,
    DiscreteField,
    HelmholtzSystem,
    RadiationCondition,
    face_operator,
    mass_inner,
    tail_inner,
    tangential_derivative_trace,
)
from .geometry import ProfileH
from .modal import ScatteringMatrix, reduce_augmented
from .trapped import K_MIN, TrappedModeRecord

log = logging.getLogger(__name__)

CONDITION_RTOL = 1e-8


class FastResonanceWarning(UserWarning):
    """ell_. = ell_m t: the resonance is narrower than the generic O(eps^2)."""


def compute_ell_m(trapped: TrappedModeRecord, H: ProfileH) -> float:
    tr = tangential_derivative_trace(trapped.field, H.arc)
    h = H(tr.s)
    val = np.sum(tr.weights * h * (np.abs(tr.ds_value) ** 2 - trapped.lambda0 * np.abs(tr.value) ** 2))
    return float(val)


def scattering_solutions(trapped: TrappedModeRecord, n_terms: int = DEFAULT_TERMS):
    """Standard scattering solutions at lam0 (defined up to multiples of u_tr)."""
    system = HelmholtzSystem(trapped.mesh, trapped.lambda0, RadiationCondition("standard", n_terms),
                             trapped.abc, pivot_rtol=0.0)
    F = np.stack([system.incident_rhs(j) for j in range(trapped.m)], axis=1)
    U = system.solve_rhs(F)
    return [DiscreteField(U[:, j], trapped.mesh, trapped.lambda0, {"incident": j}) for j in range(trapped.m)]


def mode_m_coefficient(fld: DiscreteField, m: int, n_terms: int = DEFAULT_TERMS) -> complex:
    face = face_operator(fld.mesh, n_terms)
    return complex(face.P[:, m] @ fld.values[face.nodes])


def orthogonalize_zeta(zetas, trapped: TrappedModeRecord, n_terms: int = DEFAULT_TERMS):
    """Subtract c*u_tr so that no v_m^- remains beyond the truncation face.

    Under the standard condition the mode-m content beyond the face is a pure
    multiple of v_m^-, so cancelling the face coefficient removes it."""
    if abs(trapped.K) < K_MIN:
        raise DomainError("trapped mode has K = 0; cannot remove the v_m^- component")
    um = mode_m_coefficient(trapped.field, trapped.m, n_terms)
    out = []
    for z in zetas:
        c = mode_m_coefficient(z, trapped.m, n_terms) / um
        out.append(DiscreteField(z.values - c * trapped.field.values, z.mesh, z.lam,
                                 dict(z.meta, removed_multiple=c)))
    return out


def compute_t_and_ell_row(trapped: TrappedModeRecord, zetas, H: ProfileH,
                          n_terms: int = DEFAULT_TERMS):
    t = np.array([mass_inner(trapped.field, z) + tail_inner(trapped.field, z, n_terms) for z in zetas])
    tr_u = tangential_derivative_trace(trapped.field, H.arc)
    h = H(tr_u.s)
    ell = []
    for z in zetas:
        tr_z = tangential_derivative_trace(z, H.arc)
        ell.append(np.sum(tr_u.weights * h * (tr_u.ds_value * np.conj(tr_z.ds_value)
                                              - trapped.lambda0 * tr_u.value * np.conj(tr_z.value))))
    return t, np.array(ell, dtype=complex)


@dataclass(frozen=True)
class FanoCoefficients:
    ell_m: float
    t: np.ndarray
    ell_row: np.ndarray
    K: float
    alpha_m: float
    s: np.ndarray
    lambda0: float
    margin: float = field(default=float("nan"))

    @property
    def m(self) -> int:
        return len(self.t)

    def sprime_mm(self, lam_prime: float) -> complex:
        return -2j / (self.alpha_m * self.K ** 2) * (lam_prime - self.ell_m)

    def sprime_mrow(self, lam_prime: float) -> np.ndarray:
        return -math.sqrt(2 / self.alpha_m) / self.K * ((lam_prime * self.t - self.ell_row) @ self.s)

    @property
    def re_spp_mm(self) -> float:
        return float(np.sum(np.abs(self.ell_row - self.ell_m * self.t) ** 2) / (self.alpha_m * self.K ** 2))

    def center(self, epsilon: float) -> float:
        """Predicted resonance center lam0 + eps*ell_m."""
        return self.lambda0 + epsilon * self.ell_m

    def to_dict(self) -> dict:
        cpx = lambda z: [float(np.real(z)), float(np.imag(z))]  # noqa: E731
        return {
            "lambda0": self.lambda0, "ell_m": self.ell_m, "K": self.K, "alpha_m": self.alpha_m,
            "t": [cpx(z) for z in self.t], "ell_row": [cpx(z) for z in self.ell_row],
            "s": [[cpx(z) for z in row] for row in self.s],
            "re_spp_mm": self.re_spp_mm, "condition_margin": self.margin,
            "sprime_mm_slope": cpx(self.sprime_mm(1.0) - self.sprime_mm(0.0)),
            "sprime_mrow_at_ell_m": [cpx(z) for z in self.sprime_mrow(self.ell_m)],
        }


def assemble_coefficients(trapped: TrappedModeRecord, t, ell_m: float, ell_row,
                          s: ScatteringMatrix) -> FanoCoefficients:
    t = np.atleast_1d(np.asarray(t, dtype=complex))
    ell_row = np.atleast_1d(np.asarray(ell_row, dtype=complex))
    margin = float(np.linalg.norm(ell_row - ell_m * t))
    scale = max(1.0, float(np.linalg.norm(ell_row)), abs(ell_m) * float(np.linalg.norm(t)))
    if margin < CONDITION_RTOL * scale:
        warnings.warn(f"ell_row = ell_m*t within {margin:.2e}: fast resonance, generic asymptotics fail",
                      FastResonanceWarning, stacklevel=2)
    return FanoCoefficients(float(ell_m), t, ell_row, float(trapped.K), float(trapped.alpha_m),
                            np.asarray(s.entries, dtype=complex), float(trapped.lambda0), margin)


def fano_coefficients(trapped: TrappedModeRecord, H: ProfileH, n_terms: int = DEFAULT_TERMS):
    """Full pipeline from a located trapped mode and a profile."""
    ell_m = compute_ell_m(trapped, H)
    zetas = orthogonalize_zeta(scattering_solutions(trapped, n_terms), trapped, n_terms)
    t, ell_row = compute_t_and_ell_row(trapped, zetas, H, n_terms)
    s = reduce_augmented(trapped.S)
    return assemble_coefficients(trapped, t, ell_m, ell_row, s)


def fano_limit_matrix(coeffs: FanoCoefficients, mu: float, im_spp_mm: float = 0.0) -> ScatteringMatrix:
    """Limit of the scattering matrix along lam = lam0 + eps*ell_m + eps^2*mu."""
    sp_row = coeffs.sprime_mrow(coeffs.ell_m)
    spp = coeffs.re_spp_mm + 1j * im_spp_mm
    den = 2j * mu / (coeffs.alpha_m * coeffs.K ** 2) - spp
    if den == 0:
        raise DomainError("vanishing denominator in the Fano limit")
    out = coeffs.s + np.outer(sp_row, sp_row) / den
    return ScatteringMatrix(out, coeffs.lambda0, 1e-10)


def fit_im_spp_mm(coeffs: FanoCoefficients, epsilon: float, S_mm: complex) -> float:
    """Estimate Im S''_mm from one finite-eps sample of S_mm.

    The sample must be taken at ``lam = lam0 + eps*ell_m``, where S'_mm
    vanishes, so that ``S_mm + 1 = eps^2 S''_mm + O(eps^3)``."""
    if epsilon == 0:
        raise DomainError("need a nonzero epsilon to fit Im S''_mm")
    return float(np.imag(S_mm + 1) / epsilon ** 2)


def mu_tilde(coeffs: FanoCoefficients, mu: float, im_spp_mm: float = 0.0) -> float:
    return 2 * mu / (coeffs.alpha_m * coeffs.K ** 2) - im_spp_mm


def monomode_circle(coeffs: FanoCoefficients, mu_t: float) -> complex:
    """s (2i mu~ + |S'|^2) / (2i mu~ - |S'|^2): runs once counter-clockwise
    around the unit circle from s back to s as mu~ increases."""
    if coeffs.m != 1:
        raise DomainError("the circle formula is for the monomode regime")
    a = 2 * coeffs.re_spp_mm
    return complex(coeffs.s[0, 0] * (2j * mu_t + a) / (2j * mu_t - a))
