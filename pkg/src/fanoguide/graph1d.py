"""Exact solver for the three-edge Neumann junction.

Edges: a semi-infinite lead ``(-inf, 0)``, a vertical edge of length 1 and a
horizontal edge of length ``1 + epsilon``, all meeting at the origin with
continuity and Kirchhoff flux conditions, Neumann at the free ends. An
incident wave ``exp(ikx)`` comes from ``-inf`` and ``R`` is the amplitude of
the reflected ``exp(-ikx)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DomainError

RESONANCE_DET_RTOL = 1e-12


@dataclass(frozen=True)
class Junction1DConfig:
    epsilon: float
    k: float

    def __post_init__(self):
        if not (self.k > 0):
            raise DomainError(f"wavenumber must be positive, got k={self.k}")


@dataclass(frozen=True)
class Junction1DSolution:
    R: complex
    A: complex
    B: complex
    is_resonant: bool


def _check_k(k):
    if not (k > 0):
        raise DomainError(f"wavenumber must be positive, got k={k}")


def junction_matrix(epsilon: float, k: float) -> np.ndarray:
    """Matrix of the transmission conditions for the unknowns (R, A, B)."""
    c, s = math.cos(k), math.sin(k)
    ce, se = math.cos(k * (1 + epsilon)), math.sin(k * (1 + epsilon))
    return np.array([[1, -c, 0], [0, c, -ce], [1j, s, se]], dtype=complex)


JUNCTION_RHS = np.array([-1, 0, 1j], dtype=complex)


def reflection_closed_form(epsilon: float, k: float) -> complex:
    """Closed-form reflection coefficient R(epsilon, k).

    At ``epsilon == 0`` the common factor ``cos(k)`` is cancelled so the value
    stays defined at the resonant wavenumbers (2N+1)pi/2.
    """
    _check_k(k)
    if epsilon == 0:
        c, s = math.cos(k), math.sin(k)
        return complex(c, 2 * s) / complex(c, -2 * s)
    a = math.cos(k) * math.cos(k * (1 + epsilon))
    b = math.sin(k * (2 + epsilon))
    den = complex(a, -b)
    if den == 0:
        raise DomainError(f"closed form undefined at epsilon={epsilon}, k={k}")
    return complex(a, b) / den


def solve_junction(cfg: Junction1DConfig) -> Junction1DSolution:
    """Solve the 3x3 junction system; fall back to the closed form when the
    matrix is singular (a trapped mode lives on the two finite edges)."""
    M = junction_matrix(cfg.epsilon, cfg.k)
    det = np.linalg.det(M)
    if abs(det) < RESONANCE_DET_RTOL * np.linalg.norm(M):
        R = reflection_closed_form(cfg.epsilon, cfg.k)
        # A, B are only defined up to the trapped mode; take the min-norm pair
        rhs = JUNCTION_RHS - M[:, 0] * R
        (A, B), *_ = np.linalg.lstsq(M[:, 1:], rhs, rcond=None)
        return Junction1DSolution(R, complex(A), complex(B), True)
    R, A, B = np.linalg.solve(M, JUNCTION_RHS)
    return Junction1DSolution(complex(R), complex(A), complex(B), False)


def mobius_limit(mu: float) -> complex:
    """Limit of R along the parabola k = pi/2 - eps*pi/4 + eps^2*mu."""
    x = 32.0 * mu - 4.0 * math.pi
    p2 = math.pi ** 2
    return complex(p2, x) / complex(p2, -x)


def path_limit_experiment(k_slope: float, mu: float, eps_sequence: Sequence[float]):
    """Evaluate R along k(eps) = pi/2 + eps*k_slope + eps^2*mu.

    Returns a list of ``(eps, k, R)`` tuples.
    """
    eps = list(eps_sequence)
    if not eps:
        raise DomainError("empty epsilon sequence")
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise DomainError("epsilon sequence must be strictly decreasing")
    rows = []
    for e in eps:
        k = math.pi / 2 + e * k_slope + e * e * mu
        rows.append((e, k, reflection_closed_form(e, k)))
    return rows


@dataclass(frozen=True)
class TrappedMode1D:
    """Piecewise trapped mode: zero on the lead, sin(ky) on the vertical edge,
    -sin(kx) on the horizontal edge."""

    k: float

    def lead(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def vertical(self, y):
        return np.sin(self.k * np.asarray(y, dtype=float))

    def horizontal(self, x):
        return -np.sin(self.k * np.asarray(x, dtype=float))

    def d_vertical(self, y):
        return self.k * np.cos(self.k * np.asarray(y, dtype=float))

    def d_horizontal(self, x):
        return -self.k * np.cos(self.k * np.asarray(x, dtype=float))

    def pieces(self) -> dict[str, Callable]:
        return {"lead": self.lead, "vertical": self.vertical, "horizontal": self.horizontal}


def trapped_mode_1d(k: float, rtol: float = 1e-12) -> Optional[TrappedMode1D]:
    """Return the trapped mode if ``k`` is an odd multiple of pi/2, else None."""
    _check_k(k)
    n = round(k / (math.pi / 2))
    if n % 2 == 1 and abs(k - n * math.pi / 2) <= rtol * max(1.0, k):
        return TrappedMode1D(k)
    return None


def phase_sweep(epsilon: float, k_values: Sequence[float]):
    """Rows ``(k, Re R, Im R, theta)`` with theta in [-pi, pi)."""
    rows = []
    for k in k_values:
        R = reflection_closed_form(epsilon, float(k))
        theta = math.atan2(R.imag, R.real)
        if theta >= math.pi:
            theta -= 2 * math.pi
        rows.append((float(k), R.real, R.imag, theta))
    return rows
