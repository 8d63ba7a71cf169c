"""Transverse modes of the unit strip with Neumann walls and scattering-matrix
algebra.

Conventions
-----------
For ``lam`` in the band ``(pi^2 (m-1)^2, pi^2 m^2)`` the modes ``j < m``
propagate::

    w_j^{+-}(x, y) = a_j^{-1/2} exp(+-i alpha_j x) cos(pi j y),
    alpha_j = sqrt(lam - pi^2 j^2),  a_0 = 2 alpha_0,  a_j = alpha_j.

Mode ``m`` is the first evanescent one and enters through the growing and
decaying waves ``v_m^{+-} = a_m^{-1/2} exp(+-alpha_m x) cos(pi m y)`` with
``alpha_m = sqrt(pi^2 m^2 - lam)``, ``a_m = alpha_m``, combined into the wave
packets ``w_m^{+-} = (v_m^+ -+ i v_m^-) / sqrt(2)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import BandEdgeError, DomainError, InconsistentMatrixError

BAND_EDGE_RTOL = 1e-10
DEGENERATE_DENOMINATOR = 1e-8
# with |1 + S_mm| < 1e-8, unitarity caps ||S_bm|| near sqrt(2e-8)
DEGENERATE_COUPLING = 1e-3


@dataclass(frozen=True)
class TransverseModeSet:
    lam: float
    m: int
    alpha: np.ndarray
    a: np.ndarray

    @property
    def monomode(self) -> bool:
        return self.m == 1

    @property
    def alpha_m(self) -> float:
        return float(self.alpha[self.m])

    def beta(self, k: int) -> float:
        """Decay rate sqrt(pi^2 k^2 - lam) of an evanescent mode ``k >= m``."""
        if k < self.m:
            raise DomainError(f"mode {k} propagates at lam={self.lam}")
        return math.sqrt(math.pi ** 2 * k * k - self.lam)


def build_mode_set(lam: float) -> TransverseModeSet:
    if not (lam > 0):
        raise DomainError(f"spectral parameter must be positive, got {lam}")
    r = math.sqrt(lam) / math.pi
    if abs(r - round(r)) <= BAND_EDGE_RTOL * max(1.0, r):
        raise BandEdgeError(f"lam={lam} is a cutoff pi^2 j^2 (j={round(r)})")
    m = int(math.floor(r)) + 1
    j = np.arange(m + 1)
    alpha = np.empty(m + 1)
    alpha[:m] = np.sqrt(lam - (math.pi * j[:m]) ** 2)
    alpha[m] = math.sqrt((math.pi * m) ** 2 - lam)
    a = alpha.copy()
    a[0] = 2 * alpha[0]
    return TransverseModeSet(float(lam), m, alpha, a)


def transverse_cos(j, y):
    return np.cos(math.pi * j * np.asarray(y, dtype=float))


def eval_packet_vm(modes: TransverseModeSet, sign: int, x, y):
    """Growing (``sign=+1``) or decaying (``sign=-1``) wave v_m^{+-}."""
    m, al = modes.m, modes.alpha_m
    x = np.asarray(x, dtype=float)
    return modes.a[m] ** -0.5 * np.exp(sign * al * x) * transverse_cos(m, y)


def eval_mode(modes: TransverseModeSet, j: int, sign: int, x, y):
    """w_j^{+-}(x, y) for ``0 <= j <= m``; ``j == m`` gives the wave packet."""
    if not 0 <= j <= modes.m:
        raise DomainError(f"mode index {j} outside 0..{modes.m}")
    if sign not in (1, -1):
        raise DomainError("sign must be +1 or -1")
    if j < modes.m:
        x = np.asarray(x, dtype=float)
        return modes.a[j] ** -0.5 * np.exp(sign * 1j * modes.alpha[j] * x) * transverse_cos(j, y)
    vp = eval_packet_vm(modes, 1, x, y)
    vm = eval_packet_vm(modes, -1, x, y)
    return (vp - sign * 1j * vm) / math.sqrt(2)


def eval_mode_dx(modes: TransverseModeSet, j: int, sign: int, x, y):
    """x-derivative of :func:`eval_mode`."""
    if j < modes.m:
        return sign * 1j * modes.alpha[j] * eval_mode(modes, j, sign, x, y)
    al = modes.alpha_m
    vp = eval_packet_vm(modes, 1, x, y)
    vm = eval_packet_vm(modes, -1, x, y)
    return al * (vp + sign * 1j * vm) / math.sqrt(2)


def mode_trace_coefficients(modes: TransverseModeSet, j: int, sign: int, x: float):
    """Value and x-derivative of the transverse-``j`` amplitude of w_j^{+-} at
    abscissa ``x``, measured against the orthonormal cosine ``phi_j``.

    ``phi_0 = 1`` and ``phi_j = sqrt(2) cos(pi j y)``, so ``cos(pi j y)``
    carries the factor ``1/sqrt(2)`` for ``j >= 1``.
    """
    c = 1.0 if j == 0 else 1.0 / math.sqrt(2)
    val = complex(eval_mode(modes, j, sign, x, 0.0)) * c
    der = complex(eval_mode_dx(modes, j, sign, x, 0.0)) * c
    return val, der


def gauss_segment(n_intervals: int, order: int = 5, a: float = 0.0, b: float = 1.0):
    """Composite Gauss-Legendre nodes and weights on ``[a, b]``."""
    xg, wg = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, n_intervals + 1)
    h = np.diff(edges)
    nodes = (edges[:-1, None] + 0.5 * h[:, None] * (xg[None, :] + 1)).ravel()
    weights = (0.5 * h[:, None] * wg[None, :]).ravel()
    return nodes, weights


def symplectic_pairing(u, v, du, dv, weights):
    """q(u, v) = int_0^1 (du conj(v) - u conj(dv)) dy from samples on a
    vertical segment, with the quadrature ``weights`` used for sampling."""
    arrays = [np.asarray(t) for t in (u, v, du, dv, weights)]
    n = arrays[-1].shape
    if any(t.shape != n for t in arrays):
        raise DomainError("traces and weights must be sampled on the same grid")
    u, v, du, dv, w = arrays
    return complex(np.sum(w * (du * np.conj(v) - u * np.conj(dv))))


def _defects(s: np.ndarray):
    n = s.shape[0]
    unit = float(np.linalg.norm(s @ s.conj().T - np.eye(n), ord=2)) if n else 0.0
    sym = float(np.linalg.norm(s - s.T, ord=2)) if n else 0.0
    return unit, sym


@dataclass(frozen=True)
class ScatteringMatrix:
    """Usual scattering matrix (m x m) of the half-guide."""

    entries: np.ndarray
    lam: float
    tol: float = 1e-3
    meta: dict = field(default_factory=dict, compare=False)

    @cached_property
    def unitarity_defect(self) -> float:
        return _defects(self.entries)[0]

    @cached_property
    def symmetry_defect(self) -> float:
        return _defects(self.entries)[1]

    def is_valid(self, tol=None) -> bool:
        tol = self.tol if tol is None else tol
        return self.unitarity_defect <= tol and self.symmetry_defect <= tol


@dataclass(frozen=True)
class AugmentedScatteringMatrix(ScatteringMatrix):
    """Augmented scattering matrix ((m+1) x (m+1)); last index is the packet."""

    @property
    def m(self) -> int:
        return self.entries.shape[0] - 1

    @property
    def S_bb(self):
        return self.entries[:-1, :-1]

    @property
    def S_bm(self):
        return self.entries[:-1, -1]

    @property
    def S_mb(self):
        return self.entries[-1, :-1]

    @property
    def S_mm(self) -> complex:
        return complex(self.entries[-1, -1])


def reduce_augmented(S: AugmentedScatteringMatrix) -> ScatteringMatrix:
    """s = S_bb - S_bm (1 + S_mm)^-1 S_mb."""
    if not S.is_valid():
        raise InconsistentMatrixError(
            f"augmented matrix fails unitarity/symmetry at tol={S.tol}: "
            f"{S.unitarity_defect:.2e}/{S.symmetry_defect:.2e}"
        )
    den = 1 + S.S_mm
    if abs(den) < DEGENERATE_DENOMINATOR:
        if np.linalg.norm(S.S_bm) > DEGENERATE_COUPLING:
            raise InconsistentMatrixError(
                f"|1+S_mm|={abs(den):.1e} but ||S_bm||={np.linalg.norm(S.S_bm):.1e}"
            )
        s = S.S_bb.copy()
    else:
        s = S.S_bb - np.outer(S.S_bm, S.S_mb) / den
    return ScatteringMatrix(s, S.lam, S.tol, dict(S.meta))


def random_symmetric_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    """Q diag(e^{i phi}) Q^T with Q real orthogonal: every symmetric unitary
    matrix has this form."""
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    d = np.exp(1j * rng.uniform(-np.pi, np.pi, n))
    return (q * d) @ q.T
