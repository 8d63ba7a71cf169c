"""Frequency sweeps, resonance characterization and zeros of R and T.

Near a perturbed trapped mode, R^N runs once around the unit circle over a
frequency window of width O(eps^2) while R^D barely moves. Non-reflection
(R = 0) happens where R^N = -R^D, perfect reflection (T = 0) where
R^N = R^D. Both are located by Brent's method on the wrapped phase mismatch.
"""
from __future__ import annotations

import csv
import io
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, NearResonanceError, NotFoundError, SolverError
from .fem import DEFAULT_TERMS, compute_augmented_matrix, compute_scattering_matrix
from .geometry import disk_geometry, lshape_geometry, straight_geometry
from .mesh import Mesh, generate_mesh
from .modal import reduce_augmented
from .scattering import wrap_phase

log = logging.getLogger(__name__)

STEEP_FACTOR = 10.0
REFINE_ROUNDS = 3
REFINE_POINTS = 41
ROOT_TOL = 1e-3


@dataclass(frozen=True)
class PerturbedFamily:
    """Half-guide meshes indexed by the perturbation amplitude epsilon."""

    name: str
    build: Callable[[float], Mesh]
    k0: Optional[float] = None

    def mesh(self, epsilon: float) -> Mesh:
        return self.build(float(epsilon))


def lshape_family(h: float, L0: float = 2.5524, k0: float = 0.8 * math.pi,
                  L_ref: float = 2.55) -> PerturbedFamily:
    """Omega_+(L0 + eps): the branch end moves out by eps."""
    build = lru_cache(maxsize=8)(lambda eps: generate_mesh(lshape_geometry(L0 + eps, k0, L_ref=L_ref), h))
    return PerturbedFamily("lshape", build, k0)


def disk_family(h: float, k0: float = 2.7403) -> PerturbedFamily:
    """Inclusion centered at (1, 0.5 + eps)."""
    build = lru_cache(maxsize=8)(lambda eps: generate_mesh(disk_geometry(eps), h))
    return PerturbedFamily("disk", build, k0)


def straight_family(h: float) -> PerturbedFamily:
    mesh = generate_mesh(straight_geometry(), h)
    return PerturbedFamily("straight", lambda eps: mesh, None)


@dataclass(frozen=True)
class SweepRow:
    epsilon: float
    k: float
    RN: complex
    RD: complex
    smm_gap: float  # |1 + S_mm|

    @property
    def lam(self) -> float:
        return self.k * self.k

    @property
    def R(self) -> complex:
        return (self.RN + self.RD) / 2

    @property
    def T(self) -> complex:
        return (self.RN - self.RD) / 2

    @property
    def energy_defect(self) -> float:
        return abs(abs(self.R) ** 2 + abs(self.T) ** 2 - 1)


def evaluate_point(mesh: Mesh, epsilon: float, k: float, n_terms: int = DEFAULT_TERMS) -> SweepRow:
    lam = k * k
    S = compute_augmented_matrix(mesh, lam, "neumann", n_terms)
    RN = complex(reduce_augmented(S).entries[0, 0])
    RD = complex(compute_scattering_matrix(mesh, lam, "dirichlet", n_terms).entries[0, 0])
    return SweepRow(float(epsilon), float(k), RN, RD, abs(S.S_mm + 1))


def unwrap_from(theta: np.ndarray) -> np.ndarray:
    """Nearest-branch continuation of a phase sequence."""
    return np.unwrap(theta) if len(theta) else theta


@dataclass
class SweepTable:
    rows: list
    epsilon: float
    flagged: Optional[tuple] = None
    failures: list = field(default_factory=list)

    @property
    def k(self) -> np.ndarray:
        return np.array([r.k for r in self.rows])

    @property
    def lam(self) -> np.ndarray:
        return self.k ** 2

    @property
    def theta_N(self) -> np.ndarray:
        return unwrap_from(np.array([wrap_phase(r.RN) for r in self.rows]))

    @property
    def theta_D(self) -> np.ndarray:
        return unwrap_from(np.array([wrap_phase(r.RD) for r in self.rows]))

    @property
    def RN(self) -> np.ndarray:
        return np.array([r.RN for r in self.rows])

    @property
    def RD(self) -> np.ndarray:
        return np.array([r.RD for r in self.rows])

    @property
    def energy_defect(self) -> np.ndarray:
        return np.array([r.energy_defect for r in self.rows])

    def winding(self, window: Optional[tuple] = None) -> int:
        """Net number of counter-clockwise turns of R^N across ``window``."""
        k, th = self.k, self.theta_N
        if window is not None:
            sel = (k >= window[0]) & (k <= window[1])
            k, th = k[sel], th[sel]
        if len(th) < 2:
            return 0
        return int(round((th[-1] - th[0]) / (2 * math.pi)))

    def to_csv(self, header: str = "") -> str:
        buf = io.StringIO()
        if header:
            buf.write(header.rstrip("\n") + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["epsilon [-]", "k [1/length]", "lambda [1/length^2]", "theta_N [rad]",
                    "theta_D [rad]", "Re R [-]", "Im R [-]", "Re T [-]", "Im T [-]",
                    "energy_defect [-]", "flagged [0/1]"])
        thN, thD = self.theta_N, self.theta_D
        for i, r in enumerate(self.rows):
            flag = int(self.flagged is not None and self.flagged[0] <= r.k <= self.flagged[1])
            w.writerow([repr(r.epsilon), f"{r.k:.10f}", f"{r.lam:.10f}", f"{thN[i]:.10f}",
                        f"{thD[i]:.10f}", f"{r.R.real:.10e}", f"{r.R.imag:.10e}",
                        f"{r.T.real:.10e}", f"{r.T.imag:.10e}", f"{r.energy_defect:.3e}", flag])
        return buf.getvalue()


def max_workers() -> int:
    """Concurrency cap from FANOGUIDE_THREADS (default 1)."""
    raw = os.environ.get("FANOGUIDE_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise DomainError(f"FANOGUIDE_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise DomainError(f"FANOGUIDE_THREADS must be a positive integer, got {raw!r}")
    return n


def _sample(mesh, epsilon, ks, n_terms, rows, failures):
    """Evaluate rows (possibly concurrently); results are keyed by k so the
    merge order does not depend on scheduling."""
    def one(k):
        try:
            return k, evaluate_point(mesh, epsilon, k, n_terms), None
        except (NearResonanceError, SolverError) as exc:
            return k, None, exc

    ks = [float(k) for k in ks]
    workers = min(max_workers(), max(len(ks), 1))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(one, ks))
    else:
        results = [one(k) for k in ks]
    for k, row, exc in results:
        if row is not None:
            rows[k] = row
        else:
            log.warning("sweep row k=%.8f skipped: %s", k, exc)
            failures.append((k, str(exc)))


def _flag_window(k, theta, base_k):
    """Span of intervals whose phase slope exceeds STEEP_FACTOR times the
    median slope of the unrefined grid."""
    if len(base_k) < 5:
        return None
    slope = np.abs(np.diff(theta) / np.diff(k))
    base = np.abs(np.diff(np.interp(base_k, k, theta)) / np.diff(base_k))
    med = np.median(base)
    steep = np.flatnonzero(slope > STEEP_FACTOR * max(med, 1e-12))
    if len(steep) == 0:
        return None
    return float(k[steep[0]]), float(k[steep[-1] + 1])


def frequency_sweep(family: PerturbedFamily, epsilon: float, k_window: Sequence[float], n: int,
                    refine: bool = True, n_terms: int = DEFAULT_TERMS,
                    rounds: int = REFINE_ROUNDS, points: int = REFINE_POINTS) -> SweepTable:
    """Sweep k over ``k_window`` and refine around the resonance.

    The first refinement round zooms on the smallest |1 + S_mm| (smooth in k
    even when the phase of R^N winds too fast to be sampled); later rounds
    zoom on the steepest phase change."""
    a, b = map(float, k_window)
    if not 0 < a < b < math.pi:
        raise DomainError(f"k window {k_window} must lie inside the monomode band (0, pi)")
    mesh = family.mesh(epsilon)
    rows, failures = {}, []
    base_k = np.linspace(a, b, n)
    _sample(mesh, epsilon, base_k, n_terms, rows, failures)
    if refine and epsilon != 0:
        for r in range(rounds):
            ks = np.array(sorted(rows))
            if len(ks) < 3:
                break
            if r == 0:
                gap = np.array([rows[x].smm_gap for x in ks])
                i = int(np.argmin(gap))
            else:
                th = unwrap_from(np.array([wrap_phase(rows[x].RN) for x in ks]))
                i = int(np.argmax(np.abs(np.diff(th))))
                i = i if abs(th[i + 1] - th[i]) < abs(th[max(i - 1, 0)] - th[i]) else i + 1
            lo, hi = ks[max(i - 1, 0)], ks[min(i + 1, len(ks) - 1)]
            _sample(mesh, epsilon, np.linspace(lo, hi, points)[1:-1], n_terms, rows, failures)
    table = SweepTable([rows[x] for x in sorted(rows)], float(epsilon), None, failures)
    if epsilon != 0:
        table.flagged = _flag_window(table.k, table.theta_N, base_k)
    return table


def _roots_of_mismatch(table: SweepTable, offset: float):
    """Brackets where wrap(theta_N - theta_D - offset) changes sign through 0."""
    k = table.k
    f = np.array([wrap_phase(complex(np.exp(1j * (math.atan2(r.RN.imag, r.RN.real)
                                                 - math.atan2(r.RD.imag, r.RD.real) - offset))))
                  for r in table.rows])
    br = []
    for i in range(len(k) - 1):
        if f[i] == 0:
            br.append((k[i], k[i]))
        elif f[i] * f[i + 1] < 0 and abs(f[i]) < math.pi / 2 and abs(f[i + 1]) < math.pi / 2:
            br.append((k[i], k[i + 1]))
    return br


def _find_zero(family: PerturbedFamily, epsilon: float, window, target: str, n: int,
               n_terms: int, table: Optional[SweepTable] = None):
    offset = math.pi if target == "R" else 0.0
    table = table or frequency_sweep(family, epsilon, window, n, n_terms=n_terms)
    scan = [(r.k, abs(r.R), abs(r.T)) for r in table.rows]
    if table.flagged is None:
        # the zeros come from the resonance; without one the mismatch is
        # either bounded away from zero or (straight guide) noise around it
        raise NotFoundError(f"no resonance flagged for eps={epsilon} in k window {tuple(window)}", scan)
    brackets = _roots_of_mismatch(table, offset)
    if not brackets:
        raise NotFoundError(f"no {target} = 0 crossing for eps={epsilon} in k window {tuple(window)}", scan)
    mesh = family.mesh(epsilon)
    center = 0.5 * (table.flagged[0] + table.flagged[1])
    lo, hi = min(brackets, key=lambda br: abs(0.5 * (br[0] + br[1]) - center))

    def mismatch(k):
        row = evaluate_point(mesh, epsilon, k, n_terms)
        return wrap_phase(row.RN / row.RD * np.exp(-1j * offset))

    k_star = lo if lo == hi else brentq(mismatch, lo, hi, xtol=1e-12, rtol=1e-14)
    row = evaluate_point(mesh, epsilon, k_star, n_terms)
    residual = abs(row.R) if target == "R" else abs(row.T)
    if residual > ROOT_TOL:
        raise NotFoundError(f"{target} residual {residual:.2e} at k={k_star:.8f} exceeds {ROOT_TOL}", scan)
    return float(k_star), float(residual), row


def check_zero_precondition(family: PerturbedFamily, k0: float, target: str,
                               n_terms: int = DEFAULT_TERMS, tol: float = 1e-3) -> bool:
    """R^N(0, lam0) != -R^D(0, lam0) (for R = 0) or != R^D (for T = 0)."""
    row = evaluate_point(family.mesh(0.0), 0.0, k0, n_terms)
    other = -row.RD if target == "R" else row.RD
    return abs(row.RN - other) > tol


def find_nonreflection(family: PerturbedFamily, epsilon: float, window, n: int = 61,
                       n_terms: int = DEFAULT_TERMS, table: Optional[SweepTable] = None):
    """k* with R(eps, k*^2) = 0; returns (k*, |R(k*)|, row)."""
    return _find_zero(family, epsilon, window, "R", n, n_terms, table)


def find_perfect_reflection(family: PerturbedFamily, epsilon: float, window, n: int = 61,
                            n_terms: int = DEFAULT_TERMS, table: Optional[SweepTable] = None):
    """k* with T(eps, k*^2) = 0; returns (k*, |T(k*)|, row)."""
    return _find_zero(family, epsilon, window, "T", n, n_terms, table)


@dataclass(frozen=True)
class ResonanceShape:
    epsilon: float
    center: float  # in lam
    width: float  # in lam
    winding: int


def resonance_shape(table: SweepTable) -> ResonanceShape:
    """Center and width (in lam) of the winding of R^N.

    A straight background through the window ends (with the full turn
    removed) is subtracted from the unwrapped phase; the center is where the
    remaining phase reaches pi and the width spans the central half of the
    turn (pi/2 to 3pi/2)."""
    lam, th = table.lam, table.theta_N
    turns = table.winding()
    if turns == 0:
        raise NotFoundError(f"no resonance winding at eps={table.epsilon}: the grid does not resolve "
                            "the resonance; increase n or the refinement rounds, or narrow the window",
                            [(r.k, wrap_phase(r.RN)) for r in table.rows])
    bg = th[0] + (th[-1] - 2 * math.pi * turns - th[0]) * (lam - lam[0]) / (lam[-1] - lam[0])
    rel = (th - bg) * np.sign(turns)

    def crossing(level):
        i = int(np.argmax(rel >= level))
        if i == 0:
            raise NotFoundError(f"phase never reaches {level:.3f}")
        return lam[i - 1] + (level - rel[i - 1]) * (lam[i] - lam[i - 1]) / (rel[i] - rel[i - 1])

    center = crossing(math.pi)
    width = crossing(1.5 * math.pi) - crossing(0.5 * math.pi)
    return ResonanceShape(table.epsilon, float(center), float(width), turns)


def width_scaling(family: PerturbedFamily, eps_list: Sequence[float], k_window, n: int = 61,
                  n_terms: int = DEFAULT_TERMS, tables: Optional[dict] = None):
    """Resonance center and width for each epsilon (positive, decreasing)."""
    eps = list(eps_list)
    if not eps or any(e <= 0 for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
        raise DomainError("eps_list must be positive and strictly decreasing")
    out = []
    for e in eps:
        table = (tables or {}).get(e) or frequency_sweep(family, e, k_window, n, n_terms=n_terms)
        out.append(resonance_shape(table))
    return out


def linear_center_coefficient(shapes: Sequence[ResonanceShape], lambda0: float) -> float:
    """eps-linear coefficient a of center(eps) = lam0 + a eps + b eps^2 from
    two shapes (Richardson elimination of the quadratic term)."""
    if len(shapes) != 2:
        raise DomainError("need exactly two epsilons")
    (e1, c1), (e2, c2) = [(s.epsilon, (s.center - lambda0) / s.epsilon) for s in shapes]
    # c = a + b eps  ->  a = (e1 c2 - e2 c1) / (e1 - e2)
    return float((e1 * c2 - e2 * c1) / (e1 - e2))
