"""P2 finite elements for the Helmholtz equation on truncated half-guides.

The truncation face ``x = R`` carries an exact modal (Dirichlet-to-Neumann)
condition. Writing ``U_k = int u phi_k dy`` for the coefficients of the trace
in the orthonormal cosines ``phi_0 = 1``, ``phi_k = sqrt(2) cos(pi k y)``, the
scattered field obeys ``d_nu u = sum_k c_k U_k phi_k`` on the face, so the
boundary term is ``B = P diag(c) P^T`` with ``P_ik = int psi_i phi_k dy``.
The same matrix ``P`` extracts modal amplitudes from the discrete solution;
using one operator for both keeps the discrete scattering matrix exactly
unitary and symmetric (up to roundoff).

The radiation coefficient for mode ``k`` is ``i alpha_k`` when it
propagates and ``-beta_k`` when it decays. The augmented condition replaces
the coefficient of the first evanescent mode ``m`` by the logarithmic
derivative of the wave packet ``w_m^+`` at ``x = R``, namely
``alpha_m (1 - r) / (1 + r)`` with ``r = -i exp(-2 alpha_m R)``.
"""
from __future__ import annotations

import logging
import math
import weakref
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.spatial import cKDTree

from .errors import DomainError, GeometryError, NearResonanceError, SolverError
from .geometry import MAX_ALPHA_R
from .mesh import Mesh, arc_edges
from .modal import (
    AugmentedScatteringMatrix,
    ScatteringMatrix,
    TransverseModeSet,
    build_mode_set,
)

log = logging.getLogger(__name__)

DEFAULT_TERMS = 20
EDGE_GAUSS = 8
PIVOT_RTOL = 1e-14
MATRIX_TOL = 1e-3

# 6-point degree-4 rule on the reference triangle (weights sum to 1/2)
_A, _B = 0.445948490915965, 0.091576213509771
_WA, _WB = 0.223381589678011 / 2, 0.109951743655322 / 2
TRI_POINTS = np.array([[_A, _A], [1 - 2 * _A, _A], [_A, 1 - 2 * _A],
                       [_B, _B], [1 - 2 * _B, _B], [_B, 1 - 2 * _B]])
TRI_WEIGHTS = np.array([_WA] * 3 + [_WB] * 3)


def p2_shape(xi, eta):
    """P2 basis values (..., 6) at reference coordinates."""
    xi, eta = np.asarray(xi, dtype=float), np.asarray(eta, dtype=float)
    l1, l2, l3 = 1 - xi - eta, xi, eta
    return np.stack([l1 * (2 * l1 - 1), l2 * (2 * l2 - 1), l3 * (2 * l3 - 1),
                     4 * l1 * l2, 4 * l2 * l3, 4 * l3 * l1], axis=-1)


def p2_shape_grad(xi, eta):
    """Reference gradients (..., 6, 2)."""
    xi, eta = np.asarray(xi, dtype=float), np.asarray(eta, dtype=float)
    l1, l2, l3 = 1 - xi - eta, xi, eta
    # dl1 = (-1, -1), dl2 = (1, 0), dl3 = (0, 1)
    dxi = np.stack([-(4 * l1 - 1), 4 * l2 - 1, 0 * xi, 4 * (l1 - l2), 4 * l3, -4 * l3], axis=-1)
    deta = np.stack([-(4 * l1 - 1), 0 * xi, 4 * l3 - 1, -4 * l2, 4 * l2, 4 * (l1 - l3)], axis=-1)
    return np.stack([dxi, deta], axis=-1)


def _reference_matrices():
    n = p2_shape(TRI_POINTS[:, 0], TRI_POINTS[:, 1])
    g = p2_shape_grad(TRI_POINTS[:, 0], TRI_POINTS[:, 1])
    mref = np.einsum("q,qi,qj->ij", TRI_WEIGHTS, n, n)
    kref = np.einsum("q,qia,qjb->abij", TRI_WEIGHTS, g, g)
    return mref, kref


MREF, KREF = _reference_matrices()


def edge_shape(t):
    """1D P2 basis on an edge, ordered (end a, end b, midside)."""
    t = np.asarray(t, dtype=float)
    return np.stack([(1 - t) * (1 - 2 * t), t * (2 * t - 1), 4 * t * (1 - t)], axis=-1)


def edge_shape_dt(t):
    t = np.asarray(t, dtype=float)
    return np.stack([4 * t - 3, 4 * t - 1, 4 - 8 * t], axis=-1)


def transverse_basis(k: int, y):
    y = np.asarray(y, dtype=float)
    return np.ones_like(y) if k == 0 else math.sqrt(2) * np.cos(math.pi * k * y)


def _jacobians(mesh: Mesh):
    p = mesh.nodes[mesh.triangles[:, :3]]
    J = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=-1)  # columns: d/dxi, d/deta
    det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    return p, J, det


def assemble_stiffness_mass(mesh: Mesh):
    """Global stiffness and mass matrices (real, symmetric, CSR)."""
    _, J, det = _jacobians(mesh)
    inv = np.linalg.inv(J)  # inv[e, a, c] : d xi_a / d x_c
    G = np.einsum("eac,ebc->eab", inv, inv)
    ke = np.einsum("e,eab,abij->eij", det, G, KREF)
    me = det[:, None, None] * MREF[None]
    tri = mesh.triangles
    rows = np.repeat(tri, 6, axis=1).ravel()
    cols = np.tile(tri, (1, 6)).ravel()
    n = mesh.n_nodes
    K = sp.csr_matrix((ke.ravel(), (rows, cols)), shape=(n, n))
    M = sp.csr_matrix((me.ravel(), (rows, cols)), shape=(n, n))
    return K, M


@dataclass(frozen=True)
class Face:
    """A truncation face with its transverse projection operator."""

    tag: str
    x: float
    nodes: np.ndarray  # global node ids touched by the face
    P: np.ndarray  # (len(nodes), n_terms) real


def face_projection(mesh: Mesh, tag: str, n_terms: int) -> Face:
    edges = mesh.edges_with_tag(tag)
    if len(edges) == 0:
        raise GeometryError(f"mesh has no {tag!r} face")
    nodes, local = np.unique(edges.ravel(), return_inverse=True)
    local = local.reshape(edges.shape)
    tg, wg = np.polynomial.legendre.leggauss(EDGE_GAUSS)
    tg, wg = 0.5 * (tg + 1), 0.5 * wg
    ya, yb = mesh.nodes[edges[:, 0], 1], mesh.nodes[edges[:, 1], 1]
    yq = ya[:, None] + (yb - ya)[:, None] * tg[None, :]
    lq = np.abs(yb - ya)[:, None] * wg[None, :]
    psi = edge_shape(tg)  # (q, 3)
    P = np.zeros((len(nodes), n_terms))
    for k in range(n_terms):
        vals = np.einsum("eq,qa->ea", lq * transverse_basis(k, yq), psi)
        np.add.at(P[:, k], local.ravel(), vals.ravel())
    return Face(tag, float(mesh.nodes[edges[0, 0], 0]), nodes, P)


class _OperatorCache:
    """Per-mesh stiffness/mass and face projections (meshes are immutable)."""

    def __init__(self):
        self._data = weakref.WeakKeyDictionary()

    def get(self, mesh: Mesh):
        entry = self._data.get(mesh)
        if entry is None:
            entry = {"KM": assemble_stiffness_mass(mesh)}
            self._data[mesh] = entry
        return entry

    def face(self, mesh: Mesh, tag: str, n_terms: int) -> Face:
        entry = self.get(mesh)
        key = ("face", tag, n_terms)
        if key not in entry:
            entry[key] = face_projection(mesh, tag, n_terms)
        return entry[key]


_CACHE = _OperatorCache()


@dataclass(frozen=True)
class RadiationCondition:
    kind: str = "standard"
    n_terms: int = DEFAULT_TERMS

    def __post_init__(self):
        if self.kind not in ("standard", "augmented"):
            raise DomainError(f"unknown radiation condition {self.kind!r}")


def radiation_coefficients(modes: TransverseModeSet, R: float, rc: RadiationCondition):
    """Per-mode coefficients c_k with d_nu u = c_k u on the face ``x = R``."""
    if rc.n_terms < modes.m + 1:
        raise DomainError(f"n_terms={rc.n_terms} must be at least m+1={modes.m + 1}")
    c = np.empty(rc.n_terms, dtype=complex)
    for k in range(rc.n_terms):
        if k < modes.m:
            c[k] = 1j * modes.alpha[k]
        else:
            c[k] = -modes.beta(k)
    if rc.kind == "augmented":
        al = modes.alpha_m
        if al * R > MAX_ALPHA_R:
            raise DomainError(f"alpha_m*R={al * R:.2f} exceeds {MAX_ALPHA_R} for the augmented condition")
        r = -1j * math.exp(-2 * al * R)
        c[modes.m] = al * (1 - r) / (1 + r)
    return c


def _mode_face_values(modes: TransverseModeSet, k: int, sign: int, x: float, normal: float):
    """(value, outward normal derivative) of the phi_k coefficient of w_k^{sign}
    on a face at abscissa ``x`` with normal ``normal * e_x``. For ``k > m`` the
    decaying wave v_k^- (``sign=-1``) or growing v_k^+ is used."""
    c = 1.0 if k == 0 else 1.0 / math.sqrt(2)
    if k < modes.m:
        a = modes.a[k] ** -0.5
        val = a * np.exp(sign * 1j * modes.alpha[k] * x)
        der = sign * 1j * modes.alpha[k] * val
    elif k == modes.m:
        al = modes.alpha_m
        vp, vm = modes.a[k] ** -0.5 * math.exp(al * x), modes.a[k] ** -0.5 * math.exp(-al * x)
        val = (vp - sign * 1j * vm) / math.sqrt(2)
        der = al * (vp + sign * 1j * vm) / math.sqrt(2)
    else:
        b = modes.beta(k)
        val = b ** -0.5 * math.exp(sign * b * x)
        der = sign * b * val
    return complex(c * val), complex(c * normal * der)


@dataclass
class DiscreteField:
    values: np.ndarray
    mesh: Mesh
    lam: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.values.shape != (self.mesh.n_nodes,):
            raise DomainError("field size does not match the mesh")
        if not np.all(np.isfinite(self.values)):
            raise SolverError("non-finite field values")


@dataclass(frozen=True)
class ModalAmplitudes:
    """Face amplitudes: ``outgoing[k]`` multiplies w_k^+ (the packet for
    ``k = m`` under the augmented condition), ``incoming[k]`` multiplies
    w_k^- for propagating modes and the decaying wave v_k^- otherwise. Modes
    are anchored at ``x = 0`` so the values do not depend on the face."""

    outgoing: np.ndarray
    incoming: np.ndarray
    m: int
    kind: str


class HelmholtzSystem:
    """Assembled and factorized system for one (mesh, lam, condition, abc)."""

    def __init__(self, mesh: Mesh, lam: float, rc: RadiationCondition = RadiationCondition(),
                 abc: str = "neumann", pivot_rtol: float = PIVOT_RTOL):
        self.mesh, self.lam, self.rc, self.abc = mesh, float(lam), rc, abc
        self.modes = build_mode_set(lam)
        if rc.kind == "augmented" and np.any(mesh.tags == "sigma_minus"):
            raise DomainError("the augmented condition is only defined on half-guides")
        K, M = _CACHE.get(mesh)["KM"]
        self.faces = [_CACHE.face(mesh, "sigma", rc.n_terms)]
        self.normals = [1.0]
        if np.any(mesh.tags == "sigma_minus"):
            self.faces.append(_CACHE.face(mesh, "sigma_minus", rc.n_terms))
            self.normals.append(-1.0)
        A = (K - self.lam * M).astype(complex).tocoo()
        rows, cols, vals = [A.row], [A.col], [A.data]
        self.coeffs = []
        for face in self.faces:
            c = radiation_coefficients(self.modes, abs(face.x), rc)
            self.coeffs.append(c)
            blk = -(face.P * c) @ face.P.T
            rows.append(np.repeat(face.nodes, len(face.nodes)))
            cols.append(np.tile(face.nodes, len(face.nodes)))
            vals.append(blk.ravel())
        n = mesh.n_nodes
        A = sp.csc_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(n, n))
        self.free = np.ones(n, dtype=bool)
        if abc == "dirichlet":
            self.free[mesh.tag_nodes("upsilon")] = False
        elif abc not in ("neumann", "none"):
            raise DomainError(f"unknown artificial boundary condition {abc!r}")
        self.matrix = A
        Af = A[self.free][:, self.free].tocsc()
        try:
            self.lu = spla.splu(Af)
        except RuntimeError as exc:
            raise NearResonanceError(f"singular system at lam={lam}: {exc}", lam=lam, pivot=0.0) from exc
        piv = np.abs(self.lu.U.diagonal())
        self.pivot_ratio = float(piv.min() / piv.max())
        if self.pivot_ratio < pivot_rtol:
            raise NearResonanceError(
                f"nearly singular system at lam={lam} (pivot ratio {self.pivot_ratio:.2e})",
                lam=lam, pivot=float(piv.min()))

    @property
    def n_channels(self) -> int:
        return self.modes.m + (1 if self.rc.kind == "augmented" else 0)

    def solve_rhs(self, F: np.ndarray) -> np.ndarray:
        F = np.atleast_2d(F.T).T
        u = np.zeros((self.mesh.n_nodes, F.shape[1]), dtype=complex)
        u[self.free] = self.lu.solve(np.ascontiguousarray(F[self.free]))
        return u

    def incident_rhs(self, j: int) -> np.ndarray:
        """Right-hand side for the incident wave w_j^- entering through sigma."""
        if not 0 <= j < self.n_channels:
            raise DomainError(f"incident index {j} outside 0..{self.n_channels - 1}")
        F = np.zeros(self.mesh.n_nodes, dtype=complex)
        for face, nrm, c in zip(self.faces, self.normals, self.coeffs):
            val, der = _mode_face_values(self.modes, j, -1, face.x, nrm)
            F[face.nodes] += face.P[:, j] * (der - c[j] * val)
        return F

    def face_coefficients(self, u: np.ndarray, face_index: int = 0) -> np.ndarray:
        face = self.faces[face_index]
        return face.P.T @ u[face.nodes]

    def amplitudes(self, u: np.ndarray, j: Optional[int], face_index: int = 0) -> ModalAmplitudes:
        """Modal amplitudes of a solution with incident w_j^- (``j=None`` for a
        source-free field) read on a face."""
        face, nrm = self.faces[face_index], self.normals[face_index]
        U = self.face_coefficients(u, face_index)
        n = len(U)
        out = np.zeros(n, dtype=complex)
        inc = np.zeros(n, dtype=complex)
        m = self.modes.m
        for k in range(n):
            if j is not None and k == j:
                inc[k] = 1.0
                U[k] -= _mode_face_values(self.modes, k, -1, face.x, nrm)[0]
            growing = k < m or (k == m and self.rc.kind == "augmented")
            if growing:
                out[k] = U[k] / _mode_face_values(self.modes, k, +1, face.x, nrm)[0]
            else:
                inc[k] += U[k] / _mode_face_values(self.modes, k, -1, face.x, nrm)[0]
        return ModalAmplitudes(out, inc, m, self.rc.kind)


def solve_scattering(mesh: Mesh, lam: float, j: int, rc: RadiationCondition = RadiationCondition(),
                     abc: str = "neumann", system: Optional[HelmholtzSystem] = None):
    """Total field for the incident wave w_j^- and its face amplitudes."""
    system = system or HelmholtzSystem(mesh, lam, rc, abc)
    u = system.solve_rhs(system.incident_rhs(j))[:, 0]
    amp = system.amplitudes(u, j)
    return DiscreteField(u, mesh, lam, {"incident": j, "kind": system.rc.kind}), amp


def _matrix_from_system(system: HelmholtzSystem):
    nc = system.n_channels
    F = np.stack([system.incident_rhs(j) for j in range(nc)], axis=1)
    U = system.solve_rhs(F)
    S = np.empty((nc, nc), dtype=complex)
    for j in range(nc):
        S[:, j] = system.amplitudes(U[:, j], j).outgoing[:nc]
    return S, U


def compute_scattering_matrix(mesh: Mesh, lam: float, abc: str = "neumann",
                              n_terms: int = DEFAULT_TERMS, tol: float = MATRIX_TOL):
    system = HelmholtzSystem(mesh, lam, RadiationCondition("standard", n_terms), abc)
    S, _ = _matrix_from_system(system)
    s = ScatteringMatrix(S, float(lam), tol, {"pivot_ratio": system.pivot_ratio})
    s.meta.update(unitarity_defect=s.unitarity_defect, symmetry_defect=s.symmetry_defect)
    return s


def compute_augmented_matrix(mesh: Mesh, lam: float, abc: str = "neumann",
                             n_terms: int = DEFAULT_TERMS, tol: float = MATRIX_TOL,
                             return_fields: bool = False):
    system = HelmholtzSystem(mesh, lam, RadiationCondition("augmented", n_terms), abc)
    S, U = _matrix_from_system(system)
    out = AugmentedScatteringMatrix(S, float(lam), tol, {"pivot_ratio": system.pivot_ratio})
    out.meta.update(unitarity_defect=out.unitarity_defect, symmetry_defect=out.symmetry_defect)
    if return_fields:
        fields = [DiscreteField(U[:, j], mesh, lam, {"incident": j, "kind": "augmented"})
                  for j in range(U.shape[1])]
        return out, fields, system
    return out


# --------------------------------------------------------------------------
# field sampling


@dataclass(frozen=True)
class BoundaryTrace:
    """Samples of a field along a boundary arc at Gauss points.

    ``weights`` integrate over arc length; ``ds_value`` is the derivative of
    the P2 trace along the arc."""

    s: np.ndarray
    points: np.ndarray
    value: np.ndarray
    ds_value: np.ndarray
    weights: np.ndarray


def tangential_derivative_trace(fld: DiscreteField, arc, n_gauss: int = 5) -> BoundaryTrace:
    ae = arc_edges(fld.mesh, arc)
    tg, wg = np.polynomial.legendre.leggauss(n_gauss)
    tg, wg = 0.5 * (tg + 1), 0.5 * wg
    e = ae.edges
    pa, pb = fld.mesh.nodes[e[:, 0]], fld.mesh.nodes[e[:, 1]]
    chord = np.hypot(*(pb - pa).T)
    u = fld.values[e]  # (E, 3) ordered (a, b, mid)
    val = u @ edge_shape(tg).T
    der = (u @ edge_shape_dt(tg).T) / chord[:, None]
    s = ae.s0[:, None] + (ae.s1 - ae.s0)[:, None] * tg[None, :]
    pts = pa[:, None, :] + (pb - pa)[:, None, :] * tg[None, :, None]
    w = chord[:, None] * wg[None, :]
    return BoundaryTrace(s.ravel(), pts.reshape(-1, 2), val.ravel(), der.ravel(), w.ravel())


class PointLocator:
    """Locate points in a mesh and evaluate P2 fields there."""

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        corners = mesh.nodes[mesh.triangles[:, :3]]
        self.corners = corners
        self.tree = cKDTree(corners.mean(axis=1))

    def locate(self, points, tol: float = 1e-10):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        tri = np.full(len(pts), -1)
        bary = np.zeros((len(pts), 2))
        todo = np.arange(len(pts))
        for k in (8, 32, 128):
            if len(todo) == 0:
                break
            k = min(k, self.mesh.n_triangles)
            _, cand = self.tree.query(pts[todo], k=k)
            cand = np.atleast_2d(cand)
            c = self.corners[cand]  # (n, k, 3, 2)
            e1, e2 = c[..., 1, :] - c[..., 0, :], c[..., 2, :] - c[..., 0, :]
            det = e1[..., 0] * e2[..., 1] - e1[..., 1] * e2[..., 0]
            r = pts[todo][:, None, :] - c[..., 0, :]
            xi = (r[..., 0] * e2[..., 1] - r[..., 1] * e2[..., 0]) / det
            eta = (e1[..., 0] * r[..., 1] - e1[..., 1] * r[..., 0]) / det
            inside = (xi >= -tol) & (eta >= -tol) & (xi + eta <= 1 + tol)
            found = inside.any(axis=1)
            first = np.argmax(inside, axis=1)
            rows = np.flatnonzero(found)
            tri[todo[rows]] = cand[rows, first[rows]]
            bary[todo[rows], 0] = xi[rows, first[rows]]
            bary[todo[rows], 1] = eta[rows, first[rows]]
            todo = todo[~found]
        if len(todo):
            raise DomainError(f"{len(todo)} sample points lie outside the mesh, e.g. {pts[todo[0]]}")
        return tri, bary

    def evaluate(self, values: np.ndarray, points) -> np.ndarray:
        tri, bary = self.locate(points)
        n = p2_shape(bary[:, 0], bary[:, 1])
        return np.einsum("pi,pi->p", n, values[self.mesh.triangles[tri]])


def line_projection(fld: DiscreteField, x0: float, n_terms: int, locator=None) -> np.ndarray:
    """Coefficients int u(x0, y) phi_k(y) dy for k < n_terms.

    When mesh nodes lie on the line the quadrature follows them so that each
    piece of the trace is a single polynomial."""
    mesh = fld.mesh
    on = np.flatnonzero(np.abs(mesh.nodes[:, 0] - x0) < 1e-9)
    ys = np.unique(np.round(mesh.nodes[on, 1], 12))
    ys = ys[(ys >= -1e-12) & (ys <= 1 + 1e-12)]
    if len(ys) < 3 or ys[0] > 1e-9 or ys[-1] < 1 - 1e-9:
        ys = np.linspace(0.0, 1.0, 401)
    tg, wg = np.polynomial.legendre.leggauss(4)
    tg, wg = 0.5 * (tg + 1), 0.5 * wg
    yq = (ys[:-1, None] + np.diff(ys)[:, None] * tg[None, :]).ravel()
    wq = (np.diff(ys)[:, None] * wg[None, :]).ravel()
    locator = locator or PointLocator(mesh)
    u = locator.evaluate(fld.values, np.stack([np.full_like(yq, x0), yq], 1))
    return np.array([np.sum(wq * u * transverse_basis(k, yq)) for k in range(n_terms)])


def field_l2_norm(fld: DiscreteField, tail: bool = True, n_terms: int = DEFAULT_TERMS) -> float:
    """L2 norm over the truncated domain, plus the exact contribution of the
    decaying modes beyond ``x = R`` when ``tail`` is set."""
    _, M = _CACHE.get(fld.mesh)["KM"]
    u = fld.values
    sq = float(np.real(np.vdot(u, M @ u)))
    if tail:
        sq += tail_inner(fld, fld, n_terms).real
    return math.sqrt(sq)


def tail_inner(f: DiscreteField, g: DiscreteField, n_terms: int = DEFAULT_TERMS) -> complex:
    """int_{x > R} f conj(g) for fields made of decaying modes beyond the face."""
    face = _CACHE.face(f.mesh, "sigma", n_terms)
    modes = build_mode_set(f.lam)
    Uf = face.P.T @ f.values[face.nodes]
    Ug = face.P.T @ g.values[face.nodes]
    out = 0j
    for k in range(modes.m, n_terms):
        out += Uf[k] * np.conj(Ug[k]) / (2 * modes.beta(k))
    return complex(out)


def mass_inner(f: DiscreteField, g: DiscreteField, conjugate: bool = True) -> complex:
    _, M = _CACHE.get(f.mesh)["KM"]
    gv = np.conj(g.values) if conjugate else g.values
    return complex(f.values @ (M @ gv))


def mass_matrix(mesh: Mesh):
    return _CACHE.get(mesh)["KM"][1]


def face_operator(mesh: Mesh, n_terms: int = DEFAULT_TERMS, tag: str = "sigma") -> Face:
    return _CACHE.face(mesh, tag, n_terms)


def export_field_csv(fld: DiscreteField, path, header: str = "") -> None:
    """Write ``x,y,Re u,Im u`` per node and the triangle connectivity next to it."""
    path = Path(path)
    meta = header or f"# field lam={fld.lam!r} nodes={fld.mesh.n_nodes}"
    rows = np.column_stack([fld.mesh.nodes, fld.values.real, fld.values.imag])
    with path.open("w") as fh:
        fh.write(meta.rstrip("\n") + "\n")
        fh.write("x [length],y [length],Re u [-],Im u [-]\n")
        np.savetxt(fh, rows, delimiter=",", fmt="%.12g")
    tri_path = path.with_name(path.stem + "_triangles.csv")
    with tri_path.open("w") as fh:
        fh.write("# P2 triangles: c0,c1,c2 counter-clockwise then midsides (c0c1),(c1c2),(c2c0)\n")
        fh.write("n0,n1,n2,n3,n4,n5\n")
        np.savetxt(fh, fld.mesh.triangles, delimiter=",", fmt="%d")
