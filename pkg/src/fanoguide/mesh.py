"""P2 triangular meshes of truncated half-waveguides.

Triangles carry six nodes: the three corners in counter-clockwise order,
then the midsides of edges (0,1), (1,2) and (2,0). Elements are straight;
a midside node always sits at the midpoint of its edge. Boundary edges are
stored as (end, end, midside) node triples with a tag among ``wall``,
``upsilon`` (x = 0), ``sigma`` (x = R_trunc), ``sigma_minus`` (x = -R_trunc,
mirrored meshes only) and ``inclusion``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .errors import (
    ArcAlignmentError,
    GeometryError,
    MeshError,
    MeshParseError,
    MeshResolutionError,
    MissingTagError,
    OrientationError,
)
from .geometry import BLEND_WIDTH, CircleArc, SegmentArc, WaveguideGeometry, cubic_cutoff

log = logging.getLogger(__name__)

TAGS = ("wall", "upsilon", "sigma", "sigma_minus", "inclusion")
MIN_EDGES_ACROSS = 8
HEADER = "fanoguide-mesh v1"
MERGE_TOL = 1e-9
# local edge -> (corner a, corner b, midside slot)
LOCAL_EDGES = ((0, 1, 3), (1, 2, 4), (2, 0, 5))


@dataclass(frozen=True, eq=False)
class Mesh:
    nodes: np.ndarray
    triangles: np.ndarray
    boundary: np.ndarray
    tags: np.ndarray
    h: float
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def n_nodes(self) -> int:
        return int(self.nodes.shape[0])

    @property
    def n_triangles(self) -> int:
        return int(self.triangles.shape[0])

    def edges_with_tag(self, tag: str) -> np.ndarray:
        return self.boundary[self.tags == tag]

    def tag_nodes(self, tag: str) -> np.ndarray:
        return np.unique(self.edges_with_tag(tag).ravel())

    def signed_areas(self) -> np.ndarray:
        p = self.nodes[self.triangles[:, :3]]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def stats(self) -> dict:
        counts = {t: int(np.sum(self.tags == t)) for t in TAGS if np.any(self.tags == t)}
        return {"nodes": self.n_nodes, "triangles": self.n_triangles, "h": self.h,
                "boundary_edges": counts}

    def validate(self, required=("sigma",)):
        validate_mesh(self, required)
        return self


# --------------------------------------------------------------------------
# structured P1 building blocks


def _block(mapping, nx: int, ny: int):
    """Points and triangles of a structured ``nx x ny`` quad grid mapped
    through ``mapping(u, v)`` with ``(u, v)`` in the unit square."""
    u, v = np.meshgrid(np.linspace(0, 1, nx + 1), np.linspace(0, 1, ny + 1), indexing="ij")
    pts = mapping(u.ravel(), v.ravel())
    idx = np.arange((nx + 1) * (ny + 1)).reshape(nx + 1, ny + 1)
    a, b = idx[:-1, :-1].ravel(), idx[1:, :-1].ravel()
    c, d = idx[1:, 1:].ravel(), idx[:-1, 1:].ravel()
    tris = np.concatenate([np.stack([a, b, c], 1), np.stack([a, c, d], 1)])
    return pts, tris


def _rect(x0, x1, y0, y1, nx, ny):
    return _block(lambda u, v: np.stack([x0 + (x1 - x0) * u, y0 + (y1 - y0) * v], 1), nx, ny)


def _merge(blocks):
    """Concatenate blocks and merge coincident points."""
    pts = np.concatenate([p for p, _ in blocks])
    offs = np.cumsum([0] + [len(p) for p, _ in blocks])
    tris = np.concatenate([t + o for (_, t), o in zip(blocks, offs)])
    return _dedupe(pts, tris)


def _dedupe(pts, tris):
    pairs = cKDTree(pts).query_pairs(MERGE_TOL, output_type="ndarray")
    rep = np.arange(len(pts))
    # union-find over the (tiny) set of coincident pairs
    for i, j in sorted(map(tuple, np.sort(pairs, axis=1)), key=lambda t: t[1]):
        ri, rj = i, j
        while rep[ri] != ri:
            ri = rep[ri]
        while rep[rj] != rj:
            rj = rep[rj]
        if ri != rj:
            rep[max(ri, rj)] = min(ri, rj)
    for k in range(len(rep)):
        r = k
        while rep[r] != r:
            r = rep[r]
        rep[k] = r
    keep = np.unique(rep)
    new = np.full(len(pts), -1)
    new[keep] = np.arange(len(keep))
    return pts[keep].copy(), new[rep][tris]


def _orient(pts, tris):
    p = pts[tris]
    area = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (
        p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0])
    tris = tris.copy()
    flip = area < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]
    return tris


def _p1_edges(tris):
    e = np.concatenate([tris[:, [a, b]] for a, b, _ in LOCAL_EDGES])
    return np.sort(e, axis=1)


def _promote(pts, tris):
    """Add midside nodes to a P1 triangulation."""
    tris = _orient(pts, tris)
    edges = _p1_edges(tris)
    uniq, inv = np.unique(edges, axis=0, return_inverse=True)
    inv = inv.ravel()
    mids = 0.5 * (pts[uniq[:, 0]] + pts[uniq[:, 1]])
    nodes = np.concatenate([pts, mids])
    nt = len(tris)
    mid_idx = (len(pts) + inv).reshape(3, nt).T
    return nodes, np.concatenate([tris, mid_idx], axis=1)


def _boundary_edges(tri6):
    """(end, end, midside) triples of edges used by exactly one triangle."""
    trip = np.concatenate([tri6[:, [a, b, m]] for a, b, m in LOCAL_EDGES])
    key = np.sort(trip[:, :2], axis=1)
    _, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    inv = inv.ravel()
    if np.any(counts > 2):
        raise MeshError("non-conforming mesh: an edge is shared by more than two triangles")
    return trip[counts[inv] == 1]


def _reset_midsides(nodes, tri6):
    nodes = nodes.copy()
    for a, b, m in LOCAL_EDGES:
        nodes[tri6[:, m]] = 0.5 * (nodes[tri6[:, a]] + nodes[tri6[:, b]])
    return nodes


# --------------------------------------------------------------------------
# tagging and validation


def _classify(geometry: WaveguideGeometry, nodes, edges, tol=1e-9):
    p0, p1 = nodes[edges[:, 0]], nodes[edges[:, 1]]
    tags = np.full(len(edges), "wall", dtype=object)
    on = lambda c, v: (np.abs(p0[:, c] - v) < tol) & (np.abs(p1[:, c] - v) < tol)  # noqa: E731
    tags[on(0, 0.0)] = "upsilon"
    tags[on(0, geometry.R_trunc)] = "sigma"
    tags[on(0, -geometry.R_trunc)] = "sigma_minus"
    if geometry.variant == "disk":
        c = np.asarray(geometry.center)
        r = geometry.radius
        d0 = np.abs(np.hypot(*(p0 - c).T) - r)
        d1 = np.abs(np.hypot(*(p1 - c).T) - r)
        tags[(d0 < 1e-7) & (d1 < 1e-7)] = "inclusion"
    return tags.astype(str)


def validate_mesh(mesh: Mesh, required=("sigma",)):
    """Orientation, conformity, tag partition and truncation-face checks."""
    tri = mesh.triangles
    if tri.ndim != 2 or tri.shape[1] != 6:
        raise MeshError("triangles must have six nodes")
    if tri.min() < 0 or tri.max() >= mesh.n_nodes:
        raise MeshError("triangle references an unknown node")
    area = mesh.signed_areas()
    if np.any(area <= 0):
        bad = int(np.argmin(area))
        raise OrientationError(f"triangle {bad} is not positively oriented (area {area[bad]:.3e})")
    trip = np.concatenate([tri[:, [a, b, m]] for a, b, m in LOCAL_EDGES])
    key = np.sort(trip[:, :2], axis=1)
    uniq, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    inv = inv.ravel()
    if np.any(counts > 2):
        raise MeshError("non-conforming mesh: an edge is shared by more than two triangles")
    # both triangles sharing an edge must agree on its midside node
    mids = np.full(len(uniq), -1)
    mids[inv] = trip[:, 2]
    if np.any(mids[inv] != trip[:, 2]):
        raise MeshError("non-conforming mesh: neighbouring triangles disagree on a midside node")
    bnd = trip[counts[inv] == 1]
    have = {tuple(sorted(e[:2])) + (e[2],) for e in mesh.boundary.tolist()}
    want = {tuple(sorted(e[:2])) + (e[2],) for e in bnd.tolist()}
    if have != want or len(have) != len(mesh.boundary):
        raise MeshError("tagged edges do not partition the mesh boundary")
    unknown = set(np.unique(mesh.tags)) - set(TAGS)
    if unknown:
        raise MeshError(f"unknown boundary tags {sorted(unknown)}")
    for tag in required:
        if not np.any(mesh.tags == tag):
            raise MissingTagError(f"mesh has no {tag!r} boundary edges")
    for tag in ("sigma", "sigma_minus"):
        nodes = mesh.tag_nodes(tag)
        if len(nodes) and np.ptp(mesh.nodes[nodes, 0]) != 0.0:
            raise MeshError(f"{tag} nodes do not lie on a single vertical line")


# --------------------------------------------------------------------------
# generators


def _count(length, h, minimum=1):
    return max(minimum, int(math.ceil(length / h - 1e-9)))


def _check_channel(width, h, what):
    if width / h < MIN_EDGES_ACROSS - 1e-9:
        raise MeshResolutionError(
            f"h={h} too coarse: fewer than {MIN_EDGES_ACROSS} edges across {what} "
            f"(width {width:.3g})"
        )


def _lshape_p1(geo: WaveguideGeometry, h: float):
    w, L, R = geo.branch_width, geo.L, geo.R_trunc
    L_ref = geo.L_ref if geo.L_ref is not None else L
    _check_channel(1.0, h, "the guide")
    _check_channel(w, h, "the branch")
    nw, ny = _count(w, h), _count(1.0, h)
    nr = _count(R - w, h)
    nb = _count(L_ref - 1.0, h)
    return _merge([
        _rect(0, w, 0, 1, nw, ny),
        _rect(w, R, 0, 1, nr, ny),
        _rect(0, w, 1, L, nw, nb),
    ])


def _straight_p1(geo: WaveguideGeometry, h: float):
    _check_channel(1.0, h, "the guide")
    return _rect(0, geo.R_trunc, 0, 1, _count(geo.R_trunc, h), _count(1.0, h))


def _disk_box(geo):
    cx = geo.center[0]
    return cx - 0.5, cx + 0.5


def _disk_p1(geo: WaveguideGeometry, h: float):
    """Mesh of the unperturbed disk geometry (center on y = 0.5): the lower
    half is built from an O-grid and two rectangles, then mirrored."""
    cx, r, R = geo.center[0], geo.radius, geo.R_trunc
    _check_channel(0.5 - r, h, "the gap between inclusion and wall")
    x0, x1 = _disk_box(geo)
    if x0 < 0 or x1 > R:
        raise GeometryError("inclusion box does not fit between Upsilon and the truncation")
    q = _count(0.5, h)
    # square path from (x1, 0.5) down, along the bottom, up to (x0, 0.5)
    t = np.linspace(0, 4.0, 4 * q + 1)
    sq = np.empty((len(t), 2))
    seg1, seg2, seg3 = t <= 1, (t > 1) & (t <= 3), t > 3
    sq[seg1] = np.stack([np.full(seg1.sum(), x1), 0.5 - 0.5 * t[seg1]], 1)
    sq[seg2] = np.stack([x1 - 0.5 * (t[seg2] - 1), np.zeros(seg2.sum())], 1)
    sq[seg3] = np.stack([np.full(seg3.sum(), x0), 0.5 * (t[seg3] - 3)], 1)
    psi = np.arctan2(sq[:, 1] - 0.5, sq[:, 0] - cx)
    psi[0], psi[-1] = 0.0, -math.pi
    circ = np.stack([cx + r * np.cos(psi), 0.5 + r * np.sin(psi)], 1)
    nr = max(MIN_EDGES_ACROSS, _count(0.5 - r, h) + 2)

    def ogrid(u, v):
        i = np.rint(u * 4 * q).astype(int)
        return (1 - v)[:, None] * circ[i] + v[:, None] * sq[i]

    left = _rect(0, x0, 0, 0.5, _count(x0, h), q) if x0 > 0 else None
    right = _rect(x1, R, 0, 0.5, _count(R - x1, h), q)
    blocks = [b for b in (left, _block(ogrid, 4 * q, nr), right) if b is not None]
    pts, tris = _merge(blocks)
    mpts = pts.copy()
    mpts[:, 1] = 1.0 - mpts[:, 1]
    return _merge([(pts, tris), (mpts, tris)])


def _disk_shift(geo: WaveguideGeometry, pts):
    """Move O-grid nodes by eps*chi(s) e_y, chi = 1 on the circle and 0 on the box."""
    eps = geo.center[1] - 0.5
    if eps == 0:
        return pts
    cx, r = geo.center[0], geo.radius
    x0, x1 = _disk_box(geo)
    q = pts - np.array([cx, 0.5])
    inside = (pts[:, 0] >= x0 - 1e-12) & (pts[:, 0] <= x1 + 1e-12)
    rho = np.hypot(q[:, 0], q[:, 1])
    with np.errstate(divide="ignore", invalid="ignore"):
        reach = 0.5 / np.maximum(np.abs(q[:, 0]), np.abs(q[:, 1])) * rho
        s = (rho - r) / (reach - r)
    s = np.where(inside, np.nan_to_num(s, nan=1.0), 1.0)
    out = pts.copy()
    out[:, 1] += eps * cubic_cutoff(s)
    return out


def _profile_shift(geo: WaveguideGeometry, pts):
    prof, eps = geo.profile, geo.epsilon
    if prof is None or eps == 0:
        return pts
    if not isinstance(prof.arc, SegmentArc):
        raise GeometryError("blended profile displacement needs a straight arc")
    s, n = prof.arc.locate(pts)
    on = (s >= -1e-12) & (s <= prof.arc.length + 1e-12) & (n >= -1e-12) & (n < BLEND_WIDTH)
    out = pts.copy()
    hs = prof(np.clip(s[on], 0, prof.arc.length))
    out[on] += (eps * hs * cubic_cutoff(n[on] / BLEND_WIDTH))[:, None] * np.asarray(prof.arc.normal)
    return out


def generate_mesh(geometry: WaveguideGeometry, h: float) -> Mesh:
    """Structured P2 mesh of the truncated half-guide."""
    if not h > 0:
        raise MeshResolutionError(f"mesh size must be positive, got {h}")
    if geometry.variant == "lshape":
        pts, tris = _lshape_p1(geometry, h)
    elif geometry.variant == "straight":
        pts, tris = _straight_p1(geometry, h)
    else:
        pts, tris = _disk_p1(geometry, h)
        pts = _disk_shift(geometry, pts)
    pts = _profile_shift(geometry, pts)
    nodes, tri6 = _promote(pts, tris)
    edges = _boundary_edges(tri6)
    tags = _classify(geometry, nodes, edges)
    required = ("sigma",) if geometry.abc == "none" else ("sigma", "upsilon")
    mesh = Mesh(nodes, tri6, edges, tags, float(h), {"geometry": geometry.summary()})
    validate_mesh(mesh, required)
    log.debug("generated %s mesh: %s", geometry.variant, mesh.stats())
    return mesh


def mirror_mesh(mesh: Mesh, axis: str = "x", value: float = 0.0) -> Mesh:
    """Union of a mesh and its mirror image across ``x = value`` (or
    ``y = value``). Boundary edges on the mirror line become interior, and a
    mirrored ``sigma`` face is tagged ``sigma_minus``."""
    c = 0 if axis == "x" else 1
    mnodes = mesh.nodes.copy()
    mnodes[:, c] = 2 * value - mnodes[:, c]
    # reversing the corner order keeps the mirrored triangles positive
    mtri = mesh.triangles[:, [0, 2, 1, 5, 4, 3]]
    n = mesh.n_nodes
    nodes = np.concatenate([mesh.nodes, mnodes])
    tri = np.concatenate([mesh.triangles, mtri + n])
    on_line = np.abs(mesh.nodes[:, c] - value) < MERGE_TOL
    rep = np.arange(2 * n)
    rep[n + np.flatnonzero(on_line)] = np.flatnonzero(on_line)
    nodes[np.flatnonzero(on_line)] = mesh.nodes[on_line]
    keep = np.unique(rep)
    new = np.full(2 * n, -1)
    new[keep] = np.arange(len(keep))
    nodes = nodes[keep]
    tri = new[rep][tri]
    mtags = mesh.tags.copy()
    if axis == "x":
        mtags = np.where(mtags == "sigma", "sigma_minus", mtags)
    bnd = np.concatenate([mesh.boundary, mesh.boundary + n])
    tags = np.concatenate([mesh.tags, mtags])
    bnd = new[rep][bnd]
    p0, p1 = nodes[bnd[:, 0]], nodes[bnd[:, 1]]
    interior = (np.abs(p0[:, c] - value) < MERGE_TOL) & (np.abs(p1[:, c] - value) < MERGE_TOL)
    meta = dict(mesh.meta, mirrored=axis)
    out = Mesh(nodes, tri, bnd[~interior], tags[~interior], mesh.h, meta)
    validate_mesh(out, ())
    return out


# --------------------------------------------------------------------------
# boundary arcs


@dataclass(frozen=True)
class ArcEdges:
    """Mesh boundary edges covering an arc, ordered by arc length.

    ``s0``/``s1`` are the arc-length coordinates of the two ends of each
    edge (``edges[:, 0]`` sits at ``s0``)."""

    edges: np.ndarray
    s0: np.ndarray
    s1: np.ndarray


def _arc_coordinate(arc, pts, tol):
    if isinstance(arc, SegmentArc):
        s, n = arc.locate(pts)
        ok = (np.abs(n) < tol) & (s > -tol) & (s < arc.length + tol)
        return s, ok
    if isinstance(arc, CircleArc):
        q = pts - np.asarray(arc.center)
        rad = np.hypot(q[:, 0], q[:, 1])
        th = np.mod(np.arctan2(q[:, 1], q[:, 0]) - arc.theta0, 2 * math.pi)
        s = arc.radius * th
        ok = (np.abs(rad - arc.radius) < tol) & (s < arc.length + tol)
        return s, ok
    raise ArcAlignmentError(f"unsupported arc type {type(arc).__name__}")


def arc_edges(mesh: Mesh, arc, tol: float = 1e-7) -> ArcEdges:
    """Boundary edges lying on ``arc``; raises if they do not cover it."""
    e = mesh.boundary
    s_a, ok_a = _arc_coordinate(arc, mesh.nodes[e[:, 0]], tol)
    s_b, ok_b = _arc_coordinate(arc, mesh.nodes[e[:, 1]], tol)
    sel = ok_a & ok_b
    if isinstance(arc, CircleArc) and arc.length >= 2 * math.pi * arc.radius - tol:
        # a closed circle: the edge crossing theta0 wraps around
        wrap = sel & (np.abs(s_a - s_b) > 0.5 * arc.length)
        s_a = np.where(wrap & (s_a > s_b), s_a - arc.length, s_a)
        s_b = np.where(wrap & (s_b > s_a), s_b - arc.length, s_b)
    edges, s0, s1 = e[sel], s_a[sel], s_b[sel]
    if len(edges) == 0:
        raise ArcAlignmentError("no mesh boundary edge lies on the requested arc")
    flip = s0 > s1
    edges = edges.copy()
    edges[flip] = edges[flip][:, [1, 0, 2]]
    s0, s1 = np.where(flip, s1, s0), np.where(flip, s0, s1)
    order = np.argsort(s0)
    edges, s0, s1 = edges[order], s0[order], s1[order]
    covered = s1.max() - s0.min()
    gaps = np.abs(s0[1:] - s1[:-1]).max() if len(s0) > 1 else 0.0
    if abs(covered - arc.length) > 1e-6 * max(1.0, arc.length) or gaps > 1e-9:
        raise ArcAlignmentError(
            f"arc of length {arc.length:.6g} is not a union of mesh edges (covered {covered:.6g})"
        )
    return ArcEdges(edges, s0, s1)


# --------------------------------------------------------------------------
# text I/O


def export_mesh(mesh: Mesh, path) -> None:
    lines = [HEADER,
             "# triangle nodes: corners c0 c1 c2 counter-clockwise, then midsides of (c0,c1) (c1,c2) (c2,c0)",
             f"h {mesh.h!r}",
             f"vertices {mesh.n_nodes}"]
    lines += [f"{i} {x!r} {y!r}" for i, (x, y) in enumerate(mesh.nodes.tolist())]
    lines.append(f"triangles {mesh.n_triangles}")
    lines += [f"{i} " + " ".join(map(str, t)) for i, t in enumerate(mesh.triangles.tolist())]
    lines.append(f"boundary {len(mesh.boundary)}")
    lines += [f"{a} {b} {m} {tag}" for (a, b, m), tag in zip(mesh.boundary.tolist(), mesh.tags)]
    Path(path).write_text("\n".join(lines) + "\n")


def _section(lines, pos, name):
    if pos >= len(lines):
        raise MeshParseError(f"missing section {name!r}")
    head = lines[pos].split()
    if len(head) != 2 or head[0] != name:
        raise MeshParseError(f"expected '{name} <count>' at line {pos + 1}, got {lines[pos]!r}")
    try:
        count = int(head[1])
    except ValueError as exc:
        raise MeshParseError(f"bad count in line {pos + 1}") from exc
    body = lines[pos + 1: pos + 1 + count]
    if len(body) != count:
        raise MeshParseError(f"section {name!r} truncated")
    return body, pos + 1 + count


def import_mesh(path, required=("sigma",)) -> Mesh:
    raw = Path(path).read_text().splitlines()
    lines = [ln.strip() for ln in raw if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines or lines[0] != HEADER:
        raise MeshParseError(f"missing header {HEADER!r}")
    pos, h = 1, float("nan")
    if pos < len(lines) and lines[pos].startswith("h "):
        try:
            h = float(lines[pos].split()[1])
        except (IndexError, ValueError) as exc:
            raise MeshParseError("bad mesh size line") from exc
        pos += 1
    try:
        body, pos = _section(lines, pos, "vertices")
        v = np.array([[float(t) for t in ln.split()] for ln in body]).reshape(-1, 3)
        body, pos = _section(lines, pos, "triangles")
        t = np.array([[int(x) for x in ln.split()] for ln in body], dtype=int).reshape(-1, 7)
        body, pos = _section(lines, pos, "boundary")
        parts = [ln.split() for ln in body]
        if any(len(p) != 4 for p in parts):
            raise MeshParseError("boundary lines must read 'n0 n1 nmid tag'")
        b = np.array([[int(x) for x in p[:3]] for p in parts], dtype=int).reshape(-1, 3)
        tags = np.array([p[3] for p in parts], dtype=str)
    except ValueError as exc:
        raise MeshParseError(str(exc)) from exc
    if not np.array_equal(v[:, 0], np.arange(len(v))) or not np.array_equal(t[:, 0], np.arange(len(t))):
        raise MeshParseError("vertex and triangle ids must be consecutive from 0")
    mesh = Mesh(v[:, 1:].copy(), t[:, 1:].copy(), b, tags, h, {"source": str(path)})
    validate_mesh(mesh, required)
    return mesh
