"""Parameterized half-waveguide geometries and boundary profiles.

Every geometry is a subset of the half-strip ``x > 0, 0 < y < 1`` (plus a
vertical branch for the L-shape) that coincides with the straight strip for
``x > d``. The artificial boundary Upsilon is the part of ``x = 0`` on the
boundary, and the computational domain is truncated at ``x = R_trunc``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import GeometryError

ABC_KINDS = ("neumann", "dirichlet", "none")
VARIANTS = ("straight", "lshape", "disk")
# the augmented condition grows like exp(alpha_m R); cap the dynamic range
MAX_ALPHA_R = 8.0
# band (in distance from the wall) over which profile displacements are blended
BLEND_WIDTH = 0.2


def cubic_cutoff(t):
    """1 - 3t^2 + 2t^3 on [0, 1], 1 below, 0 above (C^1 at both ends)."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    return 1 - 3 * t ** 2 + 2 * t ** 3


@dataclass(frozen=True)
class SegmentArc:
    """Straight wall piece from ``p0`` to ``p1``; ``normal`` points out of the
    domain. Arc length ``s`` runs from ``p0``."""

    p0: tuple
    p1: tuple
    normal: tuple

    @property
    def length(self) -> float:
        return float(math.dist(self.p0, self.p1))

    def point(self, s):
        s = np.asarray(s, dtype=float)
        t = s / self.length
        p0, p1 = np.asarray(self.p0), np.asarray(self.p1)
        return p0 + t[..., None] * (p1 - p0)

    def outward_normal(self, s):
        s = np.asarray(s, dtype=float)
        return np.broadcast_to(np.asarray(self.normal, dtype=float), s.shape + (2,))

    def tangent(self):
        p0, p1 = np.asarray(self.p0), np.asarray(self.p1)
        return (p1 - p0) / self.length

    def locate(self, p):
        """Arc coordinate and signed distance (positive inside the domain)."""
        p = np.asarray(p, dtype=float)
        rel = p - np.asarray(self.p0)
        s = rel @ self.tangent()
        n = -(rel @ np.asarray(self.normal, dtype=float))
        return s, n


@dataclass(frozen=True)
class CircleArc:
    """Arc of the circle ``center + radius (cos th, sin th)`` for th in
    ``[theta0, theta1]``. The domain lies outside the circle, so the outward
    normal of the domain points to the center."""

    center: tuple
    radius: float
    theta0: float = 0.0
    theta1: float = 2 * math.pi

    @property
    def length(self) -> float:
        return self.radius * (self.theta1 - self.theta0)

    def point(self, s):
        th = self.theta0 + np.asarray(s, dtype=float) / self.radius
        c = np.asarray(self.center, dtype=float)
        return c + self.radius * np.stack([np.cos(th), np.sin(th)], axis=-1)

    def outward_normal(self, s):
        th = self.theta0 + np.asarray(s, dtype=float) / self.radius
        return -np.stack([np.cos(th), np.sin(th)], axis=-1)


@dataclass(frozen=True)
class ProfileH:
    """Normal displacement density on a wall arc: the boundary point P(s)
    moves to P(s) + eps H(s) nu(s)."""

    arc: object
    func: Callable
    name: str = "custom"

    def __call__(self, s):
        return np.asarray(self.func(np.asarray(s, dtype=float)), dtype=float) * np.ones_like(
            np.asarray(s, dtype=float)
        )

    def sup_norms(self, n: int = 2001):
        """Sampled sup norms of H, H' and H'' (finite differences)."""
        s = np.linspace(0.0, self.arc.length, n)
        v = self(s)
        if not np.all(np.isfinite(v)):
            raise GeometryError(f"profile {self.name} is not finite on its arc")
        ds = s[1] - s[0]
        d1 = np.gradient(v, ds)
        d2 = np.gradient(d1, ds)
        return float(np.abs(v).max()), float(np.abs(d1).max()), float(np.abs(d2).max())

    def check(self, n: int = 2001, require_compact: bool = False):
        """Validate H and return a bound on H and its first two derivatives."""
        bound = max(self.sup_norms(n))
        if require_compact:
            v = self(np.array([0.0, self.arc.length]))
            if abs(v[0]) > 1e-12 or abs(v[-1]) > 1e-12:
                raise GeometryError(f"profile {self.name} does not vanish at the arc ends")
        return bound

    def displace(self, s, epsilon):
        """Displaced boundary points P(s) + eps H(s) nu(s)."""
        return self.arc.point(s) + epsilon * self(s)[..., None] * self.arc.outward_normal(s)


def constant_profile(arc, value: float = 1.0) -> ProfileH:
    return ProfileH(arc, lambda s: np.full_like(s, value), name=f"constant({value:g})")


def bump_profile(arc, a: float, b: float, amplitude: float = 1.0) -> ProfileH:
    """Smooth bump exp(1 - 1/(1 - tau^2)) supported in ``(a, b)`` (arc length)."""
    if not 0 <= a < b <= arc.length:
        raise GeometryError(f"bump support ({a}, {b}) not inside arc of length {arc.length}")

    def f(s):
        tau = (2 * s - (a + b)) / (b - a)
        out = np.zeros_like(s)
        inside = np.abs(tau) < 1
        out[inside] = amplitude * np.exp(1 - 1 / (1 - tau[inside] ** 2))
        return out

    return ProfileH(arc, f, name=f"bump({a:g},{b:g})")


def vertical_shift_profile(arc: CircleArc) -> ProfileH:
    """H(s) = e_y . nu(s): the normal part of a rigid upward shift."""
    return ProfileH(arc, lambda s: arc.outward_normal(s)[..., 1], name="vertical-shift")


@dataclass(frozen=True)
class WaveguideGeometry:
    variant: str
    abc: str = "neumann"
    L: float = 0.0
    branch_width: float = 0.0
    center: tuple = (1.0, 0.5)
    radius: float = 0.25
    profile: Optional[ProfileH] = None
    epsilon: float = 0.0
    d: float = 0.0
    R_trunc: float = 0.0
    # mesh rows across the branch are frozen at this reference length so that
    # families of geometries share the mesh topology
    L_ref: Optional[float] = None
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise GeometryError(f"unknown geometry variant {self.variant!r}")
        if self.abc not in ABC_KINDS:
            raise GeometryError(f"unknown artificial boundary condition {self.abc!r}")
        if not self.R_trunc > self.d:
            raise GeometryError(f"R_trunc={self.R_trunc} must exceed d={self.d}")
        if self.variant == "lshape" and not (self.L > 1 and self.branch_width > 0):
            raise GeometryError(f"L-shape needs L > 1 and positive width, got L={self.L}")
        if self.variant == "disk":
            cy = self.center[1]
            if self.radius <= 0 or cy - self.radius <= 0 or cy + self.radius >= 1:
                raise GeometryError("inclusion touches or crosses the guide walls")
            if self.center[0] - self.radius <= 0:
                raise GeometryError("inclusion crosses the artificial boundary")

    def contains(self, x, y, tol: float = 1e-12):
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        inside = (x >= -tol) & (y >= -tol) & (y <= 1 + tol)
        if self.variant == "lshape":
            inside |= (x >= -tol) & (x <= self.branch_width + tol) & (y <= self.L + tol) & (y >= -tol)
        if self.variant == "disk":
            cx, cy = self.center
            inside &= (x - cx) ** 2 + (y - cy) ** 2 >= self.radius ** 2 - tol
        return inside

    def branch_end_arc(self) -> SegmentArc:
        if self.variant != "lshape":
            raise GeometryError("only the L-shape has a branch end")
        return SegmentArc((0.0, self.L), (self.branch_width, self.L), (0.0, 1.0))

    def inclusion_arc(self) -> CircleArc:
        if self.variant != "disk":
            raise GeometryError("only the disk variant has an inclusion")
        return CircleArc(tuple(self.center), self.radius)

    def top_wall_arc(self) -> SegmentArc:
        return SegmentArc((0.0, 1.0), (self.d, 1.0), (0.0, 1.0))

    def summary(self) -> dict:
        out = {"variant": self.variant, "abc": self.abc, "d": self.d, "R_trunc": self.R_trunc,
               "epsilon": self.epsilon}
        if self.variant == "lshape":
            out.update(L=self.L, branch_width=self.branch_width)
        if self.variant == "disk":
            out.update(center=list(self.center), radius=self.radius)
        if self.profile is not None:
            out["profile"] = self.profile.name
        return out


def default_truncation(d: float) -> float:
    return d + 1.0


def check_truncation(geometry: WaveguideGeometry, alpha_m: float):
    if alpha_m * geometry.R_trunc > MAX_ALPHA_R:
        raise GeometryError(
            f"alpha_m*R_trunc={alpha_m * geometry.R_trunc:.2f} exceeds {MAX_ALPHA_R}"
        )


def lshape_geometry(L: float, k0: float = 0.8 * math.pi, abc: str = "neumann",
                    R_trunc: Optional[float] = None, L_ref: Optional[float] = None):
    if not L > 0:
        raise GeometryError(f"branch length must be positive, got L={L}")
    w = math.pi / k0
    R = default_truncation(w) if R_trunc is None else R_trunc
    return WaveguideGeometry("lshape", abc, L=float(L), branch_width=w, d=w, R_trunc=R,
                             L_ref=L_ref)


def disk_geometry(epsilon: float = 0.0, radius: float = 0.25, center_x: float = 1.0,
                  abc: str = "neumann", R_trunc: Optional[float] = None):
    d = center_x + radius
    R = default_truncation(d) if R_trunc is None else R_trunc
    return WaveguideGeometry("disk", abc, center=(center_x, 0.5 + epsilon), radius=radius,
                             epsilon=float(epsilon), d=d, R_trunc=R)


def straight_geometry(profile: Optional[ProfileH] = None, epsilon: float = 0.0,
                      abc: str = "neumann", d: float = 1.0, R_trunc: Optional[float] = None):
    R = default_truncation(d) if R_trunc is None else R_trunc
    return WaveguideGeometry("straight", abc, profile=profile, epsilon=float(epsilon), d=d,
                             R_trunc=R)


def build_geometry(config: dict) -> WaveguideGeometry:
    """Build a geometry from a plain dictionary (as found in run configs)."""
    cfg = dict(config)
    variant = cfg.pop("variant", None)
    abc = cfg.pop("abc", "neumann")
    R = cfg.pop("R_trunc", None)
    if variant == "lshape":
        geo = lshape_geometry(cfg.pop("L", 2.5524), cfg.pop("k0", 0.8 * math.pi), abc, R,
                              cfg.pop("L_ref", None))
        eps = cfg.pop("epsilon", 0.0)
        if eps:
            geo = displace_boundary(geo, constant_profile(geo.branch_end_arc()), eps)
    elif variant == "disk":
        geo = disk_geometry(cfg.pop("epsilon", 0.0), cfg.pop("radius", 0.25),
                            cfg.pop("center_x", 1.0), abc, R)
    elif variant == "straight":
        d = cfg.pop("d", 1.0)
        eps = cfg.pop("epsilon", 0.0)
        bump = cfg.pop("bump", None)
        geo = straight_geometry(None, 0.0, abc, d, R)
        if bump is not None:
            prof = bump_profile(geo.top_wall_arc(), *bump)
            geo = displace_boundary(geo, prof, eps)
    else:
        raise GeometryError(f"unknown geometry variant {variant!r}")
    if cfg:
        raise GeometryError(f"unexpected geometry fields: {sorted(cfg)}")
    return geo


def displace_boundary(geometry: WaveguideGeometry, H: ProfileH, epsilon: float):
    """Perturb a wall arc by the normal displacement eps*H.

    A constant profile on the L-shape branch end lengthens the branch, and the
    vertical-shift profile on the disk moves its center; both are represented
    exactly. Any other profile is stored on the geometry and realized by the
    mesh generator through a blended node displacement.
    """
    if epsilon == 0:
        return geometry
    sup_h, sup_dh, _ = H.sup_norms()
    if geometry.variant == "lshape" and isinstance(H.arc, SegmentArc) and H.name.startswith("constant"):
        value = float(H(np.array([0.0]))[0])
        L = geometry.L + epsilon * value
        if L <= 1:
            raise GeometryError(f"branch collapses: L={L}")
        ref = geometry.L_ref if geometry.L_ref is not None else geometry.L
        return replace(geometry, L=L, epsilon=geometry.epsilon + epsilon * value, L_ref=ref)
    if geometry.variant == "disk" and H.name == "vertical-shift":
        cx, cy = geometry.center
        return replace(geometry, center=(cx, cy + epsilon), epsilon=geometry.epsilon + epsilon)
    if geometry.profile is not None:
        raise GeometryError("geometry already carries a profile perturbation")
    if abs(epsilon) * sup_h >= 0.5 * BLEND_WIDTH:
        raise GeometryError(f"displacement eps*max|H|={abs(epsilon) * sup_h:.3g} too large")
    if abs(epsilon) * sup_dh >= 0.5:
        raise GeometryError(f"wall slope eps*max|H'|={abs(epsilon) * sup_dh:.3g} too large")
    return replace(geometry, profile=H, epsilon=float(epsilon))
