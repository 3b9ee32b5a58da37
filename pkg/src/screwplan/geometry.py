"""Link/obstacle shapes, signed distances, contact detection, path clearance.

All geometry lives in 3D; planar scenes are embedded at z = 0. Robot links
are capsules (a zero-length, zero-radius capsule is a point robot). Signed
distance is positive when separated, zero at touch and negative when
penetrating; the contact normal always points from the obstacle toward the
link, i.e. along the direction a compensating velocity must push.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Union

import numpy as np

from .dualquat import PoseVector

_EPS = 1e-12
# Fallback direction when witness points coincide; keeps outputs deterministic.
_DEGENERATE_NORMAL = np.array([1.0, 0.0, 0.0])


def _vec3(value, name):
    arr = np.array(value, dtype=float).reshape(-1)
    if arr.shape == (2,):
        arr = np.array([arr[0], arr[1], 0.0])
    if arr.shape != (3,):
        raise ValueError(f"{name} must be a 2- or 3-vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class LinkGeometry:
    """Collision capsule of one link, endpoints in the link's local frame."""

    a: np.ndarray
    b: np.ndarray
    radius: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "a", _vec3(self.a, "capsule endpoint a"))
        object.__setattr__(self, "b", _vec3(self.b, "capsule endpoint b"))
        if self.radius < 0.0:
            raise ValueError("capsule radius must be non-negative")

    def placed(self, frame: PoseVector) -> "LinkGeometry":
        """The same capsule with endpoints mapped into the world frame."""
        return LinkGeometry(
            frame.p + frame.q.rotate(self.a),
            frame.p + frame.q.rotate(self.b),
            self.radius,
        )


@dataclass(frozen=True, eq=False)
class Sphere:
    """Sphere (or circle, in planar scenes)."""

    center: np.ndarray
    radius: float
    id: str = "sphere"

    def __post_init__(self):
        object.__setattr__(self, "center", _vec3(self.center, "sphere center"))
        if self.radius < 0.0:
            raise ValueError("sphere radius must be non-negative")


@dataclass(frozen=True, eq=False)
class Capsule:
    """Capsule obstacle: segment core with a radius."""

    a: np.ndarray
    b: np.ndarray
    radius: float
    id: str = "capsule"

    def __post_init__(self):
        object.__setattr__(self, "a", _vec3(self.a, "capsule endpoint a"))
        object.__setattr__(self, "b", _vec3(self.b, "capsule endpoint b"))
        if self.radius < 0.0:
            raise ValueError("capsule radius must be non-negative")


@dataclass(frozen=True, eq=False)
class Wall:
    """Thick segment; behaves as a capsule of radius thickness / 2."""

    a: np.ndarray
    b: np.ndarray
    thickness: float = 0.0
    id: str = "wall"

    def __post_init__(self):
        object.__setattr__(self, "a", _vec3(self.a, "wall endpoint a"))
        object.__setattr__(self, "b", _vec3(self.b, "wall endpoint b"))
        if self.thickness < 0.0:
            raise ValueError("wall thickness must be non-negative")


@dataclass(frozen=True, eq=False)
class Box:
    """Axis-aligned box."""

    lo: np.ndarray
    hi: np.ndarray
    id: str = "box"

    def __post_init__(self):
        object.__setattr__(self, "lo", _vec3(self.lo, "box min corner"))
        object.__setattr__(self, "hi", _vec3(self.hi, "box max corner"))
        if np.any(self.lo > self.hi):
            raise ValueError("box min corner must be <= max corner componentwise")


Obstacle = Union[Sphere, Capsule, Wall, Box]


@dataclass(frozen=True, eq=False)
class ContactInfo:
    """One virtual contact between a link and an obstacle.

    ``normal`` points from the obstacle toward the link; ``witness`` is the
    point on the link surface closest to the obstacle, so the obstacle-side
    witness is ``witness - psi * normal``.
    """

    link_index: int
    psi: float
    normal: np.ndarray
    witness: np.ndarray
    obstacle_id: str

    def __post_init__(self):
        object.__setattr__(self, "normal", _vec3(self.normal, "contact normal"))
        object.__setattr__(self, "witness", _vec3(self.witness, "contact witness"))
        n = np.linalg.norm(self.normal)
        if abs(n - 1.0) > 1e-7:
            raise ValueError(f"contact normal must be unit length, norm {n!r}")


def _closest_point_on_segment(p, a, b):
    ab = b - a
    denom = float(np.dot(ab, ab))
    if denom < _EPS:
        return 0.0, a
    t = float(np.dot(p - a, ab)) / denom
    t = min(1.0, max(0.0, t))
    return t, a + t * ab


def _closest_points_segments(p0, p1, q0, q1):
    """Closest points between segments [p0,p1] and [q0,q1] (clamped algebra)."""
    d1 = p1 - p0
    d2 = q1 - q0
    r = p0 - q0
    a = float(np.dot(d1, d1))
    e = float(np.dot(d2, d2))
    f = float(np.dot(d2, r))
    if a < _EPS and e < _EPS:
        return p0, q0
    if a < _EPS:
        t = min(1.0, max(0.0, f / e))
        return p0, q0 + t * d2
    c = float(np.dot(d1, r))
    if e < _EPS:
        s = min(1.0, max(0.0, -c / a))
        return p0 + s * d1, q0
    b = float(np.dot(d1, d2))
    denom = a * e - b * b
    if denom > _EPS:
        s = min(1.0, max(0.0, (b * f - c * e) / denom))
    else:
        s = 0.0
    t = (b * s + f) / e
    if t < 0.0:
        t = 0.0
        s = min(1.0, max(0.0, -c / a))
    elif t > 1.0:
        t = 1.0
        s = min(1.0, max(0.0, (b - c) / a))
    return p0 + s * d1, q0 + t * d2


def _point_box_signed(p, lo, hi):
    """Signed distance from a point to a box plus outward direction and witness."""
    clamped = np.minimum(np.maximum(p, lo), hi)
    delta = p - clamped
    dist = float(np.linalg.norm(delta))
    if dist > _EPS:
        normal = delta / dist
        return dist, normal, clamped
    # Inside: depth to the nearest face, normal along that face's axis.
    gaps_hi = hi - p
    gaps_lo = p - lo
    axis = 0
    best = math.inf
    sign = 1.0
    for k in range(3):
        if gaps_hi[k] < best:
            best = float(gaps_hi[k])
            axis, sign = k, 1.0
        if gaps_lo[k] < best:
            best = float(gaps_lo[k])
            axis, sign = k, -1.0
    normal = np.zeros(3)
    normal[axis] = sign
    witness = np.array(p)
    witness[axis] = hi[axis] if sign > 0 else lo[axis]
    return -best, normal, witness


def _segment_box_signed(a, b, lo, hi):
    """Minimum signed point-box distance along a segment.

    Coarse sampling plus golden-section refinement; the outside distance is
    convex along the segment so the refinement is reliable, and penetration
    only arises from invalid inputs where coarse accuracy suffices.
    """
    ab = b - a
    if float(np.dot(ab, ab)) < _EPS:
        return (0.0,) + _point_box_signed(a, lo, hi)

    def sd(t):
        return _point_box_signed(a + t * ab, lo, hi)[0]

    samples = 33
    ts = np.linspace(0.0, 1.0, samples)
    vals = [sd(t) for t in ts]
    k = int(np.argmin(vals))
    t_lo = ts[max(0, k - 1)]
    t_hi = ts[min(samples - 1, k + 1)]
    phi = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = t_hi - phi * (t_hi - t_lo)
    x2 = t_lo + phi * (t_hi - t_lo)
    f1, f2 = sd(x1), sd(x2)
    for _ in range(60):
        if f1 <= f2:
            t_hi, x2, f2 = x2, x1, f1
            x1 = t_hi - phi * (t_hi - t_lo)
            f1 = sd(x1)
        else:
            t_lo, x1, f1 = x1, x2, f2
            x2 = t_lo + phi * (t_hi - t_lo)
            f2 = sd(x2)
    t_best = x1 if f1 <= f2 else x2
    dist, normal, witness = _point_box_signed(a + t_best * ab, lo, hi)
    return t_best, dist, normal, witness


def signed_distance(link: LinkGeometry, obstacle: Obstacle, link_index: int = 0) -> ContactInfo:
    """Signed clearance between a world-placed link capsule and an obstacle."""
    return _signed_distance_raw(link.a, link.b, link.radius, obstacle, link_index)


def _signed_distance_core(a, b, r_link, obstacle):
    """(psi, normal, link-surface witness) for a world capsule vs an obstacle."""
    if isinstance(obstacle, Sphere):
        _, cp = _closest_point_on_segment(obstacle.center, a, b)
        delta = cp - obstacle.center
        dist = math.sqrt(float(delta @ delta))
        normal = delta / dist if dist > _EPS else _DEGENERATE_NORMAL
        psi = dist - obstacle.radius - r_link
        witness = cp - r_link * normal
    elif isinstance(obstacle, (Capsule, Wall)):
        r_obs = obstacle.radius if isinstance(obstacle, Capsule) else 0.5 * obstacle.thickness
        cp_link, cp_obs = _closest_points_segments(a, b, obstacle.a, obstacle.b)
        delta = cp_link - cp_obs
        dist = math.sqrt(float(delta @ delta))
        normal = delta / dist if dist > _EPS else _DEGENERATE_NORMAL
        psi = dist - r_obs - r_link
        witness = cp_link - r_link * normal
    elif isinstance(obstacle, Box):
        t, dist, normal, _ = _segment_box_signed(a, b, obstacle.lo, obstacle.hi)
        cp_link = a + t * (b - a)
        psi = dist - r_link
        witness = cp_link - r_link * normal
    else:
        raise TypeError(f"unsupported obstacle type {type(obstacle).__name__}")
    return float(psi), normal, witness


def _signed_distance_raw(a, b, r_link, obstacle, link_index) -> ContactInfo:
    psi, normal, witness = _signed_distance_core(a, b, r_link, obstacle)
    return ContactInfo(link_index, psi, normal, witness, obstacle.id)


def detect_contacts(chain, theta, obstacles: Sequence[Obstacle], d_active: float) -> List[ContactInfo]:
    """All (link, obstacle) virtual contacts with psi below ``d_active``.

    One contact per pair (the minimum-distance witness), sorted by ascending
    psi with (link, obstacle) order breaking ties deterministically.
    """
    from .kinematics import _sweep

    if d_active <= 0.0:
        raise ValueError("activation radius must be positive")
    if chain.dof == 0:
        return []
    _, _, frames = _sweep(chain, chain.check_joint_vector(theta))
    return detect_contacts_frames(chain, frames, obstacles, d_active)


def detect_contacts_frames(chain, frames, obstacles: Sequence[Obstacle],
                           d_active: float) -> List[ContactInfo]:
    """detect_contacts on precomputed raw (quaternion, position) link frames."""
    from .dualquat import quat_rotate

    found = []
    for k, (geom, (q, p)) in enumerate(zip(chain.links, frames)):
        if geom is None:
            continue
        a = p + quat_rotate(q, geom.a)
        b = a if geom.a is geom.b or np.array_equal(geom.a, geom.b) else p + quat_rotate(q, geom.b)
        for j, obstacle in enumerate(obstacles):
            ci = _signed_distance_raw(a, b, geom.radius, obstacle, k)
            if ci.psi < d_active:
                found.append((ci.psi, k, j, ci))
    found.sort(key=lambda item: (item[0], item[1], item[2]))
    return [item[3] for item in found]


@dataclass
class ClearanceReport:
    """Per-step minimum clearances of a joint path against a scene."""

    eps: float
    tol: float
    waypoint_min: List[float] = field(default_factory=list)
    segment_min: List[float] = field(default_factory=list)
    min_psi: float = math.inf
    worst_violation: float = 0.0
    passed: bool = True
    first_violation: Optional[int] = None

    def summary(self) -> dict:
        return {
            "eps": self.eps,
            "tol": self.tol,
            "min_psi": None if math.isinf(self.min_psi) else self.min_psi,
            "worst_violation": self.worst_violation,
            "passed": self.passed,
            "first_violation": self.first_violation,
            "waypoints": len(self.waypoint_min),
        }


def min_clearance(chain, theta, obstacles: Sequence[Obstacle]) -> float:
    """Smallest signed distance over all link/obstacle pairs (inf if none)."""
    from .dualquat import quat_rotate
    from .kinematics import _sweep

    best = math.inf
    if not obstacles or chain.dof == 0:
        return best
    _, _, frames = _sweep(chain, chain.check_joint_vector(theta))
    for geom, (q, p) in zip(chain.links, frames):
        if geom is None:
            continue
        a = p + quat_rotate(q, geom.a)
        b = a if np.array_equal(geom.a, geom.b) else p + quat_rotate(q, geom.b)
        for obstacle in obstacles:
            psi, _, _ = _signed_distance_core(a, b, geom.radius, obstacle)
            if psi < best:
                best = psi
    return best


def validate_clearance(
    chain,
    theta_sequence: Sequence[np.ndarray],
    obstacles: Sequence[Obstacle],
    eps: float,
    tol: float = 1e-6,
    intra_steps: int = 4,
) -> ClearanceReport:
    """Audit a joint path: every waypoint (and ``intra_steps`` joint-space
    interpolates per step) must clear every obstacle by at least eps - tol.
    """
    report = ClearanceReport(eps=eps, tol=tol)
    thetas = [np.asarray(t, dtype=float) for t in theta_sequence]
    for i, theta in enumerate(thetas):
        psi = min_clearance(chain, theta, obstacles)
        report.waypoint_min.append(psi)
        if psi < report.min_psi:
            report.min_psi = psi
        if psi < eps - tol and report.first_violation is None:
            report.first_violation = i
    for i in range(len(thetas) - 1):
        seg_best = math.inf
        for j in range(1, intra_steps + 1):
            f = j / (intra_steps + 1.0)
            psi = min_clearance(chain, (1.0 - f) * thetas[i] + f * thetas[i + 1], obstacles)
            seg_best = min(seg_best, psi)
        report.segment_min.append(seg_best)
        if seg_best < report.min_psi:
            report.min_psi = seg_best
        if seg_best < eps - tol and report.first_violation is None:
            report.first_violation = i
    if not math.isinf(report.min_psi):
        report.worst_violation = max(0.0, eps - report.min_psi)
    report.passed = report.first_violation is None
    return report
