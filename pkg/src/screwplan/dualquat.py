"""Quaternion / dual quaternion algebra and constant-screw pose interpolation.

Quaternions are scalar-first ``(w, x, y, z)``. A rigid pose is carried either
as a :class:`PoseVector` (position + unit quaternion, the 7-vector used by the
planner) or as a :class:`UnitDualQuaternion` whose dual part encodes the
translation as ``0.5 * t ⊗ q_real``. Both are immutable values; every
operation here is pure.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Constructor-time tolerance on unit norm / real-dual orthogonality.
UNIT_TOL = 1e-9
# Below this rotation angle a screw degenerates to a pure translation.
_ANGLE_EPS = 1e-10
# Below this shift magnitude the motion is treated as the identity.
_SHIFT_EPS = 1e-12


def _vector(value, size, name):
    arr = np.array(value, dtype=float).reshape(-1)
    if arr.shape != (size,):
        raise ValueError(f"{name} must have {size} components, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    arr.flags.writeable = False
    return arr


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product of two (w, x, y, z) arrays."""
    w1, x1, y1, z1 = a
    w2, x2, y2, z2 = b
    return np.array([
        w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
        w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
        w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
    ])


def quat_conjugate(a: np.ndarray) -> np.ndarray:
    return np.array([a[0], -a[1], -a[2], -a[3]])


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate a 3-vector by a unit quaternion (w, x, y, z)."""
    # v' = v + w t + u x t with t = 2 (u x v); spelled out because numpy's
    # generic cross dominates the planner's hot loop otherwise.
    w, ux, uy, uz = q
    vx, vy, vz = v
    tx = 2.0 * (uy * vz - uz * vy)
    ty = 2.0 * (uz * vx - ux * vz)
    tz = 2.0 * (ux * vy - uy * vx)
    return np.array([
        vx + w * tx + uy * tz - uz * ty,
        vy + w * ty + uz * tx - ux * tz,
        vz + w * tz + ux * ty - uy * tx,
    ])


class UnitQuaternion:
    """A unit-norm quaternion; the orientation half of a pose."""

    __slots__ = ("wxyz",)

    def __init__(self, wxyz, normalize: bool = False):
        arr = np.array(wxyz, dtype=float).reshape(-1)
        if arr.shape != (4,):
            raise ValueError(f"quaternion needs 4 components, got shape {arr.shape}")
        norm = float(np.linalg.norm(arr))
        if normalize:
            if norm < _SHIFT_EPS:
                raise ValueError("cannot normalize a near-zero quaternion")
            arr = arr / norm
        elif abs(norm - 1.0) > UNIT_TOL:
            raise ValueError(f"quaternion norm {norm!r} deviates from 1 beyond {UNIT_TOL}")
        arr.flags.writeable = False
        self.wxyz = arr

    @classmethod
    def identity(cls) -> "UnitQuaternion":
        return cls([1.0, 0.0, 0.0, 0.0])

    @classmethod
    def from_axis_angle(cls, axis, angle: float) -> "UnitQuaternion":
        axis = np.asarray(axis, dtype=float)
        n = np.linalg.norm(axis)
        if n < _SHIFT_EPS:
            raise ValueError("rotation axis must be nonzero")
        half = 0.5 * float(angle)
        return cls(np.concatenate(([math.cos(half)], math.sin(half) * axis / n)))

    @property
    def w(self) -> float:
        return float(self.wxyz[0])

    @property
    def vec(self) -> np.ndarray:
        return self.wxyz[1:]

    def multiply(self, other: "UnitQuaternion") -> "UnitQuaternion":
        return UnitQuaternion(quat_multiply(self.wxyz, other.wxyz), normalize=True)

    def __mul__(self, other: "UnitQuaternion") -> "UnitQuaternion":
        return self.multiply(other)

    def conjugate(self) -> "UnitQuaternion":
        return UnitQuaternion(quat_conjugate(self.wxyz))

    def rotate(self, v) -> np.ndarray:
        return quat_rotate(self.wxyz, np.asarray(v, dtype=float))

    def canonical(self) -> "UnitQuaternion":
        """Sign-canonical representative: w > 0, ties broken on the vector part."""
        arr = self.wxyz
        for c in arr:
            if c > 0.0:
                return self
            if c < 0.0:
                return UnitQuaternion(-arr)
        return self

    def negate(self) -> "UnitQuaternion":
        return UnitQuaternion(-self.wxyz)

    def __repr__(self) -> str:
        w, x, y, z = self.wxyz
        return f"UnitQuaternion([{w:.9g}, {x:.9g}, {y:.9g}, {z:.9g}])"


def quat_angle(a: UnitQuaternion, b: UnitQuaternion) -> float:
    """Geodesic angle in [0, pi] between two orientations (double cover folded)."""
    rel = quat_multiply(quat_conjugate(a.wxyz), b.wxyz)
    return 2.0 * math.atan2(float(np.linalg.norm(rel[1:])), abs(float(rel[0])))


@dataclass(frozen=True)
class PoseVector:
    """End-effector pose as the 7-vector (position, orientation quaternion)."""

    p: np.ndarray
    q: UnitQuaternion

    def __post_init__(self):
        object.__setattr__(self, "p", _vector(self.p, 3, "position"))
        if not isinstance(self.q, UnitQuaternion):
            object.__setattr__(self, "q", UnitQuaternion(self.q))

    @classmethod
    def identity(cls) -> "PoseVector":
        return cls(np.zeros(3), UnitQuaternion.identity())

    @classmethod
    def from_array(cls, gamma) -> "PoseVector":
        arr = np.asarray(gamma, dtype=float).reshape(-1)
        if arr.shape != (7,):
            raise ValueError(f"pose vector needs 7 components, got shape {arr.shape}")
        return cls(arr[:3], UnitQuaternion(arr[3:], normalize=True))

    def as_array(self) -> np.ndarray:
        return np.concatenate((self.p, self.q.wxyz))

    def compose(self, other: "PoseVector") -> "PoseVector":
        """Rigid composition self ∘ other (other expressed in self's frame)."""
        return PoseVector(self.p + self.q.rotate(other.p), self.q * other.q)

    def __repr__(self) -> str:
        return f"PoseVector(p={np.array2string(self.p, precision=6)}, q={self.q!r})"


@dataclass(frozen=True)
class ScrewParameters:
    """Screw decomposition of a rigid displacement.

    ``direction``/``moment`` are the Plücker coordinates of the screw axis,
    ``theta`` the rotation about it (radians, in [0, pi]) and ``d`` the slide
    along it. Pure translations carry theta = 0, direction along the shift,
    and zero moment.
    """

    direction: np.ndarray
    moment: np.ndarray
    theta: float
    d: float

    def __post_init__(self):
        object.__setattr__(self, "direction", _vector(self.direction, 3, "direction"))
        object.__setattr__(self, "moment", _vector(self.moment, 3, "moment"))
        n = np.linalg.norm(self.direction)
        if abs(n - 1.0) > 1e-7:
            raise ValueError(f"screw direction must be unit length, norm {n!r}")


class UnitDualQuaternion:
    """Unit dual quaternion: real part rotation, dual part coupled translation."""

    __slots__ = ("real", "dual")

    def __init__(self, real, dual, normalize: bool = False):
        if isinstance(real, UnitQuaternion) and not normalize:
            real_arr = real.wxyz
        else:
            real_arr = np.array(
                real.wxyz if isinstance(real, UnitQuaternion) else real, dtype=float
            ).reshape(-1)
        dual_arr = np.array(dual, dtype=float).reshape(-1)
        if real_arr.shape != (4,) or dual_arr.shape != (4,):
            raise ValueError("dual quaternion parts need 4 components each")
        if normalize:
            norm = float(np.linalg.norm(real_arr))
            if norm < _SHIFT_EPS:
                raise ValueError("cannot normalize: near-zero real part")
            real_arr = real_arr / norm
            dual_arr = dual_arr / norm
            dual_arr = dual_arr - real_arr * float(np.dot(real_arr, dual_arr))
        else:
            norm = float(np.linalg.norm(real_arr))
            if abs(norm - 1.0) > UNIT_TOL:
                raise ValueError(f"real part norm {norm!r} deviates from 1 beyond {UNIT_TOL}")
            ortho = abs(float(np.dot(real_arr, dual_arr)))
            if ortho > UNIT_TOL:
                raise ValueError(f"real-dual inner product {ortho!r} exceeds {UNIT_TOL}")
        real_arr = np.array(real_arr)
        real_arr.flags.writeable = False
        dual_arr = np.array(dual_arr)
        dual_arr.flags.writeable = False
        self.real = UnitQuaternion(real_arr)
        self.dual = dual_arr

    @classmethod
    def identity(cls) -> "UnitDualQuaternion":
        return cls(UnitQuaternion.identity(), np.zeros(4))

    @classmethod
    def from_translation(cls, t) -> "UnitDualQuaternion":
        t = np.asarray(t, dtype=float)
        return cls(UnitQuaternion.identity(), np.concatenate(([0.0], 0.5 * t)))

    def translation(self) -> np.ndarray:
        """Translation vector: 2 * (dual ⊗ real*) vector part."""
        return 2.0 * quat_multiply(self.dual, quat_conjugate(self.real.wxyz))[1:]

    def negate(self) -> "UnitDualQuaternion":
        return UnitDualQuaternion(self.real.negate(), -self.dual)

    def as_array(self) -> np.ndarray:
        return np.concatenate((self.real.wxyz, self.dual))

    def __repr__(self) -> str:
        r, d = self.real.wxyz, self.dual
        return (
            f"UnitDualQuaternion(real=[{r[0]:.9g}, {r[1]:.9g}, {r[2]:.9g}, {r[3]:.9g}],"
            f" dual=[{d[0]:.9g}, {d[1]:.9g}, {d[2]:.9g}, {d[3]:.9g}])"
        )


def pose_to_dq(gamma: PoseVector) -> UnitDualQuaternion:
    """Convert a pose vector to its unit dual quaternion."""
    t_quat = np.concatenate(([0.0], gamma.p))
    dual = 0.5 * quat_multiply(t_quat, gamma.q.wxyz)
    return UnitDualQuaternion(gamma.q, dual, normalize=True)


def dq_to_pose(dq: UnitDualQuaternion) -> PoseVector:
    """Convert back to a pose vector; the quaternion is sign-canonicalized."""
    norm = float(np.linalg.norm(dq.real.wxyz))
    if abs(norm - 1.0) > 1e-6:
        raise ValueError(f"real part norm {norm!r} deviates from 1 beyond 1e-6")
    if abs(float(np.dot(dq.real.wxyz, dq.dual))) > 1e-6:
        raise ValueError("real-dual inner product exceeds 1e-6")
    return PoseVector(dq.translation(), dq.real.canonical())


def dq_multiply(a: UnitDualQuaternion, b: UnitDualQuaternion) -> UnitDualQuaternion:
    """Dual quaternion product = composition of rigid transforms."""
    real = quat_multiply(a.real.wxyz, b.real.wxyz)
    dual = quat_multiply(a.real.wxyz, b.dual) + quat_multiply(a.dual, b.real.wxyz)
    return UnitDualQuaternion(real, dual, normalize=True)


def dq_conjugate(a: UnitDualQuaternion) -> UnitDualQuaternion:
    """Quaternion conjugate of both parts; the inverse for unit inputs."""
    return UnitDualQuaternion(a.real.conjugate(), quat_conjugate(a.dual))


def _canonical_dq(dq: UnitDualQuaternion) -> UnitDualQuaternion:
    """Pick the double-cover representative with non-negative real scalar."""
    if dq.real.w < 0.0:
        return dq.negate()
    return dq


def screw_parameters(dq: UnitDualQuaternion) -> ScrewParameters:
    """Extract screw axis, angle and slide from a unit dual quaternion.

    The angle lands in [0, pi] (double cover folded). Degenerate cases:
    near-zero rotation becomes a pure translation; a near-identity motion
    returns a fixed ray (z-axis) with zero magnitudes.
    """
    dq = _canonical_dq(dq)
    q = dq.real.wxyz
    theta = 2.0 * math.atan2(float(np.linalg.norm(q[1:])), float(q[0]))
    t = dq.translation()
    if theta < _ANGLE_EPS:
        shift = float(np.linalg.norm(t))
        if shift < _SHIFT_EPS:
            return ScrewParameters(np.array([0.0, 0.0, 1.0]), np.zeros(3), 0.0, 0.0)
        return ScrewParameters(t / shift, np.zeros(3), 0.0, shift)
    half = 0.5 * theta
    direction = q[1:] / math.sin(half)
    direction = direction / np.linalg.norm(direction)
    d = float(np.dot(t, direction))
    # Daniilidis: moment from translation, axis direction and pitch.
    cot_half = math.cos(half) / math.sin(half)
    moment = 0.5 * (np.cross(t, direction) + cot_half * (t - d * direction))
    return ScrewParameters(direction, moment, theta, d)


def dq_from_screw(s: ScrewParameters) -> UnitDualQuaternion:
    """Rebuild the unit dual quaternion of a screw displacement."""
    if s.theta < _ANGLE_EPS:
        return UnitDualQuaternion.from_translation(s.d * s.direction)
    half = 0.5 * s.theta
    sin_h, cos_h = math.sin(half), math.cos(half)
    real = np.concatenate(([cos_h], sin_h * s.direction))
    dual = np.concatenate((
        [-0.5 * s.d * sin_h],
        sin_h * s.moment + 0.5 * s.d * cos_h * s.direction,
    ))
    return UnitDualQuaternion(real, dual, normalize=True)


def dq_power(dq: UnitDualQuaternion, tau: float) -> UnitDualQuaternion:
    """Scale the screw of ``dq`` by ``tau`` in [0, 1].

    Works on the w >= 0 double-cover representative, so the angle scaled is
    the short one; ``dq_power(a, 1)`` equals ``a`` up to overall sign.
    """
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"interpolation exponent must lie in [0, 1], got {tau!r}")
    s = screw_parameters(dq)
    scaled = ScrewParameters(s.direction, s.moment, tau * s.theta, tau * s.d)
    return dq_from_screw(scaled)


def sclerp(a: UnitDualQuaternion, b: UnitDualQuaternion, tau: float) -> UnitDualQuaternion:
    """Constant-screw interpolation a ⊗ (a* ⊗ b)^tau.

    The sign of ``b`` is pre-selected so the interpolation runs along the
    short screw (real parts with non-negative inner product).
    """
    if float(np.dot(a.real.wxyz, b.real.wxyz)) < 0.0:
        b = b.negate()
    rel = dq_multiply(dq_conjugate(a), b)
    return dq_multiply(a, dq_power(rel, tau))
