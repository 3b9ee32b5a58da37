"""Serial-chain forward kinematics, Jacobians and resolved-rate matrices.

Chains are described joint by joint: each joint carries its axis and origin
in the parent link's frame (screw-style, not DH). Jacobians use the spatial
convention: the twist is ``[v, w]`` with ``v`` the base-frame velocity of
the end-effector point and ``w`` the base-frame angular velocity. The pose
vector is the 7-vector (position, quaternion); the quaternion-rate block of
the representation Jacobian is derived for that same convention.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .dualquat import PoseVector, UnitQuaternion, quat_angle, quat_multiply, quat_rotate
from .geometry import LinkGeometry

REVOLUTE = "revolute"
PRISMATIC = "prismatic"

# Singular values below this are truncated by the exact (lambda = 0) pseudoinverse.
_SVD_CUTOFF = 1e-10


class SingularityError(RuntimeError):
    """Raised when an undamped inverse hits a rank-deficient Jacobian."""


@dataclass(frozen=True)
class Joint:
    """One joint: rotation about (or translation along) an axis fixed in the
    parent frame, located at ``origin`` in that frame."""

    kind: str
    axis: np.ndarray
    origin: np.ndarray
    limits: Tuple[float, float] = (-math.inf, math.inf)

    def __post_init__(self):
        if self.kind not in (REVOLUTE, PRISMATIC):
            raise ValueError(f"joint kind must be revolute or prismatic, got {self.kind!r}")
        axis = np.array(self.axis, dtype=float).reshape(-1)
        if axis.shape == (2,):
            axis = np.array([axis[0], axis[1], 0.0])
        if axis.shape != (3,):
            raise ValueError("joint axis must be a 3-vector")
        n = float(np.linalg.norm(axis))
        if abs(n - 1.0) > 1e-9:
            raise ValueError(f"joint axis must be unit length, norm {n!r}")
        axis.flags.writeable = False
        object.__setattr__(self, "axis", axis)
        origin = np.array(self.origin, dtype=float).reshape(-1)
        if origin.shape == (2,):
            origin = np.array([origin[0], origin[1], 0.0])
        if origin.shape != (3,):
            raise ValueError("joint origin must be a 3-vector")
        origin.flags.writeable = False
        object.__setattr__(self, "origin", origin)
        lo, hi = float(self.limits[0]), float(self.limits[1])
        if lo > hi:
            raise ValueError(f"joint limits out of order: {lo} > {hi}")
        object.__setattr__(self, "limits", (lo, hi))


class KinematicChain:
    """Serial robot: ordered joints, per-link collision capsules, base pose
    and a fixed end-effector offset from the last link frame."""

    def __init__(
        self,
        joints: Sequence[Joint],
        links: Sequence[Optional[LinkGeometry]],
        base: Optional[PoseVector] = None,
        ee_offset: Optional[PoseVector] = None,
    ):
        self.joints = list(joints)
        self.links = list(links)
        if len(self.links) != len(self.joints):
            raise ValueError(
                f"chain needs one link entry per joint: {len(self.joints)} joints, "
                f"{len(self.links)} links"
            )
        self.base = base if base is not None else PoseVector.identity()
        self.ee_offset = ee_offset if ee_offset is not None else PoseVector.identity()
        self._joint_reach = self._reach_bounds()

    def _reach_bounds(self) -> np.ndarray:
        """Conservative per-radian (or per-length) travel of any collision
        surface point when one joint moves; used to skip exact motion checks."""
        n = self.dof
        reach = np.zeros(n)
        for j in range(n):
            if self.joints[j].kind == PRISMATIC:
                reach[j] = 1.0
                continue
            offset = 0.0
            worst = 0.0
            for k in range(j, n):
                if k > j:
                    offset += float(np.linalg.norm(self.joints[k].origin))
                geom = self.links[k]
                if geom is not None:
                    extent = max(float(np.linalg.norm(geom.a)), float(np.linalg.norm(geom.b)))
                    worst = max(worst, offset + extent + geom.radius)
            reach[j] = worst
        return reach

    @property
    def dof(self) -> int:
        return len(self.joints)

    def check_joint_vector(self, theta) -> np.ndarray:
        arr = np.asarray(theta, dtype=float).reshape(-1)
        if arr.shape != (self.dof,):
            raise ValueError(f"joint vector needs {self.dof} entries, got shape {arr.shape}")
        return arr


def _sweep(chain: KinematicChain, theta: np.ndarray):
    """Walk the chain: world joint axes/origins and per-link frames."""
    q = chain.base.q.wxyz
    p = chain.base.p
    axes, origins, frames = [], [], []
    for joint, value in zip(chain.joints, theta):
        axis_w = quat_rotate(q, joint.axis)
        if joint.kind == REVOLUTE:
            p = p + quat_rotate(q, joint.origin)
            half = 0.5 * float(value)
            rot = np.concatenate(([math.cos(half)], math.sin(half) * joint.axis))
            q = quat_multiply(q, rot)
        else:
            p = p + quat_rotate(q, joint.origin + joint.axis * float(value))
        axes.append(axis_w)
        origins.append(np.array(p))
        frames.append((np.array(q), np.array(p)))
    return axes, origins, frames


def _frame_pose(q: np.ndarray, p: np.ndarray) -> PoseVector:
    return PoseVector(p, UnitQuaternion(q, normalize=True).canonical())


def forward_kinematics(chain: KinematicChain, theta) -> PoseVector:
    """Base-frame pose of the end-effector at the given joint vector."""
    theta = chain.check_joint_vector(theta)
    if chain.dof == 0:
        return chain.base.compose(chain.ee_offset)
    _, _, frames = _sweep(chain, theta)
    q, p = frames[-1]
    p_ee = p + quat_rotate(q, chain.ee_offset.p)
    q_ee = quat_multiply(q, chain.ee_offset.q.wxyz)
    return _frame_pose(q_ee, p_ee)


def link_frames(chain: KinematicChain, theta) -> List[PoseVector]:
    """One base-frame pose per link (the frame after its joint's motion)."""
    theta = chain.check_joint_vector(theta)
    if chain.dof == 0:
        return [chain.base]
    _, _, frames = _sweep(chain, theta)
    return [_frame_pose(q, p) for q, p in frames]


def manipulator_jacobian(chain: KinematicChain, theta) -> np.ndarray:
    """Spatial Jacobian: column k is joint k's twist at the end-effector point."""
    theta = chain.check_joint_vector(theta)
    axes, origins, frames = _sweep(chain, theta)
    q, p = frames[-1]
    p_ee = p + quat_rotate(q, chain.ee_offset.p)
    return _point_jacobian(chain, axes, origins, p_ee, chain.dof)


def contact_jacobian(chain: KinematicChain, theta, link_index: int, witness) -> np.ndarray:
    """Jacobian of a witness point attached to ``link_index``.

    Columns past the contact link are zero, so the shape is always 6 x n.
    """
    theta = chain.check_joint_vector(theta)
    if not 0 <= link_index < chain.dof:
        raise ValueError(f"link index {link_index} out of range for a {chain.dof}-joint chain")
    witness = np.asarray(witness, dtype=float).reshape(-1)
    if witness.shape == (2,):
        witness = np.array([witness[0], witness[1], 0.0])
    axes, origins, _ = _sweep(chain, theta)
    return _point_jacobian(chain, axes, origins, witness, link_index + 1)


def _point_jacobian(chain, axes, origins, point, n_active) -> np.ndarray:
    jac = np.zeros((6, chain.dof))
    px, py, pz = point
    for k in range(n_active):
        ax, ay, az = axes[k]
        if chain.joints[k].kind == REVOLUTE:
            rx, ry, rz = px - origins[k][0], py - origins[k][1], pz - origins[k][2]
            jac[0, k] = ay * rz - az * ry
            jac[1, k] = az * rx - ax * rz
            jac[2, k] = ax * ry - ay * rx
            jac[3, k] = ax
            jac[4, k] = ay
            jac[5, k] = az
        else:
            jac[0, k] = ax
            jac[1, k] = ay
            jac[2, k] = az
    return jac


def representation_jacobian(q: UnitQuaternion) -> np.ndarray:
    """6x7 map from pose-vector rates (p_dot, q_dot) to the spatial twist.

    Position rates pass through; the angular block is w = 2 H(q) q_dot with
    H built from the quaternion product q_dot ⊗ q*.
    """
    if not isinstance(q, UnitQuaternion):
        q = UnitQuaternion(q)
    w = q.w
    x, y, z = q.vec
    jac = np.zeros((6, 7))
    jac[:3, :3] = np.eye(3)
    h = np.zeros((3, 4))
    h[:, 0] = -q.vec
    h[:, 1:] = w * np.eye(3) + np.array([
        [0.0, -z, y],
        [z, 0.0, -x],
        [-y, x, 0.0],
    ])
    jac[3:, 3:] = 2.0 * h
    return jac


def pseudoinverse(mat, lam: float = 1e-6) -> np.ndarray:
    """Damped Moore-Penrose inverse via SVD.

    Singular values map to s / (s^2 + lam^2); at lam = 0 this is the exact
    pseudoinverse with values below 1e-10 truncated.
    """
    mat = np.asarray(mat, dtype=float)
    u, s, vt = np.linalg.svd(mat, full_matrices=False)
    if lam == 0.0:
        inv = np.zeros_like(s)
        keep = s > _SVD_CUTOFF
        inv[keep] = 1.0 / s[keep]
    else:
        inv = s / (s * s + lam * lam)
    return (vt.T * inv) @ u.T


def b_matrix(jac: np.ndarray, jac_r: np.ndarray, lam: float = 1e-6) -> np.ndarray:
    """Resolved-rate matrix J^T (J J^T + lam^2 I)^-1 J_r mapping pose-vector
    increments to joint increments. With lam = 0 a rank-deficient J raises
    :class:`SingularityError` instead of dividing by zero.
    """
    jac = np.asarray(jac, dtype=float)
    jac_r = np.asarray(jac_r, dtype=float)
    if jac.shape[0] != 6 or jac_r.shape != (6, 7):
        raise ValueError("expected a 6xn manipulator Jacobian and a 6x7 representation Jacobian")
    u, s, vt = np.linalg.svd(jac, full_matrices=False)
    if lam == 0.0:
        if len(s) < 6 or s[-1] <= _SVD_CUTOFF:
            raise SingularityError("J J^T is singular; use a positive damping value")
        inv = 1.0 / s
    else:
        inv = s / (s * s + lam * lam)
    return (vt.T * inv) @ u.T @ jac_r


def nullspace_projector(jac_e: np.ndarray, lam: float = 1e-6) -> np.ndarray:
    """Joint-space projector I - J^+ J; projected joint rates leave the
    end-effector twist untouched (to first order)."""
    jac_e = np.asarray(jac_e, dtype=float)
    n = jac_e.shape[1]
    return np.eye(n) - pseudoinverse(jac_e, lam) @ jac_e


@dataclass(frozen=True)
class Jacobians:
    """The (J, J_r, B) triple of one configuration."""

    j: np.ndarray
    j_r: np.ndarray
    b: np.ndarray

    @classmethod
    def at_configuration(cls, chain: KinematicChain, theta, lam: float = 1e-6) -> "Jacobians":
        jac = manipulator_jacobian(chain, theta)
        pose = forward_kinematics(chain, theta)
        jac_r = representation_jacobian(pose.q)
        b = b_matrix(jac, jac_r, lam)
        if lam == 0.0:
            residual = float(np.max(np.abs(jac @ b - jac_r)))
            if residual > 1e-8:
                raise SingularityError(f"J B deviates from J_r by {residual!r}")
        return cls(jac, jac_r, b)


def joint_limit_clamp(theta, chain: KinematicChain) -> Tuple[np.ndarray, Tuple[int, ...]]:
    """Componentwise clamp to the joint limits; returns the indices clamped.

    Limits are inclusive: a joint sitting exactly on a bound is untouched.
    """
    theta = chain.check_joint_vector(theta)
    lo = np.array([j.limits[0] for j in chain.joints])
    hi = np.array([j.limits[1] for j in chain.joints])
    clamped = np.minimum(np.maximum(theta, lo), hi)
    flags = tuple(int(i) for i in np.nonzero(clamped != theta)[0])
    return clamped, flags


def pose_delta(current: PoseVector, target: PoseVector) -> np.ndarray:
    """7-vector target - current with the target quaternion sign-aligned to
    the current one, so small pose changes give small deltas."""
    q_t = target.q.wxyz
    if float(np.dot(current.q.wxyz, q_t)) < 0.0:
        q_t = -q_t
    return np.concatenate((target.p - current.p, q_t - current.q.wxyz))


def ik_solve(
    chain: KinematicChain,
    target: PoseVector,
    theta_seed,
    pos_tol: float = 1e-6,
    ori_tol: float = 1e-6,
    lam: float = 1e-6,
    max_iters: int = 500,
    step: float = 0.5,
) -> Tuple[np.ndarray, bool]:
    """Damped-least-squares inverse kinematics (utility seed generator).

    Iterates theta += step * B (target - pose) with joint-limit clamping.
    Returns (theta, converged).
    """
    theta = chain.check_joint_vector(theta_seed).copy()
    for _ in range(max_iters):
        pose = forward_kinematics(chain, theta)
        pos_err = float(np.linalg.norm(target.p - pose.p))
        ori_err = quat_angle(pose.q, target.q)
        if pos_err <= pos_tol and ori_err <= ori_tol:
            return theta, True
        mats = Jacobians.at_configuration(chain, theta, lam)
        theta = theta + step * (mats.b @ pose_delta(pose, target))
        theta, _ = joint_limit_clamp(theta, chain)
    pose = forward_kinematics(chain, theta)
    ok = (
        float(np.linalg.norm(target.p - pose.p)) <= pos_tol
        and quat_angle(pose.q, target.q) <= ori_tol
    )
    return theta, ok
