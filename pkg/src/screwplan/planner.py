"""Discrete-time task-space planning with complementarity obstacle avoidance.

The local planner interpolates the end-effector pose along the constant
screw toward the goal (one fixed fraction ``tau`` per iteration), converts
each commanded pose increment to joint increments through the resolved-rate
matrix, and resolves nearby obstacles by solving a small LCP whose unknowns
are compensating speeds along the contact normals. Re-anchoring every
iteration at the solved joints lets the deflections accumulate, which is
what makes paths slide along obstacle boundaries instead of stopping there.

Two update modes exist: ``eq6`` applies compensating joint rates directly;
``eq8`` projects them into the null space of the manipulator Jacobian so the
commanded end-effector twist is preserved (used for constraint-tagged task
segments). A point-robot specialization and a task-space RRT wrapper round
out the module.
"""
from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .dualquat import (
    PoseVector,
    UnitQuaternion,
    dq_to_pose,
    pose_to_dq,
    quat_angle,
    quat_multiply,
    quat_rotate,
    sclerp,
)
from .geometry import ContactInfo, LinkGeometry, Obstacle, detect_contacts_frames
from .kinematics import (
    Joint,
    KinematicChain,
    PRISMATIC,
    _frame_pose,
    _point_jacobian,
    _sweep,
    b_matrix,
    forward_kinematics,
    joint_limit_clamp,
    nullspace_projector,
    pose_delta,
    pseudoinverse,
    representation_jacobian,
)
from .lcp import (
    LcpProblem,
    SOLVED,
    assemble_step_lcp,
    contact_normal_6,
    solve_lcp,
    uniqueness_diagnostic,
)

logger = logging.getLogger("screwplan.planner")

REACHED = "reached"
STALLED = "stalled"
ITERATION_LIMIT = "iteration-limit"

MODE_EQ6 = "eq6"
MODE_EQ8 = "eq8"

_STALL_RUNS = 3  # consecutive sub-threshold iterations before declaring a stall


class StepFailure(RuntimeError):
    """A step whose LCP could not be resolved, even contact-by-contact."""

    def __init__(self, message: str, diagnostics: Optional[dict] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass(frozen=True)
class PlannerConfig:
    """Tuning knobs of the local planner.

    ``tau`` is the screw-interpolation fraction per iteration, ``h`` the
    time-step of the state evolution model, ``eps`` the required clearance
    and ``d_active`` the radius at which contacts enter the LCP (default
    5 * eps). The three ``*_speed``/``approach_frac`` fields bound how fast
    link surfaces may move while near obstacles: per step the normal travel
    toward a contact is limited to ``approach_frac`` of the remaining gap
    (floored at ``creep_speed * h``) and total witness travel to
    ``slide_speed * h``, which keeps the time linearization honest.
    """

    tau: float = 0.02
    h: float = 0.01
    eps: float = 0.01
    d_active: Optional[float] = None
    pos_tol: float = 1e-3
    ori_tol: float = 1e-2
    stall_tol: float = 1e-6
    max_iters: int = 5000
    lam: float = 1e-6
    mode: str = MODE_EQ6
    k_p: float = 1.0
    approach_frac: float = 0.9
    creep_speed: float = 5e-3
    slide_speed: float = 0.7
    stall_window: int = 150
    max_pivots: Optional[int] = None

    def __post_init__(self):
        if not 0.0 < self.tau <= 1.0:
            raise ValueError("tau must lie in (0, 1]")
        for name in ("h", "eps", "pos_tol", "ori_tol", "stall_tol", "k_p",
                     "approach_frac", "creep_speed", "slide_speed"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if self.max_iters <= 0:
            raise ValueError("max_iters must be positive")
        if self.lam < 0.0:
            raise ValueError("lam must be non-negative")
        if self.mode not in (MODE_EQ6, MODE_EQ8):
            raise ValueError(f"mode must be {MODE_EQ6!r} or {MODE_EQ8!r}")
        if self.d_active is not None and self.d_active <= self.eps:
            raise ValueError("d_active must exceed eps")

    @property
    def active_radius(self) -> float:
        return self.d_active if self.d_active is not None else 5.0 * self.eps


@dataclass
class StepResult:
    theta: np.ndarray
    pose: PoseVector
    contacts: List[ContactInfo]
    v_c: np.ndarray
    alpha: float
    clamped: Tuple[int, ...]
    problem: Optional[LcpProblem] = None
    diagnostics: Dict[str, object] = field(default_factory=dict)


@dataclass
class PathResult:
    """A planned joint path with its executed poses and per-step contact data."""

    joint_path: List[np.ndarray]
    pose_path: List[PoseVector]
    commanded_path: List[PoseVector]
    contact_log: List[List[Tuple[ContactInfo, float]]]
    status: str
    iterations: int
    final_pos_err: float
    final_ori_err: float
    notes: Dict[str, object] = field(default_factory=dict)

    @classmethod
    def single(cls, theta: np.ndarray, pose: PoseVector, status: str = REACHED,
               pos_err: float = 0.0, ori_err: float = 0.0) -> "PathResult":
        return cls([np.array(theta, dtype=float)], [pose], [], [], status, 0, pos_err, ori_err)

    def extend_with(self, other: "PathResult") -> None:
        """Append another result that starts where this one ends."""
        self.joint_path.extend(other.joint_path[1:])
        self.pose_path.extend(other.pose_path[1:])
        self.commanded_path.extend(other.commanded_path)
        self.contact_log.extend(other.contact_log)
        self.status = other.status
        self.iterations += other.iterations
        self.final_pos_err = other.final_pos_err
        self.final_ori_err = other.final_ori_err


def pose_distance(a: PoseVector, b: PoseVector) -> Tuple[float, float]:
    """Split metric: Euclidean position distance, quaternion geodesic angle."""
    return float(np.linalg.norm(a.p - b.p)), quat_angle(a.q, b.q)


def _raw_angle(qa: np.ndarray, qb: np.ndarray) -> float:
    rel = quat_multiply(np.array([qa[0], -qa[1], -qa[2], -qa[3]]), qb)
    return 2.0 * math.atan2(float(np.linalg.norm(rel[1:])), abs(float(rel[0])))


def _link_motion_bound(chain: KinematicChain, frames_a, theta_b) -> float:
    """Largest surface-point displacement of any collision link between two
    configurations (endpoint travel plus radius times frame rotation)."""
    _, _, frames_b = _sweep(chain, theta_b)
    worst = 0.0
    for geom, (qa, pa), (qb, pb) in zip(chain.links, frames_a, frames_b):
        if geom is None:
            continue
        travel = float(np.linalg.norm((pa + quat_rotate(qa, geom.a))
                                      - (pb + quat_rotate(qb, geom.a))))
        if not np.array_equal(geom.a, geom.b):
            travel = max(travel, float(np.linalg.norm((pa + quat_rotate(qa, geom.b))
                                                      - (pb + quat_rotate(qb, geom.b)))))
        if geom.radius > 0.0:
            travel += geom.radius * _raw_angle(qa, qb)
        worst = max(worst, travel)
    return worst


def step_state(
    theta_t: np.ndarray,
    gamma_t: PoseVector,
    gamma_target: PoseVector,
    chain: KinematicChain,
    obstacles: Sequence[Obstacle],
    cfg: PlannerConfig,
) -> StepResult:
    """One state-evolution step toward a commanded pose.

    Without nearby obstacles this is the plain resolved-rate update. With
    virtual contacts the step LCP supplies compensating speeds that keep the
    linearized clearances at or above eps. The commanded increment may be
    scaled down (``alpha`` < 1) when link surfaces would otherwise travel
    too far for the per-step linearization to be trusted; the outer loop's
    re-interpolation absorbs the remainder.
    """
    theta_t = chain.check_joint_vector(theta_t)
    axes, origins, frames = _sweep(chain, theta_t)
    q_last, p_last = frames[-1]
    p_ee = p_last + quat_rotate(q_last, chain.ee_offset.p)
    q_ee = quat_multiply(q_last, chain.ee_offset.q.wxyz)
    fk = _frame_pose(q_ee, p_ee)
    drift = np.max(np.abs(pose_delta(fk, gamma_t)))
    if drift > 1e-6:
        raise ValueError(f"gamma_t deviates from FK(theta_t) by {drift!r}")

    h = cfg.h
    eps = cfg.eps
    contacts = detect_contacts_frames(chain, frames, obstacles, cfg.active_radius)
    jac = _point_jacobian(chain, axes, origins, p_ee, chain.dof)
    jac_r = representation_jacobian(fk.q)
    b = b_matrix(jac, jac_r, cfg.lam)
    dgamma_full = pose_delta(gamma_t, gamma_target)
    dtheta_full = b @ dgamma_full

    diagnostics: Dict[str, object] = {"n_contacts": len(contacts)}
    alpha = 1.0
    free_budget = cfg.approach_frac * (cfg.active_radius - eps)
    # Guard against tunneling past the activation radius in one step; the
    # cheap per-joint reach bound skips the exact check for small steps.
    if float(np.abs(dtheta_full) @ chain._joint_reach) > free_budget > 0.0:
        motion = _link_motion_bound(chain, frames, theta_t + dtheta_full)
        if motion > free_budget:
            alpha = min(alpha, free_budget / motion)

    if not contacts:
        dtheta = alpha * dtheta_full
        theta_next, clamped = joint_limit_clamp(theta_t + dtheta, chain)
        diagnostics["alpha"] = alpha
        return StepResult(theta_next, forward_kinematics(chain, theta_next), [],
                          np.zeros(0), alpha, clamped, None, diagnostics)

    jacobians = [_point_jacobian(chain, axes, origins, c.witness, c.link_index + 1)
                 for c in contacts]
    rows = [c.normal @ jac_c[:3] for c, jac_c in zip(contacts, jacobians)]
    slide_cap = cfg.slide_speed * h
    creep = cfg.creep_speed * h
    for contact, jac_c, row in zip(contacts, jacobians, rows):
        inward = -float(row @ dtheta_full)
        if inward > 0.0:
            budget = max(cfg.approach_frac * max(contact.psi - eps, 0.0), creep)
            if inward > budget:
                alpha = min(alpha, budget / inward)
        witness_speed = float(np.linalg.norm(jac_c[:3] @ dtheta_full))
        if witness_speed > slide_cap:
            alpha = min(alpha, slide_cap / witness_speed)
    diagnostics["alpha"] = alpha

    dgamma = alpha * dgamma_full
    # Compensating directions: minimum-norm joint motion realizing the
    # Cartesian normal velocity at the witness. Restricting the inverse to
    # the linear rows leaves the link rotation free; the padded 6-row form
    # pins the witness angular velocity too, which is ill-conditioned on
    # rank-deficient (e.g. planar) chains and blows up the step size.
    directions = [pseudoinverse(jac_c[:3], cfg.lam) @ c.normal
                  for c, jac_c in zip(contacts, jacobians)]
    if cfg.mode == MODE_EQ8:
        projector = nullspace_projector(jac, cfg.lam)
        directions = [projector @ d for d in directions]
    problem = assemble_step_lcp(b, dgamma, contacts, jacobians, h, eps,
                                compensating=directions, lam=cfg.lam)
    solution = solve_lcp(problem, cfg.max_pivots)
    dtheta = alpha * dtheta_full
    if solution.status == SOLVED:
        v = solution.z
        diagnostics["lcp_status"] = solution.status
        diagnostics["pivots"] = solution.pivots
    else:
        # Sequential fallback: resolve contacts one at a time in ascending
        # psi order, re-linearizing the clearances in between.
        diagnostics["lcp_status"] = solution.status
        diagnostics["uniqueness"] = uniqueness_diagnostic(problem).reason
        diagnostics["fallback"] = "sequential"
        v = np.zeros(len(contacts))
        dtheta_add = np.zeros(chain.dof)
        for i, (contact, row, direction) in enumerate(zip(contacts, rows, directions)):
            q_i = contact.psi - eps + h * float(row @ (dtheta + dtheta_add))
            m_ii = h * h * float(row @ direction)
            if m_ii <= 1e-12:
                if q_i < -1e-8:
                    raise StepFailure(
                        f"contact on link {contact.link_index} ({contact.obstacle_id}) cannot "
                        f"be compensated (m_ii = {m_ii:.3e}, q = {q_i:.3e})",
                        {"contact": contact, "diagnostics": diagnostics},
                    )
                continue
            v[i] = max(0.0, -q_i / m_ii)
            dtheta_add = dtheta_add + h * v[i] * direction
        residuals = [c.psi - eps + h * float(r @ (dtheta + dtheta_add))
                     for c, r in zip(contacts, rows)]
        if min(residuals) < -1e-8:
            raise StepFailure(
                f"sequential resolution left a linearized clearance at {min(residuals):.3e}",
                {"residuals": residuals, "diagnostics": diagnostics},
            )
        solution = None

    dtheta_add = np.zeros(chain.dof)
    for v_i, direction in zip(v, directions):
        if v_i != 0.0:
            dtheta_add = dtheta_add + h * v_i * direction
    theta_next, clamped = joint_limit_clamp(theta_t + dtheta + dtheta_add, chain)
    if solution is not None:
        diagnostics["min_w"] = float(solution.w.min()) if solution.w.size else 0.0
    return StepResult(theta_next, forward_kinematics(chain, theta_next), contacts, v,
                      alpha, clamped, problem, diagnostics)


def _anchored(pose: PoseVector, goal: PoseVector, anchor: str) -> PoseVector:
    if anchor == "orientation":
        return PoseVector(pose.p, goal.q)
    if anchor == "position":
        return PoseVector(goal.p, pose.q)
    return pose


def local_plan(
    gamma_start: PoseVector,
    gamma_goal: PoseVector,
    theta_start: np.ndarray,
    chain: KinematicChain,
    obstacles: Sequence[Obstacle],
    cfg: PlannerConfig,
    anchor: str = "none",
) -> PathResult:
    """Drive the end-effector from start to goal pose along repeated screw
    interpolations, solving the step LCP at every iteration.

    Terminates when both position and orientation errors drop below their
    tolerances (``reached``), when progress stays below ``stall_tol`` for
    three consecutive iterations (``stalled``), or at ``max_iters``.

    ``anchor`` pins one pose component of the interpolation source to the
    goal's ("orientation" or "position"); used by constraint-tagged task
    segments so the commanded waypoints stay exactly on the constraint.
    """
    theta = chain.check_joint_vector(theta_start).copy()
    fk = forward_kinematics(chain, theta)
    drift = np.max(np.abs(pose_delta(fk, gamma_start)))
    if drift > 1e-6:
        raise ValueError(f"theta_start is not an inverse kinematics solution "
                         f"for gamma_start (pose deviates by {drift:.2e})")
    if anchor not in ("none", "orientation", "position"):
        raise ValueError(f"unknown anchor {anchor!r}")

    gamma_exec = fk
    result = PathResult([theta.copy()], [gamma_exec], [], [], ITERATION_LIMIT, 0,
                        *pose_distance(gamma_exec, gamma_goal))
    if result.final_pos_err <= cfg.pos_tol and result.final_ori_err <= cfg.ori_tol:
        result.status = REACHED
        return result

    dq_goal = pose_to_dq(gamma_goal)
    clamped_union: set = set()
    stall_run = 0
    err_history = [result.final_pos_err + result.final_ori_err]
    for iteration in range(cfg.max_iters):
        source = _anchored(gamma_exec, gamma_goal, anchor)
        dq_new = sclerp(pose_to_dq(source), dq_goal, cfg.tau)
        gamma_cmd = dq_to_pose(dq_new)
        try:
            step = step_state(theta, gamma_exec, gamma_cmd, chain, obstacles, cfg)
        except StepFailure as failure:
            result.status = STALLED
            result.notes["step_failure"] = str(failure)
            result.notes["step_failure_diagnostics"] = failure.diagnostics
            break
        theta = step.theta
        gamma_new = step.pose
        clamped_union.update(step.clamped)
        result.joint_path.append(theta.copy())
        result.pose_path.append(gamma_new)
        result.commanded_path.append(gamma_cmd)
        result.contact_log.append(list(zip(step.contacts, step.v_c)))
        result.iterations += 1
        if logger.isEnabledFor(logging.INFO):
            logger.info("iter=%d pos_err=%.3e contacts=%d alpha=%.3f",
                        result.iterations,
                        float(np.linalg.norm(gamma_new.p - gamma_goal.p)),
                        len(step.contacts), step.alpha)

        pos_err, ori_err = pose_distance(gamma_new, gamma_goal)
        result.final_pos_err, result.final_ori_err = pos_err, ori_err
        if pos_err <= cfg.pos_tol and ori_err <= cfg.ori_tol:
            result.status = REACHED
            break
        step_pos, step_ori = pose_distance(gamma_new, gamma_exec)
        if step_pos < cfg.stall_tol and step_ori < cfg.stall_tol:
            stall_run += 1
            if stall_run >= _STALL_RUNS:
                result.status = STALLED
                break
        else:
            stall_run = 0
        # Secondary stall test for contact limit cycles whose wiggle exceeds
        # stall_tol: no net motion and no error improvement over a window.
        w = cfg.stall_window
        if result.iterations >= w:
            old_pose = result.pose_path[result.iterations - w]
            disp, turn = pose_distance(gamma_new, old_pose)
            radius = 5.0 * cfg.slide_speed * cfg.h
            improve = err_history[result.iterations - w] - (pos_err + ori_err)
            if disp < radius and turn < radius and improve < 0.1 * radius:
                result.status = STALLED
                result.notes["stall_window"] = w
                break
        err_history.append(pos_err + ori_err)
        gamma_exec = gamma_new
    result.notes["clamped_joints"] = tuple(sorted(clamped_union))
    return result


def point_robot_chain() -> KinematicChain:
    """Planar point robot as a 2-prismatic chain (x then y), point geometry
    on the second link; lets the generic clearance audit run on point paths."""
    joints = [
        Joint(PRISMATIC, [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]),
        Joint(PRISMATIC, [0.0, 1.0, 0.0], [0.0, 0.0, 0.0]),
    ]
    links = [None, LinkGeometry([0.0, 0.0, 0.0], [0.0, 0.0, 0.0], 0.0)]
    return KinematicChain(joints, links)


def point_robot_plan(
    x_start,
    x_goal,
    obstacles: Sequence[Obstacle],
    cfg: PlannerConfig,
) -> PathResult:
    """Planar point-robot planner: unit input velocity toward the goal with a
    single complementarity row against the nearest wall.

    The contact Jacobians of a point robot are identities, so the
    complementarity function is the position-level linearization
    ``psi + n^T (X_next - X) - eps`` and M reduces to [[h]]. The input law is
    ``u = K_p (X_G - X) / (h |X_G - X|)``, clamped so one step never
    overshoots the goal.
    """
    x = np.asarray(x_start, dtype=float).reshape(-1)[:2].copy()
    goal = np.asarray(x_goal, dtype=float).reshape(-1)[:2]
    point = lambda p: LinkGeometry([p[0], p[1], 0.0], [p[0], p[1], 0.0], 0.0)

    def pose_of(p) -> PoseVector:
        return PoseVector([p[0], p[1], 0.0], UnitQuaternion.identity())

    from .geometry import signed_distance

    result = PathResult([x.copy()], [pose_of(x)], [], [], ITERATION_LIMIT, 0,
                        float(np.linalg.norm(goal - x)), 0.0)
    if result.final_pos_err <= cfg.pos_tol:
        result.status = REACHED
        return result

    h = cfg.h
    stall_run = 0
    for _ in range(cfg.max_iters):
        to_goal = goal - x
        dist = float(np.linalg.norm(to_goal))
        if dist <= cfg.pos_tol:
            result.status = REACHED
            break
        gain = cfg.k_p * min(1.0, dist / cfg.k_p)
        u = gain * to_goal / (h * dist)

        nearest = None
        for obstacle in obstacles:
            ci = signed_distance(point(x), obstacle, link_index=1)
            if ci.psi < cfg.active_radius and (nearest is None or ci.psi < nearest.psi):
                nearest = ci
        v = 0.0
        step_log: List[Tuple[ContactInfo, float]] = []
        if nearest is not None:
            n2 = nearest.normal[:2]
            problem = LcpProblem(np.array([[h]]),
                                 np.array([nearest.psi - cfg.eps + h * float(n2 @ u)]),
                                 (nearest,))
            solution = solve_lcp(problem, cfg.max_pivots)
            v = float(solution.z[0])
            step_log.append((nearest, v))
            x_new = x + h * (u + n2 * v)
        else:
            x_new = x + h * u

        result.joint_path.append(x_new.copy())
        result.pose_path.append(pose_of(x_new))
        result.commanded_path.append(pose_of(x + h * u))
        result.contact_log.append(step_log)
        result.iterations += 1
        step_len = float(np.linalg.norm(x_new - x))
        x = x_new
        result.final_pos_err = float(np.linalg.norm(goal - x))
        if result.final_pos_err <= cfg.pos_tol:
            result.status = REACHED
            break
        if step_len < cfg.stall_tol:
            stall_run += 1
            if stall_run >= _STALL_RUNS:
                result.status = STALLED
                break
        else:
            stall_run = 0
    result.notes["clamped_joints"] = ()
    return result


@dataclass(frozen=True)
class RrtConfig:
    """Task-space RRT parameters; sampling is uniform over the workspace box
    and uniform over orientations, with ``goal_bias`` of samples at the goal."""

    bounds_lo: np.ndarray
    bounds_hi: np.ndarray
    goal_bias: float = 0.1
    max_nodes: int = 2000
    seed: int = 0
    extend_iters: int = 300
    w_ori: float = 0.5

    def __post_init__(self):
        lo = np.asarray(self.bounds_lo, dtype=float).reshape(-1)
        hi = np.asarray(self.bounds_hi, dtype=float).reshape(-1)
        if lo.shape == (2,):
            lo = np.array([lo[0], lo[1], 0.0])
        if hi.shape == (2,):
            hi = np.array([hi[0], hi[1], 0.0])
        if lo.shape != (3,) or hi.shape != (3,):
            raise ValueError("workspace bounds must be 2- or 3-vectors")
        if np.any(lo > hi):
            raise ValueError("workspace bounds out of order")
        object.__setattr__(self, "bounds_lo", lo)
        object.__setattr__(self, "bounds_hi", hi)
        if not 0.0 <= self.goal_bias <= 1.0:
            raise ValueError("goal_bias must lie in [0, 1]")


@dataclass
class RrtStats:
    nodes: int
    samples: int
    goal_samples: int
    reached: bool


def _uniform_quaternion(rng: np.random.Generator) -> UnitQuaternion:
    u1, u2, u3 = rng.random(3)
    a, b = math.sqrt(1.0 - u1), math.sqrt(u1)
    q = np.array([
        b * math.cos(2.0 * math.pi * u3),
        a * math.sin(2.0 * math.pi * u2),
        a * math.cos(2.0 * math.pi * u2),
        b * math.sin(2.0 * math.pi * u3),
    ])
    return UnitQuaternion(q, normalize=True).canonical()


def rrt_plan(
    gamma_start: PoseVector,
    gamma_goal: PoseVector,
    theta_start: np.ndarray,
    chain: KinematicChain,
    obstacles: Sequence[Obstacle],
    cfg: PlannerConfig,
    rrt: RrtConfig,
) -> Tuple[PathResult, RrtStats]:
    """Grow a task-space tree with the local planner as the extend step.

    Deterministic for a fixed seed. Nearest neighbors use the weighted
    metric position + w_ori * orientation angle. Returns the concatenated
    path once a node lands within the goal tolerances, or the path to the
    closest node (status ``iteration-limit``) when the node budget runs out.
    """
    rng = np.random.default_rng(rrt.seed)
    extend_cfg = replace(cfg, max_iters=rrt.extend_iters)

    poses: List[PoseVector] = [forward_kinematics(chain, theta_start)]
    thetas: List[np.ndarray] = [chain.check_joint_vector(theta_start).copy()]
    parents: List[int] = [-1]
    segments: List[Optional[PathResult]] = [None]
    samples = 0
    goal_samples = 0

    def metric(pose: PoseVector, target: PoseVector) -> float:
        pos, ori = pose_distance(pose, target)
        return pos + rrt.w_ori * ori

    def goal_reached(pose: PoseVector) -> bool:
        pos, ori = pose_distance(pose, gamma_goal)
        return pos <= cfg.pos_tol and ori <= cfg.ori_tol

    def build_result(index: int, status: str) -> PathResult:
        chain_indices = []
        while index >= 0:
            chain_indices.append(index)
            index = parents[index]
        chain_indices.reverse()
        result = PathResult([thetas[chain_indices[0]].copy()], [poses[chain_indices[0]]],
                            [], [], status, 0, 0.0, 0.0)
        for idx in chain_indices[1:]:
            result.extend_with(segments[idx])
        result.status = status
        result.final_pos_err, result.final_ori_err = pose_distance(poses[chain_indices[-1]],
                                                                   gamma_goal)
        return result

    if goal_reached(poses[0]):
        stats = RrtStats(1, 0, 0, True)
        return build_result(0, REACHED), stats

    while len(poses) < rrt.max_nodes:
        samples += 1
        if rng.random() < rrt.goal_bias:
            target = gamma_goal
            goal_samples += 1
        else:
            p = rng.uniform(rrt.bounds_lo, rrt.bounds_hi)
            target = PoseVector(p, _uniform_quaternion(rng))
        nearest = min(range(len(poses)), key=lambda i: metric(poses[i], target))
        segment = local_plan(poses[nearest], target, thetas[nearest], chain, obstacles,
                             extend_cfg)
        if segment.iterations == 0:
            continue
        poses.append(segment.pose_path[-1])
        thetas.append(segment.joint_path[-1].copy())
        parents.append(nearest)
        segments.append(segment)
        node = len(poses) - 1
        if goal_reached(poses[node]):
            stats = RrtStats(len(poses), samples, goal_samples, True)
            result = build_result(node, REACHED)
            result.notes["rrt"] = dataclasses.asdict(stats)
            return result, stats

    best = min(range(len(poses)), key=lambda i: metric(poses[i], gamma_goal))
    stats = RrtStats(len(poses), samples, goal_samples, False)
    result = build_result(best, ITERATION_LIMIT)
    result.notes["rrt"] = dataclasses.asdict(stats)
    return result, stats


CONSTRAINT_NONE = "none"
CONSTRAINT_FIXED_ORIENTATION = "fixed-orientation"
CONSTRAINT_FIXED_POSITION = "fixed-position"

_ANCHOR_OF = {
    CONSTRAINT_NONE: "none",
    CONSTRAINT_FIXED_ORIENTATION: "orientation",
    CONSTRAINT_FIXED_POSITION: "position",
}


@dataclass(frozen=True)
class TaskSegment:
    goal: PoseVector
    constraint: str = CONSTRAINT_NONE
    mode: Optional[str] = None

    def __post_init__(self):
        if self.constraint not in _ANCHOR_OF:
            raise ValueError(f"unknown constraint tag {self.constraint!r}")


@dataclass
class SegmentReport:
    constraint: str
    status: str
    commanded_dev: float
    executed_dev: float
    commanded_ok: bool
    executed_ok: bool


def plan_task_sequence(
    gamma_start: PoseVector,
    theta_start: np.ndarray,
    segments: Sequence[TaskSegment],
    chain: KinematicChain,
    obstacles: Sequence[Obstacle],
    cfg: PlannerConfig,
) -> PathResult:
    """Chain local plans through a list of goals with per-segment constraint
    tags. Tags are not injected as constraint equations: the screw
    interpolation preserves them by construction, and this function verifies
    that on the output (commanded waypoints exactly on the constraint,
    executed waypoints within the termination tolerances).

    Tagged segments default to the null-space update mode. A segment that
    fails to reach its goal aborts the sequence with the partial result.
    """
    theta = chain.check_joint_vector(theta_start).copy()
    pose = forward_kinematics(chain, theta)
    result = PathResult([theta.copy()], [pose], [], [], REACHED, 0,
                        *pose_distance(pose, gamma_start))
    reports: List[SegmentReport] = []
    result.notes["segments"] = reports

    for segment in segments:
        anchor = _ANCHOR_OF[segment.constraint]
        mode = segment.mode
        if mode is None:
            mode = MODE_EQ8 if segment.constraint != CONSTRAINT_NONE else cfg.mode
        seg_cfg = replace(cfg, mode=mode)
        seg_result = local_plan(result.pose_path[-1], segment.goal,
                                result.joint_path[-1], chain, obstacles, seg_cfg,
                                anchor=anchor)
        start_index = len(result.pose_path) - 1
        result.extend_with(seg_result)
        reports.append(_verify_segment(segment, seg_result, result, start_index, cfg))
        if seg_result.status != REACHED:
            break
    result.notes["constraints_ok"] = all(r.commanded_ok and r.executed_ok for r in reports)
    return result


def _verify_segment(segment: TaskSegment, seg_result: PathResult, total: PathResult,
                    start_index: int, cfg: PlannerConfig) -> SegmentReport:
    commanded_dev = 0.0
    executed_dev = 0.0
    executed = total.pose_path[start_index:]
    if segment.constraint == CONSTRAINT_FIXED_ORIENTATION:
        ref = segment.goal.q
        commanded_dev = max((quat_angle(p.q, ref) for p in seg_result.commanded_path),
                            default=0.0)
        executed_dev = max((quat_angle(p.q, ref) for p in executed), default=0.0)
        executed_tol = cfg.ori_tol
    elif segment.constraint == CONSTRAINT_FIXED_POSITION:
        ref = segment.goal.p
        commanded_dev = max((float(np.linalg.norm(p.p - ref)) for p in seg_result.commanded_path),
                            default=0.0)
        executed_dev = max((float(np.linalg.norm(p.p - ref)) for p in executed), default=0.0)
        executed_tol = cfg.pos_tol
    else:
        return SegmentReport(segment.constraint, seg_result.status, 0.0, 0.0, True, True)
    return SegmentReport(
        segment.constraint,
        seg_result.status,
        commanded_dev,
        executed_dev,
        commanded_ok=commanded_dev <= 1e-9,
        executed_ok=executed_dev <= executed_tol,
    )
