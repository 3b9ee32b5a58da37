import math

import numpy as np
import pytest

from screwplan.dualquat import PoseVector, UnitQuaternion, quat_angle
from screwplan.geometry import LinkGeometry
from screwplan.kinematics import (
    Jacobians,
    Joint,
    KinematicChain,
    PRISMATIC,
    REVOLUTE,
    SingularityError,
    b_matrix,
    contact_jacobian,
    forward_kinematics,
    ik_solve,
    joint_limit_clamp,
    link_frames,
    manipulator_jacobian,
    nullspace_projector,
    pose_delta,
    pseudoinverse,
    representation_jacobian,
)
from conftest import random_chain, random_pose, random_quaternion

FD_STEP = 1e-6


def planar_2r(l1=1.0, l2=1.0):
    joints = [Joint(REVOLUTE, [0, 0, 1], [0, 0, 0]),
              Joint(REVOLUTE, [0, 0, 1], [l1, 0, 0])]
    links = [LinkGeometry([0, 0, 0], [l1, 0, 0], 0.05),
             LinkGeometry([0, 0, 0], [l2, 0, 0], 0.05)]
    return KinematicChain(joints, links,
                          ee_offset=PoseVector([l2, 0, 0], UnitQuaternion.identity()))


def fd_twist(chain, theta, theta_dot, delta=FD_STEP):
    """Finite-difference end-effector twist for joint rates theta_dot."""
    plus = forward_kinematics(chain, theta + delta * theta_dot)
    minus = forward_kinematics(chain, theta - delta * theta_dot)
    v = (plus.p - minus.p) / (2 * delta)
    q_plus, q_minus = plus.q.wxyz.copy(), minus.q.wxyz.copy()
    if float(q_plus @ q_minus) < 0.0:
        q_plus = -q_plus
    q_dot = (q_plus - q_minus) / (2 * delta)
    q_mid = forward_kinematics(chain, theta).q
    if float(q_mid.wxyz @ q_minus) < 0.0:
        q_mid = q_mid.negate()
    omega = representation_jacobian(q_mid)[3:, 3:] @ q_dot
    return v, omega


class TestForwardKinematics:
    def test_straight_2r(self):
        pose = forward_kinematics(planar_2r(), [0.0, 0.0])
        assert np.allclose(pose.p, [2, 0, 0], atol=1e-12)

    def test_bent_2r(self):
        pose = forward_kinematics(planar_2r(), [math.pi / 2, 0.0])
        assert np.allclose(pose.p, [0, 2, 0], atol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            forward_kinematics(planar_2r(), [0.0, 0.0, 0.0])

    def test_link_frames_2r(self):
        frames = link_frames(planar_2r(), [0.0, 0.0])
        assert np.allclose(frames[0].p, [0, 0, 0], atol=1e-12)
        assert np.allclose(frames[1].p, [1, 0, 0], atol=1e-12)

    def test_zero_dof_chain(self):
        base = PoseVector([1, 2, 0], UnitQuaternion.identity())
        chain = KinematicChain([], [], base=base)
        assert link_frames(chain, []) == [base]
        assert np.allclose(forward_kinematics(chain, []).p, [1, 2, 0])

    def test_last_frame_composes_to_ee(self, rng):
        for _ in range(50):
            chain = random_chain(rng, int(rng.integers(2, 7)))
            theta = rng.uniform(-1.5, 1.5, chain.dof)
            last = link_frames(chain, theta)[-1]
            composed = last.compose(chain.ee_offset)
            ee = forward_kinematics(chain, theta)
            assert np.allclose(composed.p, ee.p, atol=1e-10)
            assert quat_angle(composed.q, ee.q) <= 1e-10


class TestManipulatorJacobian:
    def test_finite_difference_oracle(self, rng):
        for _ in range(300):
            chain = random_chain(rng, int(rng.integers(2, 9)))
            theta = rng.uniform(-1.5, 1.5, chain.dof)
            theta_dot = rng.normal(size=chain.dof)
            jac = manipulator_jacobian(chain, theta)
            v_fd, w_fd = fd_twist(chain, theta, theta_dot)
            assert np.allclose(jac[:3] @ theta_dot, v_fd, atol=1e-6)
            assert np.allclose(jac[3:] @ theta_dot, w_fd, atol=1e-6)

    def test_prismatic_column_has_zero_angular_part(self, rng):
        chain = random_chain(rng, 4, prismatic_prob=1.0)
        jac = manipulator_jacobian(chain, rng.uniform(-1, 1, 4))
        assert np.allclose(jac[3:], 0.0)

    def test_locked_joints_reduce_to_subchain(self, rng):
        # Folding a zeroed middle joint into the next origin keeps columns.
        chain = random_chain(rng, 4, prismatic_prob=0.0)
        theta = rng.uniform(-1, 1, 4)
        theta[2] = 0.0
        jac_full = manipulator_jacobian(chain, theta)

        j = chain.joints
        merged = Joint(j[3].kind, j[3].axis, j[2].origin + j[3].origin)
        sub = KinematicChain([j[0], j[1], merged],
                             [chain.links[0], chain.links[1], chain.links[3]],
                             ee_offset=chain.ee_offset)
        jac_sub = manipulator_jacobian(sub, theta[[0, 1, 3]])
        assert np.allclose(jac_full[:, [0, 1, 3]], jac_sub, atol=1e-10)


class TestRepresentationJacobian:
    def test_identity_quaternion_rate(self):
        jac = representation_jacobian(UnitQuaternion.identity())
        omega = jac[3:, 3:] @ np.array([0.0, 0.5, 0.0, 0.0])
        assert np.allclose(omega, [1, 0, 0], atol=1e-12)

    def test_position_passthrough(self, rng):
        jac = representation_jacobian(random_quaternion(rng))
        assert np.allclose(jac[:3, :3], np.eye(3))
        assert np.allclose(jac[:3, 3:], 0.0)
        assert np.allclose(jac[3:, :3], 0.0)

    def test_consistency_with_manipulator_jacobian(self, rng):
        # J theta_dot and J_r gamma_dot must be the same twist.
        for _ in range(100):
            chain = random_chain(rng, int(rng.integers(2, 8)))
            theta = rng.uniform(-1.5, 1.5, chain.dof)
            theta_dot = rng.normal(size=chain.dof)
            delta = FD_STEP
            plus = forward_kinematics(chain, theta + delta * theta_dot)
            minus = forward_kinematics(chain, theta - delta * theta_dot)
            gamma_dot = pose_delta(minus, plus) / (2 * delta)
            mid_q = forward_kinematics(chain, theta).q
            if float(mid_q.wxyz @ minus.q.wxyz) < 0.0:
                mid_q = mid_q.negate()
            twist_r = representation_jacobian(mid_q) @ gamma_dot
            twist_j = manipulator_jacobian(chain, theta) @ theta_dot
            assert np.allclose(twist_j, twist_r, atol=1e-5)


class TestBMatrix:
    def test_square_full_rank_inverse(self, rng):
        for _ in range(20):
            chain = random_chain(rng, 6, prismatic_prob=0.3)
            theta = rng.uniform(-1.5, 1.5, 6)
            jac = manipulator_jacobian(chain, theta)
            if np.linalg.svd(jac, compute_uv=False)[-1] < 1e-3:
                continue
            jac_r = representation_jacobian(forward_kinematics(chain, theta).q)
            b = b_matrix(jac, jac_r, 0.0)
            assert np.allclose(b, np.linalg.inv(jac) @ jac_r, atol=1e-8)

    def test_redundant_right_inverse(self, rng):
        for _ in range(20):
            chain = random_chain(rng, 8, prismatic_prob=0.2)
            theta = rng.uniform(-1.5, 1.5, 8)
            jac = manipulator_jacobian(chain, theta)
            if np.linalg.svd(jac, compute_uv=False)[-1] < 1e-3:
                continue
            jac_r = representation_jacobian(forward_kinematics(chain, theta).q)
            b = b_matrix(jac, jac_r, 0.0)
            assert np.max(np.abs(jac @ b - jac_r)) <= 1e-8

    def test_damped_output_bounded(self, rng):
        # Near-singular J with damping: ||B|| <= ||J_r|| / (2 lam).
        lam = 0.01
        jac = np.zeros((6, 6))
        jac[0, 0] = 1e-9
        jac[1:5, 1:5] = np.eye(4)
        jac_r = representation_jacobian(random_quaternion(rng))
        b = b_matrix(jac, jac_r, lam)
        bound = np.linalg.norm(jac_r, 2) / (2 * lam)
        assert np.linalg.norm(b, 2) <= bound * (1 + 1e-9)

    def test_singular_raises_at_zero_damping(self):
        jac = np.zeros((6, 4))
        jac_r = representation_jacobian(UnitQuaternion.identity())
        with pytest.raises(SingularityError):
            b_matrix(jac, jac_r, 0.0)

    def test_jacobians_construction_residual(self, rng):
        for _ in range(20):
            chain = random_chain(rng, 7)
            theta = rng.uniform(-1.5, 1.5, 7)
            jac = manipulator_jacobian(chain, theta)
            if np.linalg.svd(jac, compute_uv=False)[-1] < 1e-3:
                continue
            mats = Jacobians.at_configuration(chain, theta, lam=0.0)
            assert np.max(np.abs(mats.j @ mats.b - mats.j_r)) <= 1e-8


class TestContactJacobian:
    def test_end_effector_point_matches_manipulator(self, rng):
        chain = random_chain(rng, 5)
        theta = rng.uniform(-1.5, 1.5, 5)
        ee = forward_kinematics(chain, theta)
        jac_c = contact_jacobian(chain, theta, chain.dof - 1, ee.p)
        assert np.allclose(jac_c, manipulator_jacobian(chain, theta), atol=1e-12)

    def test_padding_beyond_contact_link(self, rng):
        chain = planar_2r()
        jac_c = contact_jacobian(chain, [0.3, -0.4], 0, [0.5, 0.0, 0.0])
        assert np.allclose(jac_c[:, 1], 0.0)

    def test_out_of_range_link(self):
        with pytest.raises(ValueError):
            contact_jacobian(planar_2r(), [0.0, 0.0], 2, [0, 0, 0])

    def test_witness_finite_difference(self, rng):
        # The witness rides rigidly on its link; compare against FD of the
        # world position of a fixed link-local point.
        for _ in range(100):
            chain = random_chain(rng, int(rng.integers(2, 7)))
            theta = rng.uniform(-1.2, 1.2, chain.dof)
            k = int(rng.integers(0, chain.dof))
            local = rng.uniform(-0.3, 0.3, 3)

            def world_point(th):
                frame = link_frames(chain, th)[k]
                return frame.p + frame.q.rotate(local)

            witness = world_point(theta)
            jac_c = contact_jacobian(chain, theta, k, witness)
            theta_dot = rng.normal(size=chain.dof)
            delta = FD_STEP
            v_fd = (world_point(theta + delta * theta_dot)
                    - world_point(theta - delta * theta_dot)) / (2 * delta)
            assert np.allclose(jac_c[:3] @ theta_dot, v_fd, atol=1e-6)


class TestPseudoinverseAndNullspace:
    def test_identity(self):
        assert np.allclose(pseudoinverse(np.eye(3), 0.0), np.eye(3), atol=1e-12)

    def test_rank_deficient_truncation(self):
        out = pseudoinverse(np.diag([2.0, 0.0]), 0.0)
        assert np.allclose(out, np.diag([0.5, 0.0]), atol=1e-12)

    def test_penrose_condition(self, rng):
        for _ in range(50):
            a = rng.normal(size=(4, 6))
            a_pinv = pseudoinverse(a, 0.0)
            assert np.allclose(a @ a_pinv @ a, a, atol=1e-9)

    def test_square_chain_projector_zero(self, rng):
        for _ in range(20):
            chain = random_chain(rng, 6)
            theta = rng.uniform(-1.5, 1.5, 6)
            jac = manipulator_jacobian(chain, theta)
            if np.linalg.svd(jac, compute_uv=False)[-1] < 1e-3:
                continue
            assert np.max(np.abs(nullspace_projector(jac, 0.0))) <= 1e-8

    def test_redundant_nullspace_property(self, rng):
        for _ in range(50):
            chain = random_chain(rng, 8)
            theta = rng.uniform(-1.5, 1.5, 8)
            jac = manipulator_jacobian(chain, theta)
            proj = nullspace_projector(jac, 0.0)
            x = rng.normal(size=8)
            assert np.linalg.norm(jac @ proj @ x) <= 1e-8 * max(1.0, np.linalg.norm(x))

    def test_projector_idempotent(self, rng):
        chain = random_chain(rng, 8)
        theta = rng.uniform(-1.5, 1.5, 8)
        proj = nullspace_projector(manipulator_jacobian(chain, theta), 0.0)
        assert np.max(np.abs(proj @ proj - proj)) <= 1e-8


class TestJointLimits:
    def chain_with_limits(self):
        joints = [Joint(REVOLUTE, [0, 0, 1], [0, 0, 0], limits=(-math.pi, math.pi)),
                  Joint(REVOLUTE, [0, 0, 1], [1, 0, 0], limits=(-1.0, 1.0))]
        return KinematicChain(joints, [None, None])

    def test_within_limits_unchanged(self):
        chain = self.chain_with_limits()
        theta, flags = joint_limit_clamp([0.5, -0.5], chain)
        assert np.allclose(theta, [0.5, -0.5])
        assert flags == ()

    def test_clamped_with_flags(self):
        chain = self.chain_with_limits()
        theta, flags = joint_limit_clamp([0.5, 1.5], chain)
        assert np.allclose(theta, [0.5, 1.0])
        assert flags == (1,)

    def test_boundary_inclusive(self):
        chain = self.chain_with_limits()
        theta, flags = joint_limit_clamp([math.pi, -1.0], chain)
        assert np.allclose(theta, [math.pi, -1.0])
        assert flags == ()


class TestIkPlumbing:
    def test_recovers_known_configuration(self, rng):
        chain = random_chain(rng, 7)
        theta_true = rng.uniform(-0.8, 0.8, 7)
        target = forward_kinematics(chain, theta_true)
        seed = theta_true + rng.uniform(-0.2, 0.2, 7)
        theta, ok = ik_solve(chain, target, seed)
        assert ok
        found = forward_kinematics(chain, theta)
        assert np.linalg.norm(found.p - target.p) <= 1e-6
        assert quat_angle(found.q, target.q) <= 1e-6
