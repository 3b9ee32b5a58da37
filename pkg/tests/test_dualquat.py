import math

import numpy as np
import pytest

from screwplan.dualquat import (
    PoseVector,
    ScrewParameters,
    UnitDualQuaternion,
    UnitQuaternion,
    dq_conjugate,
    dq_from_screw,
    dq_multiply,
    dq_power,
    dq_to_pose,
    pose_to_dq,
    quat_angle,
    sclerp,
    screw_parameters,
)
from conftest import random_dq, random_pose

IDENTITY_Q = UnitQuaternion.identity()


def dq_close(a, b, tol=1e-9):
    return np.max(np.abs(a.as_array() - b.as_array())) <= tol


def dq_close_up_to_sign(a, b, tol=1e-9):
    arr_a, arr_b = a.as_array(), b.as_array()
    return min(np.max(np.abs(arr_a - arr_b)), np.max(np.abs(arr_a + arr_b))) <= tol


def check_unit_invariants(dq, tol=1e-9):
    assert abs(np.linalg.norm(dq.real.wxyz) - 1.0) <= tol
    assert abs(float(dq.real.wxyz @ dq.dual)) <= tol


class TestPoseConversion:
    def test_identity_pose(self):
        dq = pose_to_dq(PoseVector.identity())
        assert dq_close(dq, UnitDualQuaternion.identity())

    def test_unit_translation_dual_part(self):
        # dual = 0.5 * (0, p) ⊗ q_r; with identity rotation this is (0, p/2)
        dq = pose_to_dq(PoseVector([1, 0, 0], IDENTITY_Q))
        assert np.allclose(dq.dual, [0.0, 0.5, 0.0, 0.0], atol=1e-12)

    def test_round_trip_random(self, rng):
        for _ in range(1000):
            pose = random_pose(rng)
            back = dq_to_pose(pose_to_dq(pose))
            assert np.allclose(back.p, pose.p, atol=1e-9)
            assert quat_angle(back.q, pose.q) <= 1e-9

    def test_dq_to_pose_identity(self):
        pose = dq_to_pose(UnitDualQuaternion.identity())
        assert np.allclose(pose.p, 0.0)
        assert np.allclose(pose.q.wxyz, [1, 0, 0, 0])

    def test_dq_to_pose_translation(self):
        pose = dq_to_pose(pose_to_dq(PoseVector([1, 2, 3], IDENTITY_Q)))
        assert np.allclose(pose.p, [1, 2, 3], atol=1e-12)

    def test_double_cover(self, rng):
        pose = random_pose(rng)
        dq = pose_to_dq(pose)
        flipped = dq.negate()
        a, b = dq_to_pose(dq), dq_to_pose(flipped)
        assert np.allclose(a.p, b.p, atol=1e-12)
        assert np.allclose(a.q.wxyz, b.q.wxyz, atol=1e-12)

    def test_non_unit_quaternion_rejected(self):
        with pytest.raises(ValueError):
            UnitQuaternion([1.0, 0.1, 0.0, 0.0])

    def test_invariant_violation_rejected(self):
        with pytest.raises(ValueError):
            UnitDualQuaternion([1.0, 0.0, 0.0, 0.0], [0.5, 0.0, 0.0, 0.0])


class TestMultiplyConjugate:
    def test_identity_neutral(self, rng):
        a = random_dq(rng)
        assert dq_close(dq_multiply(a, UnitDualQuaternion.identity()), a)

    def test_translations_commute(self):
        ta = UnitDualQuaternion.from_translation([1, 0, 0])
        tb = UnitDualQuaternion.from_translation([0, 1, 0])
        ab = dq_multiply(ta, tb)
        assert np.allclose(ab.translation(), [1, 1, 0], atol=1e-12)

    def test_associativity(self, rng):
        for _ in range(200):
            a, b, c = (random_dq(rng) for _ in range(3))
            left = dq_multiply(dq_multiply(a, b), c)
            right = dq_multiply(a, dq_multiply(b, c))
            assert dq_close(left, right, tol=1e-9)
            check_unit_invariants(left)

    def test_conjugate_identity(self):
        assert dq_close(dq_conjugate(UnitDualQuaternion.identity()),
                        UnitDualQuaternion.identity())

    def test_conjugate_inverse(self, rng):
        for _ in range(200):
            a = random_dq(rng)
            assert dq_close(dq_multiply(a, dq_conjugate(a)),
                            UnitDualQuaternion.identity(), tol=1e-9)

    def test_conjugate_antihomomorphism(self, rng):
        a, b = random_dq(rng), random_dq(rng)
        left = dq_conjugate(dq_multiply(a, b))
        right = dq_multiply(dq_conjugate(b), dq_conjugate(a))
        assert dq_close(left, right, tol=1e-9)


class TestScrewParameters:
    def test_identity(self):
        s = screw_parameters(UnitDualQuaternion.identity())
        assert s.theta == 0.0 and s.d == 0.0

    def test_pure_rotation(self):
        q = UnitQuaternion.from_axis_angle([0, 0, 1], math.pi / 2)
        s = screw_parameters(pose_to_dq(PoseVector([0, 0, 0], q)))
        assert abs(s.theta - math.pi / 2) <= 1e-12
        assert abs(s.d) <= 1e-12
        assert np.allclose(s.direction, [0, 0, 1], atol=1e-12)

    def test_pure_translation(self):
        s = screw_parameters(pose_to_dq(PoseVector([0, 0, 2], IDENTITY_Q)))
        assert s.theta == 0.0
        assert abs(s.d - 2.0) <= 1e-12
        assert np.allclose(s.direction, [0, 0, 1], atol=1e-12)

    def test_round_trip_random(self, rng):
        for _ in range(1000):
            dq = random_dq(rng)
            s = screw_parameters(dq)
            assert 0.0 <= s.theta <= math.pi
            assert dq_close_up_to_sign(dq_from_screw(s), dq, tol=1e-8)

    def test_theta_pi_edge(self):
        q = UnitQuaternion.from_axis_angle([1, 0, 0], math.pi)
        dq = pose_to_dq(PoseVector([0.3, -0.2, 0.5], q))
        s = screw_parameters(dq)
        assert abs(s.theta - math.pi) <= 1e-12
        assert dq_close_up_to_sign(dq_from_screw(s), dq, tol=1e-9)


class TestPower:
    def test_zero_exponent(self, rng):
        assert dq_close(dq_power(random_dq(rng), 0.0), UnitDualQuaternion.identity())

    def test_half_rotation(self):
        q = UnitQuaternion.from_axis_angle([0, 0, 1], math.pi)
        half = dq_power(pose_to_dq(PoseVector([0, 0, 0], q)), 0.5)
        expect = UnitQuaternion.from_axis_angle([0, 0, 1], math.pi / 2)
        assert quat_angle(half.real, expect) <= 1e-12

    def test_one_parameter_subgroup(self, rng):
        for _ in range(200):
            dq = random_dq(rng)
            t1, t2 = rng.uniform(0, 0.5, 2)
            combined = dq_multiply(dq_power(dq, t1), dq_power(dq, t2))
            assert dq_close_up_to_sign(combined, dq_power(dq, t1 + t2), tol=1e-9)

    def test_exponent_range_checked(self, rng):
        dq = random_dq(rng)
        with pytest.raises(ValueError):
            dq_power(dq, -0.1)
        with pytest.raises(ValueError):
            dq_power(dq, 1.1)


class TestSclerp:
    def test_endpoints(self, rng):
        for _ in range(1000):
            a, b = random_dq(rng), random_dq(rng)
            assert dq_close_up_to_sign(sclerp(a, b, 0.0), a, tol=1e-9)
            assert dq_close_up_to_sign(sclerp(a, b, 1.0), b, tol=1e-9)

    def test_translation_midpoint(self):
        a = UnitDualQuaternion.identity()
        b = UnitDualQuaternion.from_translation([2, 0, 0])
        mid = sclerp(a, b, 0.5)
        assert np.allclose(mid.translation(), [1, 0, 0], atol=1e-12)

    def test_fixed_orientation_preserved(self, rng):
        # Poses sharing one orientation: every interpolate keeps it exactly.
        for _ in range(50):
            q = UnitQuaternion(rng.normal(size=4), normalize=True)
            a = pose_to_dq(PoseVector(rng.uniform(-2, 2, 3), q))
            b = pose_to_dq(PoseVector(rng.uniform(-2, 2, 3), q))
            for tau in np.arange(0.0, 1.0001, 0.01):
                c = sclerp(a, b, float(tau))
                assert quat_angle(c.real, q) <= 1e-9

    def test_fixed_position_preserved(self, rng):
        for _ in range(50):
            p = rng.uniform(-2, 2, 3)
            a = pose_to_dq(PoseVector(p, UnitQuaternion(rng.normal(size=4), normalize=True)))
            b = pose_to_dq(PoseVector(p, UnitQuaternion(rng.normal(size=4), normalize=True)))
            for tau in np.arange(0.0, 1.0001, 0.05):
                c = sclerp(a, b, float(tau))
                assert np.allclose(dq_to_pose(c).p, p, atol=1e-9)

    def test_screw_axis_constant(self, rng):
        # The relative screw from a to any interpolate shares the sclerp axis.
        for _ in range(100):
            a, b = random_dq(rng), random_dq(rng)
            b_aligned = b.negate() if float(a.real.wxyz @ b.real.wxyz) < 0 else b
            ref = screw_parameters(dq_multiply(dq_conjugate(a), b_aligned))
            if ref.theta < 1e-3 or ref.theta > math.pi - 1e-3:
                continue
            for tau in (0.1, 0.35, 0.6, 0.85, 1.0):
                rel = dq_multiply(dq_conjugate(a), sclerp(a, b, tau))
                s = screw_parameters(rel)
                assert np.allclose(s.direction, ref.direction, atol=1e-7)
                assert np.allclose(s.moment, ref.moment, atol=1e-7)

    def test_invariants_after_interpolation(self, rng):
        for _ in range(200):
            a, b = random_dq(rng), random_dq(rng)
            check_unit_invariants(sclerp(a, b, float(rng.uniform(0, 1))))


class TestScrewTypes:
    def test_screw_direction_must_be_unit(self):
        with pytest.raises(ValueError):
            ScrewParameters([1, 1, 0], [0, 0, 0], 0.5, 0.1)

    def test_pose_array_round_trip(self, rng):
        pose = random_pose(rng)
        again = PoseVector.from_array(pose.as_array())
        assert np.allclose(again.as_array(), pose.as_array(), atol=1e-12)
