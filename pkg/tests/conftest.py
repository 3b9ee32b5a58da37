"""Shared generators for randomized tests (seeded, deterministic)."""
from __future__ import annotations

import numpy as np
import pytest

from screwplan.dualquat import PoseVector, UnitDualQuaternion, UnitQuaternion, pose_to_dq
from screwplan.geometry import LinkGeometry
from screwplan.kinematics import Joint, KinematicChain, PRISMATIC, REVOLUTE


def random_unit_vector(rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


def random_quaternion(rng: np.random.Generator) -> UnitQuaternion:
    return UnitQuaternion(rng.normal(size=4), normalize=True)


def random_pose(rng: np.random.Generator, scale: float = 2.0) -> PoseVector:
    return PoseVector(rng.uniform(-scale, scale, 3), random_quaternion(rng))


def random_dq(rng: np.random.Generator, scale: float = 2.0) -> UnitDualQuaternion:
    return pose_to_dq(random_pose(rng, scale))


def random_chain(
    rng: np.random.Generator,
    n_joints: int,
    prismatic_prob: float = 0.2,
    with_geometry: bool = True,
    link_radius: float = 0.04,
) -> KinematicChain:
    """A generic spatial chain with random axes and origins (first origin at
    the base, subsequent ones a random step away)."""
    joints = []
    links = []
    for k in range(n_joints):
        kind = PRISMATIC if rng.random() < prismatic_prob else REVOLUTE
        axis = random_unit_vector(rng)
        origin = np.zeros(3) if k == 0 else rng.uniform(-0.2, 0.6, 3)
        joints.append(Joint(kind, axis, origin))
        if with_geometry:
            links.append(LinkGeometry([0.0, 0.0, 0.0], rng.uniform(-0.2, 0.6, 3), link_radius))
        else:
            links.append(None)
    ee = PoseVector(rng.uniform(-0.2, 0.4, 3), random_quaternion(rng))
    return KinematicChain(joints, links, ee_offset=ee)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240811)
