"""screwplan: task-space path planning for serial manipulators.

End-effector motion is interpolated along constant screws (unit dual
quaternions); each step resolves obstacle proximity through a small linear
complementarity problem whose unknowns are compensating speeds along contact
normals. See README.md for the scenario format and CLI.
"""

__version__ = "0.1.0"

from .dualquat import (
    PoseVector,
    ScrewParameters,
    UnitDualQuaternion,
    UnitQuaternion,
    dq_conjugate,
    dq_multiply,
    dq_power,
    dq_to_pose,
    pose_to_dq,
    sclerp,
    screw_parameters,
)

__all__ = [
    "__version__",
    "PoseVector",
    "ScrewParameters",
    "UnitDualQuaternion",
    "UnitQuaternion",
    "dq_conjugate",
    "dq_multiply",
    "dq_power",
    "dq_to_pose",
    "pose_to_dq",
    "sclerp",
    "screw_parameters",
]
