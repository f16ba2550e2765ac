"""Payload-aware inverse dynamics and torque-limit analysis for serial manipulators."""

from payloadcheck.dynamics import gravity_torques, mass_matrix, rnea
from payloadcheck.model import (
    Joint,
    JointKind,
    Link,
    PayloadSpec,
    RobotModel,
    attach_payload,
    parse_urdf,
    validate_model,
)

__version__ = "0.1.0"

__all__ = [
    "Joint",
    "JointKind",
    "Link",
    "PayloadSpec",
    "RobotModel",
    "attach_payload",
    "gravity_torques",
    "mass_matrix",
    "parse_urdf",
    "rnea",
    "validate_model",
]
