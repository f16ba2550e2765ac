"""Reference robots: the bundled Panda-like arm and small planar chains."""

from __future__ import annotations

import math
from importlib import resources
from typing import Sequence

import numpy as np

from payloadcheck.model import Joint, JointKind, Link, RobotModel, parse_urdf
from payloadcheck.spatial import SpatialInertia, SpatialTransform

# Franka "ready" posture: tool pointing straight down in front of the base.
PANDA_HOME = np.array([0.0, -math.pi / 4, 0.0, -3 * math.pi / 4, 0.0, math.pi / 2, math.pi / 4])
PANDA_NOMINAL_PAYLOAD_KG = 3.0


def panda_urdf_text() -> str:
    return resources.files("payloadcheck").joinpath("data/panda.urdf").read_text(encoding="utf-8")


def panda() -> RobotModel:
    return parse_urdf(panda_urdf_text())


def panda_urdf_path():
    return resources.files("payloadcheck").joinpath("data/panda.urdf")


def planar_chain(
    masses: Sequence[float],
    lengths: Sequence[float],
    com_fraction: float = 1.0,
    rod_inertia: bool = False,
    axis=(0.0, -1.0, 0.0),
    effort_limit: float = math.inf,
    velocity_limit: float = 10.0,
    gravity=(0.0, 0.0, -9.81),
) -> RobotModel:
    """Planar revolute chain lying along +x at q = 0, moving in the x-z plane.

    With the default ``axis = -y`` a positive joint angle lifts the link
    toward +z.  Each link's mass sits at ``com_fraction * length``; with
    ``rod_inertia`` the link also gets thin-rod inertia ``m l^2 / 12`` about
    its com (y and z axes).  The end-effector frame is at the tip of the last
    link.
    """
    links = [Link("base", SpatialInertia.zero())]
    joints = []
    prev_len = 0.0
    for i, (m, l) in enumerate(zip(masses, lengths)):
        I = np.zeros((3, 3))
        if rod_inertia:
            I = np.diag([0.0, m * l * l / 12.0, m * l * l / 12.0])
        links.append(Link(f"link{i + 1}", SpatialInertia(float(m), np.array([com_fraction * l, 0.0, 0.0]), I)))
        joints.append(
            Joint(
                f"joint{i + 1}",
                JointKind.REVOLUTE,
                np.asarray(axis, dtype=float),
                SpatialTransform.translation_only([prev_len, 0.0, 0.0]),
                (-math.pi, math.pi),
                velocity_limit,
                effort_limit,
            )
        )
        prev_len = l
    return RobotModel(
        tuple(links),
        tuple(joints),
        gravity=np.asarray(gravity, dtype=float),
        ee_offset=SpatialTransform.translation_only([prev_len, 0.0, 0.0]),
        name=f"planar{len(masses)}r",
        ee_name="tip",
    )


def pendulum(mass: float = 1.0, length: float = 1.0, effort_limit: float = 10.0) -> RobotModel:
    """1R point-mass pendulum used by the torque-check examples."""
    return planar_chain([mass], [length], effort_limit=effort_limit)


def planar_2r(rod_inertia: bool = True) -> RobotModel:
    """Two 1 kg, 1 m links with com at the midpoints."""
    return planar_chain([1.0, 1.0], [1.0, 1.0], com_fraction=0.5, rod_inertia=rod_inertia)
