import math

import numpy as np

from ipfmocap.imaging import CameraModel, FleshModel
from ipfmocap.kinematics import Dof, Joint, Skeleton

from .oracles import rot_x, rot_y, rot_z

BIG = 50.0


def rod_skeleton(length: float, swing_deg: float = 180.0) -> Skeleton:
    """Two joints, one rendered segment hanging ``length`` below a free root.

    DOFs: tx, ty, tz, then rotations about z, y and x applied in that order.
    The z rotation is limited to +-``swing_deg``.
    """
    swing = math.radians(swing_deg)
    joints = (Joint("top", -1, (0.0, 0.0, 0.0)), Joint("bottom", 0, (0.0, 0.0, -length)))
    ex, ey, ez = (1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)
    dofs = (
        Dof("tx", 0, "translation", ex, -BIG, BIG),
        Dof("ty", 0, "translation", ey, -BIG, BIG),
        Dof("tz", 0, "translation", ez, -BIG, BIG),
        Dof("rz", 0, "rotation", ez, -swing, swing),
        Dof("ry", 0, "rotation", ey, -math.pi, math.pi),
        Dof("rx", 0, "rotation", ex, -math.pi, math.pi),
    )
    return Skeleton(joints, ((0, 1),), dofs)


def rod_endpoints(pose, length):
    """World endpoints computed with plain rotation matrices."""
    top = np.array(pose[:3], dtype=float)
    r = rot_z(pose[3]) @ rot_y(pose[4]) @ rot_x(pose[5])
    return top, top + r @ np.array([0.0, 0.0, -length])


def axis_camera(focal=500.0, width=160, height=120) -> CameraModel:
    """Camera at the origin looking down +z world axis (camera axes = world axes)."""
    return CameraModel(focal, width / 2.0, height / 2.0, width, height, np.eye(3), np.zeros(3))


def rod_flesh(radius):
    return FleshModel((radius,))
