"""Compiled batch forward kinematics.

Same arithmetic as the reference loop: each rotation DOF contributes a
Rodrigues matrix about its unit axis, multiplied onto its joint's local
rotation in table order; joints are visited parents first.
"""
import math

import numpy as np
from numba import njit


@njit(cache=True)
def _matmul3(a, b, out):
    for r in range(3):
        for c in range(3):
            out[r, c] = a[r, 0] * b[0, c] + a[r, 1] * b[1, c] + a[r, 2] * b[2, c]


@njit(cache=True)
def fk_batch(poses, dof_joint, dof_rot, dof_axis, order, parents, offsets):
    n = poses.shape[0]
    nd = poses.shape[1]
    nj = parents.shape[0]
    out = np.empty((n, nj, 3))
    local = np.empty((nj, 3, 3))
    world = np.empty((nj, 3, 3))
    rot = np.empty((3, 3))
    tmp = np.empty((3, 3))
    for p in range(n):
        for j in range(nj):
            for r in range(3):
                for c in range(3):
                    local[j, r, c] = 1.0 if r == c else 0.0
        tx = 0.0
        ty = 0.0
        tz = 0.0
        for k in range(nd):
            v = poses[p, k]
            ax = dof_axis[k, 0]
            ay = dof_axis[k, 1]
            az = dof_axis[k, 2]
            if not dof_rot[k]:
                tx += v * ax
                ty += v * ay
                tz += v * az
                continue
            s = math.sin(v)
            omc = 1.0 - math.cos(v)
            # I + sin K + (1 - cos) K^2 with K the cross-product matrix of the axis
            rot[0, 0] = 1.0 + omc * (-(ay * ay) - az * az)
            rot[0, 1] = -s * az + omc * (ax * ay)
            rot[0, 2] = s * ay + omc * (ax * az)
            rot[1, 0] = s * az + omc * (ax * ay)
            rot[1, 1] = 1.0 + omc * (-(ax * ax) - az * az)
            rot[1, 2] = -s * ax + omc * (ay * az)
            rot[2, 0] = -s * ay + omc * (ax * az)
            rot[2, 1] = s * ax + omc * (ay * az)
            rot[2, 2] = 1.0 + omc * (-(ax * ax) - ay * ay)
            j = dof_joint[k]
            _matmul3(local[j], rot, tmp)
            local[j, :, :] = tmp
        for idx in range(nj):
            i = order[idx]
            q = parents[i]
            if q < 0:
                world[i, :, :] = local[i]
                out[p, i, 0] = tx + offsets[i, 0]
                out[p, i, 1] = ty + offsets[i, 1]
                out[p, i, 2] = tz + offsets[i, 2]
            else:
                _matmul3(world[q], local[i], tmp)
                world[i, :, :] = tmp
                for r in range(3):
                    out[p, i, r] = out[p, q, r] + (
                        world[q, r, 0] * offsets[i, 0] + world[q, r, 1] * offsets[i, 1] + world[q, r, 2] * offsets[i, 2]
                    )
    return out
