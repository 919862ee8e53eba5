"""Slow, obviously-correct reference computations used by the tests.

None of these call into the package's rasterizer or weight code.
"""
import itertools
import math

import numpy as np


def rot_x(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def pinhole(rotation, translation, focal, cx, cy, point):
    """(u, v, depth) of a world point."""
    xc = [sum(rotation[i][j] * point[j] for j in range(3)) + translation[i] for i in range(3)]
    return cx + focal * xc[0] / xc[2], cy + focal * xc[1] / xc[2], xc[2]


def stadium_mask(width, height, stadiums):
    """Test every pixel center against every (ax, ay, ra, bx, by, rb) stadium."""
    px, py = np.meshgrid(np.arange(width) + 0.5, np.arange(height) + 0.5)
    mask = np.zeros((height, width), dtype=bool)
    for ax, ay, ra, bx, by, rb in stadiums:
        dx, dy = bx - ax, by - ay
        len2 = dx * dx + dy * dy
        if len2 > 0:
            t = np.clip(((px - ax) * dx + (py - ay) * dy) / len2, 0.0, 1.0)
        else:
            t = np.zeros_like(px)
        ex, ey = px - (ax + t * dx), py - (ay + t * dy)
        r = ra + t * (rb - ra)
        mask |= ex * ex + ey * ey <= r * r
    return mask


def segment_stadium(rotation, translation, focal, cx, cy, a, b, radius):
    ua, va, za = pinhole(rotation, translation, focal, cx, cy, a)
    ub, vb, zb = pinhole(rotation, translation, focal, cx, cy, b)
    if za <= 0 or zb <= 0:
        return None
    return (ua, va, focal * radius / za, ub, vb, focal * radius / zb)


def loop_counts(observed, synthetic):
    """(common, observed-only, synthetic-only) by visiting every pixel."""
    nc = ns = nm = 0
    h, w = observed.shape
    for r in range(h):
        for c in range(w):
            o, s = bool(observed[r, c]), bool(synthetic[r, c])
            if o and s:
                nc += 1
            elif o:
                ns += 1
            elif s:
                nm += 1
    return nc, ns, nm


def loop_weight(nc, ns, nm):
    return nc / (ns + nm) if ns + nm > 0 else float(nc)


def cartesian_grid(center, dims, step, levels, lower, upper):
    """Odometer-ordered grid built from nested index loops."""
    half = (levels - 1) // 2
    out = []
    for idx in itertools.product(range(levels), repeat=len(dims)):
        pose = list(center)
        for d, i in zip(dims, idx):
            pose[d] = min(max(center[d] + (i - half) * step, lower[d]), upper[d])
        out.append(pose)
    return np.array(out)


def rmse_loops(est, truth):
    """Per-joint RMSE with explicit loops over frames and joints."""
    n, j, _ = est.shape
    out = []
    for jj in range(j):
        acc = 0.0
        for k in range(n):
            acc += sum((est[k, jj, a] - truth[k, jj, a]) ** 2 for a in range(3))
        out.append(math.sqrt(acc / n))
    return np.array(out)
