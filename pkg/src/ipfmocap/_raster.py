"""Compiled stadium rasterizer and silhouette-overlap counting.

Pixel (row, col) has its center at image coordinates (col + 0.5, row + 0.5)
and is foreground iff that center lies inside a projected stadium.  A
stadium is the set of points whose distance to the closest point of the
segment is at most the radius interpolated at that closest point.
"""
import math

import numpy as np
from numba import njit, prange


@njit(cache=True)
def stadium_contains(px, py, ax, ay, ra, bx, by, rb):
    dx = bx - ax
    dy = by - ay
    len2 = dx * dx + dy * dy
    t = 0.0
    if len2 > 0.0:
        t = ((px - ax) * dx + (py - ay) * dy) / len2
        if t < 0.0:
            t = 0.0
        elif t > 1.0:
            t = 1.0
    ex = px - (ax + t * dx)
    ey = py - (ay + t * dy)
    r = ra + t * (rb - ra)
    return ex * ex + ey * ey <= r * r


@njit(cache=True)
def _project_segments(joints, segs, radii, rot, trans, focal, cx, cy, params, visible):
    for s in range(segs.shape[0]):
        ok = True
        for e in range(2):
            p = joints[segs[s, e]]
            xc = rot[0, 0] * p[0] + rot[0, 1] * p[1] + rot[0, 2] * p[2] + trans[0]
            yc = rot[1, 0] * p[0] + rot[1, 1] * p[1] + rot[1, 2] * p[2] + trans[1]
            zc = rot[2, 0] * p[0] + rot[2, 1] * p[1] + rot[2, 2] * p[2] + trans[2]
            if zc <= 0.0:
                ok = False
                break
            params[s, 3 * e] = cx + focal * xc / zc
            params[s, 3 * e + 1] = cy + focal * yc / zc
            params[s, 3 * e + 2] = focal * radii[s] / zc
        visible[s] = ok


@njit(cache=True)
def segment_params(joints, segs, radii, rot, trans, focal, cx, cy):
    """Projected (ax, ay, ra, bx, by, rb) per segment and a visibility flag."""
    n = segs.shape[0]
    params = np.zeros((n, 6))
    visible = np.zeros(n, dtype=np.bool_)
    _project_segments(joints, segs, radii, rot, trans, focal, cx, cy, params, visible)
    return params, visible


@njit(cache=True)
def _pixel_range(lo, hi, size):
    # pixel indices k with lo <= k + 0.5 <= hi, clipped to [0, size)
    lo = max(lo, -1.0)
    hi = min(hi, size + 1.0)
    k0 = max(int(math.ceil(lo - 0.5)), 0)
    k1 = min(int(math.floor(hi - 0.5)), size - 1)
    return k0, k1


@njit(cache=True)
def _bbox(p, width, height):
    c0, c1 = _pixel_range(min(p[0] - p[2], p[3] - p[5]), max(p[0] + p[2], p[3] + p[5]), width)
    r0, r1 = _pixel_range(min(p[1] - p[2], p[4] - p[5]), max(p[1] + p[2], p[4] + p[5]), height)
    return r0, r1, c0, c1


@njit(cache=True)
def _fill(buf, row_off, col_off, p, r0, r1, c0, c1):
    ax, ay, ra, bx, by, rb = p[0], p[1], p[2], p[3], p[4], p[5]
    dx = bx - ax
    dy = by - ay
    rmax = max(ra, rb) + 1e-9
    for r in range(r0, r1 + 1):
        py = r + 0.5
        lo, hi = c0, c1
        if dy != 0.0:
            # an inside pixel lies within rmax (in x and in y) of some segment
            # point, so only the part of the segment within rmax of this row matters
            t0 = (py - rmax - ay) / dy
            t1 = (py + rmax - ay) / dy
            if t0 > t1:
                t0, t1 = t1, t0
            t0 = max(t0, 0.0)
            t1 = min(t1, 1.0)
            if t0 > t1:
                continue
            xa = ax + t0 * dx
            xb = ax + t1 * dx
            k0, k1 = _pixel_range(min(xa, xb) - rmax, max(xa, xb) + rmax, buf.shape[1] + col_off)
            lo = max(lo, k0)
            hi = min(hi, k1)
        for c in range(lo, hi + 1):
            if buf[r - row_off, c - col_off] == 0:
                if stadium_contains(c + 0.5, py, ax, ay, ra, bx, by, rb):
                    buf[r - row_off, c - col_off] = 1


@njit(cache=True)
def render(joints, segs, radii, rot, trans, focal, cx, cy, width, height):
    mask = np.zeros((height, width), dtype=np.uint8)
    params, visible = segment_params(joints, segs, radii, rot, trans, focal, cx, cy)
    for s in range(segs.shape[0]):
        if visible[s]:
            r0, r1, c0, c1 = _bbox(params[s], width, height)
            _fill(mask, 0, 0, params[s], r0, r1, c0, c1)
    return mask


@njit(cache=True)
def _count_into(joints, segs, radii, rot, trans, focal, cx, cy, observed, params, visible, boxes, buf):
    """(common, model) counts for one pose; ``buf`` is an all-zero image and is left all-zero."""
    height, width = observed.shape
    _project_segments(joints, segs, radii, rot, trans, focal, cx, cy, params, visible)
    ur0, ur1, uc0, uc1 = height, -1, width, -1
    for s in range(segs.shape[0]):
        if visible[s]:
            r0, r1, c0, c1 = _bbox(params[s], width, height)
            boxes[s, 0] = r0
            boxes[s, 1] = r1
            boxes[s, 2] = c0
            boxes[s, 3] = c1
            if r0 <= r1 and c0 <= c1:
                ur0 = min(ur0, r0)
                ur1 = max(ur1, r1)
                uc0 = min(uc0, c0)
                uc1 = max(uc1, c1)
    if ur1 < ur0:
        return 0, 0
    for s in range(segs.shape[0]):
        if visible[s]:
            _fill(buf, 0, 0, params[s], boxes[s, 0], boxes[s, 1], boxes[s, 2], boxes[s, 3])
    common = 0
    model = 0
    for r in range(ur0, ur1 + 1):
        for c in range(uc0, uc1 + 1):
            if buf[r, c]:
                buf[r, c] = 0
                model += 1
                if observed[r, c]:
                    common += 1
    return common, model


@njit(cache=True)
def _scratch(n_segments, height, width):
    return (
        np.zeros((n_segments, 6)),
        np.zeros(n_segments, dtype=np.bool_),
        np.zeros((n_segments, 4), dtype=np.int64),
        np.zeros((height, width), dtype=np.uint8),
    )


@njit(cache=True)
def count_batch(joints, segs, radii, rot, trans, focal, cx, cy, observed):
    """(common, model) foreground counts for each pose's rendering; shape (n, 2)."""
    out = np.zeros((joints.shape[0], 2), dtype=np.int64)
    params, visible, boxes, buf = _scratch(segs.shape[0], observed.shape[0], observed.shape[1])
    for i in range(joints.shape[0]):
        out[i, 0], out[i, 1] = _count_into(
            joints[i], segs, radii, rot, trans, focal, cx, cy, observed, params, visible, boxes, buf
        )
    return out


@njit(cache=True, parallel=True)
def count_batch_parallel(joints, segs, radii, rot, trans, focal, cx, cy, observed):
    """``count_batch`` over contiguous chunks of poses, one scratch buffer per chunk."""
    n = joints.shape[0]
    out = np.zeros((n, 2), dtype=np.int64)
    n_chunks = min(n, 64)
    for ch in prange(n_chunks):
        params, visible, boxes, buf = _scratch(segs.shape[0], observed.shape[0], observed.shape[1])
        for i in range(ch * n // n_chunks, (ch + 1) * n // n_chunks):
            c, m = _count_into(
                joints[i], segs, radii, rot, trans, focal, cx, cy, observed, params, visible, boxes, buf
            )
            out[i, 0] = c
            out[i, 1] = m
    return out
