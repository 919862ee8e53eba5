"""Articulated body model: skeleton tree, joint limits and forward kinematics.

World frame convention: x forward (direction of travel at zero heading),
y to the subject's left, z up.  Lengths are meters, angles radians.

The default model has 19 joints, 18 parent links (17 of them fleshed) and
31 degrees of freedom::

    sacrum (root: 3 translations + 3 rotations)
    +-- thorax (trunk flex/lateral/axial) -- neck (flex/axial) -- head -- head_top
    |                                        +-- shoulder (3) -- elbow (1) -- wrist   x2
    +-- hip (3) -- knee (1) -- ankle (flex/rotation) -- toe                          x2
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from ._fk import fk_batch

N_DOF = 31
N_JOINTS = 19
N_SEGMENTS = 17


class DimensionError(ValueError):
    """A pose or array has the wrong shape."""


class LimitError(ValueError):
    """A pose violates one or more DOF limits."""

    def __init__(self, violations):
        self.violations = list(violations)
        detail = ", ".join(
            f"dof {v.dof} ({v.name}) = {v.value:.6g} outside {v.bound}" for v in self.violations
        )
        super().__init__(f"pose outside joint limits: {detail}")


class ConfigError(ValueError):
    """Invalid model or filter configuration."""


class Violation(NamedTuple):
    dof: int
    name: str
    value: float
    bound: tuple[float, float]


@dataclass(frozen=True)
class Joint:
    name: str
    parent: int  # -1 for the root
    offset: tuple[float, float, float]  # rest translation in the parent frame


@dataclass(frozen=True)
class Dof:
    name: str
    joint: int
    kind: str  # "translation" or "rotation"
    axis: tuple[float, float, float]  # unit vector in the joint's parent frame
    lower: float
    upper: float

    @property
    def angular(self) -> bool:
        return self.kind == "rotation"


@dataclass(frozen=True)
class Skeleton:
    joints: tuple[Joint, ...]
    rendered_segments: tuple[tuple[int, int], ...]
    dofs: tuple[Dof, ...]
    body_height: float = 1.75
    _order: tuple[int, ...] = field(init=False, repr=False, compare=False)
    _fk_tables: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        roots = [i for i, j in enumerate(self.joints) if j.parent < 0]
        if len(roots) != 1:
            raise ConfigError(f"skeleton needs exactly one root joint, found {len(roots)}")
        order = _topological_order(self.joints)
        object.__setattr__(self, "_order", order)
        links = {(j.parent, i) for i, j in enumerate(self.joints) if j.parent >= 0}
        for seg in self.rendered_segments:
            if tuple(seg) not in links:
                raise ConfigError(f"rendered segment {seg} is not a parent link of the tree")
        for k, d in enumerate(self.dofs):
            if not d.lower < d.upper:
                raise ConfigError(f"dof {k} ({d.name}): lower limit must be below upper limit")
            if d.kind not in ("translation", "rotation"):
                raise ConfigError(f"dof {k} ({d.name}): unknown kind {d.kind!r}")
            if not 0 <= d.joint < len(self.joints):
                raise ConfigError(f"dof {k} ({d.name}): joint index {d.joint} out of range")
            if d.kind == "translation" and self.joints[d.joint].parent >= 0:
                raise ConfigError(f"dof {k} ({d.name}): only the root may translate")
            if not np.linalg.norm(d.axis) > 0:
                raise ConfigError(f"dof {k} ({d.name}): axis must be non-zero")
        # flat arrays consumed by the compiled forward kinematics
        tables = (
            np.array([d.joint for d in self.dofs], dtype=np.int64),
            np.array([d.angular for d in self.dofs], dtype=np.bool_),
            np.array([np.asarray(d.axis, float) / np.linalg.norm(d.axis) for d in self.dofs]).reshape(-1, 3),
            np.array(order, dtype=np.int64),
            np.array([j.parent for j in self.joints], dtype=np.int64),
            np.array([j.offset for j in self.joints], dtype=float).reshape(-1, 3),
        )
        object.__setattr__(self, "_fk_tables", tables)

    # -- lookups -------------------------------------------------------------

    @property
    def n_dof(self) -> int:
        return len(self.dofs)

    @property
    def joint_names(self) -> list[str]:
        return [j.name for j in self.joints]

    @property
    def dof_names(self) -> list[str]:
        return [d.name for d in self.dofs]

    @property
    def root(self) -> int:
        return next(i for i, j in enumerate(self.joints) if j.parent < 0)

    def joint_index(self, name: str) -> int:
        try:
            return self.joint_names.index(name)
        except ValueError:
            raise KeyError(f"no joint named {name!r}") from None

    def dof_index(self, name: str) -> int:
        try:
            return self.dof_names.index(name)
        except ValueError:
            raise KeyError(f"no dof named {name!r}") from None

    @property
    def lower(self) -> np.ndarray:
        return np.array([d.lower for d in self.dofs])

    @property
    def upper(self) -> np.ndarray:
        return np.array([d.upper for d in self.dofs])

    @property
    def angular_mask(self) -> np.ndarray:
        return np.array([d.angular for d in self.dofs])

    def rest_lengths(self) -> np.ndarray:
        """Length of each rendered segment."""
        return np.array([np.linalg.norm(self.joints[c].offset) for _, c in self.rendered_segments])

    def kinematic_chains(self) -> list[list[int]]:
        """Root-to-leaf joint paths."""
        children = {i: [] for i in range(len(self.joints))}
        for i, j in enumerate(self.joints):
            if j.parent >= 0:
                children[j.parent].append(i)
        chains = []
        for leaf in (i for i, c in children.items() if not c):
            path = [leaf]
            while self.joints[path[-1]].parent >= 0:
                path.append(self.joints[path[-1]].parent)
            chains.append(path[::-1])
        return chains

    def clamp(self, pose) -> np.ndarray:
        return np.clip(np.asarray(pose, dtype=float), self.lower, self.upper)

    def neutral_pose(self) -> np.ndarray:
        """All DOFs zero except clamping into range."""
        return self.clamp(np.zeros(self.n_dof))


def _topological_order(joints: Sequence[Joint]) -> tuple[int, ...]:
    order: list[int] = []
    placed: set[int] = set()
    remaining = list(range(len(joints)))
    while remaining:
        progress = False
        for i in list(remaining):
            p = joints[i].parent
            if p < 0 or p in placed:
                order.append(i)
                placed.add(i)
                remaining.remove(i)
                progress = True
        if not progress:
            raise ConfigError("joint parent links contain a cycle or dangling parent")
    return tuple(order)


# -- default model -------------------------------------------------------------

_X, _Y, _Z = (1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)
_NEG_Y = (0.0, -1.0, 0.0)
_NEG_X = (-1.0, 0.0, 0.0)


def default_skeleton(body_height: float = 1.75) -> Skeleton:
    """The built-in 19-joint / 31-DOF model scaled to ``body_height``.

    Joint limits come from standard anatomical ranges; hip flexion uses
    the walking range of -30..+60 degrees.
    """
    s = body_height / 1.75
    joint_specs = [
        ("sacrum", None, (0.0, 0.0, 0.0)),
        ("thorax", "sacrum", (0.0, 0.0, 0.05)),
        ("neck", "thorax", (0.0, 0.0, 0.45)),
        ("head", "neck", (0.0, 0.0, 0.08)),
        ("head_top", "head", (0.0, 0.0, 0.18)),
        ("l_shoulder", "neck", (0.0, 0.18, -0.03)),
        ("l_elbow", "l_shoulder", (0.0, 0.0, -0.29)),
        ("l_wrist", "l_elbow", (0.0, 0.0, -0.25)),
        ("r_shoulder", "neck", (0.0, -0.18, -0.03)),
        ("r_elbow", "r_shoulder", (0.0, 0.0, -0.29)),
        ("r_wrist", "r_elbow", (0.0, 0.0, -0.25)),
        ("l_hip", "sacrum", (0.0, 0.09, -0.07)),
        ("l_knee", "l_hip", (0.0, 0.0, -0.43)),
        ("l_ankle", "l_knee", (0.0, 0.0, -0.43)),
        ("l_toe", "l_ankle", (0.15, 0.0, -0.05)),
        ("r_hip", "sacrum", (0.0, -0.09, -0.07)),
        ("r_knee", "r_hip", (0.0, 0.0, -0.43)),
        ("r_ankle", "r_knee", (0.0, 0.0, -0.43)),
        ("r_toe", "r_ankle", (0.15, 0.0, -0.05)),
    ]
    names = [n for n, _, _ in joint_specs]
    joints = tuple(
        Joint(n, -1 if p is None else names.index(p), tuple(s * c for c in off))
        for n, p, off in joint_specs
    )
    segments = tuple(
        (j.parent, i) for i, j in enumerate(joints) if j.parent >= 0 and joints[i].name != "thorax"
    )

    r = math.radians
    dof_specs = [
        # name, joint, kind, axis, lower, upper (degrees for rotations)
        ("root_tx", "sacrum", "translation", _X, -10.0, 10.0),
        ("root_ty", "sacrum", "translation", _Y, -10.0, 10.0),
        ("root_tz", "sacrum", "translation", _Z, 0.0, 3.0),
        ("root_tilt", "sacrum", "rotation", _Y, -45.0, 45.0),
        ("root_roll", "sacrum", "rotation", _X, -45.0, 45.0),
        ("root_heading", "sacrum", "rotation", _Z, -180.0, 180.0),
        ("trunk_flex", "thorax", "rotation", _Y, -30.0, 60.0),
        ("trunk_lateral", "thorax", "rotation", _X, -30.0, 30.0),
        ("trunk_axial", "thorax", "rotation", _Z, -45.0, 45.0),
        ("neck_flex", "neck", "rotation", _Y, -40.0, 60.0),
        ("neck_axial", "neck", "rotation", _Z, -70.0, 70.0),
    ]
    for side, abd_axis in (("l", _X), ("r", _NEG_X)):
        dof_specs += [
            (f"{side}_shoulder_flex", f"{side}_shoulder", "rotation", _NEG_Y, -60.0, 180.0),
            (f"{side}_shoulder_abd", f"{side}_shoulder", "rotation", abd_axis, -20.0, 150.0),
            (f"{side}_shoulder_axial", f"{side}_shoulder", "rotation", _Z, -90.0, 90.0),
            (f"{side}_elbow_flex", f"{side}_elbow", "rotation", _NEG_Y, 0.0, 150.0),
        ]
    for side, abd_axis in (("l", _X), ("r", _NEG_X)):
        dof_specs += [
            (f"{side}_hip_flex", f"{side}_hip", "rotation", _NEG_Y, -30.0, 60.0),
            (f"{side}_hip_abd", f"{side}_hip", "rotation", abd_axis, -20.0, 45.0),
            (f"{side}_hip_axial", f"{side}_hip", "rotation", _Z, -40.0, 40.0),
            (f"{side}_knee_flex", f"{side}_knee", "rotation", _Y, 0.0, 140.0),
            (f"{side}_ankle_flex", f"{side}_ankle", "rotation", _NEG_Y, -50.0, 30.0),
            (f"{side}_ankle_rot", f"{side}_ankle", "rotation", _Z, -30.0, 30.0),
        ]
    dofs = tuple(
        Dof(
            name,
            names.index(joint),
            kind,
            axis,
            lo if kind == "translation" else r(lo),
            hi if kind == "translation" else r(hi),
        )
        for name, joint, kind, axis, lo, hi in dof_specs
    )
    return Skeleton(joints, segments, dofs, body_height=body_height)


# -- pose checks ---------------------------------------------------------------


def as_pose(skeleton: Skeleton, pose) -> np.ndarray:
    arr = np.asarray(pose, dtype=float)
    if arr.shape != (skeleton.n_dof,):
        raise DimensionError(f"pose must have {skeleton.n_dof} values, got shape {arr.shape}")
    return arr


def validate_pose(skeleton: Skeleton, pose) -> list[Violation]:
    """Return one Violation per out-of-range DOF (bounds inclusive)."""
    arr = as_pose(skeleton, pose)
    out = []
    for k, (v, d) in enumerate(zip(arr, skeleton.dofs)):
        if not d.lower <= v <= d.upper:
            out.append(Violation(k, d.name, float(v), (d.lower, d.upper)))
    return out


def check_pose(skeleton: Skeleton, pose) -> np.ndarray:
    arr = as_pose(skeleton, pose)
    bad = validate_pose(skeleton, arr)
    if bad:
        raise LimitError(bad)
    return arr


def check_poses(skeleton: Skeleton, poses) -> np.ndarray:
    arr = np.asarray(poses, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != skeleton.n_dof:
        raise DimensionError(f"poses must have shape (n, {skeleton.n_dof}), got {arr.shape}")
    bad_rows = np.flatnonzero(((arr < skeleton.lower) | (arr > skeleton.upper)).any(axis=1))
    if bad_rows.size:
        raise LimitError(validate_pose(skeleton, arr[bad_rows[0]]))
    return arr


# -- forward kinematics ----------------------------------------------------------


def forward_kinematics_batch(skeleton: Skeleton, poses, check: bool = True) -> np.ndarray:
    """World joint positions for a batch of poses; shape (n, joints, 3).

    Each joint's local rotation is the product of its DOF rotations in
    table order (flexion, abduction, axial).  A child sits at its rest
    offset rotated by the accumulated rotation of its parent.
    """
    poses = check_poses(skeleton, poses) if check else np.asarray(poses, dtype=float)
    return fk_batch(np.ascontiguousarray(poses), *skeleton._fk_tables)


def forward_kinematics(skeleton: Skeleton, pose) -> np.ndarray:
    """World positions of every joint, shape (joints, 3); raises LimitError on invalid poses."""
    return forward_kinematics_batch(skeleton, check_pose(skeleton, pose)[None, :], check=False)[0]


# -- interval grids --------------------------------------------------------------


def interval_offsets(step: float, levels: int) -> np.ndarray:
    half = (levels - 1) // 2
    return np.arange(-half, half + 1) * step


def _check_grid(dims, levels: int, skeleton: Skeleton) -> list[int]:
    dims = [int(d) for d in dims]
    if levels < 1 or levels % 2 == 0:
        raise ConfigError(f"grid levels must be a positive odd integer, got {levels}")
    if len(set(dims)) != len(dims):
        raise ConfigError(f"interesting dims must be distinct, got {dims}")
    if any(not 0 <= d < skeleton.n_dof for d in dims):
        raise ConfigError(f"interesting dims must lie in 0..{skeleton.n_dof - 1}, got {dims}")
    return dims


def expand_interval(pose, interesting_dims, step, levels: int, skeleton: Skeleton) -> np.ndarray:
    """Cartesian grid of ``levels**len(dims)`` poses around ``pose``.

    Grid values are clamped to DOF limits and duplicates produced by
    clamping are kept.  Rows come in odometer order: the last interesting
    dim varies fastest.  ``step`` may be a scalar or one step per dim.
    """
    arr = as_pose(skeleton, pose)
    return expand_intervals(arr[None, :], interesting_dims, step, levels, skeleton)


def expand_intervals(poses, interesting_dims, step, levels: int, skeleton: Skeleton) -> np.ndarray:
    """``expand_interval`` of every row of ``poses``, grids stacked in row order."""
    dims = _check_grid(interesting_dims, levels, skeleton)
    poses = np.asarray(poses, dtype=float)
    size = levels ** len(dims)
    out = np.repeat(poses, size, axis=0)
    if dims:
        steps = np.broadcast_to(np.asarray(step, dtype=float), (len(dims),))
        offsets = np.array(list(itertools.product(*[interval_offsets(s, levels) for s in steps])))
        values = (poses[:, None, dims] + offsets[None, :, :]).reshape(-1, len(dims))
        out[:, dims] = np.clip(values, skeleton.lower[dims], skeleton.upper[dims])
    return out
