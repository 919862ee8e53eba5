"""Readers and writers for skeleton, trajectory and report files.

Angles are written in degrees and lengths in meters.  CSV files use a header
row, comma separation and '.' decimals; floats are written with ``repr`` so
identical inputs give byte-identical files.
"""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .imaging import FleshModel, default_flesh
from .ipf import Trajectory
from .kinematics import ConfigError, Dof, Joint, Skeleton


def _deg(x: float) -> float:
    return round(math.degrees(x), 10)


# -- skeleton --------------------------------------------------------------------


def skeleton_to_dict(skeleton: Skeleton, flesh: FleshModel | None = None) -> dict:
    names = skeleton.joint_names
    flesh = flesh or default_flesh(skeleton)
    return {
        "body_height": skeleton.body_height,
        "joints": [
            {"name": j.name, "parent": None if j.parent < 0 else names[j.parent], "offset": list(j.offset)}
            for j in skeleton.joints
        ],
        "rendered_segments": [[names[p], names[c]] for p, c in skeleton.rendered_segments],
        "dofs": [
            {
                "name": d.name,
                "joint": names[d.joint],
                "kind": d.kind,
                "axis": list(d.axis),
                "min": _deg(d.lower) if d.angular else d.lower,
                "max": _deg(d.upper) if d.angular else d.upper,
            }
            for d in skeleton.dofs
        ],
        "flesh": {names[c]: r for (_, c), r in zip(skeleton.rendered_segments, flesh.radii)},
    }


def skeleton_from_dict(data: dict) -> tuple[Skeleton, FleshModel]:
    try:
        names = [j["name"] for j in data["joints"]]
        joints = tuple(
            Joint(j["name"], -1 if j.get("parent") is None else names.index(j["parent"]), tuple(map(float, j["offset"])))
            for j in data["joints"]
        )
        segments = tuple((names.index(p), names.index(c)) for p, c in data["rendered_segments"])
        dofs = []
        for d in data["dofs"]:
            angular = d["kind"] == "rotation"
            lo, hi = float(d["min"]), float(d["max"])
            dofs.append(
                Dof(
                    d["name"],
                    names.index(d["joint"]),
                    d["kind"],
                    tuple(map(float, d["axis"])),
                    math.radians(lo) if angular else lo,
                    math.radians(hi) if angular else hi,
                )
            )
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"malformed skeleton definition: {exc}") from exc
    skeleton = Skeleton(joints, segments, tuple(dofs), body_height=float(data.get("body_height", 1.75)))
    if "flesh" in data:
        radii = data["flesh"]
        try:
            flesh = FleshModel(tuple(float(radii[names[c]]) for _, c in segments))
        except KeyError as exc:
            raise ConfigError(f"flesh radius missing for segment ending at {exc}") from exc
    else:
        flesh = default_flesh(skeleton)
    return skeleton, flesh


def save_skeleton(path, skeleton: Skeleton, flesh: FleshModel | None = None) -> None:
    Path(path).write_text(json.dumps(skeleton_to_dict(skeleton, flesh), indent=2) + "\n")


def load_skeleton(path) -> tuple[Skeleton, FleshModel]:
    return skeleton_from_dict(json.loads(Path(path).read_text()))


# -- trajectories ----------------------------------------------------------------------


def trajectory_header(skeleton: Skeleton) -> list[str]:
    cols = ["frame", "time_s"]
    cols += [f"{d.name}_{'deg' if d.angular else 'm'}" for d in skeleton.dofs]
    cols += [f"{j}_{ax}" for j in skeleton.joint_names for ax in "xyz"]
    cols.append("weight")
    return cols


def trajectory_to_csv(trajectory: Trajectory, skeleton: Skeleton) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(trajectory_header(skeleton))
    ang = skeleton.angular_mask
    for k in range(len(trajectory)):
        pose = np.where(ang, np.degrees(trajectory.poses[k]), trajectory.poses[k])
        row = [k, repr(k / trajectory.frame_rate)]
        row += [repr(float(v)) for v in pose]
        row += [repr(float(v)) for v in trajectory.joints[k].ravel()]
        row.append(repr(float(trajectory.weights[k])))
        writer.writerow(row)
    return buf.getvalue()


def write_trajectory_csv(path, trajectory: Trajectory, skeleton: Skeleton) -> None:
    Path(path).write_text(trajectory_to_csv(trajectory, skeleton))


def read_trajectory_csv(path, frame_rate: float | None = None) -> Trajectory:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty trajectory file")
    header, body = rows[0], rows[1:]
    if not body:
        raise ValueError(f"{path}: trajectory has no frames")
    data = np.array([[float(v) for v in r] for r in body])
    pose_cols = [i for i, c in enumerate(header) if c.endswith("_deg") or c.endswith("_m")]
    joint_cols = [i for i, c in enumerate(header) if c[-2:] in ("_x", "_y", "_z")]
    poses = data[:, pose_cols].copy()
    for j, i in enumerate(pose_cols):
        if header[i].endswith("_deg"):
            poses[:, j] = np.radians(poses[:, j])
    joints = data[:, joint_cols].reshape(len(body), -1, 3)
    if frame_rate is None:
        times = data[:, header.index("time_s")]
        frame_rate = round(1.0 / (times[1] - times[0]), 9) if len(times) > 1 else 1.0
    return Trajectory(poses, data[:, header.index("weight")], joints, float(frame_rate))


def trajectory_to_dict(trajectory: Trajectory, skeleton: Skeleton) -> dict:
    ang = skeleton.angular_mask
    return {
        "frame_rate": trajectory.frame_rate,
        "dof_names": skeleton.dof_names,
        "dof_units": ["deg" if a else "m" for a in ang],
        "joint_names": skeleton.joint_names,
        "frames": [
            {
                "frame": k,
                "time_s": k / trajectory.frame_rate,
                "pose": [float(v) for v in np.where(ang, np.degrees(trajectory.poses[k]), trajectory.poses[k])],
                "joints": trajectory.joints[k].tolist(),
                "weight": float(trajectory.weights[k]),
            }
            for k in range(len(trajectory))
        ],
    }


def write_trajectory_json(path, trajectory: Trajectory, skeleton: Skeleton) -> None:
    Path(path).write_text(json.dumps(trajectory_to_dict(trajectory, skeleton), indent=1) + "\n")


def read_trajectory_json(path) -> Trajectory:
    data = json.loads(Path(path).read_text())
    frames = data["frames"]
    poses = np.array([f["pose"] for f in frames], dtype=float)
    ang = np.array([u == "deg" for u in data["dof_units"]])
    poses[:, ang] = np.radians(poses[:, ang])
    return Trajectory(
        poses,
        np.array([f["weight"] for f in frames], dtype=float),
        np.array([f["joints"] for f in frames], dtype=float),
        float(data["frame_rate"]),
    )


# -- tables ------------------------------------------------------------------------------


def write_rows(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])


def write_json(path, data) -> None:
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=False) + "\n")
