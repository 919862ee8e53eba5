"""Synthetic walking sequences with ground truth, and trajectory evaluation."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .imaging import CameraModel, FleshModel, GrayFrame, SilhouetteImage, default_camera, render_joints
from .ipf import Trajectory
from .kinematics import DimensionError, Skeleton, forward_kinematics_batch

BACKGROUND_LEVEL = 60
FOREGROUND_OFFSET = 100


@dataclass(frozen=True)
class WalkScenario:
    body_height: float = 1.75
    step_length: float = 0.40  # m
    cadence: float = 60.0  # steps/min
    heading_deg: float = 0.0
    frame_rate: float = 20.0
    frame_count: int = 40
    camera: CameraModel = field(default_factory=default_camera)
    noise_rate: float = 0.0  # fraction of pixels flipped per frame
    seed: int = 0
    duty_factor: float = 0.6  # stance fraction of the gait cycle
    foot_lift: float = 0.08  # m, peak ankle clearance in swing

    def __post_init__(self):
        if self.frame_count < 1:
            raise ValueError("frame_count must be at least 1")
        if not 0.0 <= self.noise_rate < 1.0:
            raise ValueError("noise_rate must lie in [0, 1)")
        if not 0.5 <= self.duty_factor < 1.0:
            raise ValueError("duty_factor must lie in [0.5, 1)")
        if self.cadence < 0 or self.step_length < 0 or not self.frame_rate > 0:
            raise ValueError("cadence and step_length must be non-negative and frame_rate positive")

    @property
    def speed(self) -> float:
        return self.step_length * self.cadence / 60.0

    @property
    def stride_period(self) -> float:
        return math.inf if self.cadence == 0 else 120.0 / self.cadence

    @property
    def double_support_time(self) -> float:
        """Duration of each double-support phase, in seconds."""
        return 0.0 if self.cadence == 0 else (self.duty_factor - 0.5) * self.stride_period


@dataclass
class GeneratedWalk:
    frames: list[GrayFrame]
    silhouettes: list[SilhouetteImage]
    background: GrayFrame
    truth: Trajectory


def _leg_angles(dx, height, thigh, shank):
    """Hip and knee flexion placing the ankle ``dx`` ahead of and ``height`` below the hip."""
    reach = np.hypot(dx, height)
    reach = np.clip(reach, abs(thigh - shank) + 1e-6, 0.999 * (thigh + shank))
    knee = math.pi - np.arccos((thigh**2 + shank**2 - reach**2) / (2 * thigh * shank))
    hip = np.arctan2(dx, height) + np.arccos((thigh**2 + reach**2 - shank**2) / (2 * thigh * reach))
    return hip, knee


def walk_poses(scenario: WalkScenario, skeleton: Skeleton) -> np.ndarray:
    """Ground-truth poses (frames, dof) for a straight walk centred on the world origin.

    Stance feet stay planted; swing ankles follow a raised-cosine path.  The
    pelvis bobs sinusoidally twice per stride and the leg angles follow from
    the ankle targets by planar two-link geometry.
    """
    sk = skeleton
    idx = sk.dof_index
    jnt = sk.joints
    s = sk.body_height / 1.75
    thigh = float(np.linalg.norm(jnt[sk.joint_index("l_knee")].offset))
    shank = float(np.linalg.norm(jnt[sk.joint_index("l_ankle")].offset))
    hip_drop = -jnt[sk.joint_index("l_hip")].offset[2]
    ankle_z = 0.08 * s

    n = scenario.frame_count
    t = np.arange(n) / scenario.frame_rate
    v = scenario.speed
    period = scenario.stride_period
    duty = scenario.duty_factor
    duration = (n - 1) / scenario.frame_rate
    start = -v * duration / 2.0
    progress = start + v * t

    reach = v * duty * period / 2.0 if v > 0 else 0.0
    leg_max = 0.985 * (thigh + shank)
    h_mid = min(leg_max, 2 * thigh * math.cos(math.radians(12.5)))
    h_ds = min(h_mid, math.sqrt(max(leg_max**2 - reach**2, 0.0)))
    bob = (h_mid - h_ds) / 1.81
    if v > 0:
        hip_height = (h_mid - bob) + bob * np.cos(4 * math.pi * (t / period - 0.3))
    else:
        hip_height = np.full(n, h_mid)

    poses = np.tile(sk.neutral_pose(), (n, 1))
    heading = math.radians(scenario.heading_deg)
    poses[:, idx("root_tx")] = progress * math.cos(heading)
    poses[:, idx("root_ty")] = progress * math.sin(heading)
    poses[:, idx("root_tz")] = hip_height + ankle_z + hip_drop
    poses[:, idx("root_heading")] = heading

    for side, phase_shift in (("r", 0.0), ("l", 0.5)):
        if v > 0:
            cycle = t / period - phase_shift
            phase = cycle - np.floor(cycle)
            strike_progress = start + v * (t - phase * period)
            ankle_x = strike_progress + reach
            swing = phase >= duty
            u = np.where(swing, (phase - duty) / (1 - duty), 0.0)
            ankle_x = ankle_x + np.where(swing, v * period * (1 - np.cos(math.pi * u)) / 2, 0.0)
            lift = np.where(swing, scenario.foot_lift * np.sin(math.pi * u), 0.0)
        else:
            ankle_x = progress.copy()
            lift = np.zeros(n)
        hip, knee = _leg_angles(ankle_x - progress, hip_height - lift, thigh, shank)
        poses[:, idx(f"{side}_hip_flex")] = hip
        poses[:, idx(f"{side}_knee_flex")] = knee
        poses[:, idx(f"{side}_ankle_flex")] = knee - hip
    return sk.clamp(poses)


def generate_walk(scenario: WalkScenario, skeleton: Skeleton, flesh: FleshModel) -> GeneratedWalk:
    poses = walk_poses(scenario, skeleton)
    truth = Trajectory.from_poses(skeleton, poses, scenario.frame_rate)
    cam = scenario.camera
    background = GrayFrame(np.full((cam.height, cam.width), BACKGROUND_LEVEL, dtype=np.uint8))

    silhouettes, frames = [], []
    for k, joints in enumerate(truth.joints):
        sil = render_joints(skeleton, flesh, joints, cam)
        pixels = np.where(sil.mask, BACKGROUND_LEVEL + FOREGROUND_OFFSET, BACKGROUND_LEVEL).astype(np.uint8)
        if scenario.noise_rate > 0:
            rng = np.random.default_rng([scenario.seed, k])
            n_flip = int(round(scenario.noise_rate * pixels.size))
            flat = pixels.reshape(-1)
            hit = rng.choice(pixels.size, size=n_flip, replace=False)
            flat[hit] = np.where(flat[hit] == BACKGROUND_LEVEL, BACKGROUND_LEVEL + FOREGROUND_OFFSET, BACKGROUND_LEVEL)
        silhouettes.append(sil)
        frames.append(GrayFrame(pixels))
    if all(s.count == 0 for s in silhouettes):
        raise ValueError("the walk never enters the camera's field of view")
    return GeneratedWalk(frames, silhouettes, background, truth)


@dataclass
class EvalReport:
    joint_names: list[str]
    rmse: np.ndarray  # per joint, m
    max_error: np.ndarray  # per joint, m

    @property
    def mean_rmse(self) -> float:
        return float(np.mean(self.rmse))

    def as_dict(self) -> dict:
        return {
            "mean_rmse_m": self.mean_rmse,
            "joints": {
                name: {"rmse_m": float(r), "max_error_m": float(m)}
                for name, r, m in zip(self.joint_names, self.rmse, self.max_error)
            },
        }


def evaluate(estimated: Trajectory, truth: Trajectory, joint_names=None) -> EvalReport:
    """Per-joint RMSE and max of 3D position error over frames."""
    if estimated.joints.shape != truth.joints.shape:
        raise DimensionError(
            f"trajectory shapes differ: estimated {estimated.joints.shape}, truth {truth.joints.shape}"
        )
    err = np.linalg.norm(estimated.joints - truth.joints, axis=2)
    rmse = np.sqrt(np.mean(err**2, axis=0))
    names = list(joint_names) if joint_names is not None else [f"joint{i}" for i in range(err.shape[1])]
    return EvalReport(names, rmse, err.max(axis=0))
