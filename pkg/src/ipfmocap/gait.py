"""Gait parameters from an estimated trajectory.

Stance is detected by thresholding each ankle's speed along the walking
direction (the principal horizontal direction of sacrum travel), after a
running median removes frame-to-frame tracker jitter.  Lengths are
measured along that direction too, so results do not depend on where the
camera was.  Step timing comes from the moments the ankles pass each other,
which stays stable when tracker jitter fragments the stance intervals.
"""
from __future__ import annotations

import statistics
from dataclasses import asdict, dataclass, field

import numpy as np

from .ipf import Trajectory
from .kinematics import Skeleton, default_skeleton

DEFAULT_VELOCITY_THRESHOLD = 0.4  # m/s
DEFAULT_WINDOW = 0.1  # s, span of the speed difference
DEFAULT_MEDIAN_HALF_WIDTH = 0.075  # s, running median applied before differencing
DEFAULT_MIN_STANCE = 0.1  # s
DEFAULT_MAX_GAP = 0.0  # s
DEFAULT_CROSSING_BAND = 0.05  # m


class InsufficientEventsError(ValueError):
    """Too few foot events to compute a gait quantity."""


@dataclass
class FootEvents:
    """Inclusive (start, end) frame ranges of stance per foot."""

    left: list[tuple[int, int]] = field(default_factory=list)
    right: list[tuple[int, int]] = field(default_factory=list)

    def stance_mask(self, n_frames: int, side: str) -> np.ndarray:
        mask = np.zeros(n_frames, dtype=bool)
        for s, e in getattr(self, side):
            mask[s : e + 1] = True
        return mask


@dataclass
class GaitReport:
    walking_speed: float  # m/s
    step_length: float  # m
    stride_length: float  # m
    stride_width: float  # m
    cadence: float  # steps/min
    double_support_time: float  # s, typical duration of one double-support phase
    single_support_left: float  # s
    single_support_right: float  # s
    angle_ranges: dict[str, float]  # degrees
    steps: list[float] = field(default_factory=list)
    strides: list[float] = field(default_factory=list)

    def as_dict(self) -> dict:
        return asdict(self)

    def rows(self) -> list[tuple[str, float, str]]:
        """(quantity, value, unit) rows for tabular output."""
        out = [
            ("walking_speed", self.walking_speed, "m/s"),
            ("step_length", self.step_length, "m"),
            ("stride_length", self.stride_length, "m"),
            ("stride_width", self.stride_width, "m"),
            ("cadence", self.cadence, "steps/min"),
            ("double_support_time", self.double_support_time, "s"),
            ("single_support_left", self.single_support_left, "s"),
            ("single_support_right", self.single_support_right, "s"),
        ]
        out += [(f"{k}_range", v, "deg") for k, v in self.angle_ranges.items()]
        return out


def _runs(mask: np.ndarray) -> list[tuple[int, int]]:
    """Inclusive (start, end) of each run of True values."""
    padded = np.concatenate([[False], mask, [False]]).astype(np.int8)
    edges = np.flatnonzero(np.diff(padded))
    return [(int(s), int(e) - 1) for s, e in zip(edges[::2], edges[1::2])]


def horizontal_speed(positions: np.ndarray, frame_rate: float) -> np.ndarray:
    """Central-difference speed of the x/y components; one-sided at the ends."""
    xy = positions[:, :2]
    vel = np.gradient(xy, axis=0) * frame_rate
    return np.linalg.norm(vel, axis=1)


def windowed_speed(values: np.ndarray, frame_rate: float, half_width: int) -> np.ndarray:
    """Speed of a 1-D signal from a centred difference spanning 2*half_width frames.

    The ends are padded by repeating the first and last samples.
    """
    h = max(1, int(half_width))
    padded = np.concatenate([np.full(h, values[0]), values, np.full(h, values[-1])])
    return np.abs(padded[2 * h :] - padded[: -2 * h]) * frame_rate / (2 * h)


def running_median(values: np.ndarray, half_width: int) -> np.ndarray:
    """Centred running median over 2*half_width+1 samples, ends padded by repetition.

    Monotone stretches pass through unchanged, so plateau edges stay put.
    """
    h = int(half_width)
    if h < 1 or len(values) == 0:
        return np.asarray(values, dtype=float)
    padded = np.pad(np.asarray(values, dtype=float), h, mode="edge")
    return np.median(np.lib.stride_tricks.sliding_window_view(padded, 2 * h + 1), axis=1)


def _fill_gaps(mask: np.ndarray, max_gap: int) -> np.ndarray:
    out = mask.copy()
    runs = _runs(mask)
    for (_, e0), (s1, _) in zip(runs, runs[1:]):
        if s1 - e0 - 1 <= max_gap:
            out[e0 + 1 : s1] = True
    return out


def walking_axes(trajectory: Trajectory, skeleton: Skeleton | None = None):
    """Unit horizontal (longitudinal, lateral) directions from sacrum travel."""
    sk = skeleton or default_skeleton()
    xy = trajectory.joints[:, sk.root, :2]
    centred = xy - xy.mean(axis=0)
    if np.allclose(centred, 0.0, atol=1e-12):
        return np.array([1.0, 0.0]), np.array([0.0, 1.0])
    _, _, vt = np.linalg.svd(centred, full_matrices=False)
    axis = vt[0]
    if np.dot(xy[-1] - xy[0], axis) < 0:
        axis = -axis
    return axis, np.array([-axis[1], axis[0]])


def detect_foot_events(
    trajectory: Trajectory,
    velocity_threshold: float = DEFAULT_VELOCITY_THRESHOLD,
    skeleton: Skeleton | None = None,
    window: float = DEFAULT_WINDOW,
    min_stance: float = DEFAULT_MIN_STANCE,
    max_gap: float = DEFAULT_MAX_GAP,
    median_half_width: float = DEFAULT_MEDIAN_HALF_WIDTH,
) -> FootEvents:
    """Stance intervals per foot.

    A frame is stance when the ankle's speed along the walking direction,
    differenced over ``window`` seconds after a running median of half-width
    ``median_half_width`` seconds, is below ``velocity_threshold``.
    Swing gaps shorter than ``max_gap`` seconds are closed and stance runs
    shorter than ``min_stance`` seconds (at least two frames) are dropped.
    """
    if len(trajectory) < 3:
        raise ValueError(f"foot event detection needs at least 3 frames, got {len(trajectory)}")
    sk = skeleton or default_skeleton()
    fr = trajectory.frame_rate
    axis, _ = walking_axes(trajectory, sk)
    half = max(1, int(round(window * fr / 2)))
    gap = int(round(max_gap * fr))
    shortest = max(2, int(round(min_stance * fr)))
    smooth = int(round(median_half_width * fr))
    events = FootEvents()
    for side in ("left", "right"):
        along = trajectory.joints[:, sk.joint_index(f"{side[0]}_ankle"), :2] @ axis
        still = windowed_speed(running_median(along, smooth), fr, half) < velocity_threshold
        if gap > 0:
            still = _fill_gaps(still, gap)
        setattr(events, side, [(s, e) for s, e in _runs(still) if e - s + 1 >= shortest])
    return events


def ankle_longitudinal(trajectory: Trajectory, skeleton: Skeleton | None = None) -> dict[str, np.ndarray]:
    """Per-frame ankle displacement along the walking direction, relative to the first sacrum position."""
    sk = skeleton or default_skeleton()
    axis, _ = walking_axes(trajectory, sk)
    origin = trajectory.joints[0, sk.root, :2]
    return {
        side: (trajectory.joints[:, sk.joint_index(f"{side[0]}_ankle"), :2] - origin) @ axis
        for side in ("left", "right")
    }


def foot_passes(trajectory: Trajectory, skeleton: Skeleton | None = None, band: float = DEFAULT_CROSSING_BAND):
    """Times (s) at which one ankle overtakes the other along the walking direction.

    One pass happens per step.  The ankle separation must leave a dead band of
    +-``band`` metres on the opposite side before a new pass is counted, and the
    pass time is linearly interpolated at the last sign change in between.
    """
    disp = ankle_longitudinal(trajectory, skeleton)
    sep = disp["left"] - disp["right"]
    outside = np.flatnonzero(np.abs(sep) > band)
    times = []
    for i, j in zip(outside, outside[1:]):
        if np.sign(sep[i]) == np.sign(sep[j]):
            continue
        seg = sep[i : j + 1]
        k = i + int(np.flatnonzero(np.sign(seg[:-1]) != np.sign(seg[1:]))[-1])
        a, b = sep[k], sep[k + 1]
        frac = 0.0 if b == a else a / (a - b)
        times.append((k + frac) / trajectory.frame_rate)
    return np.array(times)


def _episode_duration(mask: np.ndarray, frame_rate: float) -> float:
    """Typical length (s) of the runs in ``mask``.

    Runs touching either end of the trajectory are cut off and ignored when
    complete runs exist; single-frame runs are treated as jitter.  The lower
    median keeps the result a whole number of frame periods.
    """
    runs = _runs(mask)
    n = len(mask)
    interior = [r for r in runs if r[0] > 0 and r[1] < n - 1]
    use = [e - s + 1 for s, e in (interior or runs)]
    use = [k for k in use if k >= 2] or use
    if not use:
        return 0.0
    return statistics.median_low(use) / frame_rate


def compute_gait_report(
    trajectory: Trajectory,
    events: FootEvents,
    skeleton: Skeleton | None = None,
    crossing_band: float = DEFAULT_CROSSING_BAND,
) -> GaitReport:
    sk = skeleton or default_skeleton()
    n = len(trajectory)
    fr = trajectory.frame_rate
    long_axis, lat_axis = walking_axes(trajectory, sk)

    if max(len(events.left), len(events.right)) < 2:
        raise InsufficientEventsError(
            "stride length needs at least two stance intervals on one foot "
            f"(found {len(events.left)} left, {len(events.right)} right)"
        )

    placements = []  # (start, end, side, horizontal position)
    for side in ("left", "right"):
        ankle = trajectory.joints[:, sk.joint_index(f"{side[0]}_ankle"), :2]
        for s, e in getattr(events, side):
            placements.append((s, e, side, ankle[s : e + 1].mean(axis=0)))
    placements.sort(key=lambda p: (p[0], p[2]))

    steps, widths = [], []
    for a, b in zip(placements, placements[1:]):
        if a[2] != b[2]:
            steps.append(float((b[3] - a[3]) @ long_axis))
            widths.append(abs(float((b[3] - a[3]) @ lat_axis)))
    if not steps:
        raise InsufficientEventsError("step length needs consecutive stance intervals on opposite feet")

    strides = []
    for side in ("left", "right"):
        own = [p for p in placements if p[2] == side]
        strides += [float((b[3] - a[3]) @ long_axis) for a, b in zip(own, own[1:])]

    passes = foot_passes(trajectory, sk, crossing_band)
    if len(passes) < 2:
        raise InsufficientEventsError(
            f"cadence needs at least two moments where the feet pass each other (found {len(passes)})"
        )
    step_times = np.diff(passes)

    left = events.stance_mask(n, "left")
    right = events.stance_mask(n, "right")
    sacrum = trajectory.joints[:, sk.root, :2]
    elapsed = (n - 1) / fr

    ranges = {}
    for name in ("l_hip_flex", "r_hip_flex", "l_knee_flex", "r_knee_flex"):
        vals = np.degrees(trajectory.poses[:, sk.dof_index(name)])
        ranges[name] = float(vals.max() - vals.min())

    return GaitReport(
        walking_speed=float(np.linalg.norm(sacrum[-1] - sacrum[0]) / elapsed),
        step_length=float(np.mean(steps)),
        stride_length=float(np.mean(strides)) if strides else float("nan"),
        stride_width=float(np.mean(widths)),
        cadence=60.0 / float(np.mean(step_times)),
        double_support_time=_episode_duration(left & right, fr),
        single_support_left=_episode_duration(left & ~right, fr),
        single_support_right=_episode_duration(right & ~left, fr),
        angle_ranges=ranges,
        steps=steps,
        strides=strides,
    )
