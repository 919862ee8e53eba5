"""Interval Particle Filtering.

One filter cycle per frame, with no motion model:

* select  - keep the M heaviest distinct particles,
* predict - replace each by a deterministic grid of I neighbours over the
  "interesting" DOFs L and add white noise to the remaining DOFs R,
* measure - weight every particle against the observed silhouettes and
  report the heaviest one as the pose estimate.

The first frame is an exhaustive search over a configured pose lattice.
"""
from __future__ import annotations

import itertools
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .imaging import CameraModel, FleshModel, GrayFrame, SilhouetteImage, extract_silhouette, overlap_counts
from .kinematics import (
    ConfigError,
    DimensionError,
    Skeleton,
    expand_intervals,
    forward_kinematics_batch,
)
from .likelihood import combine_camera_arrays, weights_from_counts

logger = logging.getLogger(__name__)


class TrackingError(RuntimeError):
    """A failure while processing one frame; ``frame`` is its index."""

    def __init__(self, frame: int, cause: BaseException):
        super().__init__(f"frame {frame}: {cause}")
        self.frame = frame
        self.cause = cause

# left/right hip flexion and knee flexion in the default skeleton
DEFAULT_INTERESTING = (19, 22, 25, 28)

DEFAULT_INIT_GRID = (
    (0, tuple(round(-1.5 + 0.1 * k, 1) for k in range(31))),  # root_tx, m
    (2, (0.85, 0.9, 0.95)),  # root_tz, m
    (19, (-15.0, 0.0, 15.0, 30.0)),  # l_hip_flex, deg
    (22, (0.0, 20.0, 40.0)),  # l_knee_flex
    (25, (-15.0, 0.0, 15.0, 30.0)),  # r_hip_flex
    (28, (0.0, 20.0, 40.0)),  # r_knee_flex
)


@dataclass(frozen=True)
class IPFConfig:
    """Filter settings.

    Angles are stored in degrees and translations in meters, as written in
    config files; the filter converts to radians through the skeleton's
    DOF kinds.
    """

    interesting_dims: tuple[int, ...] = DEFAULT_INTERESTING
    grid_step_deg: float = 5.0
    grid_levels: int = 3
    m_selected: int = 81
    noise_angle_deg: float = 1.0
    noise_translation_m: float = 0.02
    noise_per_dof: tuple[tuple[int, float], ...] = ()
    rng_seed: int = 0
    init_grid: tuple[tuple[int, tuple[float, ...]], ...] = DEFAULT_INIT_GRID
    parallel: bool = False

    def __post_init__(self):
        dims = tuple(int(d) for d in self.interesting_dims)
        object.__setattr__(self, "interesting_dims", dims)
        if not dims:
            raise ConfigError("interesting_dims needs at least one DOF")
        if len(set(dims)) != len(dims):
            raise ConfigError(f"interesting_dims must be distinct, got {list(dims)}")
        if any(not 0 <= d <= 30 for d in dims):
            raise ConfigError(f"interesting_dims must lie within 0..30, got {list(dims)}")
        if self.grid_levels < 1 or self.grid_levels % 2 == 0:
            raise ConfigError(f"grid_levels must be odd so the current value is the grid center, got {self.grid_levels}")
        if not self.grid_step_deg > 0:
            raise ConfigError(f"grid_step must be positive, got {self.grid_step_deg}")
        if self.m_selected < 1:
            raise ConfigError(f"m_selected must be at least 1, got {self.m_selected}")
        sigmas = [self.noise_angle_deg, self.noise_translation_m] + [s for _, s in self.noise_per_dof]
        if any(not s >= 0 for s in sigmas):
            raise ConfigError("noise standard deviations must be non-negative")
        if self.rng_seed < 0:
            raise ConfigError(f"rng_seed must be non-negative, got {self.rng_seed}")
        keys = [k for k, _ in self.init_grid]
        if len(set(keys)) != len(keys):
            raise ConfigError("init_grid lists a DOF more than once")
        if any(len(v) == 0 for _, v in self.init_grid):
            raise ConfigError("init_grid value lists must be non-empty")

    @property
    def grid_step(self) -> float:
        """Grid spacing in radians."""
        return math.radians(self.grid_step_deg)

    @property
    def interval_size(self) -> int:
        """I, the number of grid neighbours per selected particle."""
        return self.grid_levels ** len(self.interesting_dims)

    @property
    def population(self) -> int:
        """N = M * I."""
        return self.m_selected * self.interval_size

    def noise_sigma(self, skeleton: Skeleton) -> np.ndarray:
        """Per-DOF noise standard deviation in internal units (radians / meters)."""
        sigma = np.where(skeleton.angular_mask, math.radians(self.noise_angle_deg), self.noise_translation_m)
        for k, s in self.noise_per_dof:
            sigma[k] = math.radians(s) if skeleton.dofs[k].angular else s
        sigma[list(self.interesting_dims)] = 0.0
        return sigma

    def init_lattice(self, skeleton: Skeleton) -> np.ndarray:
        """All poses of the initialization grid, odometer order over ``init_grid``."""
        base = skeleton.neutral_pose()
        if not self.init_grid:
            return base[None, :]
        dims = [k for k, _ in self.init_grid]
        axes = []
        for k, values in self.init_grid:
            d = skeleton.dofs[k]
            vals = np.array([math.radians(v) if d.angular else v for v in values], dtype=float)
            if np.any((vals < d.lower) | (vals > d.upper)):
                raise ConfigError(f"init_grid values for {d.name} fall outside its limits")
            axes.append(vals)
        lattice = np.repeat(base[None, :], math.prod(len(a) for a in axes), axis=0)
        lattice[:, dims] = np.array(list(itertools.product(*axes)))
        return lattice


@dataclass(frozen=True)
class Particle:
    pose: np.ndarray
    weight: float


@dataclass
class ParticleSet:
    """Particles as parallel arrays: poses (n, dof) and weights (n,)."""

    poses: np.ndarray
    weights: np.ndarray
    frame_index: int = 0

    def __post_init__(self):
        self.poses = np.asarray(self.poses, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        if self.poses.ndim != 2 or self.weights.shape != (self.poses.shape[0],):
            raise DimensionError("particle poses and weights are inconsistent")

    def __len__(self):
        return self.poses.shape[0]

    def __getitem__(self, i) -> Particle:
        return Particle(self.poses[i].copy(), float(self.weights[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @property
    def particles(self) -> list[Particle]:
        return list(self)

    def sorted(self) -> "ParticleSet":
        order = np.argsort(-self.weights, kind="stable")
        return ParticleSet(self.poses[order], self.weights[order], self.frame_index)

    def best(self) -> Particle:
        return self[int(np.argmax(self.weights))]


@dataclass
class Trajectory:
    """Per-frame pose estimates, their weights and joint positions."""

    poses: np.ndarray  # (frames, dof), radians / meters
    weights: np.ndarray  # (frames,)
    joints: np.ndarray  # (frames, joints, 3)
    frame_rate: float

    def __len__(self):
        return self.poses.shape[0]

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self)) / self.frame_rate

    @classmethod
    def from_poses(cls, skeleton: Skeleton, poses, frame_rate: float, weights=None) -> "Trajectory":
        poses = np.asarray(poses, dtype=float)
        w = np.zeros(len(poses)) if weights is None else np.asarray(weights, dtype=float)
        return cls(poses, w, forward_kinematics_batch(skeleton, poses), float(frame_rate))


# -- filter steps ------------------------------------------------------------------


def score_poses(
    poses,
    observations: Sequence[SilhouetteImage],
    skeleton: Skeleton,
    flesh: FleshModel,
    cameras: Sequence[CameraModel],
    parallel: bool = False,
) -> np.ndarray:
    """Weight of every pose, averaged over cameras."""
    if len(observations) != len(cameras):
        raise DimensionError(f"{len(observations)} observations for {len(cameras)} cameras")
    joints = forward_kinematics_batch(skeleton, poses)
    per_camera = []
    for obs, cam in zip(observations, cameras):
        counts = overlap_counts(skeleton, flesh, joints, cam, obs, parallel=parallel)
        per_camera.append(weights_from_counts(counts[:, 0], obs.count, counts[:, 1]))
    return combine_camera_arrays(np.array(per_camera))


def initialize(observations, config: IPFConfig, skeleton, flesh, cameras) -> ParticleSet:
    """Exhaustive search over the initialization lattice, sorted heaviest first."""
    lattice = config.init_lattice(skeleton)
    if len(lattice) == 0:
        raise ConfigError("initialization lattice is empty")
    w = score_poses(lattice, observations, skeleton, flesh, cameras, config.parallel)
    return ParticleSet(lattice, w, 0).sorted()


def select(pset: ParticleSet, m: int) -> ParticleSet:
    """The ``m`` heaviest distinct particles, padded with the heaviest if too few exist."""
    ordered = pset.sorted()
    keep: list[int] = []
    seen: set[bytes] = set()
    for i in range(len(ordered)):
        key = (ordered.poses[i] + 0.0).tobytes()  # +0.0 folds -0.0 into 0.0
        if key in seen:
            continue
        seen.add(key)
        keep.append(i)
        if len(keep) == m:
            break
    keep += [keep[0]] * (m - len(keep))
    return ParticleSet(ordered.poses[keep], ordered.weights[keep], pset.frame_index)


class NoiseStreams:
    """Standard normal draws keyed by (seed, frame, ordinal).

    One counter-based Philox generator keyed by (seed, frame).  Ordinal ``o``
    owns the ``blocks`` consecutive counter values starting at ``o * blocks``;
    each counter value yields four 64-bit words, turned into four normals by
    the Box-Muller transform.  A particle's draws therefore do not depend on
    which other particles are drawn, or in what order.
    """

    def __init__(self, seed: int, frame: int, width: int):
        self.width = int(width)
        self.blocks = max(1, -(-self.width // 4))
        self._key = np.array([seed, frame], dtype=np.uint64)
        self._bits = np.random.Philox(key=self._key)

    def _raw(self, first_block: int, n_blocks: int) -> np.ndarray:
        self._bits.state = {
            "bit_generator": "Philox",
            "state": {"counter": np.array([first_block, 0, 0, 0], dtype=np.uint64), "key": self._key},
            "buffer": np.zeros(4, dtype=np.uint64),
            "buffer_pos": 4,
            "has_uint32": 0,
            "uinteger": 0,
        }
        return self._bits.random_raw(4 * n_blocks)

    def _normals(self, raw: np.ndarray, rows: int) -> np.ndarray:
        u = ((raw >> np.uint64(11)).astype(float) + 0.5) * 2.0**-53  # open interval (0, 1)
        u = u.reshape(rows, -1, 2)
        radius = np.sqrt(-2.0 * np.log(u[..., 0]))
        angle = 2.0 * math.pi * u[..., 1]
        z = np.stack([radius * np.cos(angle), radius * np.sin(angle)], axis=-1)
        return z.reshape(rows, -1)[:, : self.width]

    def normal(self, ordinal: int) -> np.ndarray:
        """The ``width`` draws of one ordinal."""
        return self._normals(self._raw(ordinal * self.blocks, self.blocks), 1)[0]

    def normals(self, count: int) -> np.ndarray:
        """Draws of ordinals 0 .. count-1 as a (count, width) array."""
        return self._normals(self._raw(0, count * self.blocks), count)


def predict(selected: ParticleSet, config: IPFConfig, skeleton: Skeleton, frame_index: int) -> ParticleSet:
    """Expand each selected particle into its interval grid and perturb the R dims.

    Noise for output particle ``o`` comes from its own stream keyed by
    (rng_seed, frame_index, o), so the result does not depend on evaluation order.
    """
    dims = list(config.interesting_dims)
    n_i = config.interval_size
    poses = expand_intervals(selected.poses, dims, config.grid_step, config.grid_levels, skeleton)

    sigma = config.noise_sigma(skeleton)
    noisy = np.flatnonzero(sigma > 0)
    if noisy.size:
        draws = NoiseStreams(config.rng_seed, frame_index, noisy.size).normals(len(poses))
        poses[:, noisy] += draws * sigma[noisy]
        poses[:, noisy] = np.clip(poses[:, noisy], skeleton.lower[noisy], skeleton.upper[noisy])
    assert len(poses) == len(selected) * n_i
    return ParticleSet(poses, np.zeros(len(poses)), frame_index)


def measure(pset: ParticleSet, observations, skeleton, flesh, cameras, parallel=False):
    """Weight every particle; returns the weighted set and the heaviest particle (lowest index on ties)."""
    if len(pset) == 0:
        raise ValueError("cannot measure an empty particle set")
    w = score_poses(pset.poses, observations, skeleton, flesh, cameras, parallel)
    weighted = ParticleSet(pset.poses, w, pset.frame_index)
    return weighted, weighted.best()


# -- tracking ------------------------------------------------------------------------

FrameCallback = Callable[[int, float, float, int], None]


def track_silhouettes(
    observations: Sequence[Sequence[SilhouetteImage]],
    config: IPFConfig,
    skeleton: Skeleton,
    flesh: FleshModel,
    cameras: Sequence[CameraModel],
    frame_rate: float,
    on_frame: FrameCallback | None = None,
    on_predict: Callable[[ParticleSet], None] | None = None,
) -> Trajectory:
    """Track over per-camera silhouette sequences (``observations[camera][frame]``)."""
    if len(observations) != len(cameras):
        raise DimensionError(f"{len(observations)} silhouette sequences for {len(cameras)} cameras")
    lengths = {len(seq) for seq in observations}
    if len(lengths) != 1:
        raise DimensionError(f"cameras supply unequal frame counts: {sorted(lengths)}")
    n_frames = lengths.pop()
    if n_frames == 0:
        raise ValueError("no frames to track")

    poses, weights = [], []
    current = None
    for k in range(n_frames):
        tic = time.perf_counter()
        obs = [seq[k] for seq in observations]
        try:
            if k == 0:
                current = initialize(obs, config, skeleton, flesh, cameras)
                estimate = current[0]
            else:
                chosen = select(current, config.m_selected)
                predicted = predict(chosen, config, skeleton, k)
                if on_predict is not None:
                    on_predict(predicted)
                current, estimate = measure(predicted, obs, skeleton, flesh, cameras, config.parallel)
        except (ValueError, ArithmeticError, IndexError) as exc:
            raise TrackingError(k, exc) from exc
        poses.append(estimate.pose)
        weights.append(estimate.weight)
        elapsed = time.perf_counter() - tic
        logger.debug("frame %d: weight %.4f, %d particles, %.2fs", k, estimate.weight, len(current), elapsed)
        if on_frame is not None:
            on_frame(k, estimate.weight, elapsed, len(current))
    return Trajectory.from_poses(skeleton, np.array(poses), frame_rate, weights)


def track(
    frames: Sequence[Sequence[GrayFrame]],
    backgrounds: Sequence[GrayFrame],
    config: IPFConfig,
    skeleton: Skeleton,
    flesh: FleshModel,
    cameras: Sequence[CameraModel],
    frame_rate: float,
    threshold: int = 30,
    on_frame: FrameCallback | None = None,
) -> Trajectory:
    """Silhouette extraction followed by ``track_silhouettes``."""
    if len(backgrounds) != len(frames) or any(b is None for b in backgrounds):
        raise ValueError("every camera needs a background image")
    observations = [
        [extract_silhouette(f, bg, threshold) for f in seq] for seq, bg in zip(frames, backgrounds)
    ]
    return track_silhouettes(observations, config, skeleton, flesh, cameras, frame_rate, on_frame)
