"""Figures written to files (Agg backend, no display needed)."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .gait import ankle_longitudinal  # noqa: E402
from .ipf import Trajectory  # noqa: E402
from .kinematics import Skeleton  # noqa: E402

SIDE_COLORS = {"left": "tab:blue", "right": "tab:red"}
LEG_DOFS = ("l_hip_flex", "r_hip_flex", "l_knee_flex", "r_knee_flex")


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)


def plot_ankle_displacement(trajectory: Trajectory, skeleton: Skeleton, path, events=None) -> None:
    """Longitudinal ankle displacement against time, stance intervals shaded."""
    disp = ankle_longitudinal(trajectory, skeleton)
    t = trajectory.times
    fig, ax = plt.subplots(figsize=(7, 3.5))
    for side, y in disp.items():
        ax.plot(t, y, color=SIDE_COLORS[side], label=f"{side} ankle")
        if events is not None:
            for s, e in getattr(events, side):
                ax.axvspan(t[s], t[e], color=SIDE_COLORS[side], alpha=0.12, lw=0)
    ax.set_xlabel("time (s)")
    ax.set_ylabel("displacement along walk (m)")
    ax.legend(loc="upper left", frameon=False)
    _save(fig, path)


def plot_trajectory_comparison(estimated: Trajectory, truth: Trajectory, skeleton: Skeleton, path) -> None:
    """Leg flexion angles and ankle displacement, estimate over ground truth."""
    t = estimated.times
    fig, axes = plt.subplots(3, 2, figsize=(9, 7.5), sharex=True)
    for ax, name in zip(axes[:2].ravel(), LEG_DOFS):
        i = skeleton.dof_index(name)
        ax.plot(truth.times, np.degrees(truth.poses[:, i]), color="0.4", lw=2, label="truth")
        ax.plot(t, np.degrees(estimated.poses[:, i]), color="tab:orange", lw=1.2, label="tracked")
        ax.set_ylabel(f"{name} (deg)")
    axes[0, 0].legend(frameon=False)
    est_d = ankle_longitudinal(estimated, skeleton)
    true_d = ankle_longitudinal(truth, skeleton)
    for ax, side in zip(axes[2], ("left", "right")):
        ax.plot(truth.times, true_d[side], color="0.4", lw=2)
        ax.plot(t, est_d[side], color=SIDE_COLORS[side], lw=1.2)
        ax.set_ylabel(f"{side} ankle along walk (m)")
        ax.set_xlabel("time (s)")
    _save(fig, path)


def plot_silhouette_overlay(observed: np.ndarray, model: np.ndarray, path) -> None:
    """Agreement image: common pixels white, observed-only blue, model-only red."""
    rgb = np.zeros(observed.shape + (3,))
    rgb[observed & model] = 1.0
    rgb[observed & ~model] = (0.2, 0.4, 1.0)
    rgb[~observed & model] = (1.0, 0.25, 0.2)
    fig, ax = plt.subplots(figsize=(observed.shape[1] / 60, observed.shape[0] / 60))
    ax.imshow(rgb, interpolation="nearest")
    ax.set_axis_off()
    _save(fig, path)
