"""Silhouette overlap weight and multi-camera fusion."""
from __future__ import annotations

import math
from typing import NamedTuple, Sequence

import numpy as np

from .imaging import SilhouetteImage
from .kinematics import DimensionError


class PixelCounts(NamedTuple):
    n_common: int
    n_sil_only: int
    n_model_only: int


def pixel_counts(observed: SilhouetteImage, synthetic: SilhouetteImage) -> PixelCounts:
    if observed.mask.shape != synthetic.mask.shape:
        raise DimensionError(
            f"observed {observed.mask.shape} and synthetic {synthetic.mask.shape} differ in size"
        )
    common = int(np.count_nonzero(observed.mask & synthetic.mask))
    return PixelCounts(common, observed.count - common, synthetic.count - common)


def weight(counts: PixelCounts) -> float:
    """Common pixels over mismatched pixels.

    A perfect match (no mismatched pixels) has an undefined ratio; it scores
    ``n_common`` instead, which no imperfect match of the same observed
    silhouette can exceed.
    """
    nc, ns, nm = counts
    denom = ns + nm
    if denom > 0:
        return nc / denom
    return float(nc)


def weights_from_counts(common, observed_total, model) -> np.ndarray:
    """Vectorised ``weight`` over arrays of common / model counts."""
    common = np.asarray(common, dtype=np.int64)
    model = np.asarray(model, dtype=np.int64)
    denom = (observed_total - common) + (model - common)
    safe = np.where(denom > 0, denom, 1)
    return np.where(denom > 0, common / safe, common.astype(float))


def combine_cameras(weights: Sequence[float]) -> float:
    """Mean of per-camera weights (exact when all cameras agree)."""
    w = [float(x) for x in weights]
    if not w:
        raise ValueError("need at least one camera weight")
    base = w[0]
    return base + math.fsum(x - base for x in w) / len(w)


def combine_camera_arrays(per_camera: np.ndarray) -> np.ndarray:
    """``combine_cameras`` applied column-wise to an array of shape (cameras, particles)."""
    per_camera = np.asarray(per_camera, dtype=float)
    if per_camera.shape[0] == 0:
        raise ValueError("need at least one camera weight")
    if per_camera.shape[0] == 1:
        return per_camera[0].copy()
    return np.array([combine_cameras(col) for col in per_camera.T])
