"""Binary silhouettes from camera frames and from model poses."""
from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _raster
from .kinematics import DimensionError, Skeleton, check_pose, forward_kinematics_batch

DEFAULT_THRESHOLD = 30


@dataclass(frozen=True, eq=False)
class GrayFrame:
    """8-bit grayscale image, shape (height, width)."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2 or px.shape[0] < 1 or px.shape[1] < 1:
            raise DimensionError(f"frame must be a non-empty 2-D array, got shape {px.shape}")
        object.__setattr__(self, "pixels", px.astype(np.uint8, copy=False))

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @classmethod
    def from_color(cls, rgb) -> "GrayFrame":
        """ITU-R 601 luma of an (h, w, 3) image."""
        rgb = np.asarray(rgb, dtype=float)
        luma = rgb[..., :3] @ np.array([0.299, 0.587, 0.114])
        return cls(np.clip(np.rint(luma), 0, 255).astype(np.uint8))


@dataclass(frozen=True, eq=False)
class SilhouetteImage:
    """Binary foreground mask, shape (height, width)."""

    mask: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mask)
        if m.ndim != 2:
            raise DimensionError(f"silhouette must be 2-D, got shape {m.shape}")
        object.__setattr__(self, "mask", m.astype(bool, copy=False))

    @property
    def height(self) -> int:
        return self.mask.shape[0]

    @property
    def width(self) -> int:
        return self.mask.shape[1]

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self.mask))

    def __eq__(self, other):
        if not isinstance(other, SilhouetteImage):
            return NotImplemented
        return self.mask.shape == other.mask.shape and bool(np.array_equal(self.mask, other.mask))

    def __or__(self, other: "SilhouetteImage") -> "SilhouetteImage":
        return SilhouetteImage(self.mask | other.mask)


@dataclass(frozen=True, eq=False)
class CameraModel:
    """Ideal pinhole camera.  ``rotation``/``translation`` map world to camera:
    X_cam = R @ X_world + t, with camera x right, y down, z along the optical axis.
    """

    focal: float
    cx: float
    cy: float
    width: int
    height: int
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        rot = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        trans = np.asarray(self.translation, dtype=float).reshape(3)
        if not self.focal > 0:
            raise ValueError(f"focal length must be positive, got {self.focal}")
        if self.width < 1 or self.height < 1:
            raise ValueError("image size must be at least 1x1")
        if not np.allclose(rot @ rot.T, np.eye(3), atol=1e-9, rtol=0.0):
            raise ValueError("camera rotation must be orthonormal")
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", trans)

    def __eq__(self, other):
        if not isinstance(other, CameraModel):
            return NotImplemented
        return (
            (self.focal, self.cx, self.cy, self.width, self.height)
            == (other.focal, other.cx, other.cy, other.width, other.height)
            and np.array_equal(self.rotation, other.rotation)
            and np.array_equal(self.translation, other.translation)
        )

    @property
    def center(self) -> np.ndarray:
        """Camera position in world coordinates."""
        return -self.rotation.T @ self.translation

    def to_camera(self, points) -> np.ndarray:
        return np.asarray(points, dtype=float) @ self.rotation.T + self.translation

    @classmethod
    def look_at(cls, eye, target, focal, width, height, up=(0.0, 0.0, 1.0), cx=None, cy=None):
        eye = np.asarray(eye, dtype=float)
        forward = np.asarray(target, dtype=float) - eye
        forward /= np.linalg.norm(forward)
        right = np.cross(forward, np.asarray(up, dtype=float))
        right /= np.linalg.norm(right)
        down = np.cross(forward, right)
        rot = np.stack([right, down, forward])
        return cls(
            focal=float(focal),
            cx=width / 2.0 if cx is None else float(cx),
            cy=height / 2.0 if cy is None else float(cy),
            width=int(width),
            height=int(height),
            rotation=rot,
            translation=-rot @ eye,
        )


def default_camera(width: int = 320, height: int = 240, distance: float = 5.0) -> CameraModel:
    """Elevated side view: ``distance`` meters to the subject's right, half that
    high, aimed at the hips (0.9 m) above the origin.

    Looking down separates the near and far feet vertically in the image.
    """
    focal = 450.0 * width / 320.0
    return CameraModel.look_at((0.0, -distance, 0.5 * distance), (0.0, 0.0, 0.9), focal, width, height)


@dataclass(frozen=True)
class FleshModel:
    """Capsule radius (m) for each rendered segment, in skeleton order."""

    radii: tuple[float, ...]

    def __post_init__(self):
        if any(not r > 0 for r in self.radii):
            raise ValueError("flesh radii must all be positive")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.radii, dtype=float)


_RADIUS_BY_CHILD = {
    "neck": 0.13,
    "head": 0.05,
    "head_top": 0.10,
    "shoulder": 0.05,
    "elbow": 0.05,
    "wrist": 0.04,
    "hip": 0.09,
    "knee": 0.07,
    "ankle": 0.05,
    "toe": 0.04,
}


def default_flesh(skeleton: Skeleton) -> FleshModel:
    s = skeleton.body_height / 1.75
    radii = []
    for _, child in skeleton.rendered_segments:
        name = skeleton.joints[child].name
        key = name.split("_", 1)[1] if name[:2] in ("l_", "r_") else name
        radii.append(s * _RADIUS_BY_CHILD.get(key, 0.05))
    return FleshModel(tuple(radii))


# -- silhouettes ------------------------------------------------------------------


def extract_silhouette(frame: GrayFrame, background: GrayFrame, threshold: int = DEFAULT_THRESHOLD):
    """Foreground where |frame - background| exceeds ``threshold``."""
    if frame.pixels.shape != background.pixels.shape:
        raise DimensionError(
            f"frame {frame.pixels.shape} and background {background.pixels.shape} differ in size"
        )
    diff = np.abs(frame.pixels.astype(np.int16) - background.pixels.astype(np.int16))
    return SilhouetteImage(diff > threshold)


def project_point(camera: CameraModel, point):
    """Continuous pixel coordinates (u, v), or None when the point is not in front of the camera."""
    x, y, z = camera.to_camera(point)
    if z <= 0:
        return None
    return camera.cx + camera.focal * x / z, camera.cy + camera.focal * y / z


def _camera_args(camera: CameraModel):
    return camera.rotation, camera.translation, float(camera.focal), float(camera.cx), float(camera.cy)


def render_joints(skeleton: Skeleton, flesh: FleshModel, joints, camera: CameraModel) -> SilhouetteImage:
    """Rasterize the fleshed model given world joint positions."""
    segs = np.asarray(skeleton.rendered_segments, dtype=np.int64)
    mask = _raster.render(
        np.ascontiguousarray(joints, dtype=float),
        segs,
        flesh.as_array(),
        *_camera_args(camera),
        camera.width,
        camera.height,
    )
    return SilhouetteImage(mask)


def render_silhouette(skeleton: Skeleton, flesh: FleshModel, pose, camera: CameraModel) -> SilhouetteImage:
    pose = check_pose(skeleton, pose)
    joints = forward_kinematics_batch(skeleton, pose[None, :], check=False)[0]
    return render_joints(skeleton, flesh, joints, camera)


def overlap_counts(skeleton, flesh, joints_batch, camera, observed: SilhouetteImage, parallel=False):
    """(common, model) pixel counts of each rendered pose against ``observed``; shape (n, 2)."""
    if (observed.height, observed.width) != (camera.height, camera.width):
        raise DimensionError(
            f"observation {observed.width}x{observed.height} does not match camera "
            f"{camera.width}x{camera.height}"
        )
    kernel = _raster.count_batch_parallel if parallel else _raster.count_batch
    return kernel(
        np.ascontiguousarray(joints_batch, dtype=float),
        np.asarray(skeleton.rendered_segments, dtype=np.int64),
        flesh.as_array(),
        *_camera_args(camera),
        np.ascontiguousarray(observed.mask, dtype=np.uint8),
    )


# -- PGM / PNG I/O -------------------------------------------------------------------

_PGM_HEADER = re.compile(rb"P5\s+(?:#[^\n]*\n\s*)*(\d+)\s+(?:#[^\n]*\n\s*)*(\d+)\s+(?:#[^\n]*\n\s*)*(\d+)\s")


def read_pgm(path) -> GrayFrame:
    data = Path(path).read_bytes()
    m = _PGM_HEADER.match(data)
    if not m:
        raise ValueError(f"{path}: not a binary PGM (P5) file")
    width, height, maxval = (int(g) for g in m.groups())
    if maxval > 255:
        raise ValueError(f"{path}: only 8-bit PGM is supported (maxval {maxval})")
    body = np.frombuffer(data, dtype=np.uint8, count=width * height, offset=m.end())
    return GrayFrame(body.reshape(height, width).copy())


def write_pgm(path, image) -> None:
    """Write a GrayFrame, a SilhouetteImage (0/255) or a uint8 array as P5."""
    if isinstance(image, SilhouetteImage):
        pixels = image.mask.astype(np.uint8) * 255
    elif isinstance(image, GrayFrame):
        pixels = image.pixels
    else:
        pixels = np.asarray(image, dtype=np.uint8)
    h, w = pixels.shape
    Path(path).write_bytes(b"P5\n%d %d\n255\n" % (w, h) + pixels.tobytes())


def read_frame(path) -> GrayFrame:
    """Read a PGM, or a PNG when Pillow is installed (converted to grayscale)."""
    path = Path(path)
    if path.suffix.lower() == ".png":
        try:
            from PIL import Image
        except ImportError as exc:  # pragma: no cover - depends on environment
            raise RuntimeError("PNG input needs Pillow (pip install ipfmocap[png])") from exc
        with Image.open(path) as im:
            arr = np.asarray(im.convert("RGB"))
        return GrayFrame.from_color(arr)
    return read_pgm(path)


def read_silhouette(path) -> SilhouetteImage:
    return SilhouetteImage(read_frame(path).pixels > 127)


FRAME_SUFFIXES = (".pgm", ".png")


def list_frames(directory) -> list[Path]:
    """Numbered frame files in ``directory`` sorted by their trailing number."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"frame directory {directory} does not exist")
    files = [
        p for p in directory.iterdir()
        if p.suffix.lower() in FRAME_SUFFIXES and re.search(r"\d+$", p.stem)
    ]
    return sorted(files, key=lambda p: (int(re.search(r"(\d+)$", p.stem).group(1)), p.name))
