"""Run configuration: JSON text in, validated ``RunConfig`` out.

Angles are given in degrees.  DOFs may be referred to by name (names of the
built-in skeleton) or by index.  Relative paths are resolved against the
directory holding the config file.
"""
from __future__ import annotations

import dataclasses
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .gait import DEFAULT_VELOCITY_THRESHOLD
from .imaging import DEFAULT_THRESHOLD, CameraModel, FleshModel, default_camera
from .ipf import IPFConfig
from .kinematics import ConfigError, Skeleton, default_skeleton
from .testbed import WalkScenario

DOF_NAMES = default_skeleton().dof_names

_TOP_KEYS = {"paths", "cameras", "frame_rate", "threshold", "ipf", "gait", "scenario"}
_PATH_KEYS = {"frames", "backgrounds", "output", "skeleton", "truth", "trajectory"}
_IPF_KEYS = {"interesting_dims", "grid_step_deg", "grid_levels", "m_selected", "noise", "rng_seed", "init_grid", "parallel"}
_NOISE_KEYS = {"angle_deg", "translation_m", "per_dof"}
_GAIT_KEYS = {"velocity_threshold"}
_CAMERA_KEYS = {"focal", "principal_point", "width", "height", "rotation", "translation", "eye", "target", "up"}
_SCENARIO_KEYS = {f.name for f in dataclasses.fields(WalkScenario)} - {"camera"}


@dataclass(frozen=True)
class RunConfig:
    frames: tuple[str, ...]
    backgrounds: tuple[str, ...]
    output: str
    skeleton: str | None = None
    truth: str | None = None
    trajectory: str | None = None
    cameras: tuple[CameraModel, ...] = field(default_factory=lambda: (default_camera(),))
    frame_rate: float = 20.0
    threshold: int = DEFAULT_THRESHOLD
    ipf: IPFConfig = field(default_factory=IPFConfig)
    gait_velocity_threshold: float = DEFAULT_VELOCITY_THRESHOLD
    scenario: dict = field(default_factory=dict)
    base_dir: str = field(default=".", compare=False)

    def resolve(self, path: str | None) -> Path | None:
        if path is None:
            return None
        p = Path(path)
        return p if p.is_absolute() else Path(self.base_dir) / p

    @property
    def output_dir(self) -> Path:
        return self.resolve(self.output)

    @property
    def truth_path(self) -> Path:
        return self.resolve(self.truth) if self.truth else self.output_dir / "truth.csv"

    @property
    def trajectory_path(self) -> Path:
        return self.resolve(self.trajectory) if self.trajectory else self.output_dir / "trajectory.csv"

    def load_model(self) -> tuple[Skeleton, FleshModel]:
        from .imaging import default_flesh
        from .io import load_skeleton

        if self.skeleton:
            return load_skeleton(self.resolve(self.skeleton))
        sk = default_skeleton(float(self.scenario.get("body_height", 1.75)))
        return sk, default_flesh(sk)

    def walk_scenario(self, camera_index: int = 0) -> WalkScenario:
        params = dict(self.scenario)
        params.setdefault("frame_rate", self.frame_rate)
        return WalkScenario(camera=self.cameras[camera_index], **params)

    def check_inputs(self, command: str) -> None:
        """Raise FileNotFoundError for inputs ``command`` needs that are missing."""
        needed = []
        if self.skeleton:
            needed.append(self.resolve(self.skeleton))
        if command == "track":
            needed += [self.resolve(p) for p in self.frames + self.backgrounds]
        if command in ("gait", "eval"):
            needed.append(self.trajectory_path)
        if command == "eval":
            needed.append(self.truth_path)
        missing = [str(p) for p in needed if not p.exists()]
        if missing:
            raise FileNotFoundError("missing input(s): " + ", ".join(missing))

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)


# -- parsing -----------------------------------------------------------------------------


def _line_of(text: str, key: str) -> int | None:
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


class _Parser:
    def __init__(self, text: str):
        self.text = text

    def fail(self, message: str, key: str | None = None):
        line = _line_of(self.text, key) if key else None
        where = f" (line {line})" if line else ""
        raise ConfigError(f"{message}{where}")

    def check_keys(self, section: dict, allowed: set, where: str):
        if not isinstance(section, dict):
            self.fail(f"{where} must be an object")
        for key in section:
            if key not in allowed:
                self.fail(f"unknown key {key!r} in {where}", key)

    def number(self, section, key, default, *, lo=None, hi=None, integer=False, lo_open=False):
        if key not in section:
            return default
        v = section[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self.fail(f"{key} must be a number, got {v!r}", key)
        if integer and v != int(v):
            self.fail(f"{key} must be an integer, got {v!r}", key)
        if lo is not None and (v <= lo if lo_open else v < lo):
            self.fail(f"{key} = {v} is out of range (must be {'>' if lo_open else '>='} {lo})", key)
        if hi is not None and v > hi:
            self.fail(f"{key} = {v} is out of range (must be <= {hi})", key)
        return int(v) if integer else float(v)

    def dof(self, ref, key):
        if isinstance(ref, str):
            if ref not in DOF_NAMES:
                self.fail(f"unknown DOF name {ref!r} in {key}", key)
            return DOF_NAMES.index(ref)
        if isinstance(ref, int) and not isinstance(ref, bool) and 0 <= ref < len(DOF_NAMES):
            return ref
        self.fail(f"DOF reference {ref!r} in {key} must be a name or an index in 0..{len(DOF_NAMES) - 1}", key)

    def camera(self, c: dict) -> CameraModel:
        self.check_keys(c, _CAMERA_KEYS, "a camera entry")
        focal = self.number(c, "focal", None, lo=0, lo_open=True)
        width = self.number(c, "width", 320, lo=1, integer=True)
        height = self.number(c, "height", 240, lo=1, integer=True)
        if focal is None:
            self.fail("camera needs a focal length", "cameras")
        pp = c.get("principal_point", [width / 2.0, height / 2.0])
        try:
            if "eye" in c:
                return CameraModel.look_at(
                    c["eye"], c.get("target", [0.0, 0.0, 1.0]), focal, width, height,
                    up=c.get("up", [0.0, 0.0, 1.0]), cx=pp[0], cy=pp[1],
                )
            return CameraModel(focal, float(pp[0]), float(pp[1]), width, height, c["rotation"], c["translation"])
        except (KeyError, ValueError, TypeError) as exc:
            self.fail(f"invalid camera: {exc}", "cameras")

    def ipf(self, s: dict) -> IPFConfig:
        self.check_keys(s, _IPF_KEYS, "ipf")
        d = IPFConfig()
        kw: dict[str, Any] = {}
        if "interesting_dims" in s:
            dims = s["interesting_dims"]
            if not isinstance(dims, list) or not dims:
                self.fail("interesting_dims must be a non-empty list", "interesting_dims")
            kw["interesting_dims"] = tuple(self.dof(x, "interesting_dims") for x in dims)
            if len(set(kw["interesting_dims"])) != len(dims):
                self.fail("interesting_dims must not repeat a DOF", "interesting_dims")
        kw["grid_step_deg"] = self.number(s, "grid_step_deg", d.grid_step_deg, lo=0, lo_open=True)
        levels = self.number(s, "grid_levels", d.grid_levels, lo=1, integer=True)
        if levels % 2 == 0:
            self.fail(f"grid_levels must be odd so the current value sits at the grid center, got {levels}", "grid_levels")
        kw["grid_levels"] = levels
        kw["m_selected"] = self.number(s, "m_selected", d.m_selected, lo=1, integer=True)
        kw["rng_seed"] = self.number(s, "rng_seed", d.rng_seed, lo=0, integer=True)
        if "parallel" in s:
            if not isinstance(s["parallel"], bool):
                self.fail("parallel must be true or false", "parallel")
            kw["parallel"] = s["parallel"]
        noise = s.get("noise", {})
        self.check_keys(noise, _NOISE_KEYS, "ipf.noise")
        kw["noise_angle_deg"] = self.number(noise, "angle_deg", d.noise_angle_deg, lo=0)
        kw["noise_translation_m"] = self.number(noise, "translation_m", d.noise_translation_m, lo=0)
        per = noise.get("per_dof", {})
        if not isinstance(per, dict):
            self.fail("noise.per_dof must be an object", "per_dof")
        kw["noise_per_dof"] = tuple(
            sorted((self.dof(k, "per_dof"), self.number(per, k, 0.0, lo=0)) for k in per)
        )
        if "init_grid" in s:
            grid = s["init_grid"]
            if not isinstance(grid, dict) or not grid:
                self.fail("init_grid must be a non-empty object of value lists", "init_grid")
            entries = []
            for k, vals in grid.items():
                if not isinstance(vals, list) or not vals or not all(
                    isinstance(v, (int, float)) and not isinstance(v, bool) for v in vals
                ):
                    self.fail(f"init_grid entry {k!r} must be a non-empty list of numbers", k)
                entries.append((self.dof(k, "init_grid"), tuple(float(v) for v in vals)))
            kw["init_grid"] = tuple(entries)
        try:
            return IPFConfig(**kw)
        except ConfigError as exc:
            self.fail(str(exc), "ipf")

    def scenario(self, s: dict) -> dict:
        self.check_keys(s, _SCENARIO_KEYS, "scenario")
        out = {}
        defaults = WalkScenario()
        for key in sorted(s):
            default = getattr(defaults, key)
            out[key] = self.number(s, key, default, integer=isinstance(default, int))
        try:
            WalkScenario(**out)
        except ValueError as exc:
            self.fail(f"invalid scenario: {exc}", "scenario")
        return out

    def parse(self, base_dir) -> RunConfig:
        try:
            doc = json.loads(self.text) if self.text.strip() else {}
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc.msg} (line {exc.lineno}, column {exc.colno})") from exc
        self.check_keys(doc, _TOP_KEYS, "the config")
        paths = doc.get("paths")
        if paths is None:
            self.fail("missing required section 'paths' (frames, backgrounds, output)")
        self.check_keys(paths, _PATH_KEYS, "paths")
        for req in ("frames", "backgrounds", "output"):
            if req not in paths:
                self.fail(f"paths.{req} is required", "paths")
        frames = paths["frames"]
        backgrounds = paths["backgrounds"]
        frames = [frames] if isinstance(frames, str) else frames
        backgrounds = [backgrounds] if isinstance(backgrounds, str) else backgrounds
        if not frames or not all(isinstance(p, str) for p in frames + backgrounds):
            self.fail("paths.frames and paths.backgrounds must be path strings or lists of them", "frames")

        cams = doc.get("cameras")
        if cams is None:
            cameras = tuple(default_camera() for _ in frames)
        else:
            if not isinstance(cams, list) or not cams:
                self.fail("cameras must be a non-empty list", "cameras")
            cameras = tuple(self.camera(c) for c in cams)
        if len(cameras) != len(frames):
            self.fail(f"{len(cameras)} camera(s) configured for {len(frames)} frame directories", "cameras")
        if len(backgrounds) != len(frames):
            self.fail(f"{len(backgrounds)} background(s) configured for {len(frames)} frame directories", "backgrounds")

        gait = doc.get("gait", {})
        self.check_keys(gait, _GAIT_KEYS, "gait")
        return RunConfig(
            frames=tuple(frames),
            backgrounds=tuple(backgrounds),
            output=paths["output"],
            skeleton=paths.get("skeleton"),
            truth=paths.get("truth"),
            trajectory=paths.get("trajectory"),
            cameras=cameras,
            frame_rate=self.number(doc, "frame_rate", 20.0, lo=0, lo_open=True),
            threshold=self.number(doc, "threshold", DEFAULT_THRESHOLD, lo=0, hi=255, integer=True),
            ipf=self.ipf(doc.get("ipf", {})),
            gait_velocity_threshold=self.number(gait, "velocity_threshold", DEFAULT_VELOCITY_THRESHOLD, lo=0, lo_open=True),
            scenario=self.scenario(doc.get("scenario", {})),
            base_dir=str(base_dir),
        )


def parse_config(text: str, base_dir=".") -> RunConfig:
    return _Parser(text).parse(base_dir)


def load_config(path) -> RunConfig:
    path = Path(path)
    return parse_config(path.read_text(), base_dir=path.parent)


# -- serialization ------------------------------------------------------------------------


def _camera_dict(cam: CameraModel) -> dict:
    return {
        "focal": cam.focal,
        "principal_point": [cam.cx, cam.cy],
        "width": cam.width,
        "height": cam.height,
        "rotation": cam.rotation.tolist(),
        "translation": cam.translation.tolist(),
    }


def config_to_dict(cfg: RunConfig) -> dict:
    ipf = cfg.ipf
    paths = {"frames": list(cfg.frames), "backgrounds": list(cfg.backgrounds), "output": cfg.output}
    for key in ("skeleton", "truth", "trajectory"):
        if getattr(cfg, key) is not None:
            paths[key] = getattr(cfg, key)
    return {
        "paths": paths,
        "cameras": [_camera_dict(c) for c in cfg.cameras],
        "frame_rate": cfg.frame_rate,
        "threshold": cfg.threshold,
        "ipf": {
            "interesting_dims": [DOF_NAMES[d] for d in ipf.interesting_dims],
            "grid_step_deg": ipf.grid_step_deg,
            "grid_levels": ipf.grid_levels,
            "m_selected": ipf.m_selected,
            "noise": {
                "angle_deg": ipf.noise_angle_deg,
                "translation_m": ipf.noise_translation_m,
                "per_dof": {DOF_NAMES[k]: s for k, s in ipf.noise_per_dof},
            },
            "rng_seed": ipf.rng_seed,
            "init_grid": {DOF_NAMES[k]: list(v) for k, v in ipf.init_grid},
            "parallel": ipf.parallel,
        },
        "gait": {"velocity_threshold": cfg.gait_velocity_threshold},
        "scenario": dict(cfg.scenario),
    }


def serialize_config(cfg: RunConfig) -> str:
    return json.dumps(config_to_dict(cfg), indent=2) + "\n"
