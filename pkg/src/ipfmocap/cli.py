"""Command line entry point: ``ipfmocap <command> --config run.json``.

Commands
  synth          render a synthetic walk: frames, background and truth trajectory
  track          track the configured frame directories, write trajectory files
  gait           gait report, ankle displacement CSV and figure from a trajectory
  eval           compare a trajectory with the truth trajectory
  debug-weight   silhouette agreement counts and weight for one frame
  plot-data      per-frame ankle displacement CSV only
  export-skeleton write the skeleton and flesh radii as JSON
  init-config    write a config file with every default spelled out

Exit status is 0 on success, 1 when a module fails (the message names the
module and, for tracking, the frame), 2 for usage or configuration errors.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import gait as gait_mod
from . import io as io_mod
from .config import RunConfig, load_config, parse_config, serialize_config
from .imaging import (
    extract_silhouette,
    list_frames,
    read_frame,
    render_joints,
    write_pgm,
)
from .ipf import TrackingError, track_silhouettes
from .kinematics import ConfigError
from .likelihood import combine_cameras, pixel_counts, weight
from .testbed import evaluate, generate_walk

log = logging.getLogger("ipfmocap")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class CommandError(Exception):
    def __init__(self, module: str, message: str, frame: int | None = None):
        where = f" at frame {frame}" if frame is not None else ""
        super().__init__(f"{module}{where}: {message}")


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    changes = {}
    if args.output is not None:
        changes["output"] = str(Path(args.output).resolve())
    if args.seed is not None:
        scenario = dict(cfg.scenario, seed=args.seed)
        changes["scenario"] = scenario
        changes["ipf"] = dataclasses.replace(cfg.ipf, rng_seed=args.seed)
    if args.frames is not None:
        changes["scenario"] = dict(changes.get("scenario", cfg.scenario), frame_count=args.frames)
    return cfg.replace(**changes) if changes else cfg


def _frame_limit(args) -> int | None:
    return args.frames


# -- commands ------------------------------------------------------------------------


def cmd_synth(cfg: RunConfig, args) -> None:
    skeleton, flesh = cfg.load_model()
    truth = None
    for c, (frames_dir, bg_path) in enumerate(zip(cfg.frames, cfg.backgrounds)):
        try:
            walk = generate_walk(cfg.walk_scenario(c), skeleton, flesh)
        except ValueError as exc:
            raise CommandError("testbed", f"camera {c}: {exc}") from exc
        out = cfg.resolve(frames_dir)
        out.mkdir(parents=True, exist_ok=True)
        for old in list_frames(out):
            old.unlink()
        for k, frame in enumerate(walk.frames):
            write_pgm(out / f"frame_{k:04d}.pgm", frame)
        bg = cfg.resolve(bg_path)
        bg.parent.mkdir(parents=True, exist_ok=True)
        write_pgm(bg, walk.background)
        truth = walk.truth
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    cfg.truth_path.parent.mkdir(parents=True, exist_ok=True)
    io_mod.write_trajectory_csv(cfg.truth_path, truth, skeleton)
    print(f"synth: {len(truth)} frames x {len(cfg.frames)} camera(s); truth -> {cfg.truth_path}")


def _load_observations(cfg: RunConfig, limit: int | None):
    observations = []
    for c, (frames_dir, bg_path) in enumerate(zip(cfg.frames, cfg.backgrounds)):
        cam = cfg.cameras[c]
        try:
            background = read_frame(cfg.resolve(bg_path))
        except (OSError, ValueError, RuntimeError) as exc:
            raise CommandError("imaging", f"background for camera {c}: {exc}") from exc
        files = list_frames(cfg.resolve(frames_dir))
        if limit is not None:
            files = files[:limit]
        if not files:
            raise CommandError("imaging", f"no numbered frames in {frames_dir}")
        seq = []
        for k, path in enumerate(files):
            try:
                frame = read_frame(path)
                if frame.pixels.shape != (cam.height, cam.width):
                    raise ValueError(
                        f"{path.name} is {frame.pixels.shape[1]}x{frame.pixels.shape[0]}, "
                        f"camera {c} expects {cam.width}x{cam.height}"
                    )
                seq.append(extract_silhouette(frame, background, cfg.threshold))
            except (OSError, ValueError, RuntimeError) as exc:
                raise CommandError("imaging", str(exc), frame=k) from exc
        observations.append(seq)
    return observations


def cmd_track(cfg: RunConfig, args) -> None:
    skeleton, flesh = cfg.load_model()
    observations = _load_observations(cfg, _frame_limit(args))
    log_rows = []

    def on_frame(k, w, elapsed, n):
        log_rows.append((k, float(w), round(elapsed, 4), n))
        log.info("frame %d  weight %.4f  %d particles  %.2f s", k, w, n, elapsed)

    tic = time.perf_counter()
    try:
        trajectory = track_silhouettes(
            observations, cfg.ipf, skeleton, flesh, cfg.cameras, cfg.frame_rate, on_frame=on_frame
        )
    except TrackingError as exc:
        raise CommandError("ipf", str(exc.cause), frame=exc.frame) from exc
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    traj_path = cfg.trajectory_path
    io_mod.write_trajectory_csv(traj_path, trajectory, skeleton)
    io_mod.write_trajectory_json(traj_path.with_suffix(".json"), trajectory, skeleton)
    io_mod.write_rows(out / "track_log.csv", ["frame", "best_weight", "wall_time_s", "particles"], log_rows)
    total = time.perf_counter() - tic
    print(f"track: {len(trajectory)} frames in {total:.1f} s ({total / len(trajectory):.2f} s/frame) -> {traj_path}")


def _read_trajectory(cfg: RunConfig, path: Path):
    try:
        if path.suffix.lower() == ".json":
            return io_mod.read_trajectory_json(path)
        return io_mod.read_trajectory_csv(path, cfg.frame_rate)
    except (OSError, ValueError, KeyError) as exc:
        raise CommandError("io", f"cannot read trajectory {path}: {exc}") from exc


def _write_displacement(path: Path, trajectory, skeleton) -> None:
    disp = gait_mod.ankle_longitudinal(trajectory, skeleton)
    rows = [
        (k, float(t), float(disp["left"][k]), float(disp["right"][k]))
        for k, t in enumerate(trajectory.times)
    ]
    io_mod.write_rows(path, ["frame", "time_s", "left_ankle_m", "right_ankle_m"], rows)


def cmd_gait(cfg: RunConfig, args) -> None:
    from .plotting import plot_ankle_displacement

    skeleton, _ = cfg.load_model()
    trajectory = _read_trajectory(cfg, cfg.trajectory_path)
    try:
        events = gait_mod.detect_foot_events(trajectory, cfg.gait_velocity_threshold, skeleton)
        report = gait_mod.compute_gait_report(trajectory, events, skeleton)
    except ValueError as exc:
        raise CommandError("gait", str(exc)) from exc
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    doc = report.as_dict()
    doc["stance"] = {"left": events.left, "right": events.right}
    io_mod.write_json(out / "gait_report.json", doc)
    io_mod.write_rows(out / "gait_report.csv", ["quantity", "value", "unit"], report.rows())
    _write_displacement(out / "ankle_displacement.csv", trajectory, skeleton)
    plot_ankle_displacement(trajectory, skeleton, out / "ankle_displacement.png", events)
    for name, value, unit in report.rows()[:8]:
        print(f"{name:22s} {value:10.4f} {unit}")


def cmd_eval(cfg: RunConfig, args) -> None:
    from .plotting import plot_trajectory_comparison

    skeleton, _ = cfg.load_model()
    estimated = _read_trajectory(cfg, cfg.trajectory_path)
    truth = _read_trajectory(cfg, cfg.truth_path)
    try:
        report = evaluate(estimated, truth, skeleton.joint_names)
    except ValueError as exc:
        raise CommandError("testbed", str(exc)) from exc
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    io_mod.write_json(out / "eval_report.json", report.as_dict())
    rows = [(n, float(r), float(m)) for n, r, m in zip(report.joint_names, report.rmse, report.max_error)]
    rows.append(("mean", report.mean_rmse, float(np.max(report.max_error))))
    io_mod.write_rows(out / "eval_report.csv", ["joint", "rmse_m", "max_error_m"], rows)
    plot_trajectory_comparison(estimated, truth, skeleton, out / "trajectory_comparison.png")
    print(f"eval: mean joint RMSE {report.mean_rmse:.4f} m over {len(estimated)} frames")


def cmd_debug_weight(cfg: RunConfig, args) -> None:
    from .plotting import plot_silhouette_overlay

    skeleton, flesh = cfg.load_model()
    k = args.frame
    source = cfg.truth_path if args.use_truth else cfg.trajectory_path
    trajectory = _read_trajectory(cfg, source)
    if not 0 <= k < len(trajectory):
        raise CommandError("io", f"{source} has no frame {k} ({len(trajectory)} frames)")
    observations = _load_observations(cfg, k + 1)
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    weights = []
    print("camera  n_common  n_sil_only  n_model_only  weight")
    for c, cam in enumerate(cfg.cameras):
        observed = observations[c][k]
        model = render_joints(skeleton, flesh, trajectory.joints[k], cam)
        counts = pixel_counts(observed, model)
        w = weight(counts)
        weights.append(w)
        print(f"{c:6d}  {counts.n_common:8d}  {counts.n_sil_only:10d}  {counts.n_model_only:12d}  {w:.6f}")
        write_pgm(out / f"debug_observed_c{c}_f{k:04d}.pgm", observed)
        write_pgm(out / f"debug_model_c{c}_f{k:04d}.pgm", model)
        plot_silhouette_overlay(observed.mask, model.mask, out / f"debug_overlay_c{c}_f{k:04d}.png")
    print(f"combined weight {combine_cameras(weights):.6f}")


def cmd_plot_data(cfg: RunConfig, args) -> None:
    skeleton, _ = cfg.load_model()
    trajectory = _read_trajectory(cfg, cfg.trajectory_path)
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    path = cfg.output_dir / "ankle_displacement.csv"
    _write_displacement(path, trajectory, skeleton)
    print(f"plot-data: {len(trajectory)} rows -> {path}")


def cmd_export_skeleton(cfg: RunConfig, args) -> None:
    skeleton, flesh = cfg.load_model()
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    path = cfg.output_dir / "skeleton.json"
    io_mod.save_skeleton(path, skeleton, flesh)
    print(f"export-skeleton: {skeleton.n_dof} DOFs, {len(skeleton.joints)} joints -> {path}")


COMMANDS = {
    "synth": cmd_synth,
    "track": cmd_track,
    "gait": cmd_gait,
    "eval": cmd_eval,
    "debug-weight": cmd_debug_weight,
    "plot-data": cmd_plot_data,
    "export-skeleton": cmd_export_skeleton,
}

INPUT_CHECK = {"track": "track", "gait": "gait", "eval": "eval", "plot-data": "gait"}

DEFAULT_CONFIG_TEXT = """{
  "paths": {
    "frames": ["frames/cam0"],
    "backgrounds": ["frames/cam0_background.pgm"],
    "output": "out"
  }
}
"""


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ipfmocap", description="Silhouette-based interval particle filter tracking and gait analysis")
    parser.add_argument("-v", "--verbose", action="store_true", help="log per-frame progress")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--seed", type=int, help="override the random seed (tracker noise, synthetic pixel noise)")
        p.add_argument("--frames", type=int, help="number of frames to synthesize or to track")
        p.add_argument("--output", help="override the output directory")
        if name == "debug-weight":
            p.add_argument("--frame", type=int, default=0, help="frame index to inspect")
            p.add_argument("--use-truth", action="store_true", help="score the truth pose instead of the tracked one")
    p = sub.add_parser("init-config")
    p.add_argument("path", help="where to write the config")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")

    if args.command == "init-config":
        cfg = parse_config(DEFAULT_CONFIG_TEXT)
        Path(args.path).write_text(serialize_config(cfg))
        print(f"init-config: wrote {args.path}")
        return EXIT_OK

    try:
        if args.frames is not None and args.frames < 1:
            raise ConfigError("--frames must be at least 1")
        cfg = _apply_overrides(load_config(args.config), args)
        if args.command in INPUT_CHECK:
            cfg.check_inputs(INPUT_CHECK[args.command])
    except (ConfigError, OSError, ValueError) as exc:
        print(f"ipfmocap {args.command}: config: {exc}", file=sys.stderr)
        return EXIT_USAGE

    try:
        COMMANDS[args.command](cfg, args)
    except CommandError as exc:
        print(f"ipfmocap {args.command}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except OSError as exc:
        print(f"ipfmocap {args.command}: io: {exc}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
