"""Command-line surface: synth, calibrate, select, render, eval."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .blender import BlendConfig
from .frame_io import build_bank, list_frame_dirs, load_bank, load_camera, load_frame, save_frame
from .metrics import evaluate_pair
from .pipeline import PipelineConfig, render_novel
from .selector import SelectorWeights
from .synth import PoseParams, default_intrinsics, make_humanoid, orbit_camera, render_synthetic
from .warper import PartGeometryConfig


def _cmd_synth(args) -> int:
    k = default_intrinsics(args.width, args.height, args.focal)
    camera = orbit_camera(0.0, radius=args.radius)
    rng = np.random.default_rng(args.seed)
    out = Path(args.out)
    from .synth import ANGLE_LIMITS

    for i in range(args.frames):
        yaw = np.deg2rad(i * args.orbit_degrees)
        angles = {}
        if args.pose_jitter > 0:
            for name, (lo, hi) in ANGLE_LIMITS.items():
                angles[name] = float(np.clip(
                    rng.uniform(-args.pose_jitter, args.pose_jitter), lo, hi))
        h = make_humanoid(PoseParams(root_yaw=yaw, angles=angles), seed=args.seed)
        frame, _ = render_synthetic(h, k, camera)
        save_frame(frame, out / f"{i:06d}")
    print(f"wrote {args.frames} frames to {out}")
    return 0


def _cmd_calibrate(args) -> int:
    entries = build_bank(args.seq, args.out, max_frames=args.max_frames)
    print(f"bank at {args.out}: {len(entries)} entries")
    return 0


def _cmd_select(args) -> int:
    from .pose import extrapolate_missing, lift_keypoints
    from .selector import select

    bank = load_bank(args.bank)
    frame = load_frame(args.frame)
    kp = extrapolate_missing(frame.keypoints)
    if kp is None:
        print("frame rejected by keypoint gating", file=sys.stderr)
        return 1
    kp = lift_keypoints(kp, frame.depth, frame.intrinsics)
    weights = _load_weights(args.weights)
    index, breakdown = select(bank, kp, weights)
    report = {"selected_index": index, "breakdown": breakdown.to_dict()}
    print(json.dumps(report, indent=2))
    return 0


def _load_weights(path) -> SelectorWeights:
    if path is None:
        return SelectorWeights()
    with open(path) as f:
        return SelectorWeights.from_dict(json.load(f))


def _cmd_render(args) -> int:
    frame = load_frame(args.frame)
    bank = load_bank(args.bank)
    target_k, target_pose = load_camera(args.camera)
    cfg = PipelineConfig(
        weights=_load_weights(args.weights),
        blend=BlendConfig.load(args.blend_config) if args.blend_config else BlendConfig(),
        part_geometry=(PartGeometryConfig.load(args.part_geometry)
                       if args.part_geometry else PartGeometryConfig()),
        kernel_radius=args.kernel_radius,
    )
    stages = render_novel(frame, bank, target_k, target_pose, cfg,
                          dump_dir=args.dump)
    save_frame(stages.output, args.out)
    print(f"rendered {args.out} (selected calibration entry "
          f"{stages.selected_index}, confidence {stages.confidence:.3f})")
    return 0


def _cmd_eval(args) -> int:
    pred_dirs = {p.name: p for p in list_frame_dirs(args.pred)}
    gt_dirs = {p.name: p for p in list_frame_dirs(args.gt)}
    names = sorted(set(pred_dirs) & set(gt_dirs))
    if not names:
        print("no matching frame directories between pred and gt", file=sys.stderr)
        return 1
    per_frame = {}
    for name in names:
        pred = load_frame(pred_dirs[name])
        gt = load_frame(gt_dirs[name])
        per_frame[name] = evaluate_pair(pred.color, gt.color, gt.mask)
    keys = sorted({k for rep in per_frame.values() for k in rep})
    mean = {k: float(np.mean([rep[k] for rep in per_frame.values()
                              if np.isfinite(rep[k])])) for k in keys}
    report = {"frames": per_frame, "mean": mean, "count": len(names)}
    with open(args.out, "w") as f:
        json.dump(report, f, indent=2)
    print(f"evaluated {len(names)} frames -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="rgbdview",
        description="Free-viewpoint human re-rendering from one RGBD frame "
                    "plus a calibration bank",
    )
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synth", help="generate a synthetic frame sequence")
    sp.add_argument("--out", required=True)
    sp.add_argument("--frames", type=int, default=36)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--orbit-degrees", type=float, default=10.0)
    sp.add_argument("--pose-jitter", type=float, default=0.0,
                    help="max random joint angle offset (radians)")
    sp.add_argument("--width", type=int, default=320)
    sp.add_argument("--height", type=int, default=256)
    sp.add_argument("--focal", type=float, default=280.0)
    sp.add_argument("--radius", type=float, default=2.6)
    sp.set_defaults(func=_cmd_synth)

    cp = sub.add_parser("calibrate", help="build a calibration bank")
    cp.add_argument("--seq", required=True)
    cp.add_argument("--out", required=True)
    cp.add_argument("--max-frames", type=int, default=None)
    cp.set_defaults(func=_cmd_calibrate)

    se = sub.add_parser("select", help="score a frame against a bank")
    se.add_argument("--bank", required=True)
    se.add_argument("--frame", required=True)
    se.add_argument("--weights", default=None)
    se.set_defaults(func=_cmd_select)

    rp = sub.add_parser("render", help="render a novel view")
    rp.add_argument("--frame", required=True)
    rp.add_argument("--bank", required=True)
    rp.add_argument("--camera", required=True)
    rp.add_argument("--out", required=True)
    rp.add_argument("--dump", default=None)
    rp.add_argument("--weights", default=None)
    rp.add_argument("--blend-config", default=None)
    rp.add_argument("--part-geometry", default=None)
    rp.add_argument("--kernel-radius", type=int, default=1)
    rp.set_defaults(func=_cmd_render)

    ep = sub.add_parser("eval", help="compare rendered frames against ground truth")
    ep.add_argument("--pred", required=True)
    ep.add_argument("--gt", required=True)
    ep.add_argument("--out", required=True)
    ep.set_defaults(func=_cmd_eval)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
