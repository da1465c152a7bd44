"""End-to-end novel-view rendering: re-render, select, warp, blend.

All stages are deterministic; running the pipeline twice on identical
inputs produces bit-identical results.  Stage failures surface as
PipelineStageError with the stage name.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .blender import BlendConfig, BlendInput, blend
from .errors import PipelineStageError, RgbdViewError
from .frame import Frame
from .frame_io import load_frame, save_image
from .geometry import (
    Intrinsics,
    PointCloud,
    RigidTransform,
    depth_to_cloud,
    normals_from_depth,
    transform_cloud,
    view_confidence,
)
from .pose import KeypointSet, extrapolate_missing, lift_keypoints
from .selector import SelectorWeights, select
from .splat import SplatOutput, splat_render
from .warper import PartGeometryConfig, WarpResult, composite, part_masks_geometric, warp_parts


@dataclass(frozen=True)
class PipelineConfig:
    weights: SelectorWeights = field(default_factory=SelectorWeights)
    blend: BlendConfig = field(default_factory=BlendConfig)
    part_geometry: PartGeometryConfig = field(default_factory=PartGeometryConfig)
    kernel_radius: int = 1
    heatmap_sigma: float | None = None  # None = scale with image width


@dataclass(frozen=True)
class StageOutputs:
    """Every intermediate the pipeline produces, for inspection/dumping."""

    cloud: SplatOutput
    normals: np.ndarray
    confidence: float
    target_keypoints: KeypointSet
    selected_index: int
    selection: dict
    warp: WarpResult
    output: Frame


def _gate_keypoints(frame: Frame) -> KeypointSet:
    kp = frame.keypoints
    if kp is None:
        raise PipelineStageError("pose", "input frame has no keypoints")
    kp = extrapolate_missing(kp)
    if kp is None:
        raise PipelineStageError(
            "pose", "frame rejected: nose/shoulders/hips missing after extrapolation"
        )
    return lift_keypoints(kp, frame.depth, frame.intrinsics)


def _rerender(frame: Frame, t_rel: RigidTransform, k: Intrinsics,
              kernel_radius: int) -> tuple[SplatOutput, np.ndarray]:
    cloud = depth_to_cloud(frame.depth, frame.color, frame.mask, frame.intrinsics)
    moved = transform_cloud(cloud, t_rel)
    out = splat_render(moved, k, kernel_radius)

    # carry per-point normals through the same splat so they stay aligned
    # with the color winner at every pixel
    nmap = normals_from_depth(frame.depth, frame.intrinsics)
    keep = (frame.mask > 0) & (frame.depth > 0)
    ys, xs = np.nonzero(keep)
    n_in = nmap[ys, xs]
    n_rot = n_in @ t_rel.rotation.T
    encoded = (0.5 * (n_rot + 1.0)).astype(np.float32)
    n_splat = splat_render(PointCloud(moved.positions, encoded), k, kernel_radius)
    normals = (2.0 * n_splat.color.astype(np.float64) - 1.0)
    normals[~n_splat.coverage] = 0.0
    return out, normals


def _target_keypoints(kp: KeypointSet, t_rel: RigidTransform,
                      k: Intrinsics) -> KeypointSet:
    has3 = kp.has_3d
    p2 = np.full((len(kp.valid), 2), np.nan)
    p3 = np.full((len(kp.valid), 3), np.nan)
    valid = np.zeros(len(kp.valid), dtype=bool)
    if np.any(has3):
        moved = t_rel.apply(kp.position3d[has3])
        z = moved[:, 2]
        ok = z > 1e-9
        idx = np.nonzero(has3)[0][ok]
        moved = moved[ok]
        p3[idx] = moved
        p2[idx, 0] = k.fx * moved[:, 0] / moved[:, 2] + k.ox
        p2[idx, 1] = k.fy * moved[:, 1] / moved[:, 2] + k.oy
        valid[idx] = True
    return KeypointSet(p2, p3, valid)


def render_novel(input_frame: Frame, bank, target_k: Intrinsics,
                 target_pose: RigidTransform,
                 cfg: PipelineConfig | None = None,
                 dump_dir=None) -> StageOutputs:
    """Render the input frame's subject from the target camera.

    `bank` is a list of CalibrationEntry; entries whose `frame` attribute
    is a path are loaded on demand.  With dump_dir set, every
    intermediate image is written there.
    """
    if cfg is None:
        cfg = PipelineConfig()

    kp = _gate_keypoints(input_frame)
    t_rel = target_pose.compose(input_frame.pose.inverse())

    try:
        cloud_out, normals = _rerender(input_frame, t_rel, target_k, cfg.kernel_radius)
        confidence = view_confidence(t_rel)
    except RgbdViewError as e:
        raise PipelineStageError("rerender", str(e)) from e

    target_kp = _target_keypoints(kp, t_rel, target_k)

    try:
        index, breakdown = select(bank, target_kp, cfg.weights)
    except RgbdViewError as e:
        raise PipelineStageError("select", str(e)) from e
    entry = bank[index]

    try:
        calib = entry.frame
        if not isinstance(calib, Frame):
            calib = load_frame(calib)
        if (calib.width, calib.height) != (target_k.width, target_k.height):
            raise PipelineStageError(
                "warp", "calibration and target cameras must share resolution"
            )
        masks = part_masks_geometric(entry.keypoints, calib.width, calib.height,
                                     cfg.part_geometry)
        pre = warp_parts(calib, entry.keypoints, target_kp, masks)
        warp = composite(pre)
    except PipelineStageError:
        raise
    except RgbdViewError as e:
        raise PipelineStageError("warp", str(e)) from e

    try:
        blend_in = BlendInput(cloud=cloud_out, warp=warp, normals=normals,
                              confidence=confidence)
        out_color = blend(blend_in, cfg.blend)
    except RgbdViewError as e:
        raise PipelineStageError("blend", str(e)) from e

    union = cloud_out.coverage | (warp.silhouette >= cfg.blend.tau)
    out_frame = Frame(
        color=out_color,
        depth=cloud_out.depth,
        mask=union,
        intrinsics=target_k,
        pose=target_pose,
        keypoints=target_kp,
    )
    stages = StageOutputs(
        cloud=cloud_out, normals=normals, confidence=confidence,
        target_keypoints=target_kp, selected_index=index,
        selection=breakdown.to_dict(), warp=warp, output=out_frame,
    )
    if dump_dir is not None:
        _dump_stages(stages, dump_dir)
    return stages


def _dump_stages(st: StageOutputs, dump_dir):
    dump_dir = Path(dump_dir)
    dump_dir.mkdir(parents=True, exist_ok=True)
    save_image(dump_dir / "i_cloud.png", st.cloud.color)
    save_image(dump_dir / "cloud_coverage.png", st.cloud.coverage.astype(np.float32))
    depth = st.cloud.depth
    dmax = depth.max()
    save_image(dump_dir / "cloud_depth.png", depth / dmax if dmax > 0 else depth)
    save_image(dump_dir / "normals.png", 0.5 * (st.normals + 1.0))
    save_image(dump_dir / "i_warp.png", st.warp.color)
    save_image(dump_dir / "warp_silhouette.png", st.warp.silhouette)
    save_image(dump_dir / "part_silhouette.png", st.warp.part_silhouette)
    save_image(dump_dir / "i_out.png", st.output.color)
    with open(dump_dir / "selection.json", "w") as f:
        json.dump({
            "selected_index": st.selected_index,
            "confidence": st.confidence,
            "breakdown": st.selection,
        }, f, indent=2)
