"""Analytic calibration-image warper.

Keypoint-derived geometric part masks (capsules around bones, a head
disc, a dilated torso hull) select body regions; each region is moved
into the target pose by its own least-squares similarity transform, and
the masks themselves are warped alongside the texture.  The channel-wise
maximum of the warped masks gives the silhouette, and a winner-take-all
rule over mask strength composites the per-part textures.  A pluggable
refiner hook sits between the raw silhouette and the final one.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .frame import Frame
from .errors import DegenerateConfigurationError
from .pose import KEYPOINT_INDEX, PART_GROUPS, PART_NAMES, KeypointSet
from .simfit import Similarity2D, apply_similarity_image, fit_similarity

NUM_PARTS = len(PART_GROUPS)

_DEFAULT_LIMB_SCALES = {
    "left_upper_arm": 0.5, "right_upper_arm": 0.5,
    "left_lower_arm": 0.5, "right_lower_arm": 0.5,
    "left_upper_leg": 0.5, "right_upper_leg": 0.5,
    "left_lower_leg": 0.5, "right_lower_leg": 0.5,
}


@dataclass(frozen=True)
class PartGeometryConfig:
    """Capsule/disc sizing for the geometric part masks.

    Limb capsule radius = limb_radius_scales[part] * bone length, floored
    at limb_min_scale * st.  Head disc radius and the torso hull margin
    scale with st, the RMS shoulder-to-hip distance.  All masks fall off
    linearly over edge_px pixels.
    """

    limb_radius_scales: dict = field(default_factory=lambda: dict(_DEFAULT_LIMB_SCALES))
    head_radius_scale: float = 0.45
    body_margin_scale: float = 0.25
    limb_min_scale: float = 0.15
    edge_px: float = 3.0

    def to_dict(self) -> dict:
        return {
            "limb_radius_scales": dict(self.limb_radius_scales),
            "head_radius_scale": self.head_radius_scale,
            "body_margin_scale": self.body_margin_scale,
            "limb_min_scale": self.limb_min_scale,
            "edge_px": self.edge_px,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PartGeometryConfig":
        scales = dict(_DEFAULT_LIMB_SCALES)
        scales.update(d.get("limb_radius_scales", {}))
        return cls(
            limb_radius_scales=scales,
            head_radius_scale=float(d.get("head_radius_scale", 0.45)),
            body_margin_scale=float(d.get("body_margin_scale", 0.25)),
            limb_min_scale=float(d.get("limb_min_scale", 0.15)),
            edge_px=float(d.get("edge_px", 3.0)),
        )

    @classmethod
    def load(cls, path) -> "PartGeometryConfig":
        with open(path) as f:
            return cls.from_dict(json.load(f))

    def save(self, path):
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)


@dataclass(frozen=True)
class PartMaskSet:
    """10 soft part masks plus background = 1 - max(parts), image sized."""

    parts: np.ndarray       # (10, H, W) float32 in [0, 1]
    background: np.ndarray  # (H, W) float32

    @classmethod
    def from_parts(cls, parts: np.ndarray) -> "PartMaskSet":
        parts = np.asarray(parts, dtype=np.float32)
        return cls(parts, 1.0 - parts.max(axis=0))

    def part(self, name: str) -> np.ndarray:
        return self.parts[PART_NAMES.index(name)]


@dataclass(frozen=True)
class WarpResult:
    """Warped texture and silhouettes; also carries the per-part layers."""

    color: np.ndarray             # (H, W, 3) float32
    silhouette: np.ndarray        # (H, W) float32, refined
    part_silhouette: np.ndarray   # (H, W) float32, max over warped masks
    per_part_textures: np.ndarray  # (10, H, W, 3) float32
    per_part_masks: np.ndarray     # (10, H, W) float32
    transforms: tuple = ()         # per-part Similarity2D or None


def _pixel_grid(width: int, height: int):
    ys, xs = np.mgrid[0:height, 0:width]
    return xs.astype(np.float64), ys.astype(np.float64)


def _segment_distance(xs, ys, a, b) -> np.ndarray:
    """Distance from every pixel to the segment ab."""
    ab = b - a
    denom = float(ab @ ab)
    dx, dy = xs - a[0], ys - a[1]
    if denom < 1e-12:
        return np.hypot(dx, dy)
    t = np.clip((dx * ab[0] + dy * ab[1]) / denom, 0.0, 1.0)
    return np.hypot(dx - t * ab[0], dy - t * ab[1])


def _soft_region(dist: np.ndarray, radius: float, edge: float) -> np.ndarray:
    """1 inside radius, linear falloff to 0 at radius + edge."""
    if edge <= 0:
        return (dist <= radius).astype(np.float32)
    return np.clip((radius + edge - dist) / edge, 0.0, 1.0).astype(np.float32)


def _st_distance(kp: KeypointSet) -> float | None:
    names = ("left_shoulder", "right_shoulder", "left_hip", "right_hip")
    if not all(kp.is_valid(n) for n in names):
        return None
    ls, rs, lh, rh = (kp.point2d(n) for n in names)
    return float(np.sqrt(0.5 * (np.sum((rh - rs) ** 2) + np.sum((lh - ls) ** 2))))


def _hull_distance(xs, ys, points: np.ndarray) -> np.ndarray:
    """Distance to the convex hull of `points` (0 inside)."""
    try:
        hull = ConvexHull(points)
        verts = points[hull.vertices]
    except QhullError:
        verts = points  # degenerate: fall back to segment chain
    n = len(verts)
    dist = np.full(xs.shape, np.inf)
    inside = np.ones(xs.shape, dtype=bool)
    for i in range(n):
        a, b = verts[i], verts[(i + 1) % n]
        dist = np.minimum(dist, _segment_distance(xs, ys, a, b))
        cross = (b[0] - a[0]) * (ys - a[1]) - (b[1] - a[1]) * (xs - a[0])
        inside &= cross >= 0
    out = np.where(inside, 0.0, dist)
    return out


def part_masks_geometric(kp: KeypointSet, width: int, height: int,
                         cfg: PartGeometryConfig | None = None) -> PartMaskSet:
    """Build the 10 geometric part masks from 2D keypoints.

    Groups with missing keypoints get an empty mask.
    """
    if cfg is None:
        cfg = PartGeometryConfig()
    xs, ys = _pixel_grid(width, height)
    st = _st_distance(kp)
    parts = np.zeros((NUM_PARTS, height, width), dtype=np.float32)

    for gi, (name, members) in enumerate(PART_GROUPS):
        if name == "head":
            disc_names = ("nose", "left_eye", "right_eye")
            if st is None or not all(kp.is_valid(n) for n in disc_names):
                continue
            center = np.mean([kp.point2d(n) for n in disc_names], axis=0)
            dist = np.hypot(xs - center[0], ys - center[1])
            parts[gi] = _soft_region(dist, cfg.head_radius_scale * st, cfg.edge_px)
        elif name == "body":
            if st is None:
                continue
            pts = np.array([kp.point2d(n) for n in members])
            dist = _hull_distance(xs, ys, pts)
            parts[gi] = _soft_region(dist, cfg.body_margin_scale * st, cfg.edge_px)
        else:
            a_name, b_name = members
            if not (kp.is_valid(a_name) and kp.is_valid(b_name)):
                continue
            a, b = kp.point2d(a_name), kp.point2d(b_name)
            bone = float(np.linalg.norm(b - a))
            radius = cfg.limb_radius_scales.get(name, 0.5) * bone
            if st is not None:
                radius = max(radius, cfg.limb_min_scale * st)
            dist = _segment_distance(xs, ys, a, b)
            parts[gi] = _soft_region(dist, radius, cfg.edge_px)

    return PartMaskSet.from_parts(parts)


def _common_points(calib_kp: KeypointSet, target_kp: KeypointSet, members):
    idx = [KEYPOINT_INDEX[n] for n in members
           if calib_kp.is_valid(n) and target_kp.is_valid(n)]
    if len(idx) < 2:
        return None, None
    return calib_kp.position2d[idx], target_kp.position2d[idx]


def warp_parts(calib: Frame, calib_kp: KeypointSet, target_kp: KeypointSet,
               masks: PartMaskSet) -> WarpResult:
    """Warp each masked part of the calibration image into the target pose.

    Per part: fit the similarity transform from the calibration keypoints
    onto the target keypoints, then warp both the masked texture and the
    mask itself.  Groups without >= 2 keypoints valid in both poses are
    skipped and leave empty layers.
    """
    h, w = calib.height, calib.width
    fg = calib.mask.astype(np.float32)
    textures = np.zeros((NUM_PARTS, h, w, 3), dtype=np.float32)
    warped_masks = np.zeros((NUM_PARTS, h, w), dtype=np.float32)
    transforms: list[Similarity2D | None] = [None] * NUM_PARTS

    for gi, (name, members) in enumerate(PART_GROUPS):
        src, dst = _common_points(calib_kp, target_kp, members)
        if src is None:
            continue
        mask = masks.parts[gi] * fg
        if not np.any(mask > 0):
            continue
        try:
            t, _ = fit_similarity(src, dst)
        except DegenerateConfigurationError:
            continue
        transforms[gi] = t
        textures[gi] = apply_similarity_image(t, calib.color * mask[..., None])
        warped_masks[gi] = apply_similarity_image(t, mask)

    zero = np.zeros((h, w), dtype=np.float32)
    return WarpResult(
        color=np.zeros((h, w, 3), dtype=np.float32),
        silhouette=zero,
        part_silhouette=zero,
        per_part_textures=textures,
        per_part_masks=warped_masks,
        transforms=tuple(transforms),
    )


def default_refiner(raw: WarpResult) -> WarpResult:
    """The identity refiner: the stand-in for learned mask refinement."""
    return raw


def _check_refined(raw: WarpResult, refined: WarpResult):
    if (refined.color.shape != raw.color.shape
            or refined.silhouette.shape != raw.silhouette.shape
            or refined.part_silhouette.shape != raw.part_silhouette.shape):
        raise ValueError("refiner must preserve image dimensions")
    for arr in (refined.silhouette, refined.part_silhouette, refined.color):
        if arr.size and (np.min(arr) < -1e-6 or np.max(arr) > 1 + 1e-6):
            raise ValueError("refiner must keep values in [0, 1]")


def register_refiner(hook, probe_height: int = 8, probe_width: int = 8):
    """Validate a refiner hook on a probe input; raises if it breaks the
    dimension/range contract.  Returns the hook unchanged."""
    zero = np.zeros((probe_height, probe_width), dtype=np.float32)
    probe = WarpResult(
        color=np.zeros((probe_height, probe_width, 3), dtype=np.float32),
        silhouette=zero,
        part_silhouette=zero,
        per_part_textures=np.zeros((NUM_PARTS, probe_height, probe_width, 3), np.float32),
        per_part_masks=np.zeros((NUM_PARTS, probe_height, probe_width), np.float32),
    )
    _check_refined(probe, hook(probe))
    return hook


def composite(pre: WarpResult, refiner=None) -> WarpResult:
    """Merge warped part layers into the final texture and silhouettes.

    The part silhouette is the per-pixel max over the warped masks; the
    color comes from the layer with the strongest mask at each pixel
    (ties to the lower group index); the final silhouette is the part
    silhouette passed through the refiner hook.
    """
    part_sil = pre.per_part_masks.max(axis=0)
    winner = pre.per_part_masks.argmax(axis=0)
    color = np.take_along_axis(
        pre.per_part_textures, winner[None, ..., None], axis=0
    )[0]
    color = np.where(part_sil[..., None] > 0, color, 0.0).astype(np.float32)

    raw = replace(pre, color=color, silhouette=part_sil.astype(np.float32),
                  part_silhouette=part_sil.astype(np.float32))
    if refiner is None:
        return raw
    refined = refiner(raw)
    _check_refined(raw, refined)
    return refined
