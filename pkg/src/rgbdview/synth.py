"""Synthetic articulated capsule humanoid with exact ray-traced rendering.

The body is a union of 10 capsules, one per part group, hung on the
17-keypoint skeleton.  Rendering intersects one ray per pixel with every
capsule analytically, so depth maps are exact and make tight oracles.
Albedo is a high-frequency two-color checker evaluated in each capsule's
own frame (rings along the bone, sectors around it), which keeps texture
attached to the body across viewpoints and makes warp/blend misalignment
visible to photometric metrics.

World convention matches the camera convention: y points down, so the
humanoid stands along -y.  At zero yaw the body faces -z, i.e. toward a
camera placed at negative z looking at the origin.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import PoseError
from .frame import Frame
from .geometry import Intrinsics, RigidTransform, rotation_y
from .pose import KEYPOINT_INDEX, KEYPOINT_NAMES, PART_NAMES, KeypointSet

# canonical T-pose, local frame: pelvis at origin, +x person's left, +y down
_TPOSE = {
    "nose": (0.0, -0.63, -0.10),
    "left_eye": (0.035, -0.685, -0.09), "right_eye": (-0.035, -0.685, -0.09),
    "left_ear": (0.095, -0.67, -0.01), "right_ear": (-0.095, -0.67, -0.01),
    "left_shoulder": (0.18, -0.50, 0.0), "right_shoulder": (-0.18, -0.50, 0.0),
    "left_hip": (0.10, 0.0, 0.0), "right_hip": (-0.10, 0.0, 0.0),
}
_HEAD_CENTER = np.array([0.0, -0.66, 0.0])
_HEAD_RADIUS = 0.11
_TORSO_RADIUS = 0.16
_UPPER_ARM, _LOWER_ARM = 0.28, 0.26
_UPPER_LEG, _LOWER_LEG = 0.42, 0.42
_LIMB_RADII = {
    "left_upper_arm": 0.045, "right_upper_arm": 0.045,
    "left_lower_arm": 0.04, "right_lower_arm": 0.04,
    "left_upper_leg": 0.07, "right_upper_leg": 0.07,
    "left_lower_leg": 0.055, "right_lower_leg": 0.055,
}

ANGLE_LIMITS = {
    "left_shoulder": (-0.4, 1.8), "right_shoulder": (-0.4, 1.8),
    "left_elbow": (0.0, 2.4), "right_elbow": (0.0, 2.4),
    "left_hip": (-0.9, 0.9), "right_hip": (-0.9, 0.9),
    "left_knee": (0.0, 2.0), "right_knee": (0.0, 2.0),
}

_CHECKER_PERIOD = 0.045   # meters along the bone
_CHECKER_SECTOR = np.pi / 3.0
_LIGHT_DIR = np.array([0.30, -0.85, -0.43])  # surface-to-light, world frame
_AMBIENT, _DIFFUSE = 0.35, 0.65


@dataclass(frozen=True)
class PoseParams:
    """Root placement plus the 8 planar joint angles (radians).

    Arm angles swing in the coronal plane (0 = T-pose, positive lowers the
    arm); hip angles swing the leg forward (positive) or back; elbow/knee
    angles bend the distal bone.  Angles outside ANGLE_LIMITS raise
    PoseError.
    """

    root_position: tuple = (0.0, 0.0, 0.0)
    root_yaw: float = 0.0
    angles: dict = field(default_factory=dict)

    def angle(self, name: str) -> float:
        return float(self.angles.get(name, 0.0))


@dataclass(frozen=True)
class Humanoid:
    """Posed skeleton + capsule geometry + two-color checker palette."""

    joints: np.ndarray        # (17, 3) world meters
    capsule_a: np.ndarray     # (10, 3) segment starts, world
    capsule_b: np.ndarray     # (10, 3) segment ends, world
    capsule_r: np.ndarray     # (10,) radii
    palette_a: np.ndarray     # (10, 3) checker color A
    palette_b: np.ndarray     # (10, 3) checker color B
    seed: int

    def keypoints_world(self) -> np.ndarray:
        return self.joints


def _local_skeleton(params: PoseParams) -> dict:
    """Forward kinematics in the local (pelvis) frame."""
    for name, val in params.angles.items():
        if name not in ANGLE_LIMITS:
            raise PoseError(f"unknown joint angle '{name}'")
        lo, hi = ANGLE_LIMITS[name]
        if not lo <= val <= hi:
            raise PoseError(f"{name}={val:.3f} outside limits [{lo}, {hi}]")

    j = {name: np.array(pos) for name, pos in _TPOSE.items()}
    for side, sx in (("left", 1.0), ("right", -1.0)):
        a = params.angle(f"{side}_shoulder")
        e = params.angle(f"{side}_elbow")
        sh = j[f"{side}_shoulder"]
        upper = np.array([sx * np.cos(a), np.sin(a), 0.0])
        j[f"{side}_elbow"] = sh + _UPPER_ARM * upper
        lower = np.array([sx * np.cos(a + e), np.sin(a + e), 0.0])
        j[f"{side}_wrist"] = j[f"{side}_elbow"] + _LOWER_ARM * lower

        h = params.angle(f"{side}_hip")
        k = params.angle(f"{side}_knee")
        hip = j[f"{side}_hip"]
        thigh = np.array([0.0, np.cos(h), -np.sin(h)])
        j[f"{side}_knee"] = hip + _UPPER_LEG * thigh
        shin = np.array([0.0, np.cos(h - k), -np.sin(h - k)])
        j[f"{side}_ankle"] = j[f"{side}_knee"] + _LOWER_LEG * shin
    return j


def make_humanoid(params: PoseParams | None = None, seed: int = 0) -> Humanoid:
    """Build a posed humanoid; deterministic in (params, seed)."""
    if params is None:
        params = PoseParams()
    local = _local_skeleton(params)

    rot = rotation_y(params.root_yaw)
    root = np.asarray(params.root_position, dtype=np.float64)

    def to_world(p):
        return rot @ np.asarray(p, dtype=np.float64) + root

    joints = np.zeros((len(KEYPOINT_NAMES), 3))
    for name in KEYPOINT_NAMES:
        joints[KEYPOINT_INDEX[name]] = to_world(local[name])

    seg_a, seg_b, radii = [], [], []
    for part in PART_NAMES:
        if part == "head":
            c = to_world(_HEAD_CENTER)
            seg_a.append(c)
            seg_b.append(c)
            radii.append(_HEAD_RADIUS)
        elif part == "body":
            mid_sh = 0.5 * (local["left_shoulder"] + local["right_shoulder"])
            mid_hip = 0.5 * (local["left_hip"] + local["right_hip"])
            seg_a.append(to_world(mid_sh))
            seg_b.append(to_world(mid_hip))
            radii.append(_TORSO_RADIUS)
        else:
            side, _, bone = part.partition("_")
            if bone == "upper_arm":
                ends = (f"{side}_shoulder", f"{side}_elbow")
            elif bone == "lower_arm":
                ends = (f"{side}_elbow", f"{side}_wrist")
            elif bone == "upper_leg":
                ends = (f"{side}_hip", f"{side}_knee")
            else:
                ends = (f"{side}_knee", f"{side}_ankle")
            seg_a.append(to_world(local[ends[0]]))
            seg_b.append(to_world(local[ends[1]]))
            radii.append(_LIMB_RADII[part])

    rng = np.random.default_rng(seed)
    palette_a = 0.25 + 0.7 * rng.random((len(PART_NAMES), 3))
    palette_b = 0.25 + 0.7 * rng.random((len(PART_NAMES), 3))

    return Humanoid(
        joints=joints,
        capsule_a=np.array(seg_a), capsule_b=np.array(seg_b),
        capsule_r=np.array(radii),
        palette_a=palette_a, palette_b=palette_b,
        seed=seed,
    )


def default_intrinsics(width: int = 320, height: int = 256,
                       focal: float = 280.0) -> Intrinsics:
    return Intrinsics(fx=focal, fy=focal, ox=width / 2.0, oy=height / 2.0,
                      width=width, height=height)


def orbit_camera(yaw: float, radius: float = 2.6, height: float = 0.0,
                 target=(0.0, 0.0, 0.0)) -> RigidTransform:
    """World->camera pose on a circle around the world y axis.

    yaw 0 puts the camera in front of a zero-yaw humanoid; the camera
    always looks at `target`.
    """
    target = np.asarray(target, dtype=np.float64)
    center = target + np.array([radius * np.sin(yaw), height, -radius * np.cos(yaw)])
    z = target - center
    z = z / np.linalg.norm(z)
    y = np.array([0.0, 1.0, 0.0])
    x = np.cross(y, z)
    x = x / np.linalg.norm(x)
    y = np.cross(z, x)
    rot = np.stack([x, y, z], axis=0)
    return RigidTransform(rotation=rot, translation=-rot @ center)


def _ray_capsule(d: np.ndarray, a: np.ndarray, b: np.ndarray, r: float) -> np.ndarray:
    """Smallest positive ray parameter t (rays from the origin along d,
    with d_z = 1 so t equals camera depth); NaN where there is no hit."""
    t_best = np.full(d.shape[:-1], np.nan)

    ba = b - a
    length = float(np.linalg.norm(ba))

    def _sphere(center):
        cd = d @ center
        dd = np.einsum("...i,...i->...", d, d)
        disc = cd * cd - dd * (float(center @ center) - r * r)
        ok = disc >= 0
        t = np.where(ok, (cd - np.sqrt(np.where(ok, disc, 0.0))) / dd, np.nan)
        return np.where(t > 1e-9, t, np.nan)

    def _merge(t_new):
        nonlocal t_best
        t_best = np.fmin(t_best, t_new)

    if length > 1e-12:
        n = ba / length
        dn = d @ n
        m = d - dn[..., None] * n
        w = -a + float(a @ n) * n  # (origin - a) minus its axial component
        mm = np.einsum("...i,...i->...", m, m)
        wm = m @ w
        c0 = float(w @ w) - r * r
        disc = wm * wm - mm * c0
        ok = (disc >= 0) & (mm > 1e-18)
        t_cyl = np.where(ok, (-wm - np.sqrt(np.where(ok, disc, 0.0)))
                         / np.where(mm > 1e-18, mm, 1.0), np.nan)
        s = t_cyl * dn - float(a @ n)  # axial coordinate of the hit
        valid = (t_cyl > 1e-9) & (s >= 0) & (s <= length)
        _merge(np.where(valid, t_cyl, np.nan))
    _merge(_sphere(a))
    if length > 1e-12:
        _merge(_sphere(b))
    return t_best


def _capsule_frame(a: np.ndarray, b: np.ndarray):
    """Stable (axis, u, v) frame for texture coordinates."""
    ba = b - a
    length = np.linalg.norm(ba)
    axis = ba / length if length > 1e-12 else np.array([0.0, 1.0, 0.0])
    ref = np.array([0.0, 0.0, 1.0])
    if abs(axis @ ref) > 0.9:
        ref = np.array([1.0, 0.0, 0.0])
    u = ref - (ref @ axis) * axis
    u = u / np.linalg.norm(u)
    v = np.cross(axis, u)
    return axis, u, v


def _albedo(h: Humanoid, part: int, points_w: np.ndarray) -> np.ndarray:
    """Two-color checker in the capsule frame, evaluated at world points."""
    a, b = h.capsule_a[part], h.capsule_b[part]
    axis, u, v = _capsule_frame(a, b)
    rel = points_w - a
    t = rel @ axis
    psi = np.arctan2(rel @ v, rel @ u)
    checker = (np.floor(t / _CHECKER_PERIOD)
               + np.floor((psi + np.pi) / _CHECKER_SECTOR)) % 2
    return np.where(checker[..., None] > 0.5,
                    h.palette_a[part], h.palette_b[part])


def render_synthetic(h: Humanoid, k: Intrinsics,
                     camera_pose: RigidTransform) -> tuple[Frame, KeypointSet]:
    """Ray-trace the humanoid into the camera; returns the frame and exact
    ground-truth keypoints (validity does not depend on occlusion)."""
    W, H = k.width, k.height
    xs, ys = np.meshgrid(np.arange(W, dtype=np.float64),
                         np.arange(H, dtype=np.float64))
    d = np.stack([(xs - k.ox) / k.fx, (ys - k.oy) / k.fy, np.ones_like(xs)], axis=-1)

    cam_a = camera_pose.apply(h.capsule_a)
    cam_b = camera_pose.apply(h.capsule_b)

    depth = np.full((H, W), np.inf)
    part_id = np.full((H, W), -1, dtype=np.int32)
    for p in range(len(cam_a)):
        t = _ray_capsule(d, cam_a[p], cam_b[p], float(h.capsule_r[p]))
        closer = np.isfinite(t) & (t < depth)
        depth[closer] = t[closer]
        part_id[closer] = p

    mask = part_id >= 0
    depth = np.where(mask, depth, 0.0)

    color = np.zeros((H, W, 3), dtype=np.float32)
    if np.any(mask):
        pts_cam = depth[..., None] * d
        inv = camera_pose.inverse()
        light = _LIGHT_DIR / np.linalg.norm(_LIGHT_DIR)
        for p in range(len(cam_a)):
            sel = part_id == p
            if not np.any(sel):
                continue
            pw = inv.apply(pts_cam[sel])
            # surface normal of the capsule at the hit point, world frame
            a, b = h.capsule_a[p], h.capsule_b[p]
            ba = b - a
            L2 = float(ba @ ba)
            if L2 > 1e-18:
                s = np.clip(((pw - a) @ ba) / L2, 0.0, 1.0)
                nearest = a + s[:, None] * ba
            else:
                nearest = np.broadcast_to(a, pw.shape)
            n = pw - nearest
            n = n / np.linalg.norm(n, axis=-1, keepdims=True)
            shade = _AMBIENT + _DIFFUSE * np.maximum(0.0, n @ light)
            color[sel] = np.clip(_albedo(h, p, pw) * shade[:, None], 0.0, 1.0)

    joints_cam = camera_pose.apply(h.joints)
    z = joints_cam[:, 2]
    valid = z > 1e-6
    p2 = np.full((len(valid), 2), np.nan)
    p3 = np.full((len(valid), 3), np.nan)
    if np.any(valid):
        p2[valid, 0] = k.fx * joints_cam[valid, 0] / z[valid] + k.ox
        p2[valid, 1] = k.fy * joints_cam[valid, 1] / z[valid] + k.oy
        p3[valid] = joints_cam[valid]
    kp = KeypointSet(p2, p3, valid)

    frame = Frame(color=color, depth=depth, mask=mask,
                  intrinsics=k, pose=camera_pose, keypoints=kp)
    return frame, kp
