"""Keypoint data model and pose utilities.

Keypoints follow the usual 17-point body scheme (nose, eyes, ears,
shoulders, elbows, wrists, hips, knees, ankles), stored as fixed-order
arrays.  2D positions are pixels; 3D positions are camera-frame meters
and may be absent per point (NaN rows).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateFrameError
from .geometry import Intrinsics, backproject

KEYPOINT_NAMES = (
    "nose",
    "left_eye", "right_eye",
    "left_ear", "right_ear",
    "left_shoulder", "right_shoulder",
    "left_elbow", "right_elbow",
    "left_wrist", "right_wrist",
    "left_hip", "right_hip",
    "left_knee", "right_knee",
    "left_ankle", "right_ankle",
)
KEYPOINT_INDEX = {name: i for i, name in enumerate(KEYPOINT_NAMES)}
NUM_KEYPOINTS = len(KEYPOINT_NAMES)

# The 10 body-part groups, ordered; composite ties resolve to the lower index.
PART_GROUPS = (
    ("head", ("nose", "left_eye", "right_eye", "left_ear", "right_ear")),
    ("body", ("left_shoulder", "right_shoulder", "left_hip", "right_hip")),
    ("left_upper_arm", ("left_shoulder", "left_elbow")),
    ("right_upper_arm", ("right_shoulder", "right_elbow")),
    ("left_lower_arm", ("left_elbow", "left_wrist")),
    ("right_lower_arm", ("right_elbow", "right_wrist")),
    ("left_upper_leg", ("left_hip", "left_knee")),
    ("right_upper_leg", ("right_hip", "right_knee")),
    ("left_lower_leg", ("left_knee", "left_ankle")),
    ("right_lower_leg", ("right_knee", "right_ankle")),
)
PART_NAMES = tuple(name for name, _ in PART_GROUPS)

# Limb groups scored by the calibration selector (two points each).
SIMILARITY_LIMBS = (
    ("left_arm", ("left_elbow", "left_wrist")),
    ("right_arm", ("right_elbow", "right_wrist")),
    ("left_leg", ("left_knee", "left_ankle")),
    ("right_leg", ("right_knee", "right_ankle")),
)

# keypoints that must survive extrapolation, else the frame is discarded
_REQUIRED = ("nose", "left_shoulder", "right_shoulder", "left_hip", "right_hip")

# (parent, child) bones for limb extrapolation, parents first so chains fill
_LIMB_BONES = (
    ("left_shoulder", "left_elbow"), ("right_shoulder", "right_elbow"),
    ("left_elbow", "left_wrist"), ("right_elbow", "right_wrist"),
    ("left_hip", "left_knee"), ("right_hip", "right_knee"),
    ("left_knee", "left_ankle"), ("right_knee", "right_ankle"),
)

_FACE_PAIRS = (("left_eye", "right_eye"), ("left_ear", "right_ear"))


def _mirror_name(name: str) -> str:
    if name.startswith("left_"):
        return "right_" + name[5:]
    if name.startswith("right_"):
        return "left_" + name[6:]
    return name


@dataclass(frozen=True)
class KeypointSet:
    """17 keypoints with 2D pixels, optional 3D, and validity flags."""

    position2d: np.ndarray  # (17, 2) float64, pixels
    position3d: np.ndarray  # (17, 3) float64, NaN rows where absent
    valid: np.ndarray       # (17,) bool

    def __post_init__(self):
        p2 = np.asarray(self.position2d, dtype=np.float64).reshape(NUM_KEYPOINTS, 2)
        p3 = np.asarray(self.position3d, dtype=np.float64).reshape(NUM_KEYPOINTS, 3)
        v = np.asarray(self.valid, dtype=bool).reshape(NUM_KEYPOINTS)
        if np.any(v & ~np.all(np.isfinite(p2), axis=1)):
            raise ValueError("valid keypoints must have finite 2D positions")
        if np.any(_finite_rows(p3) & ~v):
            raise ValueError("keypoints with 3D positions must be valid")
        for a in (p2, p3, v):
            a.setflags(write=False)
        object.__setattr__(self, "position2d", p2)
        object.__setattr__(self, "position3d", p3)
        object.__setattr__(self, "valid", v)

    @classmethod
    def from_arrays(cls, position2d, valid=None, position3d=None) -> "KeypointSet":
        if valid is None:
            valid = np.ones(NUM_KEYPOINTS, dtype=bool)
        if position3d is None:
            position3d = np.full((NUM_KEYPOINTS, 3), np.nan)
        return cls(position2d, position3d, valid)

    @property
    def has_3d(self) -> np.ndarray:
        return _finite_rows(self.position3d)

    def point2d(self, name: str) -> np.ndarray:
        return self.position2d[KEYPOINT_INDEX[name]]

    def point3d(self, name: str) -> np.ndarray:
        return self.position3d[KEYPOINT_INDEX[name]]

    def is_valid(self, name: str) -> bool:
        return bool(self.valid[KEYPOINT_INDEX[name]])

    def replace(self, position2d=None, position3d=None, valid=None) -> "KeypointSet":
        return KeypointSet(
            self.position2d if position2d is None else position2d,
            self.position3d if position3d is None else position3d,
            self.valid if valid is None else valid,
        )

    def to_records(self) -> list:
        """JSON-ready list of {name, x, y, z?, valid}; z is camera depth."""
        recs = []
        h3 = self.has_3d
        for i, name in enumerate(KEYPOINT_NAMES):
            rec = {
                "name": name,
                "x": float(self.position2d[i, 0]),
                "y": float(self.position2d[i, 1]),
                "valid": bool(self.valid[i]),
            }
            if h3[i]:
                rec["z"] = float(self.position3d[i, 2])
            recs.append(rec)
        return recs

    @classmethod
    def from_records(cls, records, k: Intrinsics | None = None) -> "KeypointSet":
        """Parse the record list; with intrinsics, z entries lift to 3D."""
        p2 = np.full((NUM_KEYPOINTS, 2), np.nan)
        p3 = np.full((NUM_KEYPOINTS, 3), np.nan)
        v = np.zeros(NUM_KEYPOINTS, dtype=bool)
        for rec in records:
            i = KEYPOINT_INDEX[rec["name"]]
            p2[i] = (float(rec["x"]), float(rec["y"]))
            v[i] = bool(rec["valid"])
            z = rec.get("z")
            if v[i] and z is not None and k is not None and z > 0:
                p3[i] = backproject(p2[i], float(z), k)
        return cls(p2, p3, v)


def _finite_rows(p3: np.ndarray) -> np.ndarray:
    return np.all(np.isfinite(np.asarray(p3)), axis=-1)


def lift_keypoints(kp: KeypointSet, depth: np.ndarray, k: Intrinsics) -> KeypointSet:
    """Lift valid 2D keypoints to 3D using the depth map.

    Depth is taken as the median of the valid (positive) values in the 3x3
    neighborhood around the keypoint pixel; keypoints whose neighborhood is
    entirely invalid stay valid but keep no 3D position.  Keypoints that
    already carry 3D are left untouched.
    """
    depth = np.asarray(depth)
    h, w = depth.shape
    p3 = np.array(kp.position3d)
    already = kp.has_3d
    for i in range(NUM_KEYPOINTS):
        if not kp.valid[i] or already[i]:
            continue
        cx, cy = np.round(kp.position2d[i]).astype(int)
        x0, x1 = max(cx - 1, 0), min(cx + 2, w)
        y0, y1 = max(cy - 1, 0), min(cy + 2, h)
        if x0 >= x1 or y0 >= y1:
            continue
        patch = depth[y0:y1, x0:x1]
        vals = patch[patch > 0]
        if len(vals) == 0:
            continue
        p3[i] = backproject(kp.position2d[i], float(np.median(vals)), k)
    return kp.replace(position3d=p3)


def default_heatmap_sigma(width: int) -> float:
    """6 px at the 1280-wide reference resolution, scaled with width."""
    return 6.0 * width / 1280.0


def encode_heatmaps(kp: KeypointSet, width: int, height: int,
                    sigma: float) -> np.ndarray:
    """One Gaussian channel per keypoint, shape (17, H, W), peak value 1.

    Invalid keypoints yield an all-zero channel.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    xs = np.arange(width, dtype=np.float64)
    ys = np.arange(height, dtype=np.float64)
    out = np.zeros((NUM_KEYPOINTS, height, width), dtype=np.float32)
    inv = 1.0 / (2.0 * sigma * sigma)
    for i in range(NUM_KEYPOINTS):
        if not kp.valid[i]:
            continue
        px, py = kp.position2d[i]
        gx = np.exp(-((xs - px) ** 2) * inv)
        gy = np.exp(-((ys - py) ** 2) * inv)
        out[i] = (gy[:, None] * gx[None, :]).astype(np.float32)
    return out


def _reflect_across_line(p: np.ndarray, a: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Reflect point p across the line through a with unit direction u."""
    d = p - a
    return a + 2.0 * np.dot(d, u) * u - d


def extrapolate_missing(kp: KeypointSet) -> KeypointSet | None:
    """Fill missing keypoints from their bilateral twins, or reject.

    A missing limb endpoint is rebuilt from its parent joint plus the
    mirrored bone vector of the other side (x component flipped).  A
    missing eye/ear is rebuilt by reflecting its twin across the facial
    symmetry axis (the line through the nose and the midpoint of the
    other complete facial pair).  Returns None when nose, a shoulder or
    a hip is still missing afterwards: the frame is discarded.
    """
    p2 = np.array(kp.position2d)
    valid = np.array(kp.valid)

    def idx(name):
        return KEYPOINT_INDEX[name]

    for parent, child in _LIMB_BONES:
        ci = idx(child)
        if valid[ci]:
            continue
        pi = idx(parent)
        mpi, mci = idx(_mirror_name(parent)), idx(_mirror_name(child))
        if valid[pi] and valid[mpi] and valid[mci]:
            bone = p2[mci] - p2[mpi]
            p2[ci] = p2[pi] + np.array([-bone[0], bone[1]])
            valid[ci] = True

    nose_i = idx("nose")
    if valid[nose_i]:
        for pair, other in ((_FACE_PAIRS[0], _FACE_PAIRS[1]),
                            (_FACE_PAIRS[1], _FACE_PAIRS[0])):
            li, ri = idx(pair[0]), idx(pair[1])
            if valid[li] == valid[ri]:
                continue  # both present or both missing
            oli, ori = idx(other[0]), idx(other[1])
            if not (valid[oli] and valid[ori]):
                continue
            axis = p2[nose_i] - 0.5 * (p2[oli] + p2[ori])
            norm = np.linalg.norm(axis)
            if norm < 1e-9:
                continue
            u = axis / norm
            src, dst = (ri, li) if not valid[li] else (li, ri)
            p2[dst] = _reflect_across_line(p2[src], p2[nose_i], u)
            valid[dst] = True

    if not all(valid[idx(n)] for n in _REQUIRED):
        return None
    return kp.replace(position2d=p2, valid=valid)


def _direction_frame(right_raw: np.ndarray, up_raw: np.ndarray,
                     what: str) -> np.ndarray:
    rn = np.linalg.norm(right_raw)
    un = np.linalg.norm(up_raw)
    if rn < 1e-6 or un < 1e-6:
        raise DegenerateFrameError(f"{what}: coincident keypoints")
    fwd = np.cross(right_raw / rn, up_raw / un)
    fn = np.linalg.norm(fwd)
    if fn < 1e-6:
        raise DegenerateFrameError(f"{what}: collinear keypoints")
    return fwd / fn


def head_direction(kp: KeypointSet) -> np.ndarray:
    """Forward-looking unit vector of the head from nose + eye 3D points."""
    h3 = kp.has_3d
    for name in ("nose", "left_eye", "right_eye"):
        if not h3[KEYPOINT_INDEX[name]]:
            raise DegenerateFrameError(f"head direction needs 3D {name}")
    le, re = kp.point3d("left_eye"), kp.point3d("right_eye")
    nose = kp.point3d("nose")
    return _direction_frame(re - le, nose - 0.5 * (le + re), "head")


def torso_direction(kp: KeypointSet) -> np.ndarray:
    """Forward unit vector of the torso from shoulders + left hip 3D points."""
    h3 = kp.has_3d
    for name in ("left_shoulder", "right_shoulder", "left_hip"):
        if not h3[KEYPOINT_INDEX[name]]:
            raise DegenerateFrameError(f"torso direction needs 3D {name}")
    ls, rs = kp.point3d("left_shoulder"), kp.point3d("right_shoulder")
    lh = kp.point3d("left_hip")
    return _direction_frame(rs - ls, 0.5 * (ls + rs) - lh, "torso")
