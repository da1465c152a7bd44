"""Pinhole camera math, rigid transforms, normal maps, and view confidence.

Coordinate conventions used throughout the package:

    Camera frame (right-handed, standard computer vision):
      - x right, y down, z forward along the optical axis.
      - A depth map stores the z coordinate (not ray length) in meters.
      - Depth 0 means "no measurement" everywhere in the pipeline.

    Image frame:
      - Pixel (x, y) = (column, row), origin at the top-left pixel center.

All types are immutable values; every operation is a pure function.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BehindCameraError, InvalidDepthError, ShapeMismatchError

_ORTHO_TOL = 1e-9


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole intrinsics: focal lengths, principal point, image size (pixels)."""

    fx: float
    fy: float
    ox: float
    oy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError(f"focal lengths must be positive, got ({self.fx}, {self.fy})")
        if not (0 <= self.ox < self.width and 0 <= self.oy < self.height):
            raise ValueError("principal point must lie inside the image")

    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.ox], [0.0, self.fy, self.oy], [0.0, 0.0, 1.0]]
        )

    def to_dict(self) -> dict:
        return {
            "fx": self.fx, "fy": self.fy, "ox": self.ox, "oy": self.oy,
            "width": self.width, "height": self.height,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Intrinsics":
        return cls(
            fx=float(d["fx"]), fy=float(d["fy"]),
            ox=float(d["ox"]), oy=float(d["oy"]),
            width=int(d["width"]), height=int(d["height"]),
        )


@dataclass(frozen=True)
class RigidTransform:
    """Rotation + translation, x -> R @ x + t.  R must be a proper rotation."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if not np.allclose(r.T @ r, np.eye(3), atol=1e-8):
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(r) - 1.0) > 1e-8:
            raise ValueError("rotation must have determinant +1")
        r.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls()

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform one (3,) point or an (N, 3) batch."""
        p = np.asarray(points, dtype=np.float64)
        return p @ self.rotation.T + self.translation

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """self ∘ other: apply `other` first, then `self`."""
        return RigidTransform(
            rotation=self.rotation @ other.rotation,
            translation=self.rotation @ other.translation + self.translation,
        )

    def inverse(self) -> "RigidTransform":
        rt = self.rotation.T
        return RigidTransform(rotation=rt, translation=-rt @ self.translation)

    def matrix(self) -> np.ndarray:
        """4x4 homogeneous form."""
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def to_dict(self) -> dict:
        return {
            "rotation": [float(v) for v in self.rotation.reshape(-1)],
            "translation": [float(v) for v in self.translation],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RigidTransform":
        return cls(
            rotation=np.asarray(d["rotation"], dtype=np.float64).reshape(3, 3),
            translation=np.asarray(d["translation"], dtype=np.float64),
        )


def rotation_x(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rotation_y(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rotation_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


@dataclass(frozen=True)
class PointCloud:
    """M points with one RGB color each; positions in meters, colors in [0, 1]."""

    positions: np.ndarray  # (M, 3) float64
    colors: np.ndarray     # (M, 3) float32

    def __post_init__(self):
        p = np.asarray(self.positions, dtype=np.float64).reshape(-1, 3)
        c = np.asarray(self.colors, dtype=np.float32).reshape(-1, 3)
        if len(p) != len(c):
            raise ShapeMismatchError(
                f"positions ({len(p)}) and colors ({len(c)}) differ in length"
            )
        if not np.all(np.isfinite(p)):
            raise ValueError("positions contain non-finite values")
        p.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "positions", p)
        object.__setattr__(self, "colors", c)

    def __len__(self) -> int:
        return len(self.positions)


def backproject(p, z, k: Intrinsics) -> np.ndarray:
    """Lift pixel(s) with depth(s) into the camera frame.

    p: (2,) pixel or (N, 2) pixels; z: scalar or (N,) depths in meters.
    Returns (3,) or (N, 3).
    """
    p = np.asarray(p, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if np.any(z <= 0):
        raise InvalidDepthError("depth must be positive")
    x = (p[..., 0] - k.ox) * z / k.fx
    y = (p[..., 1] - k.oy) * z / k.fy
    return np.stack([x, y, z], axis=-1)


def project(x, k: Intrinsics):
    """Project camera-frame point(s) to (pixel, depth).

    Inverse of backproject.  The pixel may land outside the image bounds;
    clipping is the caller's concern.
    """
    x = np.asarray(x, dtype=np.float64)
    z = x[..., 2]
    if np.any(z <= 0):
        raise BehindCameraError("cannot project points with z <= 0")
    u = k.fx * x[..., 0] / z + k.ox
    v = k.fy * x[..., 1] / z + k.oy
    return np.stack([u, v], axis=-1), z


def depth_to_cloud(depth: np.ndarray, rgb: np.ndarray, mask: np.ndarray,
                   k: Intrinsics) -> PointCloud:
    """One point per masked pixel with a valid (positive) depth.

    Points are emitted in row-major pixel order; this ordering is what the
    splat z-buffer tie-break keys on.
    """
    depth = np.asarray(depth)
    if depth.shape != mask.shape or rgb.shape[:2] != depth.shape:
        raise ShapeMismatchError(
            f"depth {depth.shape}, rgb {rgb.shape[:2]}, mask {mask.shape} must match"
        )
    keep = (np.asarray(mask) > 0) & (depth > 0)
    ys, xs = np.nonzero(keep)
    if len(ys) == 0:
        return PointCloud(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.float32))
    pix = np.stack([xs, ys], axis=-1).astype(np.float64)
    pts = backproject(pix, depth[ys, xs].astype(np.float64), k)
    return PointCloud(pts, np.asarray(rgb, dtype=np.float32)[ys, xs])


def transform_cloud(c: PointCloud, t: RigidTransform) -> PointCloud:
    return PointCloud(t.apply(c.positions), c.colors)


def normals_from_depth(depth: np.ndarray, k: Intrinsics) -> np.ndarray:
    """Per-pixel unit normals from a depth map, oriented toward the camera.

    Central differences of the back-projected 3D neighbors give two tangent
    vectors whose cross product is the normal.  Pixels whose 4-neighborhood
    (or themselves) lack valid depth get a zero vector.  Valid normals have
    n.z < 0 (facing the camera).
    """
    depth = np.asarray(depth, dtype=np.float64)
    h, w = depth.shape
    ys, xs = np.mgrid[0:h, 0:w]
    valid = depth > 0
    z = np.where(valid, depth, np.nan)
    px = (xs - k.ox) * z / k.fx
    py = (ys - k.oy) * z / k.fy
    pts = np.stack([px, py, z], axis=-1)

    normals = np.zeros((h, w, 3), dtype=np.float32)
    if h < 3 or w < 3:
        return normals

    tx = pts[1:-1, 2:] - pts[1:-1, :-2]
    ty = pts[2:, 1:-1] - pts[:-2, 1:-1]
    n = np.cross(tx, ty)
    norm = np.linalg.norm(n, axis=-1, keepdims=True)
    ok = (
        valid[1:-1, 1:-1]
        & valid[1:-1, 2:] & valid[1:-1, :-2]
        & valid[2:, 1:-1] & valid[:-2, 1:-1]
        & (norm[..., 0] > 1e-20)
    )
    with np.errstate(invalid="ignore", divide="ignore"):
        n = n / norm
    # orient toward the camera: the surface is seen from -z side
    flip = n[..., 2] > 0
    n[flip] = -n[flip]
    n[~ok] = 0.0
    normals[1:-1, 1:-1] = n.astype(np.float32)
    return normals


def view_confidence(t: RigidTransform) -> float:
    """Cosine between the input and novel view directions.

    `t` is the pose of the novel camera relative to the input camera (the
    input camera sits at the origin).  Returns the z component of the
    normalized third rotation column: +1 same view, -1 opposite.
    """
    rz = t.rotation[:, 2]
    return float(rz[2] / np.linalg.norm(rz))
