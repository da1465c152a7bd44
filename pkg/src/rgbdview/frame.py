"""The in-memory RGBD frame: the unit the pipeline ingests and emits."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatchError
from .geometry import Intrinsics, RigidTransform
from .pose import KeypointSet


@dataclass(frozen=True)
class Frame:
    """Color + depth + foreground mask + camera, optionally with keypoints.

    color: (H, W, 3) float32 in [0, 1]
    depth: (H, W) float64 meters, 0 = no measurement
    mask:  (H, W) bool foreground
    pose:  world -> camera transform
    """

    color: np.ndarray
    depth: np.ndarray
    mask: np.ndarray
    intrinsics: Intrinsics
    pose: RigidTransform
    keypoints: KeypointSet | None = None

    def __post_init__(self):
        c = np.asarray(self.color, dtype=np.float32)
        d = np.asarray(self.depth, dtype=np.float64)
        m = np.asarray(self.mask, dtype=bool)
        h, w = self.intrinsics.height, self.intrinsics.width
        if c.shape != (h, w, 3) or d.shape != (h, w) or m.shape != (h, w):
            raise ShapeMismatchError(
                f"frame arrays must match intrinsics size {h}x{w}: "
                f"color {c.shape}, depth {d.shape}, mask {m.shape}"
            )
        for a in (c, d, m):
            a.setflags(write=False)
        object.__setattr__(self, "color", c)
        object.__setattr__(self, "depth", d)
        object.__setattr__(self, "mask", m)

    @property
    def height(self) -> int:
        return self.intrinsics.height

    @property
    def width(self) -> int:
        return self.intrinsics.width
