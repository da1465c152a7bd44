"""Deterministic fusion of the re-rendered cloud and the warped calibration.

Per pixel, the cloud weight is

    w = coverage * max(0, c) * max(0, -n.z)^gamma_g

so front-facing views with well-observed geometry keep the re-rendered
detail, while back-facing views (c < 0) and grazing-angle surfaces fall
back to the warped calibration texture.  Output is convex per pixel and
restricted to the union silhouette; everything else is transparent.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatchError
from .splat import SplatOutput
from .warper import WarpResult


@dataclass(frozen=True)
class BlendConfig:
    """gamma_g: grazing-angle exponent; tau: warp-silhouette threshold."""

    gamma_g: float = 1.0
    tau: float = 0.5

    def to_dict(self) -> dict:
        return {"gamma_g": self.gamma_g, "tau": self.tau}

    @classmethod
    def from_dict(cls, d: dict) -> "BlendConfig":
        return cls(gamma_g=float(d.get("gamma_g", 1.0)), tau=float(d.get("tau", 0.5)))

    @classmethod
    def load(cls, path) -> "BlendConfig":
        with open(path) as f:
            return cls.from_dict(json.load(f))

    def save(self, path):
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)


@dataclass(frozen=True)
class BlendInput:
    """Everything the blend rule consumes, all in the target view."""

    cloud: SplatOutput
    warp: WarpResult
    normals: np.ndarray  # (H, W, 3), target-frame unit normals (0 where unknown)
    confidence: float    # view confidence c in [-1, 1]

    def __post_init__(self):
        h, w = self.cloud.depth.shape
        if self.warp.silhouette.shape != (h, w) or self.normals.shape != (h, w, 3):
            raise ShapeMismatchError("blend inputs must share dimensions")
        if not -1.0 - 1e-9 <= self.confidence <= 1.0 + 1e-9:
            raise ValueError("confidence must lie in [-1, 1]")


def blend_weight(b: BlendInput, cfg: BlendConfig) -> np.ndarray:
    """Per-pixel cloud weight in [0, 1]."""
    coverage = b.cloud.coverage.astype(np.float64)
    facing = np.maximum(0.0, -b.normals[..., 2])
    if cfg.gamma_g != 1.0:
        facing = facing ** cfg.gamma_g
    return coverage * max(0.0, b.confidence) * facing


def blend(b: BlendInput, cfg: BlendConfig | None = None,
          refiner=None) -> np.ndarray:
    """Fuse cloud and warp colors; returns (H, W, 3) float32 in [0, 1].

    Pixels outside the union silhouette (cloud coverage or warp silhouette
    >= tau) are transparent (zero).
    """
    if cfg is None:
        cfg = BlendConfig()
    w = blend_weight(b, cfg)[..., None]
    out = w * b.cloud.color.astype(np.float64) + (1.0 - w) * b.warp.color.astype(np.float64)
    union = b.cloud.coverage | (b.warp.silhouette >= cfg.tau)
    out = np.where(union[..., None], out, 0.0).astype(np.float32)
    if refiner is not None:
        refined = refiner(out, b)
        _check_refined(out, refined)
        return refined
    return out


def default_blender_refiner(raw: np.ndarray, b: BlendInput) -> np.ndarray:
    """Identity stand-in for the learned blend refinement."""
    return raw


def _check_refined(raw: np.ndarray, refined: np.ndarray):
    if refined.shape != raw.shape:
        raise ValueError("blender refiner must preserve image dimensions")
    if refined.size and (refined.min() < -1e-6 or refined.max() > 1 + 1e-6):
        raise ValueError("blender refiner must keep values in [0, 1]")


def register_blender_refiner(hook, probe_height: int = 8, probe_width: int = 8):
    """Validate a blender refiner hook on a probe input; raises on a
    dimension or range violation.  Returns the hook unchanged."""
    from .warper import NUM_PARTS, WarpResult as _WR

    zero = np.zeros((probe_height, probe_width), dtype=np.float32)
    probe_warp = _WR(
        color=np.zeros((probe_height, probe_width, 3), dtype=np.float32),
        silhouette=zero, part_silhouette=zero,
        per_part_textures=np.zeros((NUM_PARTS, probe_height, probe_width, 3), np.float32),
        per_part_masks=np.zeros((NUM_PARTS, probe_height, probe_width), np.float32),
    )
    probe_cloud = SplatOutput(
        color=np.zeros((probe_height, probe_width, 3), dtype=np.float32),
        depth=np.zeros((probe_height, probe_width)),
        coverage=np.zeros((probe_height, probe_width), dtype=bool),
    )
    probe = BlendInput(
        cloud=probe_cloud, warp=probe_warp,
        normals=np.zeros((probe_height, probe_width, 3)), confidence=0.0,
    )
    raw = np.zeros((probe_height, probe_width, 3), dtype=np.float32)
    _check_refined(raw, hook(raw, probe))
    return hook
