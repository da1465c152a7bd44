"""Software point splatting with a hard z-buffer.

Each point is projected into the target camera and stamped over a
(2r+1) x (2r+1) pixel footprint.  A pixel keeps the point with the
strictly smallest depth; equal depths go to the lower point index, which
makes the output bit-identical regardless of evaluation order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Intrinsics, PointCloud


@dataclass(frozen=True)
class SplatOutput:
    """Rendered color, per-pixel depth (0 = uncovered) and coverage mask."""

    color: np.ndarray     # (H, W, 3) float32 in [0, 1]
    depth: np.ndarray     # (H, W) float64 meters, 0 where uncovered
    coverage: np.ndarray  # (H, W) bool


def splat_render(c: PointCloud, k: Intrinsics, kernel_radius: int = 1) -> SplatOutput:
    """Render a colored point cloud into the camera `k`.

    kernel_radius=1 gives the 3x3 footprint; 0 stamps single pixels.
    Points with z <= 0 are skipped; footprint pixels outside the image
    are clipped.
    """
    if kernel_radius < 0:
        raise ValueError("kernel_radius must be >= 0")
    h, w = k.height, k.width
    color = np.zeros((h, w, 3), dtype=np.float32)
    depth = np.zeros((h, w), dtype=np.float64)
    coverage = np.zeros((h, w), dtype=bool)
    if len(c) == 0:
        return SplatOutput(color, depth, coverage)

    pos = c.positions
    z = pos[:, 2]
    front = z > 0
    idx = np.nonzero(front)[0]
    if len(idx) == 0:
        return SplatOutput(color, depth, coverage)
    zf = z[idx]
    u = k.fx * pos[idx, 0] / zf + k.ox
    v = k.fy * pos[idx, 1] / zf + k.oy
    cu = np.round(u).astype(np.int64)
    cv = np.round(v).astype(np.int64)

    r = kernel_radius
    # keep points whose footprint can touch the image at all
    near = (cu >= -r) & (cu <= w - 1 + r) & (cv >= -r) & (cv <= h - 1 + r)
    idx, cu, cv, zf = idx[near], cu[near], cv[near], zf[near]
    if len(idx) == 0:
        return SplatOutput(color, depth, coverage)

    # expand footprints into flat (pixel, depth, point-index) records
    side = 2 * r + 1
    offs = np.arange(-r, r + 1)
    px = (cu[:, None] + offs[None, :])[:, :, None]          # (N, side, 1)
    py = (cv[:, None] + offs[None, :])[:, None, :]          # (N, 1, side)
    px = np.broadcast_to(px, (len(idx), side, side)).reshape(-1)
    py = np.broadcast_to(py, (len(idx), side, side)).reshape(-1)
    rec_idx = np.repeat(idx, side * side)
    rec_z = np.repeat(zf, side * side)

    inside = (px >= 0) & (px < w) & (py >= 0) & (py < h)
    px, py, rec_idx, rec_z = px[inside], py[inside], rec_idx[inside], rec_z[inside]
    if len(px) == 0:
        return SplatOutput(color, depth, coverage)

    flat = py * w + px
    # per pixel, the winner is lexicographically smallest (depth, index)
    order = np.lexsort((rec_idx, rec_z, flat))
    flat_sorted = flat[order]
    first = np.ones(len(flat_sorted), dtype=bool)
    first[1:] = flat_sorted[1:] != flat_sorted[:-1]
    win = order[first]

    pix = flat[win]
    color.reshape(-1, 3)[pix] = c.colors[rec_idx[win]]
    depth.reshape(-1)[pix] = rec_z[win]
    coverage.reshape(-1)[pix] = True
    return SplatOutput(color, depth, coverage)
