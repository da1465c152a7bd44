"""4-DOF 2D similarity transforms: closed-form fitting and application.

The fit solves argmin_T sum_i ||dst_i - T src_i||^2 over scale, rotation
and translation.  Writing 2D points as complex numbers turns this into a
linear least-squares problem dst ~ a*src + b with a = s*exp(i*theta), so
the global minimizer is available in closed form (the classic Procrustes
solution: align centroids, then the polar part of the cross-covariance).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DegenerateConfigurationError


@dataclass(frozen=True)
class Similarity2D:
    """scale * R(angle) @ p + translation."""

    scale: float
    angle: float
    translation: np.ndarray  # (2,)

    def __post_init__(self):
        if self.scale <= 0:
            raise ValueError("scale must be positive")
        t = np.asarray(self.translation, dtype=np.float64).reshape(2)
        t.setflags(write=False)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "Similarity2D":
        return cls(1.0, 0.0, np.zeros(2))

    def matrix(self) -> np.ndarray:
        c = self.scale * np.cos(self.angle)
        s = self.scale * np.sin(self.angle)
        return np.array([
            [c, -s, self.translation[0]],
            [s, c, self.translation[1]],
            [0.0, 0.0, 1.0],
        ])

    def inverse(self) -> "Similarity2D":
        inv_scale = 1.0 / self.scale
        c, s = np.cos(-self.angle), np.sin(-self.angle)
        rot = np.array([[c, -s], [s, c]])
        return Similarity2D(inv_scale, -self.angle, -inv_scale * rot @ self.translation)


def fit_similarity(src: np.ndarray, dst: np.ndarray) -> tuple[Similarity2D, float]:
    """Least-squares similarity transform from src onto dst point sets.

    Needs >= 2 point pairs; src points must not all coincide.  Returns the
    transform and the root-mean-square residual (normalized by point count
    so 2-point and 4-point fits are comparable).
    """
    src = np.asarray(src, dtype=np.float64).reshape(-1, 2)
    dst = np.asarray(dst, dtype=np.float64).reshape(-1, 2)
    if len(src) != len(dst):
        raise ValueError("src and dst must have equal length")
    if len(src) < 2:
        raise ValueError("at least 2 point pairs are required")

    zs = src[:, 0] + 1j * src[:, 1]
    zd = dst[:, 0] + 1j * dst[:, 1]
    ms, md = zs.mean(), zd.mean()
    zs0, zd0 = zs - ms, zd - md

    denom = np.sum(zs0 * np.conj(zs0)).real
    if denom < 1e-18:
        raise DegenerateConfigurationError("source points all coincide")
    a = np.sum(zd0 * np.conj(zs0)) / denom
    scale = abs(a)
    if scale < 1e-12:
        raise DegenerateConfigurationError(
            "optimal scale collapses to zero; configuration is degenerate"
        )
    angle = np.angle(a)
    b = md - a * ms
    t = Similarity2D(scale, float(angle), np.array([b.real, b.imag]))

    res = zd - (a * zs + b)
    residual = float(np.sqrt(np.mean(np.abs(res) ** 2)))
    return t, residual


def apply_similarity_points(t: Similarity2D, points: np.ndarray) -> np.ndarray:
    """Map (N, 2) or (2,) points through the transform."""
    p = np.asarray(points, dtype=np.float64)
    m = t.matrix()
    return p @ m[:2, :2].T + m[:2, 2]


def apply_similarity_image(t: Similarity2D, image: np.ndarray) -> np.ndarray:
    """Warp an image so content moves with the forward point map.

    Inverse warp with bilinear sampling: out(q) = img(T^-1 q).  Pixels that
    sample outside the source are zero.  Works for (H, W) and (H, W, C).
    """
    inv = t.inverse().matrix()
    # ndimage uses (row, col) coordinates: swap xy axes of the matrix
    mat = np.array([[inv[1, 1], inv[1, 0]], [inv[0, 1], inv[0, 0]]])
    off = np.array([inv[1, 2], inv[0, 2]])
    img = np.asarray(image)
    if img.ndim == 2:
        return ndimage.affine_transform(
            img, mat, offset=off, order=1, mode="constant", cval=0.0,
            output=np.float32 if img.dtype != np.float64 else np.float64,
        )
    out = np.empty_like(img, dtype=np.float32 if img.dtype != np.float64 else np.float64)
    for ch in range(img.shape[2]):
        out[..., ch] = ndimage.affine_transform(
            img[..., ch], mat, offset=off, order=1, mode="constant", cval=0.0,
            output=out.dtype,
        )
    return out


def apply_similarity(t: Similarity2D, target):
    """Dispatch on shape: (N, 2)/(2,) arrays are points, others are images."""
    arr = np.asarray(target)
    if arr.ndim <= 2 and arr.shape[-1] == 2 and (arr.ndim == 1 or arr.shape[1] == 2):
        return apply_similarity_points(t, arr)
    return apply_similarity_image(t, arr)


def default_similarity_sigma(width: int = 1280) -> float:
    """0.05 per pixel of residual at 1280-wide images, scaled with width."""
    return 0.05 * 1280.0 / width


def similarity_score(residual: float, sigma_s: float) -> float:
    """exp(-sigma_s * residual), in (0, 1]."""
    if residual < 0:
        raise ValueError("residual must be non-negative")
    if sigma_s <= 0:
        raise ValueError("sigma_s must be positive")
    return float(np.exp(-sigma_s * residual))
