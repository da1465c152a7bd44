"""Image losses and quality metrics.

l1 and PSNR are reported on the 0-255 scale (images are stored as floats
in [0, 1] in memory).  MS-SSIM follows the standard 5-scale construction:
11x11 Gaussian window (sigma 1.5), valid padding, 2x2 average-pool
downsampling with edge padding to even sizes, negative contrast terms
clamped to zero before the weighted geometric mean.

The feature term of the blender reconstruction loss goes through a
pluggable extractor; the default is a 3-level Gaussian pyramid.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d

from .errors import ShapeMismatchError

MSSSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)
_FILTER_SIZE = 11
_FILTER_SIGMA = 1.5


def _check_same_shape(a: np.ndarray, b: np.ndarray):
    if a.shape != b.shape:
        raise ShapeMismatchError(f"shapes differ: {a.shape} vs {b.shape}")


def l1_image(a: np.ndarray, b: np.ndarray, mask: np.ndarray | None = None) -> float:
    """Mean absolute difference on the 0-255 scale, optionally masked."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_same_shape(a, b)
    diff = np.abs(a - b) * 255.0
    if mask is None:
        return float(diff.mean())
    m = np.asarray(mask, dtype=bool)
    if m.shape != a.shape[: m.ndim]:
        raise ShapeMismatchError(f"mask {m.shape} does not match image {a.shape}")
    sel = diff[m]
    return float(sel.mean()) if sel.size else 0.0


def psnr(a: np.ndarray, b: np.ndarray, mask: np.ndarray | None = None) -> float:
    """10*log10(255^2 / MSE); +inf for identical inputs."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_same_shape(a, b)
    sq = ((a - b) * 255.0) ** 2
    if mask is not None:
        m = np.asarray(mask, dtype=bool)
        sq = sq[m]
        if sq.size == 0:
            return float("inf")
    mse = float(sq.mean())
    if mse == 0.0:
        return float("inf")
    return float(10.0 * np.log10(255.0 ** 2 / mse))


def _gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    x = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-0.5 * (x / sigma) ** 2)
    return g / g.sum()


def _filter_valid(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Separable 2D filtering, valid region only.  img is (H, W, C)."""
    r = len(kernel) // 2
    out = correlate1d(img, kernel, axis=0)
    out = correlate1d(out, kernel, axis=1)
    return out[r:-r, r:-r]


def _ssim_and_cs(x: np.ndarray, y: np.ndarray, max_val: float,
                 k1: float = 0.01, k2: float = 0.03):
    """Per-channel spatial means of the SSIM and contrast-structure maps."""
    c1 = (k1 * max_val) ** 2
    c2 = (k2 * max_val) ** 2
    kernel = _gaussian_kernel(_FILTER_SIZE, _FILTER_SIGMA)

    mx = _filter_valid(x, kernel)
    my = _filter_valid(y, kernel)
    num0 = 2.0 * mx * my
    den0 = mx * mx + my * my
    luminance = (num0 + c1) / (den0 + c1)

    num1 = 2.0 * _filter_valid(x * y, kernel)
    den1 = _filter_valid(x * x, kernel) + _filter_valid(y * y, kernel)
    cs = (num1 - num0 + c2) / (den1 - den0 + c2)

    ssim = (luminance * cs).mean(axis=(0, 1))
    return ssim, cs.mean(axis=(0, 1))


def _downsample2(img: np.ndarray) -> np.ndarray:
    """2x2 average pooling; odd sizes are edge-padded to even first."""
    h, w = img.shape[:2]
    if h % 2:
        img = np.concatenate([img, img[-1:]], axis=0)
    if w % 2:
        img = np.concatenate([img, img[:, -1:]], axis=1)
    return 0.25 * (img[0::2, 0::2] + img[1::2, 0::2]
                   + img[0::2, 1::2] + img[1::2, 1::2])


def ms_ssim(a: np.ndarray, b: np.ndarray, max_val: float = 1.0,
            weights=MSSSIM_WEIGHTS) -> float:
    """Multi-scale SSIM in [0, 1] over len(weights) dyadic scales."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_same_shape(a, b)
    if a.ndim == 2:
        a, b = a[..., None], b[..., None]
    levels = len(weights)
    min_dim = (_FILTER_SIZE - 1) * 2 ** (levels - 1) + 1
    if min(a.shape[0], a.shape[1]) < min_dim:
        raise ValueError(
            f"images must be at least {min_dim} px on each side for "
            f"{levels} scales, got {a.shape[0]}x{a.shape[1]}"
        )

    per_channel = np.ones(a.shape[2], dtype=np.float64)
    x, y = a, b
    for k, wgt in enumerate(weights):
        ssim_k, cs_k = _ssim_and_cs(x, y, max_val)
        term = ssim_k if k == levels - 1 else cs_k
        per_channel *= np.maximum(term, 0.0) ** wgt
        if k < levels - 1:
            x, y = _downsample2(x), _downsample2(y)
    return float(per_channel.mean())


def mask_losses(background: np.ndarray, part_silhouette: np.ndarray,
                silhouette: np.ndarray, gt_mask: np.ndarray) -> dict:
    """The three mean-l1 mask losses against a ground-truth foreground.

    L_bg compares the predicted background mask to 1 - gt; L_fg the
    max-pooled warped part silhouette to gt; L_fgref the refined
    silhouette to gt.  All on the unit scale.
    """
    gt = np.asarray(gt_mask, dtype=np.float64)
    for name, arr in (("background", background),
                      ("part_silhouette", part_silhouette),
                      ("silhouette", silhouette)):
        if np.asarray(arr).shape != gt.shape:
            raise ShapeMismatchError(f"{name} shape does not match gt mask")
    return {
        "L_bg": float(np.abs(np.asarray(background, dtype=np.float64) - (1.0 - gt)).mean()),
        "L_fg": float(np.abs(np.asarray(part_silhouette, dtype=np.float64) - gt).mean()),
        "L_fgref": float(np.abs(np.asarray(silhouette, dtype=np.float64) - gt).mean()),
    }


def gaussian_pyramid_features(img: np.ndarray, levels: int = 3) -> np.ndarray:
    """Default feature extractor: flattened 3-level Gaussian pyramid."""
    img = np.asarray(img, dtype=np.float64)
    kernel = _gaussian_kernel(5, 1.0)
    feats = [img.reshape(-1)]
    cur = img
    for _ in range(levels - 1):
        blurred = correlate1d(correlate1d(cur, kernel, axis=0, mode="nearest"),
                              kernel, axis=1, mode="nearest")
        cur = blurred[::2, ::2]
        feats.append(cur.reshape(-1))
    return np.concatenate(feats)


def blender_rec_loss(pred: np.ndarray, gt: np.ndarray, features=None,
                     w_l1: float = 0.01) -> float:
    """RMS feature difference plus a small photometric l1 term.

    `features` maps an image to a 1D feature vector; defaults to the
    Gaussian-pyramid extractor.
    """
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    _check_same_shape(pred, gt)
    if features is None:
        features = gaussian_pyramid_features
    fd = features(pred) - features(gt)
    feature_term = float(np.sqrt(np.mean(fd ** 2)))
    return feature_term + w_l1 * float(np.abs(pred - gt).mean())


@dataclass(frozen=True)
class LossConfig:
    """Weights combining the warper/blender losses.

    Defaults are 1.0 for every mask/reconstruction term (chosen so the
    terms share a dynamic range) and 0.01 for the photometric term inside
    the blender reconstruction loss.
    """

    w_rec: float = 1.0
    w_fg: float = 1.0
    w_bg: float = 1.0
    w_fgref: float = 1.0
    w_l1: float = 0.01

    def to_dict(self) -> dict:
        return {"w_rec": self.w_rec, "w_fg": self.w_fg, "w_bg": self.w_bg,
                "w_fgref": self.w_fgref, "w_l1": self.w_l1}

    @classmethod
    def from_dict(cls, d: dict) -> "LossConfig":
        return cls(**{k: float(v) for k, v in d.items()})

    @classmethod
    def load(cls, path) -> "LossConfig":
        with open(path) as f:
            return cls.from_dict(json.load(f))


def evaluate_pair(pred: np.ndarray, gt: np.ndarray,
                  gt_mask: np.ndarray | None = None) -> dict:
    """Full-frame and foreground-masked metrics for one image pair.

    MS-SSIM is windowed, so the masked variant is not well defined; it is
    reported full-frame only.
    """
    rep = {
        "l1": l1_image(pred, gt),
        "psnr": psnr(pred, gt),
        "ms_ssim": ms_ssim(pred, gt),
    }
    if gt_mask is not None:
        m = np.asarray(gt_mask, dtype=bool)
        m3 = np.repeat(m[..., None], 3, axis=-1) if pred.ndim == 3 else m
        rep["l1_fg"] = l1_image(pred, gt, m3)
        rep["psnr_fg"] = psnr(pred, gt, m3)
    return rep
