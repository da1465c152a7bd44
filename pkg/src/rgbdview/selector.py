"""Calibration bank scoring and selection.

Each bank entry is scored against the target pose with three terms:
head-direction dot product, torso-direction dot product, and the sum of
per-limb similarity scores exp(-sigma * fit_residual) over the four
two-point limb groups.  The entry with the highest weighted total wins;
ties go to the lowest index.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateConfigurationError, DegenerateFrameError, EmptyBankError
from .pose import KEYPOINT_INDEX, SIMILARITY_LIMBS, KeypointSet, head_direction, torso_direction
from .simfit import default_similarity_sigma, fit_similarity, similarity_score


@dataclass(frozen=True)
class SelectorWeights:
    """Score weights; the empirical defaults weigh head highest, then torso."""

    w_head: float = 5.0
    w_torso: float = 3.0
    w_sim: float = 1.0
    sigma_s: float = field(default_factory=default_similarity_sigma)

    def __post_init__(self):
        if self.w_head < 0 or self.w_torso < 0 or self.w_sim < 0:
            raise ValueError("weights must be non-negative")
        if self.w_head == 0 and self.w_torso == 0 and self.w_sim == 0:
            raise ValueError("at least one weight must be positive")

    def to_dict(self) -> dict:
        return {"w_head": self.w_head, "w_torso": self.w_torso,
                "w_sim": self.w_sim, "sigma_s": self.sigma_s}

    @classmethod
    def from_dict(cls, d: dict) -> "SelectorWeights":
        return cls(**{k: float(v) for k, v in d.items()})


@dataclass(frozen=True)
class CalibrationEntry:
    """One calibration frame: keypoints plus cached direction vectors.

    `frame` is an opaque reference (a path or an in-memory Frame); scoring
    only touches the keypoints and the cached unit vectors.
    """

    keypoints: KeypointSet
    head_dir: np.ndarray   # (3,) unit vector
    torso_dir: np.ndarray  # (3,) unit vector
    frame: object = None

    @classmethod
    def from_keypoints(cls, keypoints: KeypointSet, frame: object = None) -> "CalibrationEntry":
        return cls(
            keypoints=keypoints,
            head_dir=head_direction(keypoints),
            torso_dir=torso_direction(keypoints),
            frame=frame,
        )


@dataclass(frozen=True)
class ScoreBreakdown:
    s_head: float
    s_torso: float
    s_sim_per_limb: tuple  # 4 floats, order of SIMILARITY_LIMBS
    total: float

    def to_dict(self) -> dict:
        return {
            "s_head": self.s_head,
            "s_torso": self.s_torso,
            "s_sim_per_limb": list(self.s_sim_per_limb),
            "s_sim": float(sum(self.s_sim_per_limb)),
            "total": self.total,
        }


def _limb_points(kp: KeypointSet, names) -> np.ndarray | None:
    idx = [KEYPOINT_INDEX[n] for n in names]
    if not all(kp.valid[i] for i in idx):
        return None
    return kp.position2d[idx]


def score_entry(target: KeypointSet, entry: CalibrationEntry,
                w: SelectorWeights,
                target_head: np.ndarray | None = None,
                target_torso: np.ndarray | None = None) -> ScoreBreakdown:
    """Score one calibration entry against the target pose.

    The target direction vectors can be passed in to avoid recomputing
    them across a bank scan.  Entries whose cached directions are unusable
    score -inf so they are never selected.
    """
    if target_head is None:
        target_head = head_direction(target)
    if target_torso is None:
        target_torso = torso_direction(target)

    if (entry.head_dir is None or entry.torso_dir is None
            or not np.all(np.isfinite(entry.head_dir))
            or not np.all(np.isfinite(entry.torso_dir))):
        return ScoreBreakdown(0.0, 0.0, (0.0,) * 4, float("-inf"))

    s_head = float(np.dot(target_head, entry.head_dir))
    s_torso = float(np.dot(target_torso, entry.torso_dir))

    limb_scores = []
    for _, names in SIMILARITY_LIMBS:
        tp = _limb_points(target, names)
        cp = _limb_points(entry.keypoints, names)
        if tp is None or cp is None:
            limb_scores.append(0.0)
            continue
        try:
            _, residual = fit_similarity(cp, tp)
        except DegenerateConfigurationError:
            limb_scores.append(0.0)
            continue
        limb_scores.append(similarity_score(residual, w.sigma_s))

    total = (w.w_head * s_head + w.w_torso * s_torso
             + w.w_sim * float(sum(limb_scores)))
    return ScoreBreakdown(s_head, s_torso, tuple(limb_scores), total)


def select(bank, target: KeypointSet,
           w: SelectorWeights | None = None) -> tuple[int, ScoreBreakdown]:
    """Pick the best-scoring entry; returns (index, its breakdown)."""
    if w is None:
        w = SelectorWeights()
    entries = list(bank)
    if not entries:
        raise EmptyBankError("calibration bank is empty")
    target_head = head_direction(target)
    target_torso = torso_direction(target)

    best_i, best = -1, None
    for i, entry in enumerate(entries):
        bd = score_entry(target, entry, w, target_head, target_torso)
        if best is None or bd.total > best.total:
            best_i, best = i, bd
    return best_i, best
