"""Free-viewpoint human re-rendering from a single RGBD frame plus a
calibration image bank: geometric re-rendering, pose-driven calibration
selection, part-based similarity warping, confidence-driven blending,
metrics, and a synthetic ground-truth harness."""

__version__ = "0.1.0"

from .blender import BlendConfig, BlendInput, blend
from .frame import Frame
from .geometry import Intrinsics, PointCloud, RigidTransform
from .pose import KeypointSet
from .selector import CalibrationEntry, SelectorWeights, select
from .simfit import Similarity2D, fit_similarity
from .splat import SplatOutput, splat_render
from .synth import Humanoid, PoseParams, make_humanoid, render_synthetic
from .warper import PartGeometryConfig, PartMaskSet, WarpResult

__all__ = [
    "BlendConfig", "BlendInput", "blend",
    "Frame",
    "Intrinsics", "PointCloud", "RigidTransform",
    "KeypointSet",
    "CalibrationEntry", "SelectorWeights", "select",
    "Similarity2D", "fit_similarity",
    "SplatOutput", "splat_render",
    "Humanoid", "PoseParams", "make_humanoid", "render_synthetic",
    "PartGeometryConfig", "PartMaskSet", "WarpResult",
    "__version__",
]
