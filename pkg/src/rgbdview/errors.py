"""Exception types shared across the package."""


class RgbdViewError(ValueError):
    """Base class for all errors raised by this package."""


class InvalidDepthError(RgbdViewError):
    """A depth value was zero or negative where a measurement is required."""


class BehindCameraError(RgbdViewError):
    """A 3D point with z <= 0 cannot be projected."""


class ShapeMismatchError(RgbdViewError):
    """Arrays that must share dimensions do not."""


class DegenerateFrameError(RgbdViewError):
    """Keypoints are missing or collinear/coincident, so no direction
    frame can be built from them."""


class DegenerateConfigurationError(RgbdViewError):
    """Point configuration does not determine a similarity transform
    (e.g. all source points coincide)."""


class PoseError(RgbdViewError):
    """Joint angles outside the articulation limits."""


class EmptyBankError(RgbdViewError):
    """Calibration bank has no usable entries."""


class FrameFormatError(RgbdViewError):
    """An on-disk frame is missing files, malformed, or inconsistent."""


class PipelineStageError(RgbdViewError):
    """A rendering stage failed; carries the stage name."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
