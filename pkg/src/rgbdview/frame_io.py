"""On-disk frame and calibration-bank formats.

A frame directory holds five files:

    color.png      8-bit RGB
    depth.png      16-bit single channel, millimeters, 0 = invalid
    mask.png       8-bit, >= 128 means foreground
    camera.json    {fx, fy, ox, oy, width, height, rotation[9], translation[3]}
    keypoints.json 17 records {name, x, y, z?, valid}; z is camera depth (m)

A calibration bank is a directory with `index.json` plus a `frames/`
subdirectory of copied frame dirs.  The index caches each entry's
keypoints and head/torso direction vectors so selection never has to
touch pixels.
"""

from __future__ import annotations

import json
import shutil
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import (
    DegenerateFrameError,
    EmptyBankError,
    FrameFormatError,
    ShapeMismatchError,
)
from .frame import Frame
from .geometry import Intrinsics, RigidTransform
from .pose import KeypointSet, extrapolate_missing, lift_keypoints
from .selector import CalibrationEntry

COLOR_FILE = "color.png"
DEPTH_FILE = "depth.png"
MASK_FILE = "mask.png"
CAMERA_FILE = "camera.json"
KEYPOINTS_FILE = "keypoints.json"
_FRAME_FILES = (COLOR_FILE, DEPTH_FILE, MASK_FILE, CAMERA_FILE, KEYPOINTS_FILE)

MAX_DEPTH_M = 65.535  # 16-bit millimeters


def _read_png(path: Path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            im.load()
            return np.asarray(im)
    except (UnidentifiedImageError, OSError, SyntaxError) as e:
        raise FrameFormatError(f"cannot parse PNG {path}: {e}") from None


def _read_json(path: Path):
    try:
        with open(path) as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise FrameFormatError(f"malformed JSON {path}: {e}") from None


def save_camera(k: Intrinsics, pose: RigidTransform, path):
    data = dict(k.to_dict(), **pose.to_dict())
    with open(path, "w") as f:
        json.dump(data, f, indent=2)


def load_camera(path) -> tuple[Intrinsics, RigidTransform]:
    data = _read_json(Path(path))
    try:
        return Intrinsics.from_dict(data), RigidTransform.from_dict(data)
    except (KeyError, TypeError) as e:
        raise FrameFormatError(f"camera file {path} missing fields: {e}") from None


def save_frame(frame: Frame, path):
    """Write the five frame files; depth is quantized to integer mm."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    if np.any(frame.depth > MAX_DEPTH_M):
        raise FrameFormatError(f"depth exceeds {MAX_DEPTH_M} m, cannot store as 16-bit mm")

    color_u8 = np.round(np.clip(frame.color, 0.0, 1.0) * 255.0).astype(np.uint8)
    Image.fromarray(color_u8, mode="RGB").save(path / COLOR_FILE)

    depth_mm = np.round(frame.depth * 1000.0).astype(np.uint16)
    Image.fromarray(depth_mm).save(path / DEPTH_FILE)

    Image.fromarray(np.where(frame.mask, 255, 0).astype(np.uint8)).save(path / MASK_FILE)

    save_camera(frame.intrinsics, frame.pose, path / CAMERA_FILE)

    kp = frame.keypoints
    records = kp.to_records() if kp is not None else []
    with open(path / KEYPOINTS_FILE, "w") as f:
        json.dump(records, f, indent=2)


def load_frame(path) -> Frame:
    """Load a frame directory; raises FileNotFoundError for missing files,
    FrameFormatError for unparseable ones, ShapeMismatchError for
    inconsistent dimensions."""
    path = Path(path)
    for name in _FRAME_FILES:
        if not (path / name).is_file():
            raise FileNotFoundError(f"frame file missing: {path / name}")

    color = _read_png(path / COLOR_FILE)
    depth_mm = _read_png(path / DEPTH_FILE)
    mask_raw = _read_png(path / MASK_FILE)
    k, pose = load_camera(path / CAMERA_FILE)

    if color.ndim != 3 or color.shape[2] != 3:
        raise FrameFormatError(f"{path / COLOR_FILE} is not an RGB image")
    if depth_mm.ndim != 2 or mask_raw.ndim != 2:
        raise FrameFormatError(f"depth/mask in {path} must be single channel")
    if not (color.shape[:2] == depth_mm.shape == mask_raw.shape
            == (k.height, k.width)):
        raise ShapeMismatchError(
            f"frame {path}: images and camera disagree on dimensions"
        )

    records = _read_json(path / KEYPOINTS_FILE)
    keypoints = KeypointSet.from_records(records, k) if records else None

    return Frame(
        color=color.astype(np.float32) / 255.0,
        depth=depth_mm.astype(np.float64) / 1000.0,
        mask=mask_raw >= 128,
        intrinsics=k,
        pose=pose,
        keypoints=keypoints,
    )


def save_image(path, img: np.ndarray):
    """Write a [0, 1] float image (gray or RGB) as an 8-bit PNG."""
    u8 = np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)
    mode = "RGB" if u8.ndim == 3 else "L"
    Image.fromarray(u8, mode=mode).save(path)


def list_frame_dirs(seq_dir) -> list[Path]:
    seq_dir = Path(seq_dir)
    return sorted(p for p in seq_dir.iterdir()
                  if p.is_dir() and (p / CAMERA_FILE).is_file())


def _prepare_entry(frame: Frame, ref) -> CalibrationEntry | None:
    """Gate + lift + cache directions; None if the frame is unusable."""
    kp = frame.keypoints
    if kp is None:
        return None
    kp = extrapolate_missing(kp)
    if kp is None:
        return None
    kp = lift_keypoints(kp, frame.depth, frame.intrinsics)
    try:
        return CalibrationEntry.from_keypoints(kp, frame=ref)
    except DegenerateFrameError:
        return None


def build_bank(seq_dir, out_dir, max_frames: int | None = None) -> list[CalibrationEntry]:
    """Build a calibration bank from a sequence of frame directories.

    Frames that fail the keypoint gate are skipped.  If more frames
    survive than max_frames, they are subsampled uniformly by index.
    Writes `out_dir/index.json` and copies the kept frames.
    """
    frame_dirs = list_frame_dirs(seq_dir)
    accepted: list[tuple[Path, CalibrationEntry]] = []
    for fd in frame_dirs:
        frame = load_frame(fd)
        entry = _prepare_entry(frame, fd)
        if entry is not None:
            accepted.append((fd, entry))
    if not accepted:
        raise EmptyBankError(f"no usable calibration frames in {seq_dir}")

    if max_frames is not None and len(accepted) > max_frames:
        n = len(accepted)
        keep = [accepted[i * n // max_frames] for i in range(max_frames)]
        accepted = keep

    out_dir = Path(out_dir)
    frames_dir = out_dir / "frames"
    frames_dir.mkdir(parents=True, exist_ok=True)
    index = []
    entries = []
    for i, (src, entry) in enumerate(accepted):
        rel = f"frames/{i:06d}"
        dst = out_dir / rel
        if dst.exists():
            shutil.rmtree(dst)
        shutil.copytree(src, dst)
        index.append({
            "frame": rel,
            "keypoints": entry.keypoints.to_records(),
            "head_dir": [float(v) for v in entry.head_dir],
            "torso_dir": [float(v) for v in entry.torso_dir],
        })
        entries.append(CalibrationEntry(
            keypoints=entry.keypoints,
            head_dir=entry.head_dir, torso_dir=entry.torso_dir,
            frame=dst,
        ))
    with open(out_dir / "index.json", "w") as f:
        json.dump({"entries": index}, f, indent=2)
    return entries


def load_bank(bank_dir) -> list[CalibrationEntry]:
    """Load bank entries; frames stay on disk (entry.frame is the path)."""
    bank_dir = Path(bank_dir)
    index_path = bank_dir / "index.json"
    if not index_path.is_file():
        raise FileNotFoundError(f"bank index missing: {index_path}")
    data = _read_json(index_path)
    entries = []
    for rec in data.get("entries", []):
        frame_dir = bank_dir / rec["frame"]
        k, _ = load_camera(frame_dir / CAMERA_FILE)
        entries.append(CalibrationEntry(
            keypoints=KeypointSet.from_records(rec["keypoints"], k),
            head_dir=np.asarray(rec["head_dir"], dtype=np.float64),
            torso_dir=np.asarray(rec["torso_dir"], dtype=np.float64),
            frame=frame_dir,
        ))
    if not entries:
        raise EmptyBankError(f"bank at {bank_dir} has no entries")
    return entries
