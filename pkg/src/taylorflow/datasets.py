"""KITTI 2015 flow PNGs, Middlebury ``.flo`` files and dataset pair enumeration.

KITTI stores each component as ``64 * value + 2**15`` in a 16-bit channel with
the third channel flagging validity. ``.flo`` is a little-endian float32
container: the sentinel 202021.25, int32 width and height, then interleaved
(u, v) pairs row by row. Components above 1e9 mean "unknown".
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import numpy as np

from .errors import FormatError, RangeError, TruncationError
from .image import DecodeError, decode_png_samples, encode_png
from .solver import FlowField

Source = Literal["kitti", "middlebury"]

FLO_SENTINEL = 202021.25
FLO_UNKNOWN = 1e10
FLO_UNKNOWN_THRESHOLD = 1e9
KITTI_OFFSET = 2**15
KITTI_SCALE = 64.0
KITTI_MAX_MAGNITUDE = 512.0


@dataclass(frozen=True)
class GroundTruth:
    flow: FlowField
    source: Source

    @property
    def shape(self) -> tuple[int, int]:
        return self.flow.shape


@dataclass(frozen=True)
class DatasetPair:
    scene_id: str
    frame0_path: Path
    frame1_path: Path
    gt_path: Path | None = None
    frame2_path: Path | None = None


def as_flow(x: FlowField | GroundTruth) -> FlowField:
    return x.flow if isinstance(x, GroundTruth) else x


# ---------------------------------------------------------------------------
# KITTI


def read_kitti_flow(buf: bytes) -> GroundTruth:
    try:
        samples = decode_png_samples(buf)
    except DecodeError as exc:
        raise FormatError(f"KITTI flow file is not a readable PNG: {exc}") from exc
    if samples.dtype != np.uint16:
        raise FormatError(f"KITTI flow PNG must be 16-bit, got bit depth {samples.dtype.itemsize * 8}")
    channels = 1 if samples.ndim == 2 else samples.shape[2]
    if channels != 3:
        raise FormatError(f"KITTI flow PNG must have 3 channels, got {channels}")
    s = samples.astype(np.float64)
    u = (s[:, :, 0] - KITTI_OFFSET) / KITTI_SCALE
    v = (s[:, :, 1] - KITTI_OFFSET) / KITTI_SCALE
    valid = samples[:, :, 2] == 1
    return GroundTruth(FlowField(u, v, valid), "kitti")


def write_kitti_flow(f: FlowField | GroundTruth) -> bytes:
    f = as_flow(f)
    bad = f.valid & ((np.abs(f.u) >= KITTI_MAX_MAGNITUDE) | (np.abs(f.v) >= KITTI_MAX_MAGNITUDE))
    if bad.any():
        ys, xs = np.nonzero(bad)
        coords = ", ".join(f"({x}, {y})" for x, y in list(zip(xs.tolist(), ys.tolist()))[:10])
        more = "" if bad.sum() <= 10 else f" and {int(bad.sum()) - 10} more"
        raise RangeError(f"flow magnitude >= {KITTI_MAX_MAGNITUDE:g} px at (x, y) {coords}{more}")
    out = np.zeros(f.shape + (3,), dtype=np.uint16)
    enc = lambda a: np.clip(np.rint(a * KITTI_SCALE + KITTI_OFFSET), 0, 65535).astype(np.uint16)
    out[:, :, 0] = np.where(f.valid, enc(f.u), 0)
    out[:, :, 1] = np.where(f.valid, enc(f.v), 0)
    out[:, :, 2] = f.valid.astype(np.uint16)
    return encode_png(out)


# ---------------------------------------------------------------------------
# Middlebury .flo

_FLO_HEADER = struct.Struct("<fii")


def read_flo(buf: bytes) -> FlowField:
    buf = bytes(buf)
    if len(buf) < _FLO_HEADER.size:
        raise TruncationError(f".flo header needs {_FLO_HEADER.size} bytes, got {len(buf)}")
    tag, width, height = _FLO_HEADER.unpack_from(buf)
    if tag != FLO_SENTINEL:
        raise FormatError(f".flo sentinel mismatch: expected {FLO_SENTINEL}, got {tag!r}")
    if width < 1 or height < 1:
        raise FormatError(f".flo has invalid dimensions {width}x{height}")
    expected = _FLO_HEADER.size + 8 * width * height
    if len(buf) != expected:
        raise TruncationError(f".flo of {width}x{height} must be {expected} bytes, got {len(buf)}")
    data = np.frombuffer(buf, dtype="<f4", offset=_FLO_HEADER.size).reshape(height, width, 2)
    u = data[:, :, 0].astype(np.float64)
    v = data[:, :, 1].astype(np.float64)
    with np.errstate(invalid="ignore"):
        valid = ~((np.abs(u) > FLO_UNKNOWN_THRESHOLD) | (np.abs(v) > FLO_UNKNOWN_THRESHOLD))
    valid &= np.isfinite(u) & np.isfinite(v)
    return FlowField(u, v, valid)


def write_flo(f: FlowField | GroundTruth) -> bytes:
    f = as_flow(f)
    height, width = f.shape
    data = np.empty((height, width, 2), dtype="<f4")
    data[:, :, 0] = np.where(f.valid, f.u, FLO_UNKNOWN)
    data[:, :, 1] = np.where(f.valid, f.v, FLO_UNKNOWN)
    return _FLO_HEADER.pack(FLO_SENTINEL, width, height) + data.tobytes()


def read_middlebury_flow(buf: bytes) -> GroundTruth:
    return GroundTruth(read_flo(buf), "middlebury")


def read_flow_file(path: os.PathLike | str) -> GroundTruth:
    """Dispatch on extension: ``.flo`` is Middlebury, ``.png`` is KITTI."""
    path = Path(path)
    buf = path.read_bytes()
    if path.suffix.lower() == ".png":
        return read_kitti_flow(buf)
    return read_middlebury_flow(buf)


def write_flow_file(path: os.PathLike | str, f: FlowField | GroundTruth) -> None:
    path = Path(path)
    buf = write_kitti_flow(f) if path.suffix.lower() == ".png" else write_flo(f)
    path.write_bytes(buf)


# ---------------------------------------------------------------------------
# directory layouts


def _kitti_pairs(root: Path, gt_dir: str) -> list[DatasetPair]:
    images = root / "image_2"
    if not images.is_dir():
        return []
    pairs = []
    for frame0 in sorted(images.glob("*_10.png")):
        scene = frame0.name[: -len("_10.png")]
        frame1 = images / f"{scene}_11.png"
        if not frame1.is_file():
            continue
        gt = root / gt_dir / f"{scene}_10.png"
        frame2 = images / f"{scene}_12.png"
        pairs.append(
            DatasetPair(
                scene_id=scene,
                frame0_path=frame0,
                frame1_path=frame1,
                gt_path=gt if gt.is_file() else None,
                frame2_path=frame2 if frame2.is_file() else None,
            )
        )
    return pairs


def _middlebury_pairs(root: Path) -> list[DatasetPair]:
    data = root / "other-data"
    if not data.is_dir():
        return []
    pairs = []
    for scene_dir in sorted(p for p in data.iterdir() if p.is_dir()):
        frame0 = scene_dir / "frame10.png"
        frame1 = scene_dir / "frame11.png"
        if not (frame0.is_file() and frame1.is_file()):
            continue
        gt = root / "other-gt-flow" / scene_dir.name / "flow10.flo"
        frame2 = scene_dir / "frame12.png"
        pairs.append(
            DatasetPair(
                scene_id=scene_dir.name,
                frame0_path=frame0,
                frame1_path=frame1,
                gt_path=gt if gt.is_file() else None,
                frame2_path=frame2 if frame2.is_file() else None,
            )
        )
    return pairs


def enumerate_pairs(root: os.PathLike | str, kind: Source, gt_variant: str = "flow_occ") -> list[DatasetPair]:
    """List frame pairs under a KITTI or Middlebury root, sorted by scene id.

    KITTI expects ``image_2/{scene}_10.png``, ``image_2/{scene}_11.png`` and
    ``{gt_variant}/{scene}_10.png`` (``flow_occ`` or ``flow_noc``). Middlebury
    expects ``other-data/{scene}/frame1{0,1}.png`` and
    ``other-gt-flow/{scene}/flow10.flo``.
    """
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset root {root} does not exist")
    if kind == "kitti":
        pairs = _kitti_pairs(root, gt_variant)
    elif kind == "middlebury":
        pairs = _middlebury_pairs(root)
    else:
        raise ValueError(f"unknown dataset kind {kind!r}")
    return sorted(pairs, key=lambda p: p.scene_id)
