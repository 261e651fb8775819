"""Grayscale images, decoding, Gaussian smoothing and finite-difference stencils.

All filtering uses replicate ("nearest") padding at the borders.
"""

from __future__ import annotations

import math
import struct
import zlib
from dataclasses import dataclass
from typing import Literal

import cv2
import numpy as np
from scipy.ndimage import correlate1d

from .errors import DecodeError, DimensionError, ParameterError

Axis = Literal["x", "y"]
ImageFormat = Literal["png8", "png16", "pgm"]

LUMA_WEIGHTS = (0.299, 0.587, 0.114)

_PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"
_FIRST_ORDER_TAPS = (-0.5, 0.0, 0.5)
_SECOND_ORDER_TAPS = (1.0, -2.0, 1.0)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class GrayImage:
    """Single-channel float64 plane, shape (height, width), row-major."""

    data: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.data)
        if a.ndim != 2:
            raise DimensionError(f"GrayImage needs a 2-D plane, got shape {a.shape}")
        if a.shape[0] == 0 or a.shape[1] == 0:
            raise DimensionError(f"zero-dimension image {a.shape[1]}x{a.shape[0]}")
        if not np.all(np.isfinite(a)):
            raise ValueError("GrayImage samples must be finite")
        object.__setattr__(self, "data", _frozen(a))

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def __eq__(self, other):
        if not isinstance(other, GrayImage):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.data, other.data))

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Kernel1D:
    taps: np.ndarray
    anchor: int

    def __post_init__(self):
        taps = _frozen(np.ravel(self.taps))
        if taps.size % 2 != 1:
            raise ParameterError(f"kernel length must be odd, got {taps.size}")
        if self.anchor != taps.size // 2:
            raise ParameterError("kernel anchor must be the center tap")
        object.__setattr__(self, "taps", taps)

    @property
    def radius(self) -> int:
        return self.anchor


def gaussian_kernel(sigma: float) -> Kernel1D:
    """Sampled Gaussian truncated at ceil(3*sigma) and renormalized to unit sum."""
    if not (sigma > 0) or not math.isfinite(sigma):
        raise ParameterError(f"sigma must be > 0, got {sigma}")
    radius = math.ceil(3.0 * sigma)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    taps = np.exp(-(x * x) / (2.0 * sigma * sigma))
    taps /= taps.sum()
    return Kernel1D(taps, radius)


def _filter(a: np.ndarray, taps, axis: Axis) -> np.ndarray:
    return correlate1d(a, np.asarray(taps, dtype=np.float64), axis=1 if axis == "x" else 0, mode="nearest")


def gaussian_blur(img: GrayImage, sigma: float) -> GrayImage:
    k = gaussian_kernel(sigma)
    out = _filter(img.data, k.taps, "x")
    out = _filter(out, k.taps, "y")
    return GrayImage(out)


def _check_axis(shape: tuple[int, int], axis: Axis) -> None:
    if axis not in ("x", "y"):
        raise ParameterError(f"axis must be 'x' or 'y', got {axis!r}")
    n = shape[1] if axis == "x" else shape[0]
    if n < 3:
        raise DimensionError(f"need at least 3 pixels along {axis} for a derivative stencil, got {n}")


def derivative(img: GrayImage, axis: Axis, order: int = 1) -> GrayImage:
    """Central first difference (-1/2, 0, 1/2) or second difference (1, -2, 1)."""
    _check_axis(img.shape, axis)
    if order == 1:
        taps = _FIRST_ORDER_TAPS
    elif order == 2:
        taps = _SECOND_ORDER_TAPS
    else:
        raise ParameterError(f"order must be 1 or 2, got {order}")
    return GrayImage(_filter(img.data, taps, axis))


def mixed_derivative_xy(img: GrayImage) -> GrayImage:
    return derivative(derivative(img, "x", 1), "y", 1)


# ---------------------------------------------------------------------------
# decoding / encoding


def _to_gray(samples: np.ndarray, scale: float, channel_order: str) -> np.ndarray:
    a = samples.astype(np.float64)
    if a.ndim == 3:
        if a.shape[2] == 1:
            a = a[:, :, 0]
        elif a.shape[2] == 2:  # gray + alpha
            a = a[:, :, 0]
        else:
            r, g, b = (a[:, :, 0], a[:, :, 1], a[:, :, 2])
            if channel_order == "bgr":
                r, b = b, r
            a = LUMA_WEIGHTS[0] * r + LUMA_WEIGHTS[1] * g + LUMA_WEIGHTS[2] * b
    return a / scale


def _read_pgm_header(buf: bytes) -> tuple[str, int, int, int, int]:
    """Returns (magic, width, height, maxval, payload_offset)."""
    pos = 0
    tokens: list[tuple[bytes, int]] = []
    n = len(buf)
    while len(tokens) < 4:
        while pos < n and buf[pos : pos + 1].isspace():
            pos += 1
        if pos < n and buf[pos : pos + 1] == b"#":
            while pos < n and buf[pos] not in (0x0A, 0x0D):
                pos += 1
            continue
        if pos >= n:
            raise DecodeError("truncated PGM header", pos)
        start = pos
        while pos < n and not buf[pos : pos + 1].isspace() and buf[pos : pos + 1] != b"#":
            pos += 1
        tokens.append((buf[start:pos], start))
    magic = tokens[0][0].decode("ascii", "replace")
    if magic not in ("P2", "P5"):
        raise DecodeError(f"not a PGM file (magic {magic!r})", 0)
    vals = []
    for tok, off in tokens[1:]:
        if not tok.isdigit():
            raise DecodeError(f"bad PGM header field {tok!r}", off)
        vals.append(int(tok))
    width, height, maxval = vals
    if width == 0 or height == 0:
        raise DimensionError(f"zero-dimension image {width}x{height}")
    if not 0 < maxval < 65536:
        raise DecodeError(f"PGM maxval {maxval} out of range", tokens[3][1])
    if pos >= n or not buf[pos : pos + 1].isspace():
        raise DecodeError("PGM header not terminated by whitespace", pos)
    return magic, width, height, maxval, pos + 1


def _decode_pgm(buf: bytes) -> np.ndarray:
    magic, width, height, maxval, off = _read_pgm_header(buf)
    count = width * height
    if magic == "P5":
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        need = count * dtype.itemsize
        if len(buf) - off < need:
            raise DecodeError(f"truncated PGM payload: need {need} bytes, have {len(buf) - off}", len(buf))
        samples = np.frombuffer(buf, dtype=dtype, count=count, offset=off).reshape(height, width)
    else:
        fields = buf[off:].split()
        if len(fields) < count:
            raise DecodeError(f"truncated PGM payload: need {count} samples, have {len(fields)}", len(buf))
        try:
            samples = np.array([int(f) for f in fields[:count]], dtype=np.int64).reshape(height, width)
        except ValueError as exc:
            raise DecodeError(f"non-numeric sample in ASCII PGM: {exc}", off) from None
    if samples.max() > maxval:
        raise DecodeError(f"sample exceeds maxval {maxval}", off)
    return samples.astype(np.float64) / maxval


def _walk_png(buf: bytes) -> tuple[int, int, int]:
    """Validate PNG chunk structure; returns (width, height, bit_depth)."""
    if buf[:8] != _PNG_SIGNATURE:
        raise DecodeError("missing PNG signature", 0)
    pos = 8
    header = None
    seen_end = False
    while pos < len(buf):
        if pos + 8 > len(buf):
            raise DecodeError("truncated PNG chunk header", pos)
        length, ctype = struct.unpack(">I4s", buf[pos : pos + 8])
        end = pos + 12 + length
        if end > len(buf):
            raise DecodeError(f"truncated PNG chunk {ctype!r}", pos)
        body = buf[pos + 4 : pos + 8 + length]
        (crc,) = struct.unpack(">I", buf[end - 4 : end])
        if zlib.crc32(body) & 0xFFFFFFFF != crc:
            raise DecodeError(f"CRC mismatch in PNG chunk {ctype!r}", pos)
        if header is None:
            if ctype != b"IHDR" or length != 13:
                raise DecodeError("first PNG chunk must be IHDR", pos)
            header = struct.unpack(">IIB", body[4:13])
        if ctype == b"IEND":
            seen_end = True
            break
        pos = end
    if header is None or not seen_end:
        raise DecodeError("truncated PNG stream (no IEND)", len(buf))
    width, height, depth = header
    if width == 0 or height == 0:
        raise DimensionError(f"zero-dimension image {width}x{height}")
    return width, height, depth


def _decode_png_raw(buf: bytes) -> np.ndarray:
    _, _, depth = _walk_png(buf)
    arr = cv2.imdecode(np.frombuffer(buf, dtype=np.uint8), cv2.IMREAD_UNCHANGED)
    if arr is None:
        raise DecodeError("PNG image data could not be decoded", 8)
    if depth == 16 and arr.dtype != np.uint16:
        raise DecodeError(f"expected 16-bit samples, decoder produced {arr.dtype}", 8)
    return arr


def decode_png_samples(buf: bytes) -> np.ndarray:
    """Raw PNG samples in RGB(A) channel order, integer dtype."""
    arr = _decode_png_raw(buf)
    if arr.ndim == 3 and arr.shape[2] >= 3:
        arr = arr[:, :, [2, 1, 0] + list(range(3, arr.shape[2]))]
    return arr


def sniff_format(buf: bytes) -> ImageFormat:
    if buf[:8] == _PNG_SIGNATURE:
        if len(buf) > 24 and buf[24] == 16:
            return "png16"
        return "png8"
    if buf[:2] in (b"P2", b"P5"):
        return "pgm"
    raise DecodeError("unrecognized image format", 0)


def decode_gray(buf: bytes, format: ImageFormat | None = None) -> GrayImage:
    """Decode PNG (8/16-bit gray or RGB) or PGM (P2/P5) to a [0,1] gray image.

    Color inputs are reduced with the 0.299/0.587/0.114 luma weights.
    """
    buf = bytes(buf)
    detected = sniff_format(buf)
    if format is not None and format != detected:
        raise DecodeError(f"stated format {format!r} but stream is {detected!r}", 0)
    if detected == "pgm":
        return GrayImage(_decode_pgm(buf))
    arr = _decode_png_raw(buf)
    scale = 65535.0 if arr.dtype == np.uint16 else 255.0
    if arr.ndim == 3 and arr.shape[2] == 4:
        arr = arr[:, :, :3]
    return GrayImage(_to_gray(arr, scale, "bgr"))


def read_gray(path) -> GrayImage:
    with open(path, "rb") as fh:
        return decode_gray(fh.read())


def _quantize(img: GrayImage, maxval: int) -> np.ndarray:
    return np.clip(np.rint(img.data * maxval), 0, maxval)


def encode_pgm(img: GrayImage, maxval: int = 255) -> bytes:
    """Binary (P5) PGM; 16-bit samples are written big-endian as the format requires."""
    q = _quantize(img, maxval)
    dtype = ">u2" if maxval > 255 else "u1"
    header = f"P5\n{img.width} {img.height}\n{maxval}\n".encode("ascii")
    return header + q.astype(dtype).tobytes()


def encode_png(samples: np.ndarray) -> bytes:
    """Encode uint8/uint16 samples (H, W) or (H, W, 3) given in RGB order."""
    a = np.asarray(samples)
    if a.dtype not in (np.uint8, np.uint16):
        raise ParameterError(f"PNG samples must be uint8 or uint16, got {a.dtype}")
    if a.ndim == 3:
        a = np.ascontiguousarray(a[:, :, ::-1])
    ok, out = cv2.imencode(".png", a)
    if not ok:
        raise RuntimeError("PNG encoding failed")
    return out.tobytes()


def encode_gray_png(img: GrayImage, bits: int = 16) -> bytes:
    if bits == 16:
        return encode_png(_quantize(img, 65535).astype(np.uint16))
    if bits == 8:
        return encode_png(_quantize(img, 255).astype(np.uint8))
    raise ParameterError(f"bits must be 8 or 16, got {bits}")
