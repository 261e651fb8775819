"""Color-wheel flow images and quiver overlays. All outputs are uint8 RGB arrays."""

from __future__ import annotations

import math

import cv2
import numpy as np

from .datasets import GroundTruth, as_flow
from .errors import ParameterError, ShapeError
from .image import GrayImage
from .solver import FlowField

RED = (255, 0, 0)
ARROWHEAD_LENGTH = 3
_ARROWHEAD_ANGLE = math.radians(30)


def make_colorwheel() -> np.ndarray:
    """Middlebury color wheel, (55, 3) floats in [0, 255]."""
    segments = [(15, (255, 0, 0), (255, 255, 0)),  # red -> yellow
                (6, (255, 255, 0), (0, 255, 0)),  # yellow -> green
                (4, (0, 255, 0), (0, 255, 255)),  # green -> cyan
                (11, (0, 255, 255), (0, 0, 255)),  # cyan -> blue
                (13, (0, 0, 255), (255, 0, 255)),  # blue -> magenta
                (6, (255, 0, 255), (255, 0, 0))]  # magenta -> red
    rows = []
    for n, start, end in segments:
        f = np.arange(n)[:, None] / n
        rows.append(np.asarray(start) * (1 - f) + np.asarray(end) * f)
    return np.floor(np.concatenate(rows))


COLORWHEEL = make_colorwheel()


def wheel_position(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Fractional index into the color wheel for direction atan2(v, u), in [0, ncols)."""
    ncols = COLORWHEEL.shape[0]
    a = np.arctan2(-v, -u) / np.pi
    return np.mod((a + 1.0) / 2.0 * ncols, ncols)


def flow_to_color(f: FlowField | GroundTruth, max_magnitude: float | None = None) -> np.ndarray:
    """Hue from direction, saturation from magnitude / max_magnitude.

    ``max_magnitude`` defaults to the 99th percentile of valid magnitudes.
    Zero flow is white, invalid pixels are black, and magnitudes beyond the
    maximum are darkened.
    """
    f = as_flow(f)
    mag = np.sqrt(f.u ** 2 + f.v ** 2)
    if max_magnitude is None:
        max_magnitude = float(np.percentile(mag[f.valid], 99)) if f.valid.any() else 0.0
    elif not max_magnitude >= 0:
        raise ParameterError(f"max_magnitude must be >= 0, got {max_magnitude}")
    rad = mag / max_magnitude if max_magnitude > 0 else np.zeros_like(mag)

    ncols = COLORWHEEL.shape[0]
    fk = wheel_position(f.u, f.v)
    k0 = np.floor(fk).astype(int) % ncols
    k1 = (k0 + 1) % ncols
    frac = (fk - np.floor(fk))[..., None]
    col = ((1 - frac) * COLORWHEEL[k0] + frac * COLORWHEEL[k1]) / 255.0

    r = rad[..., None]
    inside = r <= 1
    col = np.where(inside, 1 - r * (1 - col), col * 0.75)
    img = np.floor(255 * col + 0.5).clip(0, 255).astype(np.uint8)
    img[~f.valid] = 0
    return img


def gray_to_rgb(base: GrayImage) -> np.ndarray:
    g = np.clip(np.rint(base.data * 255), 0, 255).astype(np.uint8)
    return np.repeat(g[:, :, None], 3, axis=2)


def quiver_sites(f: FlowField, stride: int) -> list[tuple[int, int]]:
    """(x, y) sample sites: every stride-th pixel in both axes, offset by stride // 2, valid only."""
    h, w = f.shape
    off = stride // 2
    return [(x, y) for y in range(off, h, stride) for x in range(off, w, stride) if f.valid[y, x]]


def flow_to_quiver(base: GrayImage, f: FlowField | GroundTruth, stride: int = 16, scale: float = 1.0) -> np.ndarray:
    """Red arrows from (x, y) to (x + scale*u, y + scale*v) over the gray base image.

    Arrowheads are two 3-pixel strokes at the tip. Everything is clipped to
    the image and drawn without antialiasing, so the output is deterministic.
    """
    f = as_flow(f)
    if stride < 1:
        raise ParameterError(f"stride must be >= 1, got {stride}")
    if base.shape != f.shape:
        raise ShapeError(f"base image is {base.shape}, flow is {f.shape}")
    # cv2 drawing wants BGR
    canvas = np.ascontiguousarray(gray_to_rgb(base)[:, :, ::-1])
    color = RED[::-1]
    for x, y in quiver_sites(f, stride):
        dx = scale * f.u[y, x]
        dy = scale * f.v[y, x]
        tip = (int(round(x + dx)), int(round(y + dy)))
        cv2.line(canvas, (x, y), tip, color, 1, cv2.LINE_8)
        length = math.hypot(dx, dy)
        if length > 0:
            theta = math.atan2(dy, dx)
            for side in (-1, 1):
                a = theta + math.pi + side * _ARROWHEAD_ANGLE
                end = (int(round(tip[0] + ARROWHEAD_LENGTH * math.cos(a))), int(round(tip[1] + ARROWHEAD_LENGTH * math.sin(a))))
                cv2.line(canvas, tip, end, color, 1, cv2.LINE_8)
    return np.ascontiguousarray(canvas[:, :, ::-1])


def error_map_to_gray(ee: np.ndarray, max_error: float | None = None) -> np.ndarray:
    """Endpoint-error map (NaN = not evaluated) as an 8-bit plane; brighter is worse."""
    finite = np.isfinite(ee)
    if max_error is None:
        max_error = float(ee[finite].max()) if finite.any() else 0.0
    scaled = np.zeros(ee.shape) if max_error <= 0 else np.where(finite, ee, 0) / max_error
    return np.clip(np.rint(scaled * 255), 0, 255).astype(np.uint8)
