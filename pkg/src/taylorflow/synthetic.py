"""Closed-form textures under known motions, for ground-truth flow.

Frames are evaluated analytically: frame k at pixel p samples the texture at
M^-k(p), where M is the motion map. Ground truth for a pixel p of frame 0 is
M(p) - p, so no resampling error enters the oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .errors import ParameterError
from .image import GrayImage
from .solver import FlowField

TextureKind = Literal["quadratic-bowl", "sinusoid-grid", "random-smooth"]
MotionKind = Literal["translate", "rotate", "zoom"]

SINUSOID_PERIOD = 32.0


@dataclass(frozen=True)
class Texture:
    kind: TextureKind = "sinusoid-grid"
    seed: int = 0
    period: float = SINUSOID_PERIOD

    def __post_init__(self):
        if self.kind not in ("quadratic-bowl", "sinusoid-grid", "random-smooth"):
            raise ParameterError(f"unknown texture {self.kind!r}")
        if not self.period > 0:
            raise ParameterError("period must be > 0")

    def evaluate(self, x: np.ndarray, y: np.ndarray, width: int, height: int) -> np.ndarray:
        """Intensity in [0, 1] at continuous coordinates (x, y)."""
        if self.kind == "sinusoid-grid":
            w = 2.0 * np.pi / self.period
            return 0.5 + 0.25 * np.sin(w * x) + 0.25 * np.sin(w * y)
        if self.kind == "quadratic-bowl":
            cx, cy = (width - 1) / 2.0, (height - 1) / 2.0
            r2max = cx * cx + cy * cy
            return ((x - cx) ** 2 + (y - cy) ** 2) / r2max
        rng = np.random.default_rng(self.seed)
        n = 6
        freqs = rng.uniform(1.0 / 48.0, 1.0 / 12.0, size=n) * 2.0 * np.pi
        angles = rng.uniform(0.0, np.pi, size=n)
        phases = rng.uniform(0.0, 2.0 * np.pi, size=n)
        amps = rng.uniform(0.5, 1.0, size=n)
        amps = 0.5 * amps / amps.sum()
        out = np.full(np.broadcast(x, y).shape, 0.5)
        for k in range(n):
            proj = x * math.cos(angles[k]) + y * math.sin(angles[k])
            out = out + amps[k] * np.sin(freqs[k] * proj + phases[k])
        return out


@dataclass(frozen=True)
class Motion:
    """``translate`` uses (u, v); ``rotate`` uses theta in degrees; ``zoom`` uses scale. Rotation and zoom are about the image center."""

    kind: MotionKind = "translate"
    u: float = 0.0
    v: float = 0.0
    theta: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("translate", "rotate", "zoom"):
            raise ParameterError(f"unknown motion {self.kind!r}")
        for name in ("u", "v", "theta", "scale"):
            if not math.isfinite(getattr(self, name)):
                raise ParameterError(f"motion parameter {name} must be finite")
        if self.kind == "zoom" and self.scale <= 0:
            raise ParameterError("zoom scale must be > 0")

    def matrix(self, center: tuple[float, float]) -> np.ndarray:
        """Affine 2x3 map of frame-0 coordinates to frame-1 coordinates."""
        cx, cy = center
        if self.kind == "translate":
            a = np.eye(2)
            t = np.array([self.u, self.v])
        else:
            if self.kind == "rotate":
                th = math.radians(self.theta)
                a = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
            else:
                a = np.eye(2) * self.scale
            c = np.array([cx, cy])
            t = c - a @ c
        return np.hstack([a, t[:, None]])


@dataclass(frozen=True)
class SyntheticSpec:
    texture: Texture = field(default_factory=Texture)
    motion: Motion = field(default_factory=lambda: Motion("translate", 1.0, 0.0))
    width: int = 256
    height: int = 256

    def __post_init__(self):
        if self.width < 32 or self.height < 32:
            raise ParameterError(f"synthetic size must be at least 32x32, got {self.width}x{self.height}")


@dataclass(frozen=True)
class SyntheticScene:
    frames: tuple[GrayImage, ...]
    gt: FlowField


def _power(m: np.ndarray, k: int) -> np.ndarray:
    full = np.vstack([m, [0.0, 0.0, 1.0]])
    return np.linalg.matrix_power(full, k)


def generate(spec: SyntheticSpec, n_frames: int = 2) -> SyntheticScene:
    """Render ``n_frames`` frames (2 or 3) and the exact frame-0 -> frame-1 flow."""
    if n_frames not in (2, 3):
        raise ParameterError("n_frames must be 2 or 3")
    w, h = spec.width, spec.height
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    m = spec.motion.matrix(((w - 1) / 2.0, (h - 1) / 2.0))
    frames = []
    for k in range(n_frames):
        inv = np.linalg.inv(_power(m, k))
        sx = inv[0, 0] * xs + inv[0, 1] * ys + inv[0, 2]
        sy = inv[1, 0] * xs + inv[1, 1] * ys + inv[1, 2]
        plane = np.clip(spec.texture.evaluate(sx, sy, w, h), 0.0, 1.0)
        frames.append(GrayImage(plane))
    gu = m[0, 0] * xs + m[0, 1] * ys + m[0, 2] - xs
    gv = m[1, 0] * xs + m[1, 1] * ys + m[1, 2] - ys
    return SyntheticScene(tuple(frames), FlowField(gu, gv, np.ones((h, w), dtype=bool)))
