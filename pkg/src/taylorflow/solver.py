"""Windowed Lucas-Kanade least squares over a constraint field."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Literal

import numpy as np
from scipy.ndimage import correlate1d

from .constraint import ConstraintField, Order, compose, compute_gradient_tensor
from .errors import ParameterError, ShapeError
from .image import GrayImage, _frozen, gaussian_blur

Weighting = Literal["uniform", "gaussian"]


@dataclass(frozen=True)
class SolverConfig:
    """Solver settings.

    ``alpha`` is Tikhonov damping added to the 2x2 normal matrix and ``delta``
    the minimum-eigenvalue threshold a pixel must exceed to be valid.
    ``window_radius=0`` means a single-pixel window.
    """

    order: Order = "second"
    window_radius: int = 7
    alpha: float = 1e-3
    delta: float = 1e-4
    sigma: float = 1.4
    window_weighting: Weighting = "uniform"
    average_spatial: bool = False

    def __post_init__(self):
        if self.order not in ("first", "second"):
            raise ParameterError(f"order must be 'first' or 'second', got {self.order!r}")
        if int(self.window_radius) != self.window_radius or self.window_radius < 0:
            raise ParameterError(f"window_radius must be a non-negative integer, got {self.window_radius}")
        if not (self.alpha >= 0) or not math.isfinite(self.alpha):
            raise ParameterError(f"alpha must be >= 0, got {self.alpha}")
        if not (self.delta >= 0) or not math.isfinite(self.delta):
            raise ParameterError(f"delta must be >= 0, got {self.delta}")
        if not (self.sigma > 0) or not math.isfinite(self.sigma):
            raise ParameterError(f"sigma must be > 0, got {self.sigma}")
        if self.window_weighting not in ("uniform", "gaussian"):
            raise ParameterError(f"unknown window weighting {self.window_weighting!r}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class FlowField:
    """Per-pixel displacement in pixels/frame. Invalid pixels are stored as (0, 0)."""

    u: np.ndarray
    v: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=np.float64)
        v = np.asarray(self.v, dtype=np.float64)
        valid = np.asarray(self.valid, dtype=bool)
        if u.ndim != 2 or u.shape != v.shape or u.shape != valid.shape:
            raise ShapeError(f"u, v, valid shapes differ: {u.shape}, {v.shape}, {valid.shape}")
        if not np.all(np.isfinite(u[valid])) or not np.all(np.isfinite(v[valid])):
            raise ValueError("valid flow samples must be finite")
        u = np.where(valid, u, 0.0)
        v = np.where(valid, v, 0.0)
        valid = valid.copy()
        valid.setflags(write=False)
        object.__setattr__(self, "u", _frozen(u))
        object.__setattr__(self, "v", _frozen(v))
        object.__setattr__(self, "valid", valid)

    @classmethod
    def uniform(cls, shape: tuple[int, int], u: float, v: float) -> "FlowField":
        return cls(np.full(shape, float(u)), np.full(shape, float(v)), np.ones(shape, dtype=bool))

    @property
    def shape(self) -> tuple[int, int]:
        return self.u.shape

    @property
    def valid_fraction(self) -> float:
        return float(self.valid.mean())

    def __eq__(self, other):
        if not isinstance(other, FlowField):
            return NotImplemented
        return (
            np.array_equal(self.u, other.u)
            and np.array_equal(self.v, other.v)
            and np.array_equal(self.valid, other.valid)
        )

    __hash__ = None


def window_taps(radius: int, weighting: Weighting) -> np.ndarray:
    """1-D window weights; the 2-D weight of an offset (dy, dx) is taps[dy] * taps[dx]."""
    if weighting == "uniform":
        return np.ones(2 * radius + 1)
    if radius == 0:
        return np.ones(1)
    s = radius / 2.0
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    return np.exp(-(x * x) / (2.0 * s * s))


def _window_sum(a: np.ndarray, taps: np.ndarray) -> np.ndarray:
    if taps.size == 1:
        return a * taps[0] * taps[0]
    out = correlate1d(a, taps, axis=1, mode="nearest")
    return correlate1d(out, taps, axis=0, mode="nearest")


def min_eigenvalue(a, b, d):
    """Smaller eigenvalue of the symmetric matrix [[a, b], [b, d]], elementwise."""
    half_trace = 0.5 * (a + d)
    half_diff = 0.5 * (a - d)
    return half_trace - np.sqrt(half_diff * half_diff + b * b)


def solve_lucas_kanade(c: ConstraintField, cfg: SolverConfig) -> FlowField:
    """Solve the damped normal equations G [u, v]^T = -b at every pixel.

    G sums the weighted outer products of (cx, cy) over the window plus
    ``alpha * I``; b sums (cx*ct, cy*ct). A pixel is valid only when the
    smaller eigenvalue of G exceeds ``delta`` and the solution is finite.
    """
    taps = window_taps(cfg.window_radius, cfg.window_weighting)
    cx, cy, ct = c.cx, c.cy, c.ct
    with np.errstate(all="ignore"):
        gxx = _window_sum(cx * cx, taps) + cfg.alpha
        gxy = _window_sum(cx * cy, taps)
        gyy = _window_sum(cy * cy, taps) + cfg.alpha
        bx = _window_sum(cx * ct, taps)
        by = _window_sum(cy * ct, taps)

        lam = min_eigenvalue(gxx, gxy, gyy)
        det = gxx * gyy - gxy * gxy
        u = -(gyy * bx - gxy * by) / det
        v = -(gxx * by - gxy * bx) / det

    valid = (lam > cfg.delta) & np.isfinite(u) & np.isfinite(v) & np.isfinite(lam)
    # + 0.0 folds -0.0 into 0.0 so zero flow serializes identically
    return FlowField(np.where(valid, u, 0.0) + 0.0, np.where(valid, v, 0.0) + 0.0, valid)


def compute_flow(
    prev: GrayImage,
    curr: GrayImage,
    next: GrayImage | None = None,
    cfg: SolverConfig | None = None,
) -> FlowField:
    """Blur, differentiate, compose per ``cfg.order`` and solve."""
    cfg = cfg or SolverConfig()
    frames = [gaussian_blur(f, cfg.sigma) if f is not None else None for f in (prev, curr, next)]
    tensor = compute_gradient_tensor(*frames, average_spatial=cfg.average_spatial)
    return solve_lucas_kanade(compose(tensor, cfg.order), cfg)
