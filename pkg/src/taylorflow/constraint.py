"""Gradient tensors and the linear flow constraint ``cx*u + cy*v + ct = 0``.

Two compositions are provided. The first-order one is the classic brightness
constancy constraint. The second-order one folds Hessian entries of I(x, y, t)
into each coefficient::

    cx = Ixy + Ixx/2 + Ix
    cy = Iyt + Iyy/2 + Iy
    ct = Ixt + Itt/2 + It

Time is measured in frames, so every dt factor is one.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Literal

import numpy as np

from .errors import ShapeError
from .image import GrayImage, _frozen, derivative

Order = Literal["first", "second"]

_PLANES = ("ix", "iy", "it", "ixx", "iyy", "itt", "ixy", "ixt", "iyt")
SECOND_ORDER_PLANES = ("ixx", "iyy", "itt", "ixy", "ixt", "iyt")


class _Planes:
    """Shared validation for dataclasses whose fields are equally shaped planes."""

    def __post_init__(self):
        shape = None
        for f in fields(self):
            a = np.asarray(getattr(self, f.name), dtype=np.float64)
            if a.ndim != 2:
                raise ShapeError(f"plane {f.name} must be 2-D, got shape {a.shape}")
            if shape is None:
                shape = a.shape
            elif a.shape != shape:
                raise ShapeError(f"plane {f.name} has shape {a.shape}, expected {shape}")
            if not np.all(np.isfinite(a)):
                raise ValueError(f"plane {f.name} has non-finite samples")
            object.__setattr__(self, f.name, _frozen(a))

    @property
    def shape(self) -> tuple[int, int]:
        return getattr(self, fields(self)[0].name).shape

    def _combine(self, other, a: float, b: float):
        return type(self)(**{f.name: a * getattr(self, f.name) + b * getattr(other, f.name) for f in fields(self)})


@dataclass(frozen=True, eq=False)
class GradientTensor(_Planes):
    ix: np.ndarray
    iy: np.ndarray
    it: np.ndarray
    ixx: np.ndarray
    iyy: np.ndarray
    itt: np.ndarray
    ixy: np.ndarray
    ixt: np.ndarray
    iyt: np.ndarray

    @classmethod
    def zeros(cls, shape: tuple[int, int]) -> "GradientTensor":
        return cls(**{name: np.zeros(shape) for name in _PLANES})

    def linear_combination(self, other: "GradientTensor", a: float, b: float) -> "GradientTensor":
        """``a*self + b*other`` plane by plane."""
        return self._combine(other, a, b)


@dataclass(frozen=True, eq=False)
class ConstraintField(_Planes):
    cx: np.ndarray
    cy: np.ndarray
    ct: np.ndarray

    def linear_combination(self, other: "ConstraintField", a: float, b: float) -> "ConstraintField":
        return self._combine(other, a, b)


def compute_gradient_tensor(
    prev: GrayImage,
    curr: GrayImage,
    next: GrayImage | None = None,
    average_spatial: bool = False,
) -> GradientTensor:
    """Finite-difference Jacobian and Hessian entries of I(x, y, t).

    Spatial derivatives are taken on ``curr`` (or on the mean of ``prev`` and
    ``curr`` with ``average_spatial``). ``it = curr - prev``; the mixed
    temporal planes are spatial derivatives of that difference. ``itt`` uses the
    (1, -2, 1) temporal stencil when ``next`` is given and is zero otherwise.
    """
    frames = [prev, curr] + ([next] if next is not None else [])
    for f in frames[1:]:
        if f.shape != prev.shape:
            raise ShapeError(f"frame shapes differ: {prev.shape} vs {f.shape}")

    base = GrayImage(0.5 * (prev.data + curr.data)) if average_spatial else curr
    ix = derivative(base, "x", 1)
    iy = derivative(base, "y", 1)
    ixx = derivative(base, "x", 2)
    iyy = derivative(base, "y", 2)
    ixy = derivative(ix, "y", 1)

    it = GrayImage(curr.data - prev.data)
    ixt = derivative(it, "x", 1)
    iyt = derivative(it, "y", 1)
    if next is not None:
        itt = next.data - 2.0 * curr.data + prev.data
    else:
        itt = np.zeros(curr.shape)

    return GradientTensor(
        ix=ix.data,
        iy=iy.data,
        it=it.data,
        ixx=ixx.data,
        iyy=iyy.data,
        itt=itt,
        ixy=ixy.data,
        ixt=ixt.data,
        iyt=iyt.data,
    )


def compose_first_order(t: GradientTensor) -> ConstraintField:
    return ConstraintField(cx=t.ix, cy=t.iy, ct=t.it)


def compose_second_order(t: GradientTensor) -> ConstraintField:
    return ConstraintField(
        cx=t.ixy + 0.5 * t.ixx + t.ix,
        cy=t.iyt + 0.5 * t.iyy + t.iy,
        ct=t.ixt + 0.5 * t.itt + t.it,
    )


def compose(t: GradientTensor, order: Order) -> ConstraintField:
    if order == "first":
        return compose_first_order(t)
    if order == "second":
        return compose_second_order(t)
    raise ValueError(f"order must be 'first' or 'second', got {order!r}")
