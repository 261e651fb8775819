"""Endpoint-error metrics and report serialization.

Both estimate and ground truth carry validity masks; every metric is evaluated
over their intersection only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .datasets import GroundTruth, as_flow
from .errors import EmptyEvaluationError, ParameterError, ShapeError
from .solver import FlowField

DEFAULT_THRESHOLDS = (1.0, 2.0, 3.0)


def _endpoint_errors(est: FlowField | GroundTruth, gt: FlowField | GroundTruth) -> tuple[np.ndarray, int]:
    est, gt = as_flow(est), as_flow(gt)
    if est.shape != gt.shape:
        raise ShapeError(f"estimate is {est.shape[1]}x{est.shape[0]}, ground truth is {gt.shape[1]}x{gt.shape[0]}")
    mask = est.valid & gt.valid
    du = est.u[mask] - gt.u[mask]
    dv = est.v[mask] - gt.v[mask]
    return np.sqrt(du * du + dv * dv), mask.size


def endpoint_error_map(est: FlowField | GroundTruth, gt: FlowField | GroundTruth) -> np.ndarray:
    """Per-pixel endpoint error, NaN outside the shared mask."""
    est, gt = as_flow(est), as_flow(gt)
    if est.shape != gt.shape:
        raise ShapeError(f"estimate is {est.shape}, ground truth is {gt.shape}")
    ee = np.sqrt((est.u - gt.u) ** 2 + (est.v - gt.v) ** 2)
    return np.where(est.valid & gt.valid, ee, np.nan)


def average_endpoint_error(est: FlowField | GroundTruth, gt: FlowField | GroundTruth) -> float:
    """Mean endpoint error over pixels valid in both fields.

    The sum is correctly rounded (``math.fsum``), so the result does not depend
    on pixel order. Raises EmptyEvaluationError when the masks do not overlap.
    """
    ee, _ = _endpoint_errors(est, gt)
    if ee.size == 0:
        raise EmptyEvaluationError("no pixel is valid in both estimate and ground truth")
    return math.fsum(ee.tolist()) / ee.size


def percentage_erroneous_pixels(est: FlowField | GroundTruth, gt: FlowField | GroundTruth, threshold: float) -> float:
    """Percentage of shared-mask pixels whose endpoint error is strictly above ``threshold``."""
    if not threshold > 0:
        raise ParameterError(f"threshold must be > 0, got {threshold}")
    ee, _ = _endpoint_errors(est, gt)
    if ee.size == 0:
        raise EmptyEvaluationError("no pixel is valid in both estimate and ground truth")
    return 100.0 * int(np.count_nonzero(ee > threshold)) / ee.size


def _threshold_key(t: float) -> str:
    return f"pep_{int(t)}" if float(t).is_integer() else f"pep_{t:g}"


@dataclass(frozen=True)
class EvaluationReport:
    scene_id: str
    aee: float
    pep: dict[float, float]
    evaluated_pixels: int
    total_pixels: int
    extra: dict[str, str] = field(default_factory=dict)

    @property
    def empty(self) -> bool:
        return self.evaluated_pixels == 0

    def to_text(self) -> str:
        """Flat ``key=value`` lines."""
        lines = [f"scene_id={self.scene_id}", f"aee={_fmt(self.aee)}"]
        for t in sorted(self.pep):
            lines.append(f"{_threshold_key(t)}={_fmt(self.pep[t])}")
        lines.append(f"evaluated={self.evaluated_pixels}")
        lines.append(f"total={self.total_pixels}")
        for k in sorted(self.extra):
            lines.append(f"{k}={self.extra[k]}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "EvaluationReport":
        kv = {}
        for line in text.splitlines():
            if line.strip():
                k, _, v = line.partition("=")
                kv[k.strip()] = v.strip()
        pep = {}
        extra = {}
        for k, v in kv.items():
            if k.startswith("pep_"):
                pep[float(k[4:])] = float(v)
            elif k not in ("scene_id", "aee", "evaluated", "total"):
                extra[k] = v
        return cls(
            scene_id=kv["scene_id"],
            aee=float(kv["aee"]),
            pep=pep,
            evaluated_pixels=int(kv["evaluated"]),
            total_pixels=int(kv["total"]),
            extra=extra,
        )


def _fmt(x: float) -> str:
    return "nan" if math.isnan(x) else repr(float(x))


def evaluate_pair(
    est: FlowField | GroundTruth,
    gt: FlowField | GroundTruth,
    thresholds: Sequence[float] = DEFAULT_THRESHOLDS,
    scene_id: str = "",
) -> EvaluationReport:
    """AEE plus PEP at each threshold. An empty mask intersection yields NaN metrics and zero evaluated pixels."""
    ee, total = _endpoint_errors(est, gt)
    for t in thresholds:
        if not t > 0:
            raise ParameterError(f"threshold must be > 0, got {t}")
    if ee.size == 0:
        return EvaluationReport(scene_id, math.nan, {float(t): math.nan for t in thresholds}, 0, total)
    aee = math.fsum(ee.tolist()) / ee.size
    pep = {float(t): 100.0 * int(np.count_nonzero(ee > t)) / ee.size for t in thresholds}
    return EvaluationReport(scene_id, aee, pep, int(ee.size), total)


def aggregate_table(rows: Iterable[EvaluationReport], thresholds: Sequence[float] = DEFAULT_THRESHOLDS) -> str:
    """Comma-separated table of reports with a trailing mean row."""
    rows = list(rows)
    keys = [_threshold_key(t) for t in thresholds]
    lines = [",".join(["scene_id", "aee", *keys, "evaluated", "total"])]
    for r in rows:
        lines.append(
            ",".join([r.scene_id, _fmt(r.aee), *(_fmt(r.pep[float(t)]) for t in thresholds), str(r.evaluated_pixels), str(r.total_pixels)])
        )
    if rows:
        lines.append(
            ",".join(
                [
                    "mean",
                    _fmt(_mean(r.aee for r in rows)),
                    *(_fmt(_mean(r.pep[float(t)] for r in rows)) for t in thresholds),
                    str(sum(r.evaluated_pixels for r in rows)),
                    str(sum(r.total_pixels for r in rows)),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def _mean(values: Iterable[float]) -> float:
    vals = [v for v in values if not math.isnan(v)]
    return math.fsum(vals) / len(vals) if vals else math.nan
