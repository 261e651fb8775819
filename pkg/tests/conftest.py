import os
from pathlib import Path

import numpy as np
import pytest

from taylorflow.datasets import write_kitti_flow
from taylorflow.image import encode_png
from taylorflow.solver import FlowField
from taylorflow.synthetic import Motion, SyntheticSpec, Texture, generate

KITTI_SIZE = (1242, 375)

_acceptance: list[tuple[str, str, str]] = []


def _rgb8(frame, tint=(1.0, 0.9, 0.8)):
    """Tinted 8-bit RGB rendering of a gray frame, like a camera image."""
    rgb = np.stack([frame.data * t for t in tint], axis=2)
    return np.clip(np.rint(rgb * 255), 0, 255).astype(np.uint8)


def build_kitti_layout(root: Path, scenes=None, size=KITTI_SIZE) -> Path:
    """KITTI-2015-shaped directory of synthetic scenes with sparse ground truth."""
    scenes = scenes or [
        ("000000", Texture("random-smooth", seed=11), Motion("translate", 1.5, 0.25)),
        ("000001", Texture("random-smooth", seed=12), Motion("zoom", scale=1.01)),
    ]
    w, h = size
    (root / "image_2").mkdir(parents=True, exist_ok=True)
    (root / "flow_occ").mkdir(parents=True, exist_ok=True)
    for scene_id, texture, motion in scenes:
        scene = generate(SyntheticSpec(texture, motion, w, h))
        for k, frame in zip((10, 11), scene.frames):
            (root / "image_2" / f"{scene_id}_{k}.png").write_bytes(encode_png(_rgb8(frame)))
        valid = np.ones((h, w), bool)
        valid[: int(0.3 * h)] = False  # no lidar returns in the sky band
        gt = FlowField(scene.gt.u, scene.gt.v, valid)
        (root / "flow_occ" / f"{scene_id}_10.png").write_bytes(write_kitti_flow(gt))
    return root


@pytest.fixture(scope="session")
def kitti_standin(tmp_path_factory) -> Path:
    return build_kitti_layout(tmp_path_factory.mktemp("kitti_standin"))


@pytest.fixture(scope="session")
def real_kitti_root() -> Path | None:
    root = os.environ.get("KITTI_FLOW_ROOT")
    if root and (Path(root) / "image_2").is_dir():
        return Path(root)
    return None


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        label = report.nodeid.split("::")[-1]
        _acceptance.append((label, report.outcome.upper(), report.when))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for label, outcome, _ in _acceptance:
        terminalreporter.write_line(f"{outcome:8s} {label}")
