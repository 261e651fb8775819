"""Command-line entry point: compute, evaluate, visualize, synthesize, bench.

Exit status is 0 on success, 1 on an internal or numerical failure and 2 on a
usage or input error.
"""

from __future__ import annotations

import argparse
import contextlib
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

from . import __version__
from .datasets import (
    DatasetPair,
    GroundTruth,
    enumerate_pairs,
    read_flo,
    read_flow_file,
    write_flo,
)
from .errors import FlowError
from .image import encode_gray_png, encode_png, read_gray
from .metrics import DEFAULT_THRESHOLDS, EvaluationReport, _fmt, _mean, _threshold_key, evaluate_pair
from .solver import SolverConfig, compute_flow
from .synthetic import Motion, SyntheticSpec, Texture, generate
from .viz import flow_to_color, flow_to_quiver

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USAGE = 2

ORDERS = ("first", "second")


class InputError(Exception):
    """Bad or missing user input; maps to exit status 2."""


class StageError(Exception):
    def __init__(self, stage: str, exc: BaseException):
        super().__init__(f"{stage}: {exc}")
        self.stage = stage
        self.exc = exc


@contextlib.contextmanager
def stage(name: str):
    try:
        yield
    except (InputError, StageError):
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


@dataclass
class RunConfig:
    solver: SolverConfig = field(default_factory=SolverConfig)
    kind: str = "kitti"
    inputs: dict[str, Path] = field(default_factory=dict)
    output: Path | None = None
    thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS
    color_out: Path | None = None
    quiver_out: Path | None = None
    three_frame: bool = False


def _existing(path: str | Path | None, what: str) -> Path:
    if path is None:
        raise InputError(f"missing {what}")
    p = Path(path)
    if not p.is_file():
        raise InputError(f"{what} not found: {p}")
    return p


def _writable_parent(path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _parse_thresholds(text: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad threshold list {text!r}") from None
    if not vals or any(not v > 0 for v in vals):
        raise argparse.ArgumentTypeError("thresholds must be positive numbers")
    return vals


def _solver_from_args(args, order: str | None = None) -> SolverConfig:
    return SolverConfig(
        order=order or args.order,
        window_radius=args.window_radius,
        alpha=args.alpha,
        delta=args.delta,
        sigma=args.sigma,
        window_weighting=args.window_weighting,
        average_spatial=args.average_spatial,
    )


def _write_png(path: Path, rgb) -> None:
    _writable_parent(path).write_bytes(encode_png(rgb))


# ---------------------------------------------------------------------------
# commands


def cmd_compute(cfg: RunConfig) -> int:
    frame0 = _existing(cfg.inputs.get("frame0"), "first frame")
    frame1 = _existing(cfg.inputs.get("frame1"), "second frame")
    frame2 = _existing(cfg.inputs.get("frame2"), "third frame") if cfg.three_frame else None
    if cfg.output is None:
        raise InputError("missing output path")
    with stage("decode frames"):
        prev = read_gray(frame0)
        curr = read_gray(frame1)
        nxt = read_gray(frame2) if frame2 is not None else None
    t0 = time.perf_counter()
    with stage("compute flow"):
        flow = compute_flow(prev, curr, nxt, cfg.solver)
    elapsed = time.perf_counter() - t0
    with stage("write flow"):
        _writable_parent(cfg.output).write_bytes(write_flo(flow))
    with stage("render visualizations"):
        if cfg.color_out is not None:
            _write_png(cfg.color_out, flow_to_color(flow))
        if cfg.quiver_out is not None:
            _write_png(cfg.quiver_out, flow_to_quiver(prev, flow))
    print(f"order={cfg.solver.order} size={flow.shape[1]}x{flow.shape[0]} time={elapsed:.3f}s valid_fraction={flow.valid_fraction:.6f}")
    print(f"wrote {cfg.output}")
    return EXIT_OK


def _load_gt(path: Path) -> GroundTruth:
    return read_flow_file(path)


def _check_shapes(est_shape, gt_shape):
    if est_shape != gt_shape:
        raise InputError(
            f"shape mismatch: estimate is {est_shape[1]}x{est_shape[0]}, ground truth is {gt_shape[1]}x{gt_shape[0]}"
        )


def cmd_evaluate(cfg: RunConfig, scene_id: str = "") -> int:
    est_path = _existing(cfg.inputs.get("estimate"), "estimate")
    gt_path = _existing(cfg.inputs.get("gt"), "ground truth")
    with stage("read flow files"):
        est = read_flow_file(est_path).flow
        gt = _load_gt(gt_path)
    _check_shapes(est.shape, gt.shape)
    with stage("evaluate"):
        report = evaluate_pair(est, gt, cfg.thresholds, scene_id or est_path.stem)
    text = report.to_text()
    sys.stdout.write(text)
    if cfg.output is not None:
        _writable_parent(cfg.output).write_text(text)
    return EXIT_OK


def cmd_visualize(args) -> int:
    flow_path = _existing(args.flow, "flow file")
    with stage("read flow"):
        flow = read_flow_file(flow_path).flow
    if args.color is None and args.quiver is None:
        raise InputError("nothing to render: pass --color and/or --quiver")
    with stage("render color"):
        if args.color is not None:
            _write_png(Path(args.color), flow_to_color(flow, args.max_magnitude))
    if args.quiver is not None:
        base_path = _existing(args.base, "base frame for --quiver")
        with stage("decode base frame"):
            base = read_gray(base_path)
        _check_shapes(flow.shape, base.shape)
        with stage("render quiver"):
            _write_png(Path(args.quiver), flow_to_quiver(base, flow, args.stride, args.scale))
    return EXIT_OK


def cmd_synthesize(spec: SyntheticSpec, out: Path, three_frame: bool = False) -> int:
    with stage("render synthetic scene"):
        scene = generate(spec, 3 if three_frame else 2)
    with stage("write synthetic scene"):
        out.mkdir(parents=True, exist_ok=True)
        for k, frame in enumerate(scene.frames):
            (out / f"frame{k}.png").write_bytes(encode_gray_png(frame, 16))
        (out / "gt.flo").write_bytes(write_flo(scene.gt))
    print(f"wrote {len(scene.frames)} frames and gt.flo to {out}")
    return EXIT_OK


@dataclass
class SceneResult:
    scene_id: str
    reports: dict[str, EvaluationReport]
    valid_fraction: dict[str, float]


def _bench_scene(pair: DatasetPair, cfg: RunConfig, flow_dir: Path | None) -> SceneResult:
    if pair.gt_path is None:
        raise InputError(f"scene {pair.scene_id} has no ground truth")
    with stage(f"decode scene {pair.scene_id}"):
        prev = read_gray(pair.frame0_path)
        curr = read_gray(pair.frame1_path)
        nxt = None
        if cfg.three_frame:
            if pair.frame2_path is None:
                raise InputError(f"scene {pair.scene_id} has no third frame for three-frame mode")
            nxt = read_gray(pair.frame2_path)
        gt = _load_gt(pair.gt_path)
    _check_shapes(prev.shape, gt.shape)
    reports, fractions = {}, {}
    for order in ORDERS:
        with stage(f"compute flow ({order}) for scene {pair.scene_id}"):
            flow = compute_flow(prev, curr, nxt, replace(cfg.solver, order=order))
            # evaluate exactly what a .flo file would hold
            blob = write_flo(flow)
            flow = read_flo(blob)
        if flow_dir is not None:
            (flow_dir / f"{pair.scene_id}_{order}.flo").write_bytes(blob)
        reports[order] = evaluate_pair(flow, gt, cfg.thresholds, pair.scene_id)
        fractions[order] = flow.valid_fraction
    return SceneResult(pair.scene_id, reports, fractions)


def bench_table(results: Sequence[SceneResult], thresholds: Sequence[float]) -> str:
    cols = ["scene_id"]
    cols += [f"aee_{o}" for o in ORDERS]
    for t in thresholds:
        cols += [f"{_threshold_key(t)}_{o}" for o in ORDERS]
    cols += [f"valid_{o}" for o in ORDERS]
    cols += [f"evaluated_{o}" for o in ORDERS]
    cols += ["total"]

    def row(name, aee, pep, valid, evaluated, total):
        cells = [name]
        cells += [_fmt(aee[o]) for o in ORDERS]
        for t in thresholds:
            cells += [_fmt(pep[o][t]) for o in ORDERS]
        cells += [f"{valid[o]:.6f}" for o in ORDERS]
        cells += [str(evaluated[o]) for o in ORDERS]
        cells += [str(total)]
        return ",".join(cells)

    lines = [",".join(cols)]
    for r in results:
        lines.append(
            row(
                r.scene_id,
                {o: r.reports[o].aee for o in ORDERS},
                {o: {float(t): r.reports[o].pep[float(t)] for t in thresholds} for o in ORDERS},
                r.valid_fraction,
                {o: r.reports[o].evaluated_pixels for o in ORDERS},
                r.reports[ORDERS[0]].total_pixels,
            )
        )
    if results:
        lines.append(
            row(
                "mean",
                {o: _mean(r.reports[o].aee for r in results) for o in ORDERS},
                {o: {float(t): _mean(r.reports[o].pep[float(t)] for r in results) for t in thresholds} for o in ORDERS},
                {o: _mean(r.valid_fraction[o] for r in results) for o in ORDERS},
                {o: sum(r.reports[o].evaluated_pixels for r in results) for o in ORDERS},
                sum(r.reports[ORDERS[0]].total_pixels for r in results),
            )
        )
    return "\n".join(lines) + "\n"


def cmd_bench(
    cfg: RunConfig,
    gt_variant: str = "flow_occ",
    jobs: int = 1,
    flow_dir: Path | None = None,
    limit: int | None = None,
) -> int:
    root = cfg.inputs.get("root")
    if root is None or not Path(root).is_dir():
        raise InputError(f"dataset root not found: {root}")
    if cfg.output is None:
        raise InputError("missing output table path")
    with stage("enumerate dataset"):
        pairs = [p for p in enumerate_pairs(root, cfg.kind, gt_variant) if p.gt_path is not None]
    if limit is not None:
        pairs = pairs[:limit]
    if flow_dir is not None:
        flow_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(lambda p: _bench_scene(p, cfg, flow_dir), pairs))
    else:
        results = [_bench_scene(p, cfg, flow_dir) for p in pairs]
    elapsed = time.perf_counter() - t0

    table = bench_table(results, cfg.thresholds)
    _writable_parent(cfg.output).write_text(table)
    meta = {
        "dataset": cfg.kind,
        "root": str(root),
        "ground_truth": gt_variant if cfg.kind == "kitti" else "flow10.flo",
        "scenes": str(len(results)),
        "three_frame": str(cfg.three_frame).lower(),
        **{k: str(v) for k, v in cfg.solver.to_dict().items() if k != "order"},
    }
    meta_path = cfg.output.with_name(cfg.output.name + ".meta")
    meta_path.write_text("".join(f"{k}={meta[k]}\n" for k in sorted(meta)))
    sys.stdout.write(table)
    if results:
        a1 = _mean(r.reports["first"].aee for r in results)
        a2 = _mean(r.reports["second"].aee for r in results)
        if not (math.isnan(a1) or math.isnan(a2)):
            verdict = "lower" if a2 < a1 else "not lower"
            print(f"mean AEE first={a1:.6f} second={a2:.6f}: second-order AEE is {verdict} ({len(results)} scenes)")
    print(f"bench time={elapsed:.3f}s")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _add_solver_flags(p: argparse.ArgumentParser, with_order: bool = True) -> None:
    d = SolverConfig()
    if with_order:
        p.add_argument("--order", choices=ORDERS, default=d.order, help="constraint order (default: %(default)s)")
    p.add_argument("--window-radius", type=int, default=d.window_radius, help="window side is 2r+1 (default: %(default)s)")
    p.add_argument("--alpha", type=float, default=d.alpha, help="Tikhonov damping (default: %(default)s)")
    p.add_argument("--delta", type=float, default=d.delta, help="minimum-eigenvalue tolerance (default: %(default)s)")
    p.add_argument("--sigma", type=float, default=d.sigma, help="pre-blur sigma (default: %(default)s)")
    p.add_argument("--window-weighting", choices=("uniform", "gaussian"), default=d.window_weighting)
    p.add_argument("--average-spatial", action="store_true", help="take spatial derivatives on the mean of both frames")
    p.add_argument("--three-frame", action="store_true", help="use a third frame for the second temporal derivative")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="taylorflow", description="Dense Lucas-Kanade flow with first- or second-order constraints.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compute", help="estimate flow between two (or three) frames")
    p.add_argument("--frame0", required=True)
    p.add_argument("--frame1", required=True)
    p.add_argument("--frame2", help="third frame (with --three-frame)")
    p.add_argument("--out", required=True, help="output .flo path")
    p.add_argument("--color", help="optional color-wheel png")
    p.add_argument("--quiver", help="optional quiver-overlay png")
    _add_solver_flags(p)

    p = sub.add_parser("evaluate", help="compare an estimate against ground truth")
    p.add_argument("--estimate", required=True, help=".flo or KITTI .png")
    p.add_argument("--gt", required=True, help=".flo or KITTI .png")
    p.add_argument("--scene-id", default="")
    p.add_argument("--thresholds", type=_parse_thresholds, default=DEFAULT_THRESHOLDS, help="comma-separated PEP thresholds")
    p.add_argument("--out", help="write the key=value report here")

    p = sub.add_parser("visualize", help="render a flow file")
    p.add_argument("--flow", required=True)
    p.add_argument("--color", help="color-wheel png output")
    p.add_argument("--max-magnitude", type=float, default=None)
    p.add_argument("--quiver", help="quiver png output (needs --base)")
    p.add_argument("--base", help="gray frame under the arrows")
    p.add_argument("--stride", type=int, default=16)
    p.add_argument("--scale", type=float, default=1.0)

    p = sub.add_parser("synthesize", help="write a synthetic pair with exact ground truth")
    p.add_argument("--texture", choices=("quadratic-bowl", "sinusoid-grid", "random-smooth"), default="sinusoid-grid")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--motion", choices=("translate", "rotate", "zoom"), default="translate")
    p.add_argument("--u", type=float, default=1.0, help="translation x (px)")
    p.add_argument("--v", type=float, default=0.0, help="translation y (px)")
    p.add_argument("--theta", type=float, default=2.0, help="rotation (degrees)")
    p.add_argument("--zoom", type=float, default=1.02, help="zoom factor")
    p.add_argument("--width", type=int, default=256)
    p.add_argument("--height", type=int, default=256)
    p.add_argument("--three-frame", action="store_true", help="also write frame2.png")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("bench", help="run both constraint orders over a dataset")
    p.add_argument("--root", required=True)
    p.add_argument("--kind", choices=("kitti", "middlebury"), default="kitti")
    p.add_argument("--gt-variant", choices=("flow_occ", "flow_noc"), default="flow_occ")
    p.add_argument("--thresholds", type=_parse_thresholds, default=DEFAULT_THRESHOLDS)
    p.add_argument("--out", required=True, help="output csv table")
    p.add_argument("--save-flow", help="directory for per-scene .flo outputs")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--limit", type=int, default=None, help="only the first N scenes by id")
    _add_solver_flags(p, with_order=False)
    return parser


def _dispatch(args) -> int:
    if args.command == "compute":
        cfg = RunConfig(
            solver=_solver_from_args(args),
            inputs={"frame0": args.frame0, "frame1": args.frame1, "frame2": args.frame2},
            output=Path(args.out),
            color_out=Path(args.color) if args.color else None,
            quiver_out=Path(args.quiver) if args.quiver else None,
            three_frame=args.three_frame,
        )
        return cmd_compute(cfg)
    if args.command == "evaluate":
        cfg = RunConfig(
            inputs={"estimate": args.estimate, "gt": args.gt},
            output=Path(args.out) if args.out else None,
            thresholds=args.thresholds,
        )
        return cmd_evaluate(cfg, args.scene_id)
    if args.command == "visualize":
        return cmd_visualize(args)
    if args.command == "synthesize":
        motion = Motion(args.motion, u=args.u, v=args.v, theta=args.theta, scale=args.zoom)
        spec = SyntheticSpec(Texture(args.texture, seed=args.seed), motion, args.width, args.height)
        return cmd_synthesize(spec, Path(args.out), args.three_frame)
    if args.command == "bench":
        cfg = RunConfig(
            solver=_solver_from_args(args, order="first"),
            kind=args.kind,
            inputs={"root": args.root},
            output=Path(args.out),
            thresholds=args.thresholds,
            three_frame=args.three_frame,
        )
        if args.jobs < 1:
            raise InputError("--jobs must be >= 1")
        if args.limit is not None and args.limit < 0:
            raise InputError("--limit must be >= 0")
        flow_dir = Path(args.save_flow) if args.save_flow else None
        return cmd_bench(cfg, args.gt_variant, args.jobs, flow_dir, args.limit)
    raise InputError(f"unknown command {args.command}")


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except StageError as exc:
        # malformed inputs and bad parameters are the user's; everything else is ours
        code = EXIT_USAGE if isinstance(exc.exc, (FlowError, OSError)) else EXIT_INTERNAL
        print(f"error in stage '{exc.stage}': {exc.exc}", file=sys.stderr)
        return code
    except FlowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
