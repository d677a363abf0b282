"""Command-line entry points.

Exit codes for ``run``: 0 on navigation success, 2 on navigation failure,
1 on configuration errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path

from . import report
from .errors import HamNavError
from .pipeline import AblationFlags, PipelineConfig, run
from .reasoning import OracleRules, RemoteConfig, make_backend
from .sketchmap import parse_bundle, write_bundle
from .simulator import (
    DistortionConfig,
    distort,
    fixture_world_names,
    ground_truth_sketch,
    load_fixture_world,
    load_world,
)


def default_rules_path() -> Path:
    return Path(str(resources.files("hamnav.data").joinpath("cooccurrence.json")))


def _load_world_arg(value: str):
    path = Path(value)
    if path.exists():
        return load_world(path)
    if value in fixture_world_names():
        return load_fixture_world(value)
    raise FileNotFoundError(f"world {value!r} is neither a file nor a fixture "
                            f"({', '.join(fixture_world_names())})")


def _make_backend(args) -> object:
    rules = OracleRules.from_file(args.rules, visibility_radius=args.visibility_radius)
    remote_config = None
    if args.backend == "remote":
        if not args.remote_url:
            raise ValueError("--remote-url is required with --backend remote")
        remote_config = RemoteConfig(base_url=args.remote_url, model=args.remote_model,
                                     timeout_s=args.remote_timeout,
                                     retries=args.remote_retries)
    return make_backend(args.backend, rules=rules, remote_config=remote_config)


def _distortion_from_args(args, seed: int) -> DistortionConfig:
    return DistortionConfig(jitter_sigma=args.jitter, omission_rate=args.omission,
                            scale_warp=(args.warp_lo, args.warp_hi), seed=seed)


def _pipeline_config(args) -> PipelineConfig:
    return PipelineConfig(
        node_interval=args.node_interval,
        max_steps=args.max_steps,
        deterministic=args.deterministic,
        save_images=not args.no_images,
        spl_ref=args.spl_ref,
        stride=args.stride,
    )


def cmd_run(args) -> int:
    world = _load_world_arg(args.world)
    if args.sketch:
        hmap = parse_bundle(args.sketch)
    elif args.distort_sketch:
        hmap = distort(world, ground_truth_sketch(world),
                       _distortion_from_args(args, args.seed))
    else:
        hmap = ground_truth_sketch(world)

    backend = _make_backend(args)
    flags = AblationFlags.from_names(args.ablate)
    out_dir = Path(args.out) if args.out else None
    trace, metrics = run(hmap, world, backend, flags, seed=args.seed,
                         config=_pipeline_config(args), out_dir=out_dir)
    print(metrics.summary_line())
    if out_dir is not None:
        report.save_trajectory_figure(world, trace.poses, out_dir / "trajectory.png")
    return 0 if metrics.success else 2


def cmd_eval(args) -> int:
    suite = json.loads(Path(args.suite).read_text())
    worlds = suite.get("worlds") or fixture_world_names()
    distortion = suite.get("distortion", {})
    trials = int(suite.get("trials", args.seeds))
    variants = [v.strip() for v in args.ablate_list.split(",") if v.strip()]

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    detail_lines = ["variant\tworld\tseed\tsr\tspl\td_m\tsteps\tstatus"]
    for variant in variants:
        flags = AblationFlags.from_names(variant)
        totals = {"sr": 0.0, "spl": 0.0, "d_m": 0.0, "steps": 0.0, "backend_s": 0.0}
        episodes = 0
        for seed in range(trials):
            world = _load_world_arg(worlds[seed % len(worlds)])
            sketch = ground_truth_sketch(world)
            if distortion:
                sketch = distort(world, sketch, DistortionConfig(
                    jitter_sigma=float(distortion.get("jitter_sigma", 0.0)),
                    omission_rate=float(distortion.get("omission_rate", 0.0)),
                    scale_warp=tuple(distortion.get("scale_warp", (1.0, 1.0))),
                    seed=seed,
                ))
            backend = _make_backend(args)
            episodes += 1
            try:
                trace, metrics = run(sketch, world, backend, flags, seed=seed,
                                     config=_pipeline_config(args))
                totals["sr"] += metrics.success
                totals["spl"] += metrics.spl
                totals["d_m"] += metrics.distance_m
                totals["steps"] += metrics.steps
                totals["backend_s"] += metrics.backend_latency_s
                detail_lines.append(
                    f"{variant}\t{world.name}\t{seed}\t{int(metrics.success)}"
                    f"\t{metrics.spl:.3f}\t{metrics.distance_m:.2f}"
                    f"\t{metrics.steps}\t{trace.status}")
            except HamNavError as exc:
                # A failed episode scores zero but never aborts the suite.
                detail_lines.append(f"{variant}\t{world.name}\t{seed}\t0\t0.000\t0.00\t0\terror:{exc}")
        rows.append({
            "variant": variant, "episodes": episodes,
            "sr": totals["sr"] / episodes, "spl": totals["spl"] / episodes,
            "d_m": totals["d_m"] / episodes, "steps": totals["steps"] / episodes,
            "backend_s": totals["backend_s"] / episodes,
        })

    table = report.write_eval_table(rows, out_dir / "results.tsv")
    (out_dir / "episodes.tsv").write_text("\n".join(detail_lines) + "\n")
    report.save_eval_figure(rows, out_dir / "results.png")
    sys.stdout.write(table.read_text())
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app

    rules = OracleRules.from_file(args.rules, visibility_radius=args.visibility_radius)
    uvicorn.run(create_app(rules=rules), host=args.host, port=args.port, log_level="info")
    return 0


def cmd_detect_turns(args) -> int:
    import numpy as np
    from PIL import Image

    from .perception import detect_turns

    mask = np.asarray(Image.open(args.mask).convert("L"))
    for turn in detect_turns(mask):
        b = turn.bbox
        print(f"{turn.direction.upper()} {b.x_min:.0f} {b.y_min:.0f} {b.x_max:.0f} {b.y_max:.0f}")
    return 0


def cmd_make_sketch(args) -> int:
    world = _load_world_arg(args.world)
    hmap = ground_truth_sketch(world)
    if args.distort_sketch:
        hmap = distort(world, hmap, _distortion_from_args(args, args.seed))
    write_bundle(hmap, args.out)
    print(f"wrote bundle to {args.out}")
    return 0


def _add_backend_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--backend", choices=("oracle", "remote"), default="oracle")
    parser.add_argument("--rules", default=str(default_rules_path()),
                        help="co-occurrence rules JSON for the oracle backend")
    parser.add_argument("--visibility-radius", type=int, default=0,
                        help="hops around a candidate whose landmarks count for it")
    parser.add_argument("--remote-url", default="",
                        help="chat-completions base URL for --backend remote")
    parser.add_argument("--remote-model", default="gpt-4o")
    parser.add_argument("--remote-timeout", type=float, default=60.0)
    parser.add_argument("--remote-retries", type=int, default=2)


def _add_run_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--max-steps", type=int, default=None)
    parser.add_argument("--node-interval", type=float, default=None)
    parser.add_argument("--stride", type=int, default=1)
    parser.add_argument("--deterministic", action="store_true",
                        help="zero out timestamps/latencies for byte-stable traces")
    parser.add_argument("--no-images", action="store_true",
                        help="skip writing per-step visual prompt PNGs")
    parser.add_argument("--spl-ref", choices=("shortest", "sketch"), default="shortest")
    parser.add_argument("--jitter", type=float, default=0.0,
                        help="landmark jitter sigma as a fraction of the drawing diagonal")
    parser.add_argument("--omission", type=float, default=0.0)
    parser.add_argument("--warp-lo", type=float, default=1.0)
    parser.add_argument("--warp-hi", type=float, default=1.0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hamnav",
                                     description="Hand-drawn map navigation harness")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one episode and print SR/SPL/D/STEPS")
    p_run.add_argument("--world", required=True, help="world file or fixture name")
    src = p_run.add_mutually_exclusive_group()
    src.add_argument("--sketch", help="sketch bundle directory or zip")
    src.add_argument("--distort", dest="distort_sketch", action="store_true",
                     help="generate a distorted sketch from the world")
    p_run.add_argument("--ablate", default="", help="comma list: no_ldict,no_pred,no_pruning,no_em")
    p_run.add_argument("--out", default=None, help="trace/figure output directory")
    _add_backend_args(p_run)
    _add_run_args(p_run)
    p_run.set_defaults(func=cmd_run)

    p_eval = sub.add_parser("eval", help="run an ablation suite and write results table")
    p_eval.add_argument("--suite", required=True, help="suite JSON (worlds, distortion, trials)")
    p_eval.add_argument("--ablate-list", default="full",
                        help="comma list of variants, e.g. full,no_pred,no_em")
    p_eval.add_argument("--seeds", type=int, default=5, help="trials when the suite omits it")
    p_eval.add_argument("--out", required=True)
    _add_backend_args(p_eval)
    _add_run_args(p_eval)
    p_eval.set_defaults(func=cmd_eval, no_images=True)

    p_serve = sub.add_parser("serve", help="HTTP API for the browser UI")
    p_serve.add_argument("--port", type=int, default=8008)
    p_serve.add_argument("--host", default="127.0.0.1")
    _add_backend_args(p_serve)
    p_serve.set_defaults(func=cmd_serve)

    p_turns = sub.add_parser("detect-turns", help="print structural turns found in a mask PNG")
    p_turns.add_argument("--mask", required=True)
    p_turns.set_defaults(func=cmd_detect_turns)

    p_sketch = sub.add_parser("make-sketch", help="export a (optionally distorted) world sketch bundle")
    p_sketch.add_argument("--world", required=True)
    p_sketch.add_argument("--out", required=True)
    p_sketch.add_argument("--distort", dest="distort_sketch", action="store_true")
    p_sketch.add_argument("--seed", type=int, default=0)
    p_sketch.add_argument("--jitter", type=float, default=0.0)
    p_sketch.add_argument("--omission", type=float, default=0.0)
    p_sketch.add_argument("--warp-lo", type=float, default=1.0)
    p_sketch.add_argument("--warp-hi", type=float, default=1.0)
    p_sketch.set_defaults(func=cmd_make_sketch)

    return parser


def main(argv: "list[str] | None" = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (HamNavError, FileNotFoundError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
