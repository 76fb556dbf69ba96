"""Command-line interface: reconstruct run | stage | synth | serve."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import pointcloud, synthgen
from .config import Config, ConfigError, dump_config, load_config
from .pipeline import STAGES, PipelineError, run_pipeline, run_stage

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_CONFIG = 4
EXIT_STAGE = 5


def _load_cfg(args) -> Config:
    cfg = Config()
    if args.config:
        cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    for flag, key in (("clean_threshold", "clean_threshold"),
                      ("clean_iterations", "clean_iterations"),
                      ("clean_rays", "clean_rays"),
                      ("alpha", "alpha")):
        value = getattr(args, flag, None)
        if value is not None:
            setattr(cfg, key, value)
    cfg.validate()
    return cfg


def cmd_run(args) -> int:
    try:
        cfg = _load_cfg(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cloud = pointcloud.load(args.input)
    except FileNotFoundError as exc:
        print(exc, file=sys.stderr)
        return EXIT_IO
    except pointcloud.PointCloudError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        session = run_pipeline(cloud, cfg, args.out)
    except PipelineError as exc:
        print(exc, file=sys.stderr)
        return EXIT_STAGE
    report = json.loads((Path(args.out) / "timings.json").read_text())
    print(f"rooms: {len(session.building_model.rooms)}  "
          f"walls: {len(session.building_model.walls)}")
    for k, v in report.items():
        print(f"  {k}: {v:.3f}s")
    return EXIT_OK


def cmd_stage(args) -> int:
    try:
        cfg = _load_cfg(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.name not in STAGES:
        print(f"unknown stage {args.name!r}; stages: {', '.join(STAGES)}", file=sys.stderr)
        return EXIT_USAGE
    try:
        run_stage(args.name, args.dir, cfg)
    except PipelineError as exc:
        print(exc, file=sys.stderr)
        return EXIT_STAGE
    print(f"stage {args.name} complete")
    return EXIT_OK


def _scene_from_json(path: Path) -> "synthgen.SceneSpec":
    doc = json.loads(path.read_text())
    rooms = [
        synthgen.RoomSpec(
            polygon=__import__("numpy").array(r["polygon"], dtype=float),
            z0=float(r["z0"]), z1=float(r["z1"]), story=int(r.get("story", 0)),
        )
        for r in doc["rooms"]
    ]
    return synthgen.SceneSpec(
        rooms=rooms,
        density=float(doc.get("density", 250.0)),
        noise_sigma=float(doc.get("noise_sigma", 0.005)),
        outlier_count=int(doc.get("outlier_count", 0)),
        seed=int(doc.get("seed", 0)),
    )


def cmd_synth(args) -> int:
    try:
        if Path(args.scene).is_file():
            spec = _scene_from_json(Path(args.scene))
            if args.seed is not None:
                spec.seed = args.seed
        else:
            spec = synthgen.scene_by_name(args.scene, seed=args.seed or 0)
    except (synthgen.SceneError, KeyError, json.JSONDecodeError) as exc:
        print(f"scene error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    cloud, gt = synthgen.generate(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    pointcloud.save(cloud, out / "cloud.ply")
    gt_doc = {
        "volumes": gt.volumes.tolist(),
        "point_labels": gt.point_labels.tolist(),
        "wall_segments": [
            {"p0": list(p0), "p1": list(p1), "story": story}
            for p0, p1, story in gt.wall_segments
        ],
        "outlier_count": gt.outlier_count,
    }
    (out / "groundtruth.json").write_text(json.dumps(gt_doc))
    print(f"wrote {len(cloud)} points to {out / 'cloud.ply'}")
    return EXIT_OK


def cmd_serve(args) -> int:
    from .service import serve

    try:
        cfg = _load_cfg(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    serve(args.session, cfg, port=args.port)
    return EXIT_OK


def cmd_config(args) -> int:
    print(dump_config(Config()), end="")
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="reconstruct",
        description="Volumetric building reconstruction from indoor point clouds",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="full pipeline on a point cloud")
    p_run.add_argument("input")
    p_run.add_argument("--config", default=None)
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--clean-threshold", dest="clean_threshold", type=float, default=None)
    p_run.add_argument("--clean-iterations", dest="clean_iterations", type=int, default=None)
    p_run.add_argument("--clean-rays", dest="clean_rays", type=int, default=None)
    p_run.add_argument("--alpha", type=float, default=None)
    p_run.set_defaults(fn=cmd_run)

    p_stage = sub.add_parser("stage", help="re-run one stage against session dumps")
    p_stage.add_argument("name")
    p_stage.add_argument("--dir", required=True)
    p_stage.add_argument("--config", default=None)
    p_stage.add_argument("--seed", type=int, default=None)
    p_stage.set_defaults(fn=cmd_stage)

    p_synth = sub.add_parser("synth", help="generate a synthetic scene")
    p_synth.add_argument("scene")
    p_synth.add_argument("--out", required=True)
    p_synth.add_argument("--seed", type=int, default=None)
    p_synth.set_defaults(fn=cmd_synth)

    p_serve = sub.add_parser("serve", help="interactive steering service")
    p_serve.add_argument("--session", required=True)
    p_serve.add_argument("--port", type=int, default=8472)
    p_serve.add_argument("--config", default=None)
    p_serve.add_argument("--seed", type=int, default=None)
    p_serve.set_defaults(fn=cmd_serve)

    p_cfg = sub.add_parser("config", help="print the default configuration")
    p_cfg.set_defaults(fn=cmd_config)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
