"""Full reconstruction pipeline with per-stage artifacts.

Stages write their outputs into a session directory so any stage can be
re-run against the previous dumps (e.g. re-solving with a new alpha
without re-detecting planes). Timings are reported per pipeline phase.
"""

from __future__ import annotations

import json
import pickle
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import building, candidates, cellcomplex, cleaning, planes, pointcloud, priors, roomlabel
from .config import Config
from .ilp import build_model, solve, validate
from .ilp.validate import recompute_objective

STAGES = ["detect", "clean", "label", "candidates", "complex", "priors", "solve", "extract"]


class PipelineError(Exception):
    def __init__(self, stage, cause):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class Session:
    """In-memory pipeline state, mirrored to a directory of stage dumps."""

    directory: Path
    config: Config
    cloud: pointcloud.PointCloud | None = None
    detected: list = None
    labels: object = None
    surfaces: list = None
    walls: list = None
    complex: object = None
    cell_pr: np.ndarray | None = None
    face_pr: np.ndarray | None = None
    model: object = None
    labeling: object = None
    building_model: object = None
    timings: dict = field(default_factory=dict)

    def dump(self, name: str, obj) -> None:
        self.directory.mkdir(parents=True, exist_ok=True)
        with open(self.directory / f"{name}.pkl", "wb") as fh:
            pickle.dump(obj, fh)

    def load(self, name: str):
        path = self.directory / f"{name}.pkl"
        if not path.exists():
            raise PipelineError(name, f"missing prerequisite dump {path}")
        with open(path, "rb") as fh:
            return pickle.load(fh)


def _timed(session: Session, key: str, fn):
    t0 = time.monotonic()
    out = fn()
    session.timings[key] = session.timings.get(key, 0.0) + time.monotonic() - t0
    return out


def prepare_cloud(session: Session) -> None:
    cfg = session.config
    cloud = session.cloud
    cloud = pointcloud.subsample(cloud, cfg.subsample_min_dist)
    if not cloud.has_normals:
        cloud = pointcloud.estimate_normals(cloud, k=cfg.normals_k)
    session.cloud = cloud


def stage_detect(session: Session) -> None:
    cfg = session.config
    params = planes.RansacParams(
        distance=cfg.ransac_distance,
        normal_tol_deg=cfg.ransac_normal_tol_deg,
        cluster_eps=cfg.ransac_cluster_eps,
        min_points=cfg.ransac_min_points,
        miss_prob=cfg.ransac_miss_prob,
        pixel_size=cfg.occupancy_pixel,
        seed=cfg.seed,
    )
    session.detected = _timed(session, "plane_detection",
                              lambda: planes.detect_planes(session.cloud, params))
    session.dump("cloud", session.cloud)
    session.dump("detect", session.detected)


def stage_clean(session: Session) -> None:
    cfg = session.config

    def run():
        cloud, dplanes, removed = cleaning.clean(
            session.cloud, session.detected,
            threshold=cfg.clean_threshold,
            iterations=cfg.clean_iterations,
            n_rays=cfg.clean_rays,
            seed=cfg.seed,
        )
        return cloud, dplanes, removed

    session.cloud, session.detected, removed = _timed(session, "cleaning", run)
    session.dump("cloud", session.cloud)
    session.dump("clean", (session.detected, removed))


def stage_label(session: Session) -> None:
    cfg = session.config

    def run():
        patches, lookup = roomlabel.build_patches(session.detected, session.cloud, cfg.patch_size)
        graph = roomlabel.visibility_graph(patches, session.detected, eps=cfg.visibility_eps)
        plabels = roomlabel.markov_cluster(graph, inflation=cfg.mcl_inflation)
        pts = roomlabel.label_points(session.cloud, plabels, patches, lookup,
                                     session.detected, cfg.patch_size)
        return pts

    labels = _timed(session, "auto_labeling", run)
    session.labels = labels
    session.cloud.labels = labels.assignment
    session.dump("cloud", session.cloud)
    session.dump("label", labels)


def stage_candidates(session: Session) -> None:
    cfg = session.config

    def run():
        surfaces = candidates.classify_rectify(
            session.detected, session.cloud,
            min_wall_area=cfg.min_wall_area,
            min_slab_area=cfg.min_slab_area,
            vertical_tol_deg=cfg.vertical_tol_deg,
            horizontal_tol_deg=cfg.horizontal_tol_deg,
            pixel_size=cfg.occupancy_pixel,
        )
        for s in surfaces:
            s.support = candidates.build_support(
                s, session.cloud, session.labels.n, pixel_size=cfg.multilabel_pixel
            )
        candidates.dilate_surfaces(surfaces, cfg.dilation_radius, cfg.multilabel_pixel)
        walls, all_surfaces = candidates.pair_walls(
            surfaces,
            max_thickness=cfg.max_thickness,
            max_angle_deg=cfg.pair_max_angle_deg,
            virtual_thickness=cfg.virtual_thickness,
        )
        return walls, all_surfaces

    session.walls, session.surfaces = _timed(session, "arrangement_priors", run)
    session.dump("candidates", (session.walls, session.surfaces))


def stage_complex(session: Session) -> None:
    session.complex = _timed(session, "arrangement_priors",
                             lambda: cellcomplex.build_complex(session.walls))
    session.dump("complex", session.complex)


def stage_priors(session: Session) -> None:
    cfg = session.config

    def run():
        cell_pr = priors.cell_priors(
            session.complex, session.surfaces, session.labels.n,
            k_base=cfg.prior_k_base, d_rays=cfg.prior_rays, rng_seed=cfg.seed,
        )
        face_pr = priors.face_priors(
            session.complex, session.surfaces,
            k_base=cfg.prior_k_base, rng_seed=cfg.seed,
        )
        return cell_pr, face_pr

    session.cell_pr, session.face_pr = _timed(session, "arrangement_priors", run)
    session.dump("priors", (session.cell_pr, session.face_pr))


def stage_solve(session: Session, forced=()) -> None:
    cfg = session.config

    def run():
        model = build_model(
            session.complex, session.cell_pr, session.face_pr,
            alpha=cfg.alpha, forced=list(forced),
            prune_rooms=cfg.prune_room_vars,
            redundant_rows=cfg.redundant_outside_rows,
        )
        labeling = solve(model, gap_tol=cfg.gap_tol, time_limit=cfg.time_limit)
        return model, labeling

    session.model, session.labeling = _timed(session, "optimization", run)
    violations = validate(session.labeling, session.model, session.complex)
    if violations:
        raise PipelineError("solve", f"{len(violations)} constraint violations post-solve")
    recomputed = recompute_objective(
        session.labeling, session.model, session.complex, session.cell_pr, session.face_pr
    )
    drift = abs(recomputed - session.labeling.objective_value)
    if drift > 1e-9 * max(1.0, abs(recomputed)):
        raise PipelineError("solve", f"objective recompute drift {drift}")
    session.dump("solve", (session.labeling.values, session.labeling.objective_value,
                           session.labeling.solver_status))
    session.directory.mkdir(parents=True, exist_ok=True)
    (session.directory / "solution.json").write_text(json.dumps({
        "variables": session.labeling.to_dict(session.model),
        "objective": session.labeling.objective_value,
        "status": session.labeling.solver_status,
        "gap": session.labeling.gap,
    }, sort_keys=True))


def stage_extract(session: Session, outdir: Path | None = None) -> None:
    session.building_model = building.extract(session.labeling, session.model, session.complex)
    outdir = outdir or session.directory
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "model.json").write_text(
        building.export_model_json(session.building_model, session.complex)
    )
    (outdir / "model.obj").write_text(
        building.export_mesh(session.building_model, session.complex, "all")
    )
    (outdir / "timings.json").write_text(json.dumps(_timing_report(session), indent=2))


def _timing_report(session: Session) -> dict:
    order = ["plane_detection", "cleaning", "auto_labeling", "arrangement_priors", "optimization"]
    return {k: round(session.timings.get(k, 0.0), 3) for k in order}


def run_pipeline(cloud: pointcloud.PointCloud, config: Config, outdir, forced=()) -> Session:
    """Execute the full chain; raises PipelineError naming the failed stage."""
    config.validate()
    session = Session(directory=Path(outdir), config=config, cloud=cloud)
    steps = [
        ("prepare", lambda: prepare_cloud(session)),
        ("detect", lambda: stage_detect(session)),
        ("clean", lambda: stage_clean(session)),
        ("label", lambda: stage_label(session)),
        ("candidates", lambda: stage_candidates(session)),
        ("complex", lambda: stage_complex(session)),
        ("priors", lambda: stage_priors(session)),
        ("solve", lambda: stage_solve(session, forced)),
        ("extract", lambda: stage_extract(session)),
    ]
    for name, step in steps:
        try:
            step()
        except PipelineError:
            raise
        except Exception as exc:
            raise PipelineError(name, exc) from exc
    return session


def run_stage(name: str, directory, config: Config, forced=()) -> Session:
    """Re-run one stage against the dumps in ``directory``."""
    if name not in STAGES:
        raise PipelineError(name, f"unknown stage; choose from {STAGES}")
    session = Session(directory=Path(directory), config=config)
    needs = {
        "detect": ["cloud"],
        "clean": ["cloud", "detect"],
        "label": ["cloud", "detect"],
        "candidates": ["cloud", "detect", "label"],
        "complex": ["candidates"],
        "priors": ["candidates", "complex", "label"],
        "solve": ["complex", "priors"],
        "extract": ["complex", "priors", "solve"],
    }[name]
    if "cloud" in needs:
        session.cloud = session.load("cloud")
    if "detect" in needs:
        session.detected = session.load("detect")
    if "label" in needs:
        session.labels = session.load("label")
        if session.cloud is not None:
            session.cloud.labels = session.labels.assignment
    if "candidates" in needs:
        session.walls, session.surfaces = session.load("candidates")
    if "complex" in needs:
        session.complex = session.load("complex")
    if "priors" in needs:
        session.cell_pr, session.face_pr = session.load("priors")
    if name == "solve":
        # labels only required for n; priors already encode it
        session.labels = session.load("label")
    stage_fn = {
        "detect": stage_detect,
        "clean": stage_clean,
        "label": stage_label,
        "candidates": stage_candidates,
        "complex": stage_complex,
        "priors": stage_priors,
        "solve": lambda s: stage_solve(s, forced),
        "extract": stage_extract,
    }[name]
    if name == "solve":
        stage_solve(session, forced)
        stage_extract(session)
    else:
        stage_fn(session)
    return session
