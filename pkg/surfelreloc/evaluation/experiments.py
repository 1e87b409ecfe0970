"""Reusable drivers for the end-to-end and comparative studies."""

from __future__ import annotations

import copy
import logging
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from surfelreloc.dataflows.config import merge_config
from surfelreloc.default_config import DEFAULT_CONFIG
from surfelreloc.descriptors.features import FrameFeatures
from surfelreloc.descriptors.vocabulary import Vocabulary, train_vocabulary
from surfelreloc.geometry.camera import PinholeCamera
from surfelreloc.geometry.se3 import SE3Pose
from surfelreloc.mapping.database import DatabaseSettings, VisualDatabase, check_integrity
from surfelreloc.mapping.states import FrameReport
from surfelreloc.mapping.surfel_map import SurfelMap
from surfelreloc.optim.surfel_opt import OptimizerSettings, optimize_poses, refresh_map_points
from surfelreloc.pipeline.config import RelocConfig
from surfelreloc.pipeline.relocalizer import RelocalizationResult, Relocalizer
from surfelreloc.pipeline.verification import VerificationState
from surfelreloc.simulation.presets import get_preset
from surfelreloc.simulation.session import SimulationRun, simulate

from .metrics import dominates
from .records import ResultRecord
from .report import EvalReport, evaluate, pr_curves

logger = logging.getLogger(__name__)


def full_config(*overrides: dict) -> dict:
    return merge_config(DEFAULT_CONFIG, *overrides)


def database_settings(config: dict) -> DatabaseSettings:
    return DatabaseSettings(
        **config["database"],
        retrieval_backend=config["descriptor"]["retrieval_backend"],
        accelerator=config["descriptor"]["accelerator"],
    )


def optimizer_settings(config: dict) -> OptimizerSettings:
    return OptimizerSettings(**config["optimizer"])


def reloc_config(config: dict) -> RelocConfig:
    return RelocConfig(**config["reloc"], seed=int(config["run"]["seed"]))


def train_from_frames(frames: Sequence[FrameFeatures], config: dict) -> Vocabulary:
    """Vocabulary trained on a seeded subsample of all descriptors in ``frames``."""
    desc = config["descriptor"]
    seed = int(config["run"]["seed"])
    sample = np.vstack([f.descriptors for f in frames if len(f)])
    if sample.shape[0] > desc["train_sample"]:
        rng = np.random.default_rng([seed, 3])
        sample = sample[np.sort(rng.choice(sample.shape[0], desc["train_sample"], replace=False))]
    return train_vocabulary(sample, desc["vocab_size"], seed=seed, max_iterations=desc["vocab_iterations"])


def build_database(
    frames: Sequence[FrameFeatures],
    poses: Sequence[SE3Pose],
    surfel_map: SurfelMap,
    camera: PinholeCamera,
    config: dict,
    vocabulary: Optional[Vocabulary] = None,
    db: Optional[VisualDatabase] = None,
    check: bool = False,
    progress: Callable[[Iterable], Iterable] = iter,
) -> Tuple[VisualDatabase, List[FrameReport]]:
    """Feed posed frames through ``process_frame`` in order, creating the database if needed.

    With ``check`` the referential-integrity suite runs after every frame and the first
    violation raises.
    """
    if len(frames) != len(poses):
        raise ValueError(f"{len(frames)} frames but {len(poses)} poses")
    if db is None:
        vocabulary = vocabulary or train_from_frames(frames, config)
        db = VisualDatabase(camera, vocabulary, database_settings(config))
    reports = []
    for i in progress(range(len(frames))):
        reports.append(db.process_frame(frames[i], poses[i], surfel_map, frame=i))
        if check:
            problems = check_integrity(db)
            if problems:
                raise AssertionError(f"Integrity violated after frame {i}: {problems[0]}")
    return db, reports


def optimize_database(db: VisualDatabase, surfel_map: SurfelMap, config: dict):
    settings = optimizer_settings(config)
    report = optimize_poses(db, surfel_map, settings)
    refresh = refresh_map_points(db, surfel_map, settings) if report.success else None
    return report, refresh


def run_relocalization(
    db: VisualDatabase,
    queries: Sequence[FrameFeatures],
    config: dict,
    surfel_map: Optional[SurfelMap] = None,
    progress: Callable[[Iterable], Iterable] = iter,
) -> List[RelocalizationResult]:
    """Relocalize queries in order, threading one verification state."""
    relocalizer = Relocalizer(db, reloc_config(config), surfel_map)
    state = VerificationState()
    # the relocalizer caches global descriptors on the query features
    queries = [copy.copy(q) for q in queries]
    for q in queries:
        q.global_descriptor = None
    return [relocalizer.relocalize(q, state) for q in progress(queries)]


def evaluate_run(results: Sequence[RelocalizationResult], run: SimulationRun, config: dict) -> EvalReport:
    records = [ResultRecord.from_result(r) for r in results]
    return evaluate(
        records,
        run.query.timestamps,
        run.query.poses,
        config["reloc"]["recall_threshold"],
        config["reloc"]["verify_distance"],
    )


def end_to_end(config: dict, optimize: bool = True) -> Tuple[EvalReport, VisualDatabase, SimulationRun]:
    run = simulate(config)
    db, _ = build_database(run.database.frames, run.database.reported_poses, run.scene.surfel_map, run.camera, config)
    if optimize:
        optimize_database(db, run.scene.surfel_map, config)
    results = run_relocalization(db, run.query.frames, config, run.scene.surfel_map)
    return evaluate_run(results, run, config), db, run


def pose_noise_study(base: dict, sigma: float = 0.2, seeds: Sequence[int] = range(10)) -> pd.DataFrame:
    """Relocalization quality on a noisy-pose database before and after surfel optimization."""
    rows = []
    for seed in seeds:
        config = merge_config(base, {"noise": {"pose_sigma": sigma}, "run": {"seed": seed}})
        run = simulate(config)
        db, _ = build_database(run.database.frames, run.database.reported_poses, run.scene.surfel_map, run.camera, config)
        before = evaluate_run(run_relocalization(db, run.query.frames, config), run, config)
        opt, _ = optimize_database(db, run.scene.surfel_map, config)
        after = evaluate_run(run_relocalization(db, run.query.frames, config), run, config)
        rows.append(
            {
                "seed": seed,
                "recall_before": before.recall,
                "mate_before_cm": before.mate_cm,
                "recall_after": after.recall,
                "mate_after_cm": after.mate_cm,
                "optimizer_status": opt.status,
            }
        )
        logger.info("Pose-noise seed %d: mATE %s -> %s cm", seed, before.mate_cm, after.mate_cm)
    return pd.DataFrame(rows)


def ablation_study(base: dict, seeds: Sequence[int] = range(10), bit_flips: int = 12, pixel_sigma: float = 1.0) -> pd.DataFrame:
    """Recall of the full, visible-only and naive modes on degraded observations."""
    rows = []
    for seed in seeds:
        config = merge_config(base, {"noise": {"bit_flips": bit_flips, "pixel_sigma": pixel_sigma}, "run": {"seed": seed}})
        run = simulate(config)
        db, _ = build_database(run.database.frames, run.database.reported_poses, run.scene.surfel_map, run.camera, config)
        row = {"seed": seed}
        for mode in ("full", "visible", "naive"):
            mode_config = merge_config(config, {"reloc": {"mode": mode}})
            results = run_relocalization(db, run.query.frames, mode_config, run.scene.surfel_map)
            row[mode] = evaluate_run(results, run, mode_config).recall
        rows.append(row)
    return pd.DataFrame(rows)


def aliasing_study(base: Optional[dict] = None, seed: int = 0):
    """PR curves with and without pose verification in the twin-room world.

    Every candidate pose is kept (inlier threshold 1) so the sweep sees all of them.
    Returns the PV-on curve, the PV-off curve and the (weak, strict) dominance flags.
    """
    config = merge_config(base or DEFAULT_CONFIG, get_preset("twin-rooms"), {"reloc": {"inlier_threshold": 1}, "run": {"seed": seed}})
    report, _, _ = end_to_end(config, optimize=False)
    pr_on, pr_off = pr_curves(report)
    return pr_on, pr_off, dominates(pr_on, pr_off)


def growth_study(base: Optional[dict] = None, seed: int = 0, frames_per_loop: int = 60) -> dict:
    """Keyframe counts after one and two loops of the same circle, integrity checked per frame."""
    counts = {}
    for loops in (1, 2):
        segment = {"kind": "circle", "frames": frames_per_loop * loops, "loops": float(loops), "radius": 0.5, "center": [2.0, 2.0]}
        config = merge_config(base or DEFAULT_CONFIG, {"run": {"seed": seed}})
        config["trajectory"]["database"] = [segment]
        run = simulate(config)
        db, _ = build_database(
            run.database.frames, run.database.reported_poses, run.scene.surfel_map, run.camera, config, check=True
        )
        counts[loops] = len(db.keyframes)
    return {"one_loop": counts[1], "two_loops": counts[2], "ratio": counts[2] / max(counts[1], 1)}
