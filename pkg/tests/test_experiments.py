import pytest

from surfelreloc.default_config import DEFAULT_CONFIG
from surfelreloc.evaluation.experiments import (
    ablation_study,
    aliasing_study,
    end_to_end,
    full_config,
    growth_study,
    pose_noise_study,
)

SEEDS = range(2)


@pytest.mark.slow
class TestStudies:
    def test_noiseless_room_relocalizes_every_query(self):
        report, db, run = end_to_end(full_config({"run": {"seed": 0}}))
        assert report.queries == len(run.query.frames)
        assert report.recall >= 0.99
        assert report.mate_cm is not None and report.mate_cm < 1.0

    def test_optimization_reduces_pose_noise_error(self):
        frame = pose_noise_study(DEFAULT_CONFIG, sigma=0.2, seeds=SEEDS)
        assert len(frame) == len(SEEDS)
        assert (frame["optimizer_status"] != "degenerate").all()
        means = frame[["recall_before", "recall_after", "mate_before_cm", "mate_after_cm"]].mean()
        assert means.mate_after_cm < means.mate_before_cm
        assert means.recall_after >= means.recall_before

    def test_neighbor_points_help_and_clustering_helps_more(self):
        frame = ablation_study(DEFAULT_CONFIG, seeds=SEEDS)
        means = frame[["full", "visible", "naive"]].mean()
        assert means.full >= means.visible >= means.naive

    def test_verification_dominates_on_twin_rooms(self):
        pr_on, pr_off, (weak, strict) = aliasing_study(seed=0)
        assert len(pr_on) == len(pr_off)
        assert weak

    def test_revisiting_a_loop_barely_grows_the_database(self):
        counts = growth_study(seed=0)
        assert counts["one_loop"] > 0
        assert counts["ratio"] <= 1.15
