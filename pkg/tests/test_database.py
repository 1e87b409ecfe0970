import numpy as np
import pytest

from surfelreloc.descriptors.features import FrameFeatures
from surfelreloc.descriptors.retrieval import EmptyDatabaseError
from surfelreloc.evaluation.experiments import build_database
from surfelreloc.geometry.se3 import SE3Pose
from surfelreloc.mapping.covisibility import CovisibilityGraph
from surfelreloc.mapping.database import (
    MapPoint,
    check_integrity,
    update_representative_descriptor,
)
from surfelreloc.mapping.matching import KeypointGrid, local_grid_match
from surfelreloc.mapping.states import stage_summary


class TestProcessFrame:
    def test_first_frame_creates_points_at_surfel_centers(self, wall_db, wall, wall_frame):
        report = wall_db.process_frame(wall_frame(), SE3Pose.identity(), wall)
        assert report["status"] == "accepted"
        assert report["keyframe_id"] == 0
        assert report["associated"] == report["new_points"] == len(wall)
        assert report["matched"] == 0
        kf = wall_db.keyframes[0]
        for idx, pid in enumerate(kf.point_ids.tolist()):
            point = wall_db.points[pid]
            assert point.surfel_id == idx
            assert np.array_equal(point.position, wall.centers[idx])
        assert check_integrity(wall_db) == []

    def test_repeated_frame_matches_existing_points(self, wall_db, wall, wall_frame):
        for t in (0.0, 0.1):
            report = wall_db.process_frame(wall_frame(timestamp=t), SE3Pose.identity(), wall)
        assert report["matched"] == len(wall)
        assert report["new_points"] == 0
        assert report["covisible_frames"] == 1
        assert wall_db.covisibility.weight(0, 1) == len(wall)
        assert len(wall_db.points) == len(wall)
        assert check_integrity(wall_db) == []

    def test_fourth_duplicate_keyframe_is_culled(self, wall_db, wall, wall_frame):
        reports = [
            wall_db.process_frame(wall_frame(timestamp=0.1 * i), SE3Pose.identity(), wall, frame=i)
            for i in range(4)
        ]
        assert [r["culled_keyframes"] for r in reports] == [[], [], [], [3]]
        assert sorted(wall_db.keyframes) == [0, 1, 2]
        assert wall_db.next_keyframe_id == 4
        assert wall_db.index.ids() == [0, 1, 2]
        assert all(len(p.observations) == 3 for p in wall_db.points.values())
        assert check_integrity(wall_db) == []

    def test_points_not_reobserved_are_dropped(self, wall_db, wall, wall_frame):
        half = np.arange(10)
        wall_db.process_frame(wall_frame(), SE3Pose.identity(), wall)
        wall_db.process_frame(wall_frame(subset=half, timestamp=0.1), SE3Pose.identity(), wall)
        report = wall_db.process_frame(wall_frame(subset=half, timestamp=0.2), SE3Pose.identity(), wall)
        assert report["culled_points"] == len(wall) - half.size
        assert sorted(p.surfel_id for p in wall_db.points.values()) == half.tolist()
        assert wall_db.recent_points == {}
        assert check_integrity(wall_db) == []

    def test_frame_outside_the_map_is_rejected(self, wall_db, wall, wall_frame):
        facing_away = SE3Pose(np.array([0.0, 1.0, 0.0, 0.0]), np.zeros(3))
        report = wall_db.process_frame(wall_frame(), facing_away, wall)
        assert report["status"] == "rejected"
        assert report["reason"] == "outside-map"
        assert len(wall_db) == 0
        assert wall_db.next_keyframe_id == 0

    def test_frame_without_associated_keypoints_is_rejected(self, wall_db, wall, wall_frame):
        corners = FrameFeatures([[2.0, 2.0], [317.0, 237.0]], [2.0, 2.0], [0, 0], wall_frame.descriptors[:2])
        report = wall_db.process_frame(corners, SE3Pose.identity(), wall)
        assert report["reason"] == "no-map-points"
        assert report["associated"] == 0
        assert len(wall_db) == 0

    def test_removing_a_keyframe_keeps_integrity(self, wall_db, wall, wall_frame):
        for t in (0.0, 0.1):
            wall_db.process_frame(wall_frame(timestamp=t), SE3Pose.identity(), wall)
        orphaned = wall_db.remove_keyframe(1)
        assert orphaned == []
        assert wall_db.covisibility.weight(0, 1) == 0
        assert check_integrity(wall_db) == []
        assert wall_db.keyframes_observing([0, 1]) == [0]

    def test_empty_database_cannot_be_queried(self, wall_db, wall, wall_frame):
        signature = wall_db.describe(wall_frame())
        with pytest.raises(EmptyDatabaseError):
            wall_db.query_index(signature, 3)


class TestSimulatedBuild:
    def test_integrity_holds_after_every_frame(self, sim_run, small_config):
        db, reports = build_database(
            sim_run.database.frames[:10],
            sim_run.database.reported_poses[:10],
            sim_run.scene.surfel_map,
            sim_run.camera,
            small_config,
            check=True,
        )
        assert check_integrity(db) == []
        assert len(reports) == 10

    def test_reports_account_for_the_database(self, small_db, built):
        _, reports = built
        summary = stage_summary(reports)
        assert summary["frames"] == len(reports)
        assert summary["accepted"] >= len(small_db)
        ids = [r["keyframe_id"] for r in reports if r["status"] == "accepted"]
        assert ids == sorted(ids)
        assert set(small_db.keyframes) <= set(ids)
        stats = small_db.stats()
        assert stats["keyframes"] == len(small_db.keyframes)
        assert stats["observations"] == sum(len(p.observations) for p in small_db.points.values())

    def test_keyframe_ids_continue_on_update(self, small_db, sim_run):
        first_new = small_db.next_keyframe_id
        frame = sim_run.database.frames[0]
        moved = FrameFeatures(frame.uv, frame.sizes, frame.octaves, frame.descriptors, 1e6)
        report = small_db.process_frame(moved, sim_run.database.reported_poses[0], sim_run.scene.surfel_map)
        if report["status"] == "accepted":
            assert report["keyframe_id"] == first_new
        assert small_db.next_keyframe_id in (first_new, first_new + 1)
        assert check_integrity(small_db) == []


class TestRepresentativeDescriptor:
    def test_medoid_of_observations(self):
        a = np.zeros(32, dtype=np.uint8)
        b = a.copy()
        b[0] = 0b1
        c = a.copy()
        c[0] = 0b11
        descs = {(0, 0): a, (1, 0): b, (2, 0): c}
        point = MapPoint(0, np.zeros(3), 0, a, 0, {0: 0, 1: 0, 2: 0})
        chosen = update_representative_descriptor(point, lambda kf, idx: descs[(kf, idx)])
        assert np.array_equal(chosen, b)

    def test_tie_goes_to_earliest_observation(self):
        a = np.zeros(32, dtype=np.uint8)
        b = np.full(32, 0xFF, dtype=np.uint8)
        descs = {(3, 0): a, (5, 0): b}
        point = MapPoint(0, np.zeros(3), 0, b, 3, {3: 0, 5: 0})
        assert np.array_equal(update_representative_descriptor(point, lambda kf, idx: descs[(kf, idx)]), a)


class TestCovisibilityGraph:
    def test_weights_follow_shared_observations(self):
        graph = CovisibilityGraph.from_observations([{0: 1, 1: 4}, {0: 2, 1: 5, 2: 0}, {2: 3}])
        assert graph.edges() == [(0, 1, 2), (0, 2, 1), (1, 2, 1)]
        assert graph.neighbors(0) == [1, 2]

    def test_decrement_drops_empty_edges(self):
        graph = CovisibilityGraph()
        graph.add(3, 4)
        graph.decrement(4, 3)
        assert graph.edges() == [] and graph.neighbors(3) == []

    def test_self_edges_are_rejected(self):
        with pytest.raises(ValueError):
            CovisibilityGraph().add(1, 1)


class TestLocalGridMatch:
    def test_window_scales_with_octave(self, rng):
        desc = rng.integers(0, 256, (1, 32), dtype=np.uint8)
        kps = np.array([[120.0, 100.0]])
        assert local_grid_match([[100.0, 100.0]], desc, kps, [0], desc) == []
        found = local_grid_match([[100.0, 100.0]], desc, kps, [2], desc)
        assert [(m.query, m.candidate, m.distance) for m in found] == [(0, 0, 0)]

    def test_each_keypoint_matched_once(self, rng):
        desc = rng.integers(0, 256, (1, 32), dtype=np.uint8)
        projected = np.array([[100.0, 100.0], [102.0, 100.0]])
        found = local_grid_match(projected, np.vstack([desc, desc]), [[101.0, 100.0]], [0], desc)
        assert len(found) <= 1

    def test_grid_lookup_covers_window(self):
        grid = KeypointGrid(np.array([[5.0, 5.0], [40.0, 5.0], [100.0, 100.0]]), cell=32.0)
        assert grid.within(20.0, 5.0, 21.0).tolist() == [0, 1]
        with pytest.raises(ValueError):
            KeypointGrid(np.zeros((1, 2)), cell=0.0)
