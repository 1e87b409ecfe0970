from types import SimpleNamespace

import numpy as np
import pytest

from surfelreloc.descriptors.features import FrameFeatures
from surfelreloc.geometry.se3 import SE3Pose, skew
from surfelreloc.mapping.covisibility import CovisibilityGraph
from surfelreloc.optim.surfel_opt import refresh_map_points
from surfelreloc.pipeline.candidates import Correspondences, gather_candidate_points
from surfelreloc.pipeline.clustering import cluster_candidates
from surfelreloc.pipeline.config import RelocConfig
from surfelreloc.pipeline.essential import eight_point, essential_check, sampson_distances
from surfelreloc.pipeline.pnp import epnp, pnp_ransac
from surfelreloc.pipeline.ransac import required_iterations
from surfelreloc.pipeline.refinement import refine_pose, regrid_matches
from surfelreloc.pipeline.relocalizer import Relocalizer, relocalize_sequence
from surfelreloc.pipeline.verification import (
    FAILED,
    INLIER_UNVERIFIED,
    VERIFIED,
    VerificationState,
    verify_pose,
)


def _components(graph: CovisibilityGraph, ids):
    """Connected components by breadth-first search over the induced subgraph."""
    left, out = set(ids), []
    while left:
        frontier = [min(left)]
        comp = set(frontier)
        while frontier:
            a = frontier.pop()
            for b in list(left - comp):
                if graph.weight(a, b) > 0:
                    comp.add(b)
                    frontier.append(b)
        left -= comp
        out.append(comp)
    return out


def _views(camera, rng, n=40):
    X = np.column_stack([rng.uniform(-2, 2, n), rng.uniform(-1.5, 1.5, n), rng.uniform(3, 7, n)])
    pose = SE3Pose.exp(np.concatenate([rng.normal(0, 0.2, 3), rng.normal(0, 0.1, 3)]))
    uv, valid = camera.project_points(pose.inverse_transform(X))
    assert valid.all()
    return X, uv, pose


class TestClustering:
    def test_matches_component_oracle(self, rng):
        for _ in range(25):
            graph = CovisibilityGraph()
            for a, b in rng.integers(0, 15, (12, 2)):
                if a != b:
                    graph.add(int(a), int(b))
            ids = rng.choice(15, size=8, replace=False)
            retrieved = [(int(k), float(s)) for k, s in zip(ids, np.round(rng.uniform(0, 1, 8), 1))]
            clusters = cluster_candidates(graph, retrieved, n_max=100)
            oracle = _components(graph, [k for k, _ in retrieved])
            assert {frozenset(c.members) for c in clusters} == {frozenset(c) for c in oracle}
            scores = dict(retrieved)
            for c in clusters:
                assert c.canonical == min(c.members, key=lambda k: (-scores[k], k))
                assert c.score == scores[c.canonical]
            assert [(-c.score, c.canonical) for c in clusters] == sorted((-c.score, c.canonical) for c in clusters)

    def test_truncates_to_n_max(self):
        retrieved = [(1, 0.9), (2, 0.8), (3, 0.7), (4, 0.6)]
        clusters = cluster_candidates(CovisibilityGraph(), retrieved, n_max=2)
        assert [c.canonical for c in clusters] == [1, 2]

    def test_connected_keyframes_share_a_cluster(self):
        graph = CovisibilityGraph.from_edges([(1, 3, 5), (2, 3, 1)])
        clusters = cluster_candidates(graph, [(3, 0.9), (1, 0.9), (7, 0.95)], n_max=3)
        assert [(c.members, c.canonical) for c in clusters] == [((7,), 7), ((1, 3), 1)]

    def test_nothing_retrieved(self):
        with pytest.raises(ValueError):
            cluster_candidates(CovisibilityGraph(), [], 3)


class TestEPnP:
    def test_exact_recovery(self, camera, rng):
        for _ in range(10):
            X, uv, pose = _views(camera, rng, 12)
            found = epnp(X, uv, camera)
            assert found is not None
            assert found.distance_to(pose) < 1e-6
            assert found.angle_to(pose) < 1e-6

    def test_planar_points(self, camera, rng):
        X = np.column_stack([rng.uniform(-2, 2, 20), rng.uniform(-1.5, 1.5, 20), np.full(20, 5.0)])
        pose = SE3Pose.exp([0.1, -0.1, 0.2, 0.05, -0.03, 0.02])
        uv, _ = camera.project_points(pose.inverse_transform(X))
        found = epnp(X, uv, camera)
        assert found is not None and found.distance_to(pose) < 1e-6

    def test_degenerate_inputs(self, camera):
        line = np.column_stack([np.linspace(-1, 1, 6), np.zeros(6), np.full(6, 4.0)])
        uv, _ = camera.project_points(line)
        assert epnp(line, uv, camera) is None
        assert epnp(line[:3], uv[:3], camera) is None


class TestPnPRansac:
    def test_outliers_do_not_move_the_pose(self, camera, rng):
        X, uv, pose = _views(camera, rng, 100)
        outliers = rng.choice(100, size=30, replace=False)
        uv = uv.copy()
        uv[outliers] += rng.choice([-1.0, 1.0], size=(30, 2)) * rng.uniform(40.0, 80.0, (30, 2))
        result = pnp_ransac(X, uv, np.zeros(100), camera, np.random.default_rng(0))
        assert result.status == "ok"
        assert result.pose.distance_to(pose) < 1e-6
        inliers = np.setdiff1d(np.arange(100), outliers)
        assert result.inliers[inliers].all()

    def test_too_few_matches(self, camera, rng):
        X, uv, _ = _views(camera, rng, 3)
        result = pnp_ransac(X, uv, np.zeros(3), camera, rng)
        assert result.pose is None and result.status == "too-few-matches"

    def test_iteration_count(self):
        assert required_iterations(1.0, 4, 0.99, 300) == 1
        assert required_iterations(0.0, 4, 0.99, 300) == 300
        assert required_iterations(0.5, 4, 0.99, 300) == 72
        assert required_iterations(0.1, 8, 0.99, 200) == 200


class TestEssential:
    def test_eight_point_satisfies_epipolar_constraint(self, camera, rng):
        X, _, pose_q = _views(camera, rng, 30)
        pose_r = SE3Pose.exp([0.3, 0.0, 0.1, 0.0, 0.05, 0.0])
        x_q = camera.lift_points(camera.project_points(pose_q.inverse_transform(X))[0])
        x_r = camera.lift_points(camera.project_points(pose_r.inverse_transform(X))[0])
        E = eight_point(x_q, x_r)
        assert E is not None
        assert np.allclose(np.einsum("ni,ij,nj->n", x_q, E, x_r), 0.0, atol=1e-9)
        s = np.linalg.svd(E, compute_uv=False)
        assert s[0] == pytest.approx(s[1]) and s[2] == pytest.approx(0.0, abs=1e-12)
        assert np.allclose(sampson_distances(E, x_q, x_r), 0.0, atol=1e-18)

    def test_sampson_gate_rejects_off_line_matches(self, camera, rng):
        X, uv_q, pose_q = _views(camera, rng, 130)
        pose_r = SE3Pose.exp([0.3, 0.0, 0.1, 0.0, 0.05, 0.0])
        # relative motion taking reference camera coordinates into the query camera
        R = pose_q.R.T @ pose_r.R
        t = pose_q.R.T @ (pose_r.translation - pose_q.translation)
        E = skew(t) @ R
        x_r = camera.lift_points(camera.project_points(pose_r.inverse_transform(X))[0])
        lines = x_r @ E.T
        normals = lines[:, :2] / np.linalg.norm(lines[:, :2], axis=1, keepdims=True)
        outliers = rng.choice(130, size=39, replace=False)
        uv_q = uv_q.copy()
        uv_q[outliers] += 30.0 * normals[outliers] * rng.choice([-1.0, 1.0], size=(39, 1))

        db = SimpleNamespace(
            camera=camera,
            keyframes={0: SimpleNamespace(pose=pose_r, features=None)},
            points={i: SimpleNamespace(observations={}) for i in range(130)},
        )
        corr = Correspondences(np.arange(130), np.arange(130), X, uv_q, np.zeros(130), np.zeros(130, dtype=bool))
        check = essential_check(db, 0, corr, 4.0, 500, 0.999, np.random.default_rng(0))
        assert check.flag is None
        inliers = np.setdiff1d(np.arange(130), outliers)
        assert check.keep[inliers].all()
        assert np.count_nonzero(~check.keep[outliers]) >= 0.9 * outliers.size

    def test_too_few_matches_pass_through(self):
        corr = Correspondences(
            np.arange(5), np.arange(5), np.zeros((5, 3)), np.zeros((5, 2)), np.zeros(5), np.zeros(5, dtype=bool)
        )
        check = essential_check(None, 0, corr, 4.0, 200, 0.99, np.random.default_rng(0))
        assert check.flag == "too-few-matches"
        assert check.keep.all()


class TestRefinement:
    N = 80

    def _scene(self, camera, rng, shifted=()):
        """Map points with distinct descriptors and a query frame seeing all of them.

        Keypoints are stored in shuffled order; ``shifted`` points get a keypoint 12 px
        away from their true projection.
        """
        X = np.column_stack([rng.uniform(-1.5, 1.5, self.N), rng.uniform(-1.0, 1.0, self.N), rng.uniform(3, 7, self.N)])
        truth = SE3Pose.exp(np.concatenate([rng.normal(0, 0.05, 3), rng.normal(0, 0.02, 3)]))
        uv, _ = camera.project_points(truth.inverse_transform(X))
        uv[list(shifted), 0] += 12.0
        descriptors = rng.integers(0, 256, (self.N, 32), dtype=np.uint8)
        db = SimpleNamespace(
            camera=camera,
            points={100 + i: SimpleNamespace(position=X[i], descriptor=descriptors[i]) for i in range(self.N)},
        )
        order = rng.permutation(self.N)
        features = FrameFeatures(uv[order], np.full(self.N, 4.0), np.zeros(self.N), descriptors[order], 1.0)
        return db, features, truth, 100 + order

    @staticmethod
    def _no_seed(db, features):
        return Correspondences.build(db, features, [], [], [])

    def test_regrid_recovers_every_correspondence(self, camera, rng):
        db, features, truth, point_of_keypoint = self._scene(camera, rng)
        seed = Correspondences.build(db, features, [0, 1], point_of_keypoint[:2], [True, False])
        matches = regrid_matches(db, features, truth, np.array(sorted(db.points)), seed, RelocConfig())
        assert len(matches) == self.N
        assert matches.keypoints[:2].tolist() == [0, 1]
        assert matches.from_neighbors.tolist() == [True] + [False] * (self.N - 1)
        assert np.array_equal(matches.point_ids, point_of_keypoint[matches.keypoints])
        assert np.unique(matches.keypoints).size == self.N

    def test_shifted_keypoints_fail_the_chi2_gate(self, camera, rng):
        shifted = list(range(0, self.N, 8))
        db, features, truth, _ = self._scene(camera, rng, shifted)
        refined = refine_pose(db, features, truth, np.array(sorted(db.points)), self._no_seed(db, features), RelocConfig())
        assert len(refined.matches) == self.N
        outlying = np.isin(refined.matches.point_ids, 100 + np.array(shifted))
        assert not refined.inliers[outlying].any()
        assert refined.inliers[~outlying].all()
        assert refined.n_in == self.N - len(shifted)
        assert refined.pose.distance_to(truth) < 1e-6

    def test_converges_from_a_displaced_pose(self, camera, rng):
        db, features, truth, _ = self._scene(camera, rng)
        rough = SE3Pose(truth.rotation, truth.translation + np.array([0.2, 0.0, 0.0]))
        config = RelocConfig(window=40.0)
        refined = refine_pose(db, features, rough, np.array(sorted(db.points)), self._no_seed(db, features), config)
        assert refined.pose.distance_to(truth) < 0.01
        assert refined.n_in == self.N


class TestVerification:
    def test_gates(self):
        here, there = SE3Pose.identity(), SE3Pose(np.array([0.0, 0.0, 0.0, 1.0]), np.array([1.0, 0.0, 0.0]))
        assert verify_pose(10, here, None, 15, 0.3) == FAILED
        assert verify_pose(20, None, None, 15, 0.3) == FAILED
        assert verify_pose(15, here, None, 15, 0.3) == VERIFIED
        assert verify_pose(15, there, here, 15, 0.3) == INLIER_UNVERIFIED
        assert verify_pose(15, there, here, 15, 1.0) == VERIFIED

    def test_every_inlier_pose_becomes_the_reference(self):
        state = VerificationState()
        far = SE3Pose(np.array([0.0, 0.0, 0.0, 1.0]), np.array([5.0, 0.0, 0.0]))
        farther = SE3Pose(np.array([0.0, 0.0, 0.0, 1.0]), np.array([5.1, 0.0, 0.0]))
        assert state.update(20, SE3Pose.identity(), 15, 0.3) == VERIFIED
        assert state.update(20, far, 15, 0.3) == INLIER_UNVERIFIED
        assert state.last_inlier_pose is far
        assert state.update(3, SE3Pose.identity(), 15, 0.3) == FAILED
        assert state.last_inlier_pose is far
        assert state.update(20, farther, 15, 0.3) == VERIFIED
        state.reset()
        assert state.last_inlier_pose is None


class TestRelocConfig:
    def test_rejects_bad_values(self):
        with pytest.raises(ValueError):
            RelocConfig(mode="psychic")
        with pytest.raises(ValueError):
            RelocConfig(confidence=1.0)
        with pytest.raises(ValueError):
            RelocConfig(top_k=0)


def _copy_features(f: FrameFeatures, timestamp: float) -> FrameFeatures:
    return FrameFeatures(f.uv, f.sizes, f.octaves, f.descriptors, timestamp)


class TestRelocalizer:
    def test_self_query_is_verified(self, small_db, sim_run):
        refresh_map_points(small_db, sim_run.scene.surfel_map)
        kf = max(small_db.keyframes.values(), key=lambda k: k.map_point_ids().size)
        result = Relocalizer(small_db, RelocConfig()).relocalize(_copy_features(kf.features, 99.0))
        assert result.status == VERIFIED
        assert result.timestamp == 99.0
        assert result.pose.distance_to(kf.pose) < 1e-3
        assert result.n_in >= 15
        trace = result.diagnostics
        assert trace["best"] is not None
        assert trace["candidates"][trace["best"]]["status"] == "ok"
        assert set(trace["timing_ms"]) >= {"retrieval", "clustering", "matching", "pnp", "refine"}

    def test_unrelated_query_fails(self, small_db, rng):
        junk = FrameFeatures(
            np.column_stack([rng.uniform(0, 319, 200), rng.uniform(0, 239, 200)]),
            np.full(200, 3.0),
            np.zeros(200),
            rng.integers(0, 256, (200, 32), dtype=np.uint8),
            5.0,
        )
        result = Relocalizer(small_db, RelocConfig()).relocalize(junk)
        assert result.status == FAILED
        assert result.pose is None
        assert result.diagnostics["reason"] in ("no-candidate-pose", "too-few-inliers", "degenerate-global")

    def test_neighbor_points_exclude_visible_ones(self, small_db):
        canonical = min(small_db.keyframes)
        points = gather_candidate_points(small_db, canonical, 5)
        assert np.intersect1d(points.visible, points.neighbor).size == 0
        assert points.keyframes[0] == canonical
        assert np.array_equal(points.all_ids(), np.union1d(points.visible, points.neighbor))

    def test_visible_mode_uses_no_neighbor_matches(self, small_db, sim_run):
        kf = small_db.keyframes[min(small_db.keyframes)]
        result = Relocalizer(small_db, RelocConfig(mode="visible")).relocalize(_copy_features(kf.features, 1.0))
        assert all(c["neighbor_matches"] == 0 for c in result.diagnostics["candidates"])

    def test_naive_mode_needs_the_surfel_map(self, small_db, sim_run):
        with pytest.raises(ValueError):
            Relocalizer(small_db, RelocConfig(mode="naive"))
        kf = small_db.keyframes[min(small_db.keyframes)]
        relocalizer = Relocalizer(small_db, RelocConfig(mode="naive"), sim_run.scene.surfel_map)
        result = relocalizer.relocalize(_copy_features(kf.features, 1.0))
        assert result.cluster_count == 1
        assert len(result.diagnostics["candidates"]) == 1

    def test_sequence_threads_one_state(self, small_db, sim_run):
        queries = [_copy_features(f, 50.0 + i) for i, f in enumerate(sim_run.query.frames[:4])]
        results, state = relocalize_sequence(Relocalizer(small_db, RelocConfig()), queries)
        assert [r.timestamp for r in results] == [50.0, 51.0, 52.0, 53.0]
        accepted = [r for r in results if r.status != FAILED]
        if accepted:
            assert state.last_inlier_pose is accepted[-1].pose
            assert accepted[0].status == VERIFIED

    def test_same_inputs_same_result(self, small_db, sim_run):
        q = sim_run.query.frames[2]
        a = Relocalizer(small_db, RelocConfig()).relocalize(_copy_features(q, 7.0))
        b = Relocalizer(small_db, RelocConfig()).relocalize(_copy_features(q, 7.0))
        assert (a.status, a.n_in, a.cluster_count) == (b.status, b.n_in, b.cluster_count)
        if a.pose is not None:
            assert np.array_equal(a.pose.to_vector(), b.pose.to_vector())
