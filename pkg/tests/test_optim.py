import numpy as np
import pytest

from surfelreloc.geometry.camera import Pixel
from surfelreloc.geometry.se3 import SE3Pose
from surfelreloc.mapping.surfel_map import PlaneCoeff
from surfelreloc.optim.levenberg import LeastSquaresProblem, Linearization, levenberg_marquardt
from surfelreloc.optim.reprojection import refine_motion_only, reprojection_errors
from surfelreloc.optim.surfel_factors import (
    SurfelFactors,
    SurfelReprojFactor,
    build_surfel_factors,
    evaluate_factors,
    inverse_depth_on_plane,
    point_on_plane,
    surfel_reproj_residual,
)
from surfelreloc.optim.surfel_opt import (
    OptimizerSettings,
    huber_cost_and_weights,
    optimize_poses,
    refresh_map_points,
)

EPS = 1e-6


def _small_motion(rng, t_sigma=0.05, r_sigma=0.05) -> SE3Pose:
    return SE3Pose.exp(np.concatenate([rng.normal(0, t_sigma, 3), rng.normal(0, r_sigma, 3)]))


def _numeric_jacobian(fn, pose: SE3Pose) -> np.ndarray:
    """Central differences of ``fn`` under right perturbations of ``pose``."""
    cols = []
    for k in range(6):
        step = np.zeros(6)
        step[k] = EPS
        cols.append((fn(pose.retract(step)) - fn(pose.retract(-step))) / (2 * EPS))
    return np.stack(cols, axis=-1)


@pytest.fixture
def wall_plane() -> PlaneCoeff:
    return PlaneCoeff(np.array([0.0, 0.0, -1.0]), 5.0)


def _wall_database(db, wall, wall_frame, poses):
    for i, pose in enumerate(poses):
        db.process_frame(wall_frame(pose, timestamp=0.1 * i), pose, wall, frame=i)
    return db


WALL_POSES = [
    SE3Pose.identity(),
    SE3Pose.exp([0.1, 0.0, 0.0, 0.0, 0.02, 0.0]),
    SE3Pose.exp([0.0, 0.08, 0.1, 0.01, 0.0, 0.0]),
]


class TestInverseDepth:
    def test_matches_ray_plane_intersection(self, camera, wall_plane, rng):
        for _ in range(50):
            pose = _small_motion(rng)
            p = Pixel(rng.uniform(0, camera.width - 1), rng.uniform(0, camera.height - 1))
            rho = inverse_depth_on_plane(pose, p, wall_plane, camera)
            ray = pose.R @ camera.lift_unit_plane(p)
            s = -(wall_plane.n @ pose.translation + wall_plane.d) / (wall_plane.n @ ray)
            assert rho == pytest.approx(1.0 / s, rel=1e-12)
            x = point_on_plane(pose, p, rho, camera)
            assert wall_plane.n @ x + wall_plane.d == pytest.approx(0.0, abs=1e-9)
            back = camera.project(pose.inverse_transform(x))
            assert back.u == pytest.approx(p.u, abs=1e-9) and back.v == pytest.approx(p.v, abs=1e-9)

    def test_camera_on_the_plane(self, camera, wall_plane):
        on_plane = SE3Pose(np.array([0.0, 0.0, 0.0, 1.0]), np.array([0.0, 0.0, 5.0]))
        assert inverse_depth_on_plane(on_plane, Pixel(10.0, 10.0), wall_plane, camera) is None

    def test_plane_behind_the_camera(self, camera):
        behind = PlaneCoeff(np.array([0.0, 0.0, 1.0]), 5.0)  # z = -5
        assert inverse_depth_on_plane(SE3Pose.identity(), Pixel(160.0, 120.0), behind, camera) is None

    def test_grazing_ray_beyond_max_depth(self, camera):
        floor = PlaneCoeff(np.array([0.0, -1.0, 0.0]), 1.0)  # y = 1, below the camera
        # a ray just under the horizon hits the floor far away
        p = Pixel(160.0, 120.0 + 240.0 * 1e-4)
        assert inverse_depth_on_plane(SE3Pose.identity(), p, floor, camera) is None
        assert inverse_depth_on_plane(SE3Pose.identity(), Pixel(160.0, 200.0), floor, camera) > 0


class TestSurfelFactorJacobians:
    def _factors(self, camera, wall_plane, rng, count=12):
        factors = []
        for i in range(count):
            p = Pixel(rng.uniform(40, 280), rng.uniform(30, 210))
            factors.append(
                SurfelReprojFactor(wall_plane, 0, p, 1, Pixel(rng.uniform(40, 280), rng.uniform(30, 210)), i % 3, i)
            )
        return SurfelFactors.from_factors(factors)

    def test_vectorized_residuals_match_single_factor(self, camera, wall_plane, rng):
        poses = {0: _small_motion(rng), 1: _small_motion(rng)}
        factors = self._factors(camera, wall_plane, rng)
        ev = evaluate_factors(factors, poses, camera)
        assert ev.valid.all()
        for i in range(len(factors)):
            single = surfel_reproj_residual(factors[i], poses[0], poses[1], camera)
            assert np.allclose(ev.residuals[i], single, atol=1e-9)

    @pytest.mark.parametrize("which", [0, 1])
    def test_analytic_matches_central_differences(self, camera, wall_plane, rng, which):
        poses = {0: _small_motion(rng), 1: _small_motion(rng)}
        factors = self._factors(camera, wall_plane, rng)
        ev = evaluate_factors(factors, poses, camera, jacobians=True)
        analytic = ev.J_anchor if which == 0 else ev.J_target

        def residuals(pose):
            return evaluate_factors(factors, {**poses, which: pose}, camera).residuals

        numeric = _numeric_jacobian(residuals, poses[which])
        assert np.allclose(analytic, numeric, rtol=1e-4, atol=1e-4)

    def test_degenerate_factors_are_flagged(self, camera, wall_plane):
        poses = {0: SE3Pose(np.array([0.0, 0.0, 0.0, 1.0]), np.array([0.0, 0.0, 5.0])), 1: SE3Pose.identity()}
        factors = SurfelFactors.from_factors(
            [SurfelReprojFactor(wall_plane, 0, Pixel(100.0, 100.0), 1, Pixel(100.0, 100.0), 0)]
        )
        ev = evaluate_factors(factors, poses, camera, jacobians=True)
        assert not ev.valid[0]
        assert np.all(ev.J_anchor == 0.0) and np.all(ev.residuals == 0.0)


class TestMotionOnly:
    def _scene(self, camera, rng, n=60):
        X = np.column_stack([rng.uniform(-2, 2, n), rng.uniform(-1.5, 1.5, n), rng.uniform(3, 6, n)])
        truth = _small_motion(rng, 0.1, 0.05)
        uv, _ = camera.project_points(truth.inverse_transform(X))
        return X, uv, truth

    def test_jacobian_matches_central_differences(self, camera, rng):
        X, uv, truth = self._scene(camera, rng, 10)
        pose = truth.retract(rng.normal(0, 0.01, 6))
        _, valid, J = reprojection_errors(pose, X, uv, camera, jacobians=True)
        assert valid.all()
        numeric = _numeric_jacobian(lambda p: reprojection_errors(p, X, uv, camera)[0], pose)
        assert np.allclose(J, numeric, rtol=1e-4, atol=1e-4)

    def test_recovers_pose_and_rejects_outliers(self, camera, rng):
        X, uv, truth = self._scene(camera, rng)
        outliers = np.arange(0, 60, 5)
        uv = uv.copy()
        uv[outliers] += 50.0
        start = truth.retract(np.array([0.005, -0.004, 0.003, 0.002, -0.001, 0.002]))
        result = refine_motion_only(start, X, uv, np.zeros(60), camera)
        assert result.status == "converged"
        assert result.pose.distance_to(truth) < 1e-6
        assert result.n_in == 60 - outliers.size
        assert not result.inliers[outliers].any()

    def test_points_behind_the_camera(self, camera):
        result = refine_motion_only(SE3Pose.identity(), -np.ones((4, 3)), np.zeros((4, 2)), np.zeros(4), camera)
        assert result.status == "no-valid-points"
        assert result.n_in == 0


class TestHuber:
    def test_quadratic_inside_linear_outside(self):
        cost, weights = huber_cost_and_weights(np.array([1.0, 4.0, 16.0]), 2.0)
        assert cost.tolist() == [1.0, 4.0, 12.0]
        assert weights.tolist() == [1.0, 1.0, 0.5]


class _Quadratic(LeastSquaresProblem):
    def __init__(self, target):
        self.target = np.asarray(target, dtype=float)

    def cost(self, state):
        return float(np.sum((state - self.target) ** 2))

    def linearize(self, state):
        return Linearization(self.cost(state), np.eye(state.size), state - self.target)

    def retract(self, state, delta):
        return state + delta


class TestLevenbergMarquardt:
    def test_converges_on_a_quadratic(self):
        result = levenberg_marquardt(_Quadratic([1.0, -2.0, 3.0]), np.zeros(3))
        assert result.success
        assert np.allclose(result.state, [1.0, -2.0, 3.0], atol=1e-6)
        assert result.final_cost < result.initial_cost
        assert result.history[0]["iteration"] == 0

    def test_already_at_minimum(self):
        result = levenberg_marquardt(_Quadratic([1.0]), np.array([1.0]))
        assert result.status == "converged" and result.iterations == 0


class TestOptimizePoses:
    def test_noiseless_database_has_zero_cost(self, wall_db, wall, wall_frame):
        db = _wall_database(wall_db, wall, wall_frame, WALL_POSES)
        factors = build_surfel_factors(db, wall)
        assert len(factors) == 2 * len(db.points)
        assert set(factors.anchor.tolist()) == {0}
        report = optimize_poses(db, wall)
        assert report.success
        assert report.final_cost < 1e-8
        assert report.skipped_residuals == 0

    def test_perturbed_poses_lower_the_cost(self, wall_db, wall, wall_frame, rng):
        db = _wall_database(wall_db, wall, wall_frame, WALL_POSES)
        db.set_poses({k: kf.pose.retract(rng.normal(0, 0.01, 6)) for k, kf in db.keyframes.items() if k > 0})
        report = optimize_poses(db, wall)
        assert report.success
        assert report.final_cost < report.initial_cost
        assert report.to_dict()["max_pose_update"] > 0.0
        assert report.history[0]["cost"] == pytest.approx(report.initial_cost)
        # the wall plane pins every keyframe, so the perturbation is undone
        assert report.position_rmse(dict(enumerate(WALL_POSES))) < 1e-3

    def test_single_keyframe_is_degenerate(self, wall_db, wall, wall_frame):
        db = _wall_database(wall_db, wall, wall_frame, WALL_POSES[:1])
        report = optimize_poses(db, wall)
        assert report.status == "degenerate"
        assert not report.success
        assert db.keyframes[0].pose is WALL_POSES[0]

    def test_cost_csv(self, wall_db, wall, wall_frame, tmp_path, rng):
        db = _wall_database(wall_db, wall, wall_frame, WALL_POSES)
        db.set_poses({1: db.keyframes[1].pose.retract(rng.normal(0, 0.01, 6))})
        report = optimize_poses(db, wall, OptimizerSettings(max_iterations=5))
        report.write_cost_csv(tmp_path / "cost.csv")
        lines = (tmp_path / "cost.csv").read_text().splitlines()
        assert lines[0] == "iteration,cost,lambda,accepted"
        assert len(lines) == len(report.history) + 1


class TestRefreshMapPoints:
    def test_points_return_to_their_surfel_centers(self, wall_db, wall, wall_frame):
        db = _wall_database(wall_db, wall, wall_frame, WALL_POSES)
        for point in db.points.values():
            point.position = np.zeros(3)
        report = refresh_map_points(db, wall)
        assert report.updated == len(db.points) and report.degenerate == 0
        for point in db.points.values():
            assert np.allclose(point.position, wall.centers[point.surfel_id], atol=1e-9)
