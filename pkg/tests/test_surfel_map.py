import numpy as np
import pytest

from surfelreloc.dataflows.surfel_io import SurfelMapFormatError
from surfelreloc.geometry.camera import PinholeCamera
from surfelreloc.geometry.se3 import SE3Pose
from surfelreloc.mapping.surfel_map import (
    EMPTY,
    Z_NEAR,
    SurfelIndexMap,
    SurfelMap,
    associate_keypoints,
    render_index_map,
)


def _random_map(rng: np.random.Generator, count: int) -> SurfelMap:
    centers = np.column_stack([rng.uniform(-2, 2, count), rng.uniform(-1.5, 1.5, count), rng.uniform(-0.5, 6.0, count)])
    normals = rng.normal(size=(count, 3))
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    return SurfelMap(centers, normals, rng.uniform(0.02, 0.3, count))


def _oracle(surfel_map: SurfelMap, pose: SE3Pose, cam: PinholeCamera) -> SurfelIndexMap:
    """Every pixel tested against every culled disk; the smallest (depth, id) wins."""
    Xc = pose.inverse_transform(surfel_map.centers)
    facing = ((surfel_map.centers - pose.translation) * surfel_map.normals).sum(axis=1) < 0.0
    keep = np.flatnonzero((Xc[:, 2] > Z_NEAR) & facing)
    z = Xc[keep, 2]
    u = cam.fx * Xc[keep, 0] / z + cam.cx
    v = cam.fy * Xc[keep, 1] / z + cam.cy
    r = np.maximum(1.0, cam.fx * surfel_map.radii[keep] / z)
    order = np.lexsort((keep, z))
    keep, z, u, v, r = keep[order], z[order], u[order], v[order], r[order]

    rows, cols = np.mgrid[0 : cam.height, 0 : cam.width]
    px, py = cols.reshape(-1, 1), rows.reshape(-1, 1)
    inside = (px - u[None, :]) ** 2 + (py - v[None, :]) ** 2 <= r[None, :] ** 2
    hit = inside.any(axis=1)
    first = np.argmax(inside, axis=1)
    ids = np.where(hit, keep[first] if keep.size else EMPTY, EMPTY).reshape(cam.height, cam.width)
    depth = np.where(hit, z[first] if z.size else 0.0, 0.0).reshape(cam.height, cam.width)
    return SurfelIndexMap(ids.astype(np.int64), depth)


class TestSurfelMap:
    def test_plane_offsets(self):
        m = SurfelMap([[0.0, 0.0, 2.0]], [[0.0, 0.0, -1.0]], [0.1])
        assert m.plane(0).d == pytest.approx(2.0)
        assert m[0].plane().d == pytest.approx(2.0)

    def test_rejects_bad_radius(self):
        with pytest.raises(SurfelMapFormatError):
            SurfelMap([[0.0, 0.0, 2.0]], [[0.0, 0.0, -1.0]], [0.0])

    def test_rejects_length_mismatch(self):
        with pytest.raises(SurfelMapFormatError):
            SurfelMap([[0.0, 0.0, 2.0]], [[0.0, 0.0, -1.0], [1.0, 0.0, 0.0]], [0.1])

    def test_arrays_are_read_only(self):
        m = SurfelMap([[0.0, 0.0, 2.0]], [[0.0, 0.0, -1.0]], [0.1])
        with pytest.raises(ValueError):
            m.centers[0, 0] = 1.0


class TestRenderIndexMap:
    def test_matches_brute_force_oracle(self):
        cam = PinholeCamera(fx=60.0, fy=60.0, cx=32.0, cy=24.0, width=64, height=48)
        for seed in range(20):
            rng = np.random.default_rng(seed)
            surfel_map = _random_map(rng, int(rng.integers(50, 500)))
            pose = SE3Pose.exp(np.concatenate([rng.normal(0, 0.1, 3), rng.normal(0, 0.05, 3)]))
            got = render_index_map(surfel_map, pose, cam)
            want = _oracle(surfel_map, pose, cam)
            assert np.array_equal(got.ids, want.ids), f"seed {seed}"
            assert np.array_equal(got.depth, want.depth), f"seed {seed}"

    def test_nearest_surfel_wins(self, camera):
        m = SurfelMap(
            [[0.0, 0.0, 3.0], [0.0, 0.0, 2.0]],
            [[0.0, 0.0, -1.0], [0.0, 0.0, -1.0]],
            [0.5, 0.5],
        )
        index_map = render_index_map(m, SE3Pose.identity(), camera)
        assert index_map.ids[120, 160] == 1
        assert index_map.depth[120, 160] == pytest.approx(2.0)

    def test_back_facing_and_behind_are_culled(self, camera):
        m = SurfelMap(
            [[0.0, 0.0, 2.0], [0.0, 0.0, -2.0]],
            [[0.0, 0.0, 1.0], [0.0, 0.0, 1.0]],
            [0.5, 0.5],
        )
        index_map = render_index_map(m, SE3Pose.identity(), camera)
        assert index_map.rendered_count() == 0
        assert (index_map.depth == 0.0).all()

    def test_small_disks_cover_at_least_one_pixel(self, camera):
        m = SurfelMap([[0.0, 0.0, 100.0]], [[0.0, 0.0, -1.0]], [1e-4])
        assert render_index_map(m, SE3Pose.identity(), camera).ids[120, 160] == 0


class TestAssociateKeypoints:
    def _index_map(self) -> SurfelIndexMap:
        ids = np.full((10, 10), EMPTY, dtype=np.int64)
        ids[:, :5] = 3
        ids[:, 5:] = 7
        ids[0, 0] = EMPTY
        return SurfelIndexMap(ids, np.where(ids != EMPTY, 1.0, 0.0))

    def test_rounded_lookup_and_neighbors(self):
        assoc = associate_keypoints(self._index_map(), np.array([[4.4, 5.0], [2.0, 2.0]]), np.array([1.0, 1.0]))
        assert assoc.surfel_ids.tolist() == [3, 3]
        assert assoc.neighbors[0] == frozenset({7})
        assert assoc.neighbors[1] == frozenset()

    def test_empty_pixel_keeps_neighbors_without_self(self):
        assoc = associate_keypoints(self._index_map(), np.array([[0.2, 0.2]]), np.array([1.5]))
        assert assoc.surfel_ids.tolist() == [EMPTY]
        assert assoc.neighbors[0] == frozenset({3})
        assert assoc.associated().size == 0

    def test_out_of_image_keypoints_are_skipped(self):
        assoc = associate_keypoints(self._index_map(), np.array([[9.6, 3.0], [-0.6, 1.0], [9.4, 9.4]]), np.ones(3))
        assert assoc.skipped == 2
        assert assoc.surfel_ids.tolist() == [EMPTY, EMPTY, 7]
