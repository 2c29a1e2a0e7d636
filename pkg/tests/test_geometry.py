import numpy as np
import pytest

from conftest import random_rotation

from nocskit.errors import DegenerateInput, NonPositiveDepth
from nocskit.geometry import (
    CameraIntrinsics,
    OrientedBox3D,
    Rotation6D,
    UnitRay,
    allocentric_to_egocentric,
    backproject,
    box_corners,
    egocentric_to_allocentric,
    project,
    rot6d_decode,
    rot6d_encode,
    rotation_geodesic,
    view_rotation,
)


class TestProject:
    def test_optical_axis_maps_to_principal_point(self, camera):
        assert np.allclose(project([0, 0, 1], camera), [50, 50])

    def test_offset_point(self, camera):
        assert np.allclose(project([1, 0, 2], camera), [100, 50])

    def test_behind_camera_raises(self, camera):
        with pytest.raises(NonPositiveDepth):
            project([0, 0, -1], camera)
        with pytest.raises(NonPositiveDepth):
            project([0, 0, 0], camera)


class TestBackproject:
    def test_principal_point(self, camera):
        assert np.allclose(backproject([50, 50], 1.0, camera), [0, 0, 1])

    def test_inverse_of_projection_example(self, camera):
        assert np.allclose(backproject([100, 50], 2.0, camera), [1, 0, 2])

    def test_non_positive_depth_raises(self, camera):
        with pytest.raises(NonPositiveDepth):
            backproject([10, 10], 0.0, camera)

    def test_round_trip_property(self, camera):
        rng = np.random.default_rng(0)
        worst = 0.0
        for _ in range(10_000):
            px = rng.uniform(0, 100, size=2)
            depth = rng.uniform(0.1, 50.0)
            back = project(backproject(px, depth, camera), camera)
            worst = max(worst, float(np.max(np.abs(back - px))))
        assert worst < 1e-9


class TestRot6d:
    def test_identity(self):
        R = rot6d_decode(Rotation6D(a1=[1, 0, 0], a2=[0, 1, 0]))
        assert np.allclose(R, np.eye(3))

    def test_scale_invariance(self):
        R = rot6d_decode(Rotation6D(a1=[2, 0, 0], a2=[0, 3, 0]))
        assert np.allclose(R, np.eye(3))

    def test_parallel_inputs_raise(self):
        with pytest.raises(DegenerateInput):
            rot6d_decode(Rotation6D(a1=[1, 0, 0], a2=[1, 0, 0]))
        with pytest.raises(DegenerateInput):
            rot6d_decode(Rotation6D(a1=[0, 0, 0], a2=[0, 1, 0]))

    def test_encode_identity(self):
        r = rot6d_encode(np.eye(3))
        assert np.allclose(r.a1, [1, 0, 0])
        assert np.allclose(r.a2, [0, 1, 0])

    def test_round_trip_over_random_rotations(self):
        rng = np.random.default_rng(1)
        for _ in range(1000):
            R = random_rotation(rng)
            back = rot6d_decode(rot6d_encode(R))
            assert np.max(np.abs(back - R)) < 1e-9

    def test_decode_always_lands_in_so3(self):
        rng = np.random.default_rng(2)
        for _ in range(500):
            r = Rotation6D(a1=rng.normal(size=3), a2=rng.normal(size=3))
            R = rot6d_decode(r)
            assert np.max(np.abs(R.T @ R - np.eye(3))) < 1e-9
            assert abs(np.linalg.det(R) - 1) < 1e-9


class TestAllocentricEgocentric:
    def test_optical_axis_ray_is_identity(self):
        rng = np.random.default_rng(3)
        R = random_rotation(rng)
        ray = UnitRay([0.0, 0.0, 1.0])
        assert np.allclose(allocentric_to_egocentric(R, ray), R)
        assert np.allclose(egocentric_to_allocentric(R, ray), R)

    def test_round_trip(self):
        rng = np.random.default_rng(4)
        for _ in range(500):
            R = random_rotation(rng)
            d = rng.normal(size=3)
            d[2] = abs(d[2]) + 0.2  # forward hemisphere
            ray = UnitRay.from_vector(d)
            ego = allocentric_to_egocentric(R, ray)
            back = egocentric_to_allocentric(ego, ray)
            assert np.max(np.abs(back - R)) < 1e-9

    def test_antiparallel_ray_raises(self):
        with pytest.raises(DegenerateInput):
            view_rotation(UnitRay([0.0, 0.0, -1.0]))

    def test_allocentric_invariance_across_rays(self):
        # The same allocentric rotation seen along two rays differs exactly
        # by the view-rotation composition.
        rng = np.random.default_rng(5)
        R_alloc = random_rotation(rng)
        ray1 = UnitRay.from_vector([0.1, 0.2, 1.0])
        ray2 = UnitRay.from_vector([-0.3, 0.05, 1.0])
        ego1 = allocentric_to_egocentric(R_alloc, ray1)
        ego2 = allocentric_to_egocentric(R_alloc, ray2)
        expected = view_rotation(ray2) @ view_rotation(ray1).T @ ego1
        assert np.max(np.abs(ego2 - expected)) < 1e-12

    def test_view_rotation_sends_axis_to_ray(self):
        rng = np.random.default_rng(6)
        for _ in range(200):
            d = rng.normal(size=3)
            d[2] = abs(d[2]) + 0.1
            ray = UnitRay.from_vector(d)
            R = view_rotation(ray)
            assert np.allclose(R @ [0, 0, 1], ray.direction, atol=1e-12)


class TestBoxCorners:
    def test_unit_cube_at_origin(self):
        box = OrientedBox3D(center=[0, 0, 0], size=[1, 1, 1], rotation=np.eye(3))
        corners = box_corners(box)
        expected = {(sx / 2, sy / 2, sz / 2)
                    for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)}
        got = {tuple(np.round(c, 12)) for c in corners}
        assert got == expected

    def test_translation_equivariance(self):
        rng = np.random.default_rng(7)
        R = random_rotation(rng)
        t = rng.normal(size=3)
        a = OrientedBox3D(center=[0, 0, 0], size=[1, 2, 3], rotation=R)
        b = OrientedBox3D(center=t, size=[1, 2, 3], rotation=R)
        assert np.allclose(box_corners(b), box_corners(a) + t)

    def test_rotation_preserves_pairwise_distances(self):
        rng = np.random.default_rng(8)
        base = OrientedBox3D(center=[0, 0, 0], size=[0.7, 1.9, 3.1], rotation=np.eye(3))
        d0 = _pairwise(box_corners(base))
        for _ in range(50):
            R = random_rotation(rng)
            rotated = OrientedBox3D(center=[0, 0, 0], size=[0.7, 1.9, 3.1], rotation=R)
            assert np.max(np.abs(_pairwise(box_corners(rotated)) - d0)) < 1e-9

    def test_rotation_equivariance(self):
        rng = np.random.default_rng(9)
        R = random_rotation(rng)
        a = OrientedBox3D(center=[0, 0, 0], size=[1, 1, 1], rotation=np.eye(3))
        b = OrientedBox3D(center=[0, 0, 0], size=[1, 1, 1], rotation=R)
        assert np.allclose(box_corners(b), box_corners(a) @ R.T)


def _pairwise(points: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - points[None, :, :]
    return np.linalg.norm(diff, axis=-1)


class TestInvariants:
    def test_rotation_geodesic_is_zero_on_equal(self):
        rng = np.random.default_rng(10)
        R = random_rotation(rng)
        assert rotation_geodesic(R, R) < 1e-6

    def test_camera_invariants_enforced(self):
        with pytest.raises(ValueError):
            CameraIntrinsics(fx=-1, fy=1, cx=0, cy=0, width=10, height=10)
        with pytest.raises(ValueError):
            CameraIntrinsics(fx=1, fy=1, cx=20, cy=0, width=10, height=10)
