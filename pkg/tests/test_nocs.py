import numpy as np
import pytest

from nocskit.errors import CorruptStream, DimensionMismatch, InvalidSize, RangeViolation
from nocskit.geometry import CameraIntrinsics, OrientedBox3D, backproject_grid
from nocskit.nocs import (
    DepthMap,
    InstanceMask,
    NocsMap,
    compute_nocs_map,
    decode_png16,
    encode_png16,
    unnormalize,
)


@pytest.fixture
def cam128():
    # fx/fy chosen so the worked example below lands on integer pixels.
    return CameraIntrinsics(fx=120.0, fy=120.0, cx=50.0, cy=50.0, width=128, height=128)


def _scene_maps(cam, entries):
    """Depth/mask grids with the given {(row, col): depth} entries."""
    depth = np.full((cam.height, cam.width), 1.0)
    valid = np.zeros((cam.height, cam.width), dtype=bool)
    mask = np.zeros((cam.height, cam.width), dtype=bool)
    for (row, col), d in entries.items():
        depth[row, col] = d
        valid[row, col] = True
        mask[row, col] = True
    return DepthMap(depth=depth, valid=valid), InstanceMask(mask=mask)


class TestComputeNocsMap:
    def test_worked_example(self, cam128):
        # Pixel (u=60, v=70) at depth 6 backprojects to (0.5, 1, 6); with the
        # box below the object point is (0.5, 1, 1) and the diagonal is 3.
        box = OrientedBox3D(center=[0, 0, 5], size=[1, 2, 2], rotation=np.eye(3))
        depth, mask = _scene_maps(cam128, {(70, 60): 6.0})
        nocs = compute_nocs_map(depth, cam128, box, mask)
        assert nocs.valid[70, 60]
        assert np.allclose(nocs.coords[70, 60], [1 / 6, 1 / 3, 1 / 3], atol=1e-12)

    def test_box_center_maps_to_zero(self, cam128):
        box = OrientedBox3D(center=[0, 0, 5], size=[1, 2, 2], rotation=np.eye(3))
        depth, mask = _scene_maps(cam128, {(50, 50): 5.0})
        nocs = compute_nocs_map(depth, cam128, box, mask)
        assert nocs.valid[50, 50]
        assert np.allclose(nocs.coords[50, 50], 0.0)

    def test_point_outside_box_is_dropped(self, cam128):
        box = OrientedBox3D(center=[0, 0, 5], size=[1, 2, 2], rotation=np.eye(3))
        # Behind the far face by more than 1% of the diagonal.
        depth, mask = _scene_maps(cam128, {(50, 50): 6.1})
        nocs = compute_nocs_map(depth, cam128, box, mask)
        assert not nocs.valid[50, 50]
        assert nocs.valid_count() == 0

    def test_epsilon_band_point_is_kept_and_clamped(self, cam128):
        box = OrientedBox3D(center=[0, 0, 5], size=[1, 2, 2], rotation=np.eye(3))
        diag = box.diagonal
        depth, mask = _scene_maps(cam128, {(50, 50): 6.0 + 0.5 * 0.01 * diag})
        nocs = compute_nocs_map(depth, cam128, box, mask)
        assert nocs.valid[50, 50]
        assert np.linalg.norm(nocs.coords[50, 50]) <= 0.5 + 1e-12

    def test_valid_subset_of_mask_and_depth(self, cam128):
        box = OrientedBox3D(center=[0, 0, 5], size=[2, 2, 2], rotation=np.eye(3))
        rng = np.random.default_rng(0)
        depth_arr = rng.uniform(4.0, 6.0, size=(128, 128))
        depth_valid = rng.random((128, 128)) < 0.6
        mask = rng.random((128, 128)) < 0.5
        nocs = compute_nocs_map(
            DepthMap(depth=depth_arr, valid=depth_valid),
            cam128,
            box,
            InstanceMask(mask=mask),
        )
        assert not np.any(nocs.valid & ~(mask & depth_valid))

    def test_dimension_mismatch(self, cam128):
        box = OrientedBox3D(center=[0, 0, 5], size=[1, 1, 1], rotation=np.eye(3))
        depth = DepthMap(depth=np.ones((10, 10)), valid=np.ones((10, 10), bool))
        mask = InstanceMask(mask=np.ones((12, 12), bool))
        with pytest.raises(DimensionMismatch):
            compute_nocs_map(depth, cam128, box, mask)


class TestUnnormalize:
    def test_inverse_of_worked_example(self):
        assert np.allclose(
            unnormalize(np.array([1 / 6, 1 / 3, 1 / 3]), np.array([1, 2, 2])),
            [0.5, 1.0, 1.0],
        )

    def test_zero_fixed_point(self):
        assert np.allclose(unnormalize(np.zeros(3), np.array([1, 2, 2])), 0.0)

    def test_invalid_size(self):
        with pytest.raises(InvalidSize):
            unnormalize(np.zeros(3), np.array([1.0, 0.0, 2.0]))

    def test_round_trip_against_compute(self, cam128):
        # Inside-box surface points only: the epsilon band outside the box
        # is deliberately snapped onto the box and does not round-trip.
        box = OrientedBox3D(center=[0.2, -0.1, 5], size=[1, 2, 2], rotation=np.eye(3))
        entries = {(50, 50): 5.0, (65, 55): 5.2, (40, 45): 4.6}
        depth, mask = _scene_maps(cam128, entries)
        nocs = compute_nocs_map(depth, cam128, box, mask)
        pts_cam = backproject_grid(depth.depth, cam128)
        for (row, col) in entries:
            if not nocs.valid[row, col]:
                continue
            x_obj = unnormalize(nocs.coords[row, col], box.size)
            back = box.rotation @ x_obj + box.center
            assert np.linalg.norm(back - pts_cam[row, col]) < 1e-6


class TestPng16Codec:
    def test_value_extremes(self):
        coords = np.zeros((1, 2, 3))
        coords[0, 0] = [-0.5, -0.5, -0.5]
        coords[0, 1] = [0.5, 0.5, 0.5]
        valid = np.ones((1, 2), bool)
        data = encode_png16(NocsMap(coords=coords, valid=valid))
        back = decode_png16(data)
        assert np.allclose(back.coords[0, 0], -0.5)
        assert np.allclose(back.coords[0, 1], 0.5)

    def test_round_trip_quantization_bound(self):
        rng = np.random.default_rng(1)
        coords = rng.uniform(-0.5, 0.5, size=(32, 24, 3))
        valid = rng.random((32, 24)) < 0.7
        nocs = NocsMap(coords=np.where(valid[..., None], coords, 0.0), valid=valid)
        back = decode_png16(encode_png16(nocs))
        assert np.array_equal(back.valid, valid)
        err = np.abs(back.coords[valid] - nocs.coords[valid])
        assert err.max() <= 7.7e-6

    def test_all_invalid_map(self):
        nocs = NocsMap(coords=np.zeros((4, 4, 3)), valid=np.zeros((4, 4), bool))
        back = decode_png16(encode_png16(nocs))
        assert back.valid_count() == 0

    def test_range_violation(self):
        coords = np.full((2, 2, 3), 0.6)
        nocs = NocsMap(coords=coords, valid=np.ones((2, 2), bool))
        with pytest.raises(RangeViolation):
            encode_png16(nocs)

    def test_corrupt_stream(self):
        with pytest.raises(CorruptStream):
            decode_png16(b"not a png at all")
        good = encode_png16(
            NocsMap(coords=np.zeros((2, 2, 3)), valid=np.ones((2, 2), bool))
        )
        with pytest.raises(CorruptStream):
            decode_png16(good[:40])

    def test_deterministic_encoding(self):
        rng = np.random.default_rng(2)
        coords = rng.uniform(-0.5, 0.5, size=(16, 16, 3))
        valid = np.ones((16, 16), bool)
        a = encode_png16(NocsMap(coords=coords, valid=valid))
        b = encode_png16(NocsMap(coords=coords.copy(), valid=valid.copy()))
        assert a == b
