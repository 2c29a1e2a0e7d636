import json

import numpy as np
import pytest

from conftest import random_rotation

from nocskit.dataset import (
    CanonicalizationTable,
    InstanceRecord,
    ShardInstance,
    apply_canonicalization,
    cube_rotations,
    enumerate_orientation_candidates,
    is_cube_rotation,
    load_taxonomy,
    read_shard,
    transform_nocs,
    validate_dataset,
    write_shard,
)
from nocskit.errors import InvalidOffset, IoFailure, NotGravityAligned, SchemaViolation
from nocskit.geometry import (
    CameraIntrinsics,
    OrientedBox3D,
    box_corners,
    rotation_about_axis,
)
from nocskit.nocs import InstanceMask, NocsMap, compute_nocs_map, encode_png16
from nocskit.synth import SceneObject, SceneSpec, random_scene, render_scene


def _corner_set(box):
    return {tuple(np.round(c, 9)) for c in box_corners(box)}


class TestTaxonomy:
    def test_has_97_categories(self):
        registry = load_taxonomy()
        assert len(registry) == 97

    def test_symmetry_tags(self):
        registry = load_taxonomy()
        assert registry["bottle"] == "continuous"
        assert registry["bowl"] == "continuous"
        assert registry["vase"] == "continuous"
        assert registry["car"] == "none"
        assert set(registry.values()) <= {"none", "4-fold", "continuous"}


class TestCubeGroup:
    def test_24_elements(self):
        group = cube_rotations()
        assert len(group) == 24
        seen = {tuple(M.reshape(-1).astype(int)) for M in group}
        assert len(seen) == 24
        for M in group:
            assert abs(np.linalg.det(M) - 1) < 1e-12

    def test_membership_check(self):
        assert is_cube_rotation(np.eye(3))
        assert is_cube_rotation(rotation_about_axis([0, 0, 1], np.pi / 2))
        assert not is_cube_rotation(rotation_about_axis([0, 0, 1], np.pi / 3))


class TestApplyCanonicalization:
    def test_identity_offset(self):
        rng = np.random.default_rng(0)
        box = OrientedBox3D(
            center=[0.1, 0.2, 5], size=[1, 2, 3], rotation=random_rotation(rng)
        )
        out = apply_canonicalization(box, np.eye(3))
        assert np.allclose(out.center, box.center)
        assert np.allclose(out.size, box.size)
        assert np.allclose(out.rotation, box.rotation)

    def test_90_degree_z_offset_swaps_extents(self):
        box = OrientedBox3D(center=[0, 0, 5], size=[1, 2, 3], rotation=np.eye(3))
        offset = rotation_about_axis([0, 0, 1], np.pi / 2)
        out = apply_canonicalization(box, offset)
        assert np.allclose(out.size, [2, 1, 3])

    def test_corner_set_preserved_for_every_offset(self):
        rng = np.random.default_rng(1)
        box = OrientedBox3D(
            center=[0.3, -0.2, 6], size=[0.8, 1.7, 2.6], rotation=random_rotation(rng)
        )
        base = _corner_set(box)
        for offset in cube_rotations():
            assert _corner_set(apply_canonicalization(box, offset)) == base

    def test_invalid_offset_rejected(self):
        box = OrientedBox3D(center=[0, 0, 5], size=[1, 1, 1], rotation=np.eye(3))
        with pytest.raises(InvalidOffset):
            apply_canonicalization(box, rotation_about_axis([0, 0, 1], 0.5))

    def test_nocs_transform_matches_recomputation(self):
        # Recomputing the map from the canonicalized box must equal the
        # direct per-pixel transform with the offset inverse.
        cam = CameraIntrinsics(fx=200, fy=200, cx=64, cy=64, width=128, height=128)
        rng = np.random.default_rng(2)
        box = OrientedBox3D(
            center=[0, 0, 5], size=[1.0, 1.4, 2.0], rotation=random_rotation(rng)
        )
        scene = render_scene(
            SceneSpec(
                camera=cam,
                objects=(SceneObject(category="box", box=box),),
                seed=0,
            )
        )
        nocs = scene.objects[0].nocs
        for offset in cube_rotations()[:6]:
            new_box = apply_canonicalization(box, offset)
            recomputed = compute_nocs_map(scene.depth, cam, new_box, scene.objects[0].mask)
            direct = transform_nocs(nocs, offset)
            assert np.array_equal(recomputed.valid, direct.valid)
            assert np.max(np.abs(recomputed.coords - direct.coords)) < 1e-9


class TestOrientationCandidates:
    def _gravity_box(self, rng, yaw=0.7):
        base = np.array([[0.0, -1.0, 0.0], [0.0, 0.0, -1.0], [1.0, 0.0, 0.0]])
        R = rotation_about_axis([0, -1, 0], yaw) @ base
        return OrientedBox3D(center=[0, 0, 5], size=[0.9, 1.3, 1.8], rotation=R)

    def test_six_distinct_corner_preserving_candidates(self):
        rng = np.random.default_rng(3)
        box = self._gravity_box(rng)
        candidates = enumerate_orientation_candidates(box)
        assert len(candidates) == 6
        base = _corner_set(box)
        rotations = []
        for cand, cbox in candidates:
            assert _corner_set(cbox) == base
            rotations.append(cbox.rotation)
        for i in range(6):
            for j in range(i + 1, 6):
                assert np.max(np.abs(rotations[i] - rotations[j])) > 1e-6

    def test_round_trip_through_inverse(self):
        rng = np.random.default_rng(4)
        box = self._gravity_box(rng, yaw=-1.2)
        for cand, cbox in enumerate_orientation_candidates(box):
            back = apply_canonicalization(cbox, cand.rotation.T)
            assert np.allclose(back.rotation, box.rotation, atol=1e-12)
            assert np.allclose(back.size, box.size)

    def test_not_gravity_aligned_rejected(self):
        rng = np.random.default_rng(5)
        box = self._gravity_box(rng)
        tilted = OrientedBox3D(
            center=box.center,
            size=box.size,
            rotation=rotation_about_axis([1, 0, 0], np.radians(20)) @ box.rotation,
        )
        with pytest.raises(NotGravityAligned):
            enumerate_orientation_candidates(tilted)

    def test_candidate_up_axes(self):
        # First four candidates keep +Z vertical; the last two point X
        # through the top/bottom faces.
        rng = np.random.default_rng(6)
        box = self._gravity_box(rng)
        up = np.array([0.0, -1.0, 0.0])
        for cand, cbox in enumerate_orientation_candidates(box)[:4]:
            z_img = cbox.rotation @ [0, 0, 1]
            assert z_img @ up > 0.99
        for cand, cbox in enumerate_orientation_candidates(box)[4:]:
            x_img = cbox.rotation @ [1, 0, 0]
            assert abs(x_img @ up) > 0.99


def _tiny_shard_instances(cam, n=3):
    rng = np.random.default_rng(7)
    instances = []
    for i in range(n):
        h, w = cam.height, cam.width
        valid = np.zeros((h, w), bool)
        valid[10 + i : 30 + i, 12 : 40] = True
        coords = np.where(
            valid[..., None], rng.uniform(-0.28, 0.28, size=(h, w, 3)), 0.0
        )
        box = OrientedBox3D(
            center=[0.1 * i, 0, 5 + i], size=[1, 1.2, 1.5], rotation=np.eye(3)
        )
        record = InstanceRecord(
            instance_id=f"frame0000_obj{i:02d}",
            category="chair",
            source_dataset="synth",
            box2d=(12.0, 10.0 + i, 39.0, 29.0 + i),
            box3d=box,
            camera=cam,
        )
        instances.append(
            ShardInstance(
                record=record,
                mask=InstanceMask(mask=valid),
                nocs=NocsMap(coords=coords, valid=valid),
            )
        )
    return instances


class TestShardIo:
    def test_write_read_round_trip(self, tmp_path):
        cam = CameraIntrinsics(fx=100, fy=100, cx=32, cy=32, width=64, height=64)
        instances = _tiny_shard_instances(cam)
        write_shard(instances, tmp_path / "shard")
        shard = read_shard(tmp_path / "shard")
        assert [r.instance_id for r in shard.records] == sorted(
            i.record.instance_id for i in instances
        )
        for inst in instances:
            record = shard.record_by_id(inst.record.instance_id)
            assert record.category == "chair"
            mask = shard.load_mask(record)
            assert np.array_equal(mask.mask, inst.mask.mask)
            nocs = shard.load_nocs(record)
            assert np.array_equal(nocs.valid, inst.nocs.valid)
            err = np.abs(nocs.coords[nocs.valid] - inst.nocs.coords[inst.nocs.valid])
            assert err.max() <= 7.7e-6

    def test_second_write_is_byte_identical(self, tmp_path):
        cam = CameraIntrinsics(fx=100, fy=100, cx=32, cy=32, width=64, height=64)
        instances = _tiny_shard_instances(cam)
        write_shard(instances, tmp_path / "a", metadata={"x": 1})
        shard = read_shard(tmp_path / "a")
        again = [
            ShardInstance(record=r, mask=shard.load_mask(r), nocs=shard.load_nocs(r))
            for r in shard.records
        ]
        write_shard(again, tmp_path / "b", metadata={"x": 1})
        for rel in ["records.jsonl", "metadata.json"] + [
            r.mask_path for r in shard.records
        ] + [r.nocs_path for r in shard.records]:
            assert (tmp_path / "a" / rel).read_bytes() == (
                tmp_path / "b" / rel
            ).read_bytes(), rel

    def test_missing_required_field_names_it(self, tmp_path):
        cam = CameraIntrinsics(fx=100, fy=100, cx=32, cy=32, width=64, height=64)
        write_shard(_tiny_shard_instances(cam, n=1), tmp_path / "shard")
        index = tmp_path / "shard" / "records.jsonl"
        record = json.loads(index.read_text().splitlines()[0])
        del record["box3d"]
        index.write_text(json.dumps(record) + "\n")
        with pytest.raises(SchemaViolation, match="box3d"):
            read_shard(tmp_path / "shard")

    def test_unknown_category_rejected(self, tmp_path):
        cam = CameraIntrinsics(fx=100, fy=100, cx=32, cy=32, width=64, height=64)
        instances = _tiny_shard_instances(cam, n=1)
        write_shard(instances, tmp_path / "shard")
        index = tmp_path / "shard" / "records.jsonl"
        record = json.loads(index.read_text().splitlines()[0])
        record["category"] = "flying saucer"
        index.write_text(json.dumps(record) + "\n")
        with pytest.raises(SchemaViolation, match="category"):
            read_shard(tmp_path / "shard")

    def test_missing_shard_dir(self, tmp_path):
        with pytest.raises(IoFailure):
            read_shard(tmp_path / "nope")


class TestValidateDataset:
    def _synth_shard(self, tmp_path):
        scene = render_scene(random_scene(11, n_objects=3))
        instances = []
        for j, obj in enumerate(scene.objects):
            if obj.mask.area() == 0:
                continue
            vv, uu = np.nonzero(obj.mask.mask)
            record = InstanceRecord(
                instance_id=f"frame0000_obj{j:02d}",
                category=obj.category,
                source_dataset="synth",
                box2d=(float(uu.min()), float(vv.min()), float(uu.max()), float(vv.max())),
                box3d=obj.box,
                camera=scene.camera,
            )
            instances.append(ShardInstance(record=record, mask=obj.mask, nocs=obj.nocs))
        write_shard(instances, tmp_path / "shard")
        return tmp_path / "shard"

    def test_clean_synth_shard_validates(self, tmp_path):
        shard_dir = self._synth_shard(tmp_path)
        report = validate_dataset(shard_dir)
        assert report.ok(), report.render()
        assert report.checked >= 1

    def test_unit_diagonal_violation_detected(self, tmp_path):
        shard_dir = self._synth_shard(tmp_path)
        shard = read_shard(shard_dir)
        record = shard.records[0]
        nocs = shard.load_nocs(record)
        coords = nocs.coords.copy()
        coords[nocs.valid] = 0.45  # norm 0.78 > 0.51 bound
        (shard_dir / record.nocs_path).write_bytes(
            encode_png16(NocsMap(coords=coords, valid=nocs.valid.copy()))
        )
        report = validate_dataset(shard_dir)
        kinds = {k for _, k, _ in report.violations}
        assert "unit_diagonal" in kinds

    def test_swapped_mask_dimension_violation(self, tmp_path):
        shard_dir = self._synth_shard(tmp_path)
        shard = read_shard(shard_dir)
        record = shard.records[0]
        from nocskit import pngio

        small = np.zeros((8, 8), dtype=np.uint8)
        (shard_dir / record.mask_path).write_bytes(pngio.encode_png(small))
        report = validate_dataset(shard_dir)
        kinds = {k for _, k, _ in report.violations}
        assert "dimensions" in kinds

    def test_heading_spread_reported(self, tmp_path):
        shard_dir = self._synth_shard(tmp_path)
        report = validate_dataset(shard_dir)
        assert report.heading_spread_deg


class TestCanonicalizationTable:
    def test_load_and_lookup(self, tmp_path):
        offset = rotation_about_axis([0, 0, 1], np.pi / 2)
        table_path = tmp_path / "table.json"
        table_path.write_text(
            json.dumps(
                {
                    "entries": [
                        {
                            "source_dataset": "synth",
                            "category": "chair",
                            "offset": np.rint(offset).tolist(),
                        }
                    ],
                    "overrides": [],
                }
            )
        )
        table = CanonicalizationTable.load(table_path)
        cam = CameraIntrinsics(fx=100, fy=100, cx=32, cy=32, width=64, height=64)
        record = _tiny_shard_instances(cam, n=1)[0].record
        offset_found = table.lookup(record)
        assert offset_found is not None
        assert is_cube_rotation(offset_found)

    def test_non_cube_entry_rejected(self):
        with pytest.raises(InvalidOffset):
            CanonicalizationTable(
                entries={("synth", "chair"): rotation_about_axis([0, 0, 1], 0.4)}
            )
