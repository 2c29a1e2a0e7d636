"""On-disk shards, category taxonomy, and orientation canonicalization.

Shard layout (all paths relative to the shard root):

* ``metadata.json``   free-form provenance (format tag, generator, seed)
* ``records.jsonl``   one JSON record per instance, sorted by instance_id
* ``masks/``          8-bit single-channel PNGs (0 / 255)
* ``nocs/``           16-bit RGBA coordinate maps (see nocs.encode_png16)
* ``images/``         per-frame float32 ``.npy`` depth, 0 marks invalid

Canonicalization offsets are elements of the 24-rotation cube group: they
relabel which box face is the heading without moving the box in space, so
corner sets are preserved exactly and per-pixel coordinates transform by
the offset inverse.
"""

import json
from dataclasses import dataclass, field, replace
from importlib import resources
from itertools import permutations, product
from pathlib import Path
from typing import Optional

import numpy as np

from . import pngio
from .errors import (
    CorruptStream,
    InvalidOffset,
    IoFailure,
    NotGravityAligned,
    SchemaViolation,
)
from .geometry import (
    CameraIntrinsics,
    OrientedBox3D,
    UnitRay,
    box_corners,
    project_many,
)
from .nocs import DepthMap, InstanceMask, NocsMap, decode_png16, encode_png16

# Default gravity in the camera frame: straight down = +Y.
CAMERA_GRAVITY = UnitRay(np.array([0.0, 1.0, 0.0]))

GRAVITY_ALIGNMENT_TOL_DEG = 5.0


# ---------------------------------------------------------------------------
# Taxonomy registry
# ---------------------------------------------------------------------------

_VALID_SYMMETRIES = {"none", "4-fold", "continuous"}


def load_taxonomy() -> dict:
    """Bundled category registry: name -> symmetry tag."""
    with resources.files("nocskit.data").joinpath("categories.json").open() as f:
        raw = json.load(f)
    registry = {}
    for entry in raw["categories"]:
        if entry["symmetry"] not in _VALID_SYMMETRIES:
            raise SchemaViolation(f"bad symmetry tag {entry['symmetry']!r}")
        registry[entry["name"]] = entry["symmetry"]
    return registry


# ---------------------------------------------------------------------------
# Cube rotation group and canonicalization
# ---------------------------------------------------------------------------


def cube_rotations() -> list:
    """The 24 proper rotations with integer entries (signed axis permutations)."""
    out = []
    for perm in permutations(range(3)):
        for signs in product((1.0, -1.0), repeat=3):
            M = np.zeros((3, 3))
            for row, (col, s) in enumerate(zip(perm, signs)):
                M[row, col] = s
            if np.linalg.det(M) > 0.5:
                out.append(M)
    return out


_CUBE_GROUP = None


def _cube_group() -> list:
    global _CUBE_GROUP
    if _CUBE_GROUP is None:
        _CUBE_GROUP = cube_rotations()
    return _CUBE_GROUP


def is_cube_rotation(R: np.ndarray, tol: float = 1e-9) -> bool:
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3):
        return False
    nearest = np.rint(R)
    if np.max(np.abs(R - nearest)) > tol:
        return False
    return any(np.array_equal(nearest, M) for M in _cube_group())


def apply_canonicalization(box: OrientedBox3D, offset: np.ndarray) -> OrientedBox3D:
    """Relabel box axes by a cube-group offset; the occupied space is unchanged.

    rotation' = rotation @ offset and the extents follow the axes:
    size' = |offset^T size|. Raises InvalidOffset for anything outside the
    cube group.
    """
    offset = np.asarray(offset, dtype=float)
    if not is_cube_rotation(offset):
        raise InvalidOffset("offset is not a 90-degree cube-group rotation")
    offset = np.rint(offset)
    return OrientedBox3D(
        center=box.center.copy(),
        size=np.abs(offset.T @ box.size),
        rotation=box.rotation @ offset,
    )


def transform_nocs(nocs: NocsMap, offset: np.ndarray) -> NocsMap:
    """Per-pixel coordinate update matching apply_canonicalization: n' = O^T n."""
    offset = np.asarray(offset, dtype=float)
    if not is_cube_rotation(offset):
        raise InvalidOffset("offset is not a 90-degree cube-group rotation")
    offset = np.rint(offset)
    coords = nocs.coords @ offset  # == (O^T n^T)^T per pixel
    coords = np.where(nocs.valid[..., None], coords, 0.0)
    return NocsMap(coords=coords, valid=nocs.valid.copy())


@dataclass(frozen=True)
class CanonicalizationTable:
    """Offsets per (source_dataset, category), plus per-instance overrides."""

    entries: dict  # (source_dataset, category) -> (3, 3) cube rotation
    overrides: dict = field(default_factory=dict)  # instance_id -> rotation

    def __post_init__(self):
        for key, R in list(self.entries.items()) + list(self.overrides.items()):
            if not is_cube_rotation(R):
                raise InvalidOffset(f"table entry {key!r} is not a cube rotation")

    def lookup(self, record: "InstanceRecord") -> Optional[np.ndarray]:
        if record.instance_id in self.overrides:
            return np.asarray(self.overrides[record.instance_id], dtype=float)
        key = (record.source_dataset, record.category)
        if key in self.entries:
            return np.asarray(self.entries[key], dtype=float)
        return None

    @classmethod
    def load(cls, path) -> "CanonicalizationTable":
        with open(path) as f:
            raw = json.load(f)
        entries = {
            (e["source_dataset"], e["category"]): np.asarray(e["offset"], dtype=float)
            for e in raw.get("entries", [])
        }
        overrides = {
            e["instance_id"]: np.asarray(e["offset"], dtype=float)
            for e in raw.get("overrides", [])
        }
        return cls(entries=entries, overrides=overrides)


@dataclass(frozen=True)
class OrientationCandidate:
    """One of the six axis relabelings presenting a box face as the heading."""

    index: int
    rotation: np.ndarray  # cube-group offset


def enumerate_orientation_candidates(
    box: OrientedBox3D, gravity: UnitRay = CAMERA_GRAVITY
) -> list:
    """The six candidate canonical orientations of a gravity-aligned box.

    Four candidates keep the up-axis vertical and turn each side face into
    the heading; the last two point the heading at the top/bottom face
    (their up-axis assignment is inherently ambiguous and fixed by
    convention). Returns [(OrientationCandidate, OrientedBox3D)] in a
    deterministic order; every candidate occupies the same space as the
    input. Raises NotGravityAligned when no box axis is within 5 degrees
    of the vertical.
    """
    up_cam = -gravity.direction
    dots = box.rotation.T @ up_cam  # cosine of each object axis vs up
    k = int(np.argmax(np.abs(dots)))
    tilt_deg = np.degrees(np.arccos(np.clip(abs(dots[k]), -1.0, 1.0)))
    if tilt_deg > GRAVITY_ALIGNMENT_TOL_DEG:
        raise NotGravityAligned(
            f"closest axis is {tilt_deg:.2f} degrees from vertical"
        )
    s = 1.0 if dots[k] >= 0 else -1.0
    e = np.eye(3)
    up_axis = s * e[k]
    h1, h2 = (k + 1) % 3, (k + 2) % 3

    headings = [e[h1], e[h2], -e[h1], -e[h2], up_axis, -up_axis]
    out = []
    for index, x_col in enumerate(headings):
        z_col = up_axis if index < 4 else e[h1]
        y_col = np.cross(z_col, x_col)
        offset = np.stack([x_col, y_col, z_col], axis=1)
        out.append(
            (
                OrientationCandidate(index=index, rotation=offset),
                apply_canonicalization(box, offset),
            )
        )
    return out


# ---------------------------------------------------------------------------
# Instance records and shard I/O
# ---------------------------------------------------------------------------

_REQUIRED_FIELDS = (
    "instance_id",
    "category",
    "source_dataset",
    "box2d",
    "box3d",
    "mask_path",
    "nocs_path",
    "camera",
)


@dataclass(frozen=True)
class InstanceRecord:
    """One annotated object instance."""

    instance_id: str
    category: str
    source_dataset: str
    box2d: tuple  # (x_min, y_min, x_max, y_max) pixels
    box3d: OrientedBox3D
    camera: CameraIntrinsics
    mask_path: str = ""
    nocs_path: str = ""
    frame_id: str = ""
    depth_path: str = ""

    def to_json_dict(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "category": self.category,
            "source_dataset": self.source_dataset,
            "box2d": [float(v) for v in self.box2d],
            "box3d": self.box3d.to_dict(),
            "camera": self.camera.to_dict(),
            "mask_path": self.mask_path,
            "nocs_path": self.nocs_path,
            "frame_id": self.frame_id,
            "depth_path": self.depth_path,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "InstanceRecord":
        for name in _REQUIRED_FIELDS:
            if name not in d:
                raise SchemaViolation(f"record is missing required field {name!r}")
        return cls(
            instance_id=str(d["instance_id"]),
            category=str(d["category"]),
            source_dataset=str(d["source_dataset"]),
            box2d=tuple(float(v) for v in d["box2d"]),
            box3d=OrientedBox3D.from_dict(d["box3d"]),
            camera=CameraIntrinsics.from_dict(d["camera"]),
            mask_path=str(d["mask_path"]),
            nocs_path=str(d["nocs_path"]),
            frame_id=str(d.get("frame_id", "")),
            depth_path=str(d.get("depth_path", "")),
        )


@dataclass(frozen=True)
class ShardInstance:
    """A record bundled with its raster payloads for writing."""

    record: InstanceRecord
    mask: InstanceMask
    nocs: NocsMap


def _canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def write_shard(
    instances: list,
    out_dir,
    depths: Optional[dict] = None,
    metadata: Optional[dict] = None,
) -> None:
    """Write instances (and optional per-frame depth) as a shard.

    Records come out sorted by instance_id, serialization is canonical,
    and the PNG encoder is deterministic, so identical inputs produce
    byte-identical shards.
    """
    root = Path(out_dir)
    try:
        (root / "masks").mkdir(parents=True, exist_ok=True)
        (root / "nocs").mkdir(parents=True, exist_ok=True)
        (root / "images").mkdir(parents=True, exist_ok=True)

        records = []
        for inst in sorted(instances, key=lambda i: i.record.instance_id):
            rid = inst.record.instance_id
            mask_path = f"masks/{rid}.png"
            nocs_path = f"nocs/{rid}.png"
            mask_u8 = (inst.mask.mask.astype(np.uint8)) * 255
            (root / mask_path).write_bytes(pngio.encode_png(mask_u8))
            (root / nocs_path).write_bytes(encode_png16(inst.nocs))
            record = replace(inst.record, mask_path=mask_path, nocs_path=nocs_path)
            if record.frame_id and depths and record.frame_id in depths:
                record = replace(record, depth_path=f"images/{record.frame_id}.npy")
            records.append(record)

        if depths:
            for frame_id, depth in sorted(depths.items()):
                arr = np.where(depth.valid, depth.depth, 0.0).astype(np.float32)
                with open(root / "images" / f"{frame_id}.npy", "wb") as f:
                    np.save(f, arr)

        with open(root / "records.jsonl", "w") as f:
            for record in records:
                f.write(_canonical_json(record.to_json_dict()) + "\n")

        meta = {"format": "nocskit-shard-v1"}
        meta.update(metadata or {})
        with open(root / "metadata.json", "w") as f:
            f.write(_canonical_json(meta) + "\n")
    except OSError as exc:
        raise IoFailure(f"failed writing shard to {root}: {exc}") from exc


@dataclass
class Shard:
    """A loaded shard index; raster payloads are read lazily."""

    root: Path
    records: list
    metadata: dict

    def record_by_id(self, instance_id: str) -> InstanceRecord:
        for record in self.records:
            if record.instance_id == instance_id:
                return record
        raise KeyError(instance_id)

    def load_mask(self, record: InstanceRecord) -> InstanceMask:
        raster = pngio.decode_png((self.root / record.mask_path).read_bytes())
        return InstanceMask(mask=raster > 127)

    def load_nocs(self, record: InstanceRecord) -> NocsMap:
        return decode_png16((self.root / record.nocs_path).read_bytes())

    def load_depth(self, record: InstanceRecord) -> Optional[DepthMap]:
        if not record.depth_path:
            return None
        arr = np.load(self.root / record.depth_path).astype(float)
        return DepthMap(depth=np.where(arr > 0, arr, 1.0), valid=arr > 0)


def read_shard(shard_dir, strict: bool = True) -> Shard:
    """Load a shard index, validating the schema.

    With strict=True (default) unknown categories and missing referenced
    files raise SchemaViolation; strict=False defers those to
    validate_dataset.
    """
    root = Path(shard_dir)
    index = root / "records.jsonl"
    if not index.is_file():
        raise IoFailure(f"no records.jsonl under {root}")
    taxonomy = load_taxonomy()
    records = []
    try:
        lines = index.read_text().splitlines()
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            payload = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaViolation(f"records.jsonl line {lineno}: {exc}") from exc
        record = InstanceRecord.from_json_dict(payload)
        if strict:
            if record.category not in taxonomy:
                raise SchemaViolation(
                    f"record {record.instance_id}: unknown category "
                    f"{record.category!r}"
                )
            for path in (record.mask_path, record.nocs_path):
                if not (root / path).is_file():
                    raise SchemaViolation(
                        f"record {record.instance_id}: missing file {path}"
                    )
            if record.depth_path and not (root / record.depth_path).is_file():
                raise SchemaViolation(
                    f"record {record.instance_id}: missing file {record.depth_path}"
                )
        records.append(record)
    records.sort(key=lambda r: r.instance_id)
    meta_path = root / "metadata.json"
    metadata = json.loads(meta_path.read_text()) if meta_path.is_file() else {}
    return Shard(root=root, records=records, metadata=metadata)


# ---------------------------------------------------------------------------
# Dataset validation
# ---------------------------------------------------------------------------

NOCS_NORM_BOUND = 0.5 + 0.01  # unit-diagonal bound with the inside-box slack
BOX_ENCLOSURE_MIN = 0.95


@dataclass
class ValidationReport:
    violations: list  # (instance_id, kind, message)
    heading_spread_deg: dict  # category -> angular spread of heading axes
    checked: int

    def ok(self) -> bool:
        return not self.violations

    def render(self) -> str:
        lines = [f"checked={self.checked} violations={len(self.violations)}"]
        for instance_id, kind, message in self.violations:
            lines.append(f"violation instance={instance_id} kind={kind}: {message}")
        for category in sorted(self.heading_spread_deg):
            lines.append(
                f"heading_spread category={category} "
                f"deg={self.heading_spread_deg[category]:.3f}"
            )
        return "\n".join(lines) + "\n"


def validate_dataset(shard_dir) -> ValidationReport:
    """Consistency checks over every record of a shard.

    Verifies the unit-diagonal bound on stored coordinates, that the
    projected 3D box encloses at least 95% of the valid pixels, and
    mask/map dimension agreement; reports per-category heading-axis spread
    for human review. Nothing raises: problems become report entries.
    """
    shard = read_shard(shard_dir, strict=False)
    taxonomy = load_taxonomy()
    violations = []
    headings: dict = {}
    for record in shard.records:
        rid = record.instance_id
        if record.category not in taxonomy:
            violations.append((rid, "category", f"unknown {record.category!r}"))
        try:
            mask = shard.load_mask(record)
            nocs = shard.load_nocs(record)
        except (OSError, CorruptStream) as exc:
            violations.append((rid, "io", str(exc)))
            continue
        cam = record.camera
        if (mask.height, mask.width) != (cam.height, cam.width):
            violations.append(
                (rid, "dimensions", f"mask {mask.mask.shape} vs camera "
                 f"({cam.height}, {cam.width})")
            )
        if (nocs.height, nocs.width) != (mask.height, mask.width):
            violations.append(
                (rid, "dimensions", f"map {nocs.coords.shape[:2]} vs mask "
                 f"{mask.mask.shape}")
            )
            continue
        if nocs.valid.any():
            norms = np.linalg.norm(nocs.coords[nocs.valid], axis=1)
            if norms.max() > NOCS_NORM_BOUND:
                violations.append(
                    (rid, "unit_diagonal",
                     f"max |coords| = {norms.max():.4f} > {NOCS_NORM_BOUND}")
                )
            enclosure = _box_enclosure_fraction(record.box3d, cam, nocs)
            if enclosure < BOX_ENCLOSURE_MIN:
                violations.append(
                    (rid, "box_enclosure",
                     f"projected box covers {enclosure:.3f} of valid pixels")
                )
        heading = record.box3d.rotation @ np.array([1.0, 0.0, 0.0])
        headings.setdefault(record.category, []).append(heading)

    spread = {}
    for category, vecs in headings.items():
        arr = np.asarray(vecs)
        mean = arr.mean(axis=0)
        norm = np.linalg.norm(mean)
        if norm < 1e-12:
            spread[category] = 90.0
        else:
            cosines = np.clip(arr @ (mean / norm), -1.0, 1.0)
            spread[category] = float(np.degrees(np.mean(np.arccos(cosines))))
    return ValidationReport(
        violations=violations,
        heading_spread_deg=spread,
        checked=len(shard.records),
    )


def _box_enclosure_fraction(
    box: OrientedBox3D, camera: CameraIntrinsics, nocs: NocsMap
) -> float:
    corners = box_corners(box)
    if np.any(corners[:, 2] <= 0):
        return 0.0
    px = project_many(corners, camera)
    lo = px.min(axis=0) - 0.5
    hi = px.max(axis=0) + 0.5
    vv, uu = np.nonzero(nocs.valid)
    inside = (
        (uu >= lo[0]) & (uu <= hi[0]) & (vv >= lo[1]) & (vv <= hi[1])
    )
    return float(np.mean(inside))
