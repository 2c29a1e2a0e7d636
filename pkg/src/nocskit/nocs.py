"""Normalized object coordinate maps: construction, scaling, persistence.

A normalized coordinate expresses a visible surface point in the object
frame divided by the length of the box diagonal, so every valid value lies
in the centered unit-diagonal cube: each component in [-0.5, 0.5] and
|coords| <= 0.5. The map is stored per pixel with a validity channel.
"""

from dataclasses import dataclass

import numpy as np

from . import pngio
from .errors import (
    CorruptStream,
    DimensionMismatch,
    InvalidBox,
    InvalidSize,
    RangeViolation,
)
from .geometry import CameraIntrinsics, OrientedBox3D, backproject_grid

# Inside-box tolerance for map construction, as a fraction of the diagonal.
# Tolerates depth quantization at object boundaries without admitting
# background surfaces.
INSIDE_EPS_FRACTION = 0.01


def _freeze(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class NocsMap:
    """(H, W, 3) normalized coordinates + (H, W) validity mask."""

    coords: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float)
        valid = np.asarray(self.valid, dtype=bool)
        if coords.ndim != 3 or coords.shape[2] != 3:
            raise DimensionMismatch(f"coords must be (H, W, 3), got {coords.shape}")
        if valid.shape != coords.shape[:2]:
            raise DimensionMismatch(
                f"valid mask {valid.shape} does not match coords {coords.shape[:2]}"
            )
        object.__setattr__(self, "coords", _freeze(coords))
        object.__setattr__(self, "valid", _freeze(valid))

    @property
    def height(self) -> int:
        return self.coords.shape[0]

    @property
    def width(self) -> int:
        return self.coords.shape[1]

    def valid_count(self) -> int:
        return int(np.count_nonzero(self.valid))


@dataclass(frozen=True)
class DepthMap:
    """(H, W) z-depth in meters + validity mask; valid depths are positive."""

    depth: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        depth = np.asarray(self.depth, dtype=float)
        valid = np.asarray(self.valid, dtype=bool)
        if depth.ndim != 2:
            raise DimensionMismatch(f"depth must be (H, W), got {depth.shape}")
        if valid.shape != depth.shape:
            raise DimensionMismatch("validity mask shape mismatch")
        if np.any(depth[valid] <= 0):
            raise InvalidSize("valid depths must be positive")
        object.__setattr__(self, "depth", _freeze(depth))
        object.__setattr__(self, "valid", _freeze(valid))

    @property
    def height(self) -> int:
        return self.depth.shape[0]

    @property
    def width(self) -> int:
        return self.depth.shape[1]


@dataclass(frozen=True)
class InstanceMask:
    """(H, W) boolean instance mask."""

    mask: np.ndarray

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=bool)
        if mask.ndim != 2:
            raise DimensionMismatch(f"mask must be (H, W), got {mask.shape}")
        object.__setattr__(self, "mask", _freeze(mask))

    @property
    def height(self) -> int:
        return self.mask.shape[0]

    @property
    def width(self) -> int:
        return self.mask.shape[1]

    def area(self) -> int:
        return int(np.count_nonzero(self.mask))


def compute_nocs_map(
    depth: DepthMap,
    camera: CameraIntrinsics,
    box: OrientedBox3D,
    mask: InstanceMask,
) -> NocsMap:
    """Build the normalized-coordinate map of one instance from depth.

    Every pixel inside the instance mask with valid depth is backprojected,
    expressed in the object frame, and divided by the box diagonal. Pixels
    whose object-frame point falls outside the box by more than 1% of the
    diagonal are dropped (depth bleed across the silhouette boundary);
    points within the tolerance band are snapped onto the box so stored
    values always satisfy the unit-diagonal bound.
    """
    if (depth.height, depth.width) != (mask.height, mask.width):
        raise DimensionMismatch(
            f"depth {depth.depth.shape} vs mask {mask.mask.shape}"
        )
    if depth.height != camera.height or depth.width != camera.width:
        raise DimensionMismatch("depth dimensions do not match camera image size")

    diag = box.diagonal
    if not np.isfinite(diag) or diag <= 0:
        raise InvalidBox("box diagonal must be positive")
    eps = INSIDE_EPS_FRACTION * diag
    half = box.size / 2.0

    candidates = mask.mask & depth.valid
    points_cam = backproject_grid(depth.depth, camera)
    x_obj = (points_cam - box.center) @ box.rotation  # == R^T (x_cam - c)

    inside = np.all(np.abs(x_obj) <= half + eps, axis=-1) & candidates
    coords = np.zeros_like(x_obj)
    clamped = np.clip(x_obj, -half, half)
    coords[inside] = clamped[inside] / diag
    return NocsMap(coords=coords, valid=inside)


def unnormalize(nocs: np.ndarray, size: np.ndarray) -> np.ndarray:
    """Scale normalized coordinates back to metric object-frame coordinates.

    Uniform scale by the diagonal length |size|; accepts a single 3-vector
    or an (..., 3) array.
    """
    size = np.asarray(size, dtype=float)
    if size.shape != (3,) or np.any(size <= 0) or not np.all(np.isfinite(size)):
        raise InvalidSize(f"size must be three positive finite components, got {size}")
    return np.asarray(nocs, dtype=float) * float(np.linalg.norm(size))


# Affine value encoding for 16-bit storage: v in [-0.5, 0.5] -> [0, 65535].
_SCALE = 65535.0


def encode_png16(nocs: NocsMap) -> bytes:
    """Serialize a map as a 16-bit RGBA PNG (X, Y, Z, validity).

    Valid values v are stored as round((v + 0.5) * 65535); the validity
    channel is 65535 for valid pixels and 0 otherwise. Invalid pixels store
    zeros in the coordinate channels.
    """
    coords = nocs.coords
    if nocs.valid.any():
        vals = coords[nocs.valid]
        if vals.min() < -0.5 or vals.max() > 0.5:
            raise RangeViolation(
                "valid coordinates outside [-0.5, 0.5] cannot be encoded"
            )
    quantized = np.zeros(coords.shape[:2] + (4,), dtype=np.uint16)
    scaled = np.rint((coords + 0.5) * _SCALE)
    quantized[..., :3] = np.where(nocs.valid[..., None], scaled, 0.0).astype(np.uint16)
    quantized[..., 3] = np.where(nocs.valid, 65535, 0).astype(np.uint16)
    return pngio.encode_png(quantized)


def decode_png16(data: bytes) -> NocsMap:
    """Inverse of encode_png16."""
    raster = pngio.decode_png(data)
    if raster.ndim != 3 or raster.shape[2] != 4 or raster.dtype != np.uint16:
        raise CorruptStream("stream is not a 16-bit 4-channel coordinate map")
    valid = raster[..., 3] == 65535
    coords = raster[..., :3].astype(float) / _SCALE - 0.5
    coords[~valid] = 0.0
    return NocsMap(coords=coords, valid=valid)
