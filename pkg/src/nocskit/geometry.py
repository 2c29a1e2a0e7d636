"""Camera models, rigid transforms, rotation representations, oriented boxes.

Conventions used throughout the toolkit:

* Camera frame: +Z forward (optical axis), +X right, +Y down.
* Pixels: origin at the top-left corner, u along +X, v along +Y.
* Object frame: +Z up, +X forward (heading); the object origin is the
  center of its tight bounding box.
* Rotations are 3x3 matrices mapping object-frame vectors into the camera
  frame (camera-from-object).

All functions are pure and operate on plain numpy arrays or the small
dataclasses below; nothing here mutates its inputs.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInput, InvalidBox, NonPositiveDepth

ORTHONORMALITY_TOL = 1e-9


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole projection parameters.

    fx, fy: focal lengths in pixels; cx, cy: principal point in pixels;
    width, height: image size in pixels.
    """

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        for name in ("fx", "fy", "cx", "cy"):
            object.__setattr__(self, name, float(getattr(self, name)))
        for name in ("width", "height"):
            object.__setattr__(self, name, int(getattr(self, name)))
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")

    def matrix(self) -> np.ndarray:
        """3x3 calibration matrix [[fx,0,cx],[0,fy,cy],[0,0,1]]."""
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )

    def to_dict(self) -> dict:
        return {
            "fx": self.fx,
            "fy": self.fy,
            "cx": self.cx,
            "cy": self.cy,
            "width": self.width,
            "height": self.height,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CameraIntrinsics":
        return cls(
            fx=float(d["fx"]),
            fy=float(d["fy"]),
            cx=float(d["cx"]),
            cy=float(d["cy"]),
            width=int(d["width"]),
            height=int(d["height"]),
        )


def check_rotation(R: np.ndarray, tol: float = ORTHONORMALITY_TOL) -> np.ndarray:
    """Validate that R is a proper rotation (orthonormal, det +1)."""
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3):
        raise InvalidBox(f"rotation must be 3x3, got {R.shape}")
    if not np.all(np.isfinite(R)):
        raise InvalidBox("rotation contains non-finite entries")
    if np.max(np.abs(R.T @ R - np.eye(3))) > tol:
        raise InvalidBox("rotation is not orthonormal")
    if abs(np.linalg.det(R) - 1.0) > tol:
        raise InvalidBox("rotation determinant is not +1")
    return R


@dataclass(frozen=True)
class RigidPose:
    """Rotation + translation: x_cam = rotation @ x_obj + translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rotation", check_rotation(self.rotation))
        t = np.asarray(self.translation, dtype=float)
        if t.shape != (3,):
            raise InvalidBox(f"translation must be a 3-vector, got {t.shape}")
        object.__setattr__(self, "translation", t)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform (..., 3) object-frame points into the camera frame."""
        return np.asarray(points, dtype=float) @ self.rotation.T + self.translation

    def inverse(self) -> "RigidPose":
        return RigidPose(self.rotation.T, -self.rotation.T @ self.translation)


@dataclass(frozen=True)
class OrientedBox3D:
    """9DoF oriented box: center (m), per-axis size (m), camera-from-object rotation."""

    center: np.ndarray
    size: np.ndarray
    rotation: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float)
        s = np.asarray(self.size, dtype=float)
        if c.shape != (3,) or s.shape != (3,):
            raise InvalidBox("center and size must be 3-vectors")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(s))):
            raise InvalidBox("box contains non-finite values")
        if np.any(s <= 0):
            raise InvalidBox(f"size components must be positive, got {s}")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "size", s)
        object.__setattr__(self, "rotation", check_rotation(self.rotation))

    @property
    def diagonal(self) -> float:
        """Length of the box diagonal, the NOCS normalization scale."""
        return float(np.linalg.norm(self.size))

    @property
    def volume(self) -> float:
        return float(np.prod(self.size))

    def pose(self) -> RigidPose:
        return RigidPose(self.rotation, self.center)

    def to_dict(self) -> dict:
        return {
            "center": self.center.tolist(),
            "size": self.size.tolist(),
            "rotation": self.rotation.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "OrientedBox3D":
        return cls(
            center=np.asarray(d["center"], dtype=float),
            size=np.asarray(d["size"], dtype=float),
            rotation=np.asarray(d["rotation"], dtype=float),
        )


@dataclass(frozen=True)
class Rotation6D:
    """Continuous 6D rotation encoding: the first two matrix columns, pre-orthonormalization."""

    a1: np.ndarray
    a2: np.ndarray

    def __post_init__(self):
        a1 = np.asarray(self.a1, dtype=float)
        a2 = np.asarray(self.a2, dtype=float)
        if a1.shape != (3,) or a2.shape != (3,):
            raise DegenerateInput("6D rotation needs two 3-vectors")
        object.__setattr__(self, "a1", a1)
        object.__setattr__(self, "a2", a2)


@dataclass(frozen=True)
class UnitRay:
    """Unit direction in the camera frame."""

    direction: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=float)
        if d.shape != (3,):
            raise DegenerateInput("ray direction must be a 3-vector")
        n = np.linalg.norm(d)
        if abs(n - 1.0) > ORTHONORMALITY_TOL:
            raise DegenerateInput(f"ray direction must be unit length, |d| = {n}")
        object.__setattr__(self, "direction", d)

    @classmethod
    def from_vector(cls, v) -> "UnitRay":
        """Normalize an arbitrary non-zero vector into a UnitRay."""
        v = np.asarray(v, dtype=float)
        n = np.linalg.norm(v)
        if n < 1e-12:
            raise DegenerateInput("cannot normalize a zero vector")
        return cls(v / n)

    @classmethod
    def through_pixel(cls, pixel, camera: CameraIntrinsics) -> "UnitRay":
        """Viewing ray through a pixel: normalize(K^-1 [u, v, 1])."""
        u, v = float(pixel[0]), float(pixel[1])
        return cls.from_vector(
            [(u - camera.cx) / camera.fx, (v - camera.cy) / camera.fy, 1.0]
        )


def project(point, camera: CameraIntrinsics) -> np.ndarray:
    """Project a camera-frame point to pixel coordinates.

    u = fx*x/z + cx, v = fy*y/z + cy. Raises NonPositiveDepth for z <= 0.
    """
    p = np.asarray(point, dtype=float)
    if p[2] <= 0:
        raise NonPositiveDepth(f"point depth {p[2]} is not positive")
    return np.array(
        [camera.fx * p[0] / p[2] + camera.cx, camera.fy * p[1] / p[2] + camera.cy]
    )


def project_many(points: np.ndarray, camera: CameraIntrinsics) -> np.ndarray:
    """Project (N, 3) camera-frame points; every depth must be positive."""
    pts = np.asarray(points, dtype=float)
    z = pts[:, 2]
    if np.any(z <= 0):
        raise NonPositiveDepth("at least one point has non-positive depth")
    return np.stack(
        [camera.fx * pts[:, 0] / z + camera.cx, camera.fy * pts[:, 1] / z + camera.cy],
        axis=1,
    )


def backproject(pixel, depth: float, camera: CameraIntrinsics) -> np.ndarray:
    """Lift a pixel at the given z-depth to a camera-frame 3D point."""
    if depth <= 0:
        raise NonPositiveDepth(f"depth {depth} is not positive")
    u, v = float(pixel[0]), float(pixel[1])
    return np.array(
        [(u - camera.cx) / camera.fx * depth, (v - camera.cy) / camera.fy * depth, depth]
    )


def backproject_grid(depth: np.ndarray, camera: CameraIntrinsics) -> np.ndarray:
    """Backproject a full (H, W) depth grid to an (H, W, 3) point map.

    Pixel (u, v) uses its integer coordinates; depths <= 0 produce garbage
    points the caller is expected to mask out.
    """
    h, w = depth.shape
    u = np.arange(w, dtype=float)[None, :]
    v = np.arange(h, dtype=float)[:, None]
    x = (u - camera.cx) / camera.fx * depth
    y = (v - camera.cy) / camera.fy * depth
    return np.stack([x, y, depth], axis=-1)


def rot6d_decode(r: Rotation6D) -> np.ndarray:
    """Gram-Schmidt the two encoded vectors into a proper rotation matrix.

    c1 = a1/|a1|, c2 = normalize(a2 - (c1.a2) c1), c3 = c1 x c2.
    Raises DegenerateInput when a1 vanishes or a2 is parallel to a1.
    """
    n1 = np.linalg.norm(r.a1)
    if n1 < 1e-12:
        raise DegenerateInput("first 6D vector is numerically zero")
    c1 = r.a1 / n1
    residual = r.a2 - np.dot(c1, r.a2) * c1
    n2 = np.linalg.norm(residual)
    if n2 < 1e-12:
        raise DegenerateInput("second 6D vector is parallel to the first")
    c2 = residual / n2
    c3 = np.cross(c1, c2)
    return np.stack([c1, c2, c3], axis=1)


def rot6d_encode(R: np.ndarray) -> Rotation6D:
    """Encode a rotation as its first two columns."""
    R = check_rotation(R)
    return Rotation6D(a1=R[:, 0].copy(), a2=R[:, 1].copy())


OPTICAL_AXIS = np.array([0.0, 0.0, 1.0])


def view_rotation(ray: UnitRay) -> np.ndarray:
    """Minimal rotation taking the optical axis (0,0,1) onto the ray direction.

    Rodrigues rotation about axis z x d. The antiparallel case (ray pointing
    straight backward) has no minimal rotation and is rejected.
    """
    d = ray.direction
    c = d[2]  # cos(angle) = z . d
    if c < -1.0 + 1e-9:
        raise DegenerateInput("ray is antiparallel to the optical axis")
    v = np.cross(OPTICAL_AXIS, d)
    s2 = float(v @ v)  # sin^2(angle)
    if s2 < 1e-30:
        return np.eye(3)
    vx = np.array([[0, -v[2], v[1]], [v[2], 0, -v[0]], [-v[1], v[0], 0]])
    return np.eye(3) + vx + vx @ vx * ((1.0 - c) / s2)


def allocentric_to_egocentric(R_alloc: np.ndarray, ray: UnitRay) -> np.ndarray:
    """Egocentric rotation R_view(ray) @ R_alloc."""
    return view_rotation(ray) @ np.asarray(R_alloc, dtype=float)


def egocentric_to_allocentric(R_ego: np.ndarray, ray: UnitRay) -> np.ndarray:
    """Inverse of allocentric_to_egocentric: R_view(ray).T @ R_ego."""
    return view_rotation(ray).T @ np.asarray(R_ego, dtype=float)


# Corner sign pattern: index bits (z, y, x) -> signs, i.e. corner k has
# x sign (-1)^(1 - bit0) ... laid out explicitly for a stable ordering.
_CORNER_SIGNS = np.array(
    [
        [-1, -1, -1],
        [+1, -1, -1],
        [-1, +1, -1],
        [+1, +1, -1],
        [-1, -1, +1],
        [+1, -1, +1],
        [-1, +1, +1],
        [+1, +1, +1],
    ],
    dtype=float,
)


def box_corners(box: OrientedBox3D) -> np.ndarray:
    """The 8 corners of an oriented box in the camera frame, (8, 3).

    Corner ordering is fixed: x varies fastest, then y, then z, over the
    object-frame sign pattern (-,-,-), (+,-,-), (-,+,-), ...
    """
    local = _CORNER_SIGNS * (box.size / 2.0)
    return local @ box.rotation.T + box.center


def rotation_angle(R: np.ndarray) -> float:
    """Geodesic angle of a rotation matrix, in [0, pi]."""
    c = (np.trace(np.asarray(R, dtype=float)) - 1.0) / 2.0
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


def rotation_geodesic(Ra: np.ndarray, Rb: np.ndarray) -> float:
    """Geodesic distance between two rotations, in radians."""
    return rotation_angle(np.asarray(Ra).T @ np.asarray(Rb))


def rotation_about_axis(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation about a unit axis."""
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    kx = np.array(
        [[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]]
    )
    return np.eye(3) + np.sin(angle) * kx + (1.0 - np.cos(angle)) * (kx @ kx)
