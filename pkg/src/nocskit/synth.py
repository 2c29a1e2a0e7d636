"""Synthetic scenes with exact analytic ground truth.

Depth is produced by casting one ray per pixel against analytic surfaces
(box faces, inscribed ellipsoids, or small triangle meshes) with nearest
-hit z-buffering across objects, so rendered depth lies on the object
surface to machine precision. Coordinate maps are then derived through
compute_nocs_map, the same code the production pipeline uses, which makes
the renderer a closed-loop oracle for the solvers and metrics.

Rays are parametrized by z-depth (direction scaled to unit z), so the hit
parameter is directly the value a depth map stores.
"""

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import EmptyScene
from .geometry import CameraIntrinsics, OrientedBox3D, rotation_about_axis
from .nocs import DepthMap, InstanceMask, NocsMap, compute_nocs_map

SHAPE_BOX = "box_surface"
SHAPE_ELLIPSOID = "ellipsoid"
SHAPE_MESH = "mesh"


@dataclass(frozen=True)
class SceneObject:
    category: str
    box: OrientedBox3D
    shape: str = SHAPE_BOX
    # Mesh vertices live in the unit box [-0.5, 0.5]^3 and are scaled by the
    # box size; only used when shape == "mesh".
    mesh_vertices: Optional[np.ndarray] = None
    mesh_faces: Optional[np.ndarray] = None


@dataclass(frozen=True)
class SceneSpec:
    camera: CameraIntrinsics
    objects: tuple
    seed: int = 0

    def to_json_dict(self) -> dict:
        objs = []
        for o in self.objects:
            d = {"category": o.category, "shape": o.shape, "box": o.box.to_dict()}
            if o.shape == SHAPE_MESH:
                d["mesh_vertices"] = np.asarray(o.mesh_vertices).tolist()
                d["mesh_faces"] = np.asarray(o.mesh_faces).tolist()
            objs.append(d)
        return {"camera": self.camera.to_dict(), "seed": self.seed, "objects": objs}

    @classmethod
    def from_json_dict(cls, d: dict) -> "SceneSpec":
        objects = []
        for o in d["objects"]:
            objects.append(
                SceneObject(
                    category=o["category"],
                    box=OrientedBox3D.from_dict(o["box"]),
                    shape=o.get("shape", SHAPE_BOX),
                    mesh_vertices=(
                        np.asarray(o["mesh_vertices"], dtype=float)
                        if "mesh_vertices" in o
                        else None
                    ),
                    mesh_faces=(
                        np.asarray(o["mesh_faces"], dtype=int)
                        if "mesh_faces" in o
                        else None
                    ),
                )
            )
        return cls(
            camera=CameraIntrinsics.from_dict(d["camera"]),
            objects=tuple(objects),
            seed=int(d.get("seed", 0)),
        )

    @classmethod
    def load(cls, path) -> "SceneSpec":
        with open(path) as f:
            return cls.from_json_dict(json.load(f))

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_json_dict(), f, sort_keys=True, indent=1)
            f.write("\n")


@dataclass(frozen=True)
class NoiseSpec:
    """Calibrated corruption of ground-truth outputs."""

    nocs_sigma: float = 0.0
    pixel_sigma: float = 0.0
    mask_erosion: int = 0
    outlier_fraction: float = 0.0

    def __post_init__(self):
        if min(self.nocs_sigma, self.pixel_sigma, self.mask_erosion) < 0:
            raise ValueError("noise parameters must be non-negative")
        if not 0 <= self.outlier_fraction < 1:
            raise ValueError("outlier_fraction must be in [0, 1)")

    def is_zero(self) -> bool:
        return (
            self.nocs_sigma == 0
            and self.pixel_sigma == 0
            and self.mask_erosion == 0
            and self.outlier_fraction == 0
        )


@dataclass(frozen=True)
class RenderedObject:
    category: str
    box: OrientedBox3D
    mask: InstanceMask
    nocs: NocsMap


@dataclass(frozen=True)
class RenderedScene:
    camera: CameraIntrinsics
    depth: DepthMap
    objects: tuple


def _ray_grid(camera: CameraIntrinsics) -> np.ndarray:
    """(H, W, 3) ray directions with unit z, so t equals z-depth."""
    u = np.arange(camera.width, dtype=float)[None, :]
    v = np.arange(camera.height, dtype=float)[:, None]
    x = (u - camera.cx) / camera.fx
    y = (v - camera.cy) / camera.fy
    ones = np.ones((camera.height, camera.width))
    return np.stack([np.broadcast_to(x, ones.shape), np.broadcast_to(y, ones.shape), ones], axis=-1)


def _hit_box(obj: SceneObject, dirs: np.ndarray) -> np.ndarray:
    """Slab-method ray/box intersection; NaN where the ray misses."""
    box = obj.box
    origin = -box.rotation.T @ box.center
    d = dirs @ box.rotation  # object-frame directions
    half = box.size / 2.0
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / d
        t1 = (-half - origin) * inv
        t2 = (half - origin) * inv
    near = np.nanmax(np.where(np.isfinite(inv), np.minimum(t1, t2), -np.inf), axis=-1)
    far = np.nanmin(np.where(np.isfinite(inv), np.maximum(t1, t2), np.inf), axis=-1)
    # Rays parallel to a slab must still lie between the planes.
    parallel_ok = np.all(
        np.isfinite(inv) | (np.abs(origin) <= half), axis=-1
    )
    hit = (far >= near) & (far > 1e-9) & parallel_ok
    t = np.where(near > 1e-9, near, far)
    return np.where(hit, t, np.nan)


def _hit_ellipsoid(obj: SceneObject, dirs: np.ndarray) -> np.ndarray:
    """Ray/ellipsoid intersection for the ellipsoid inscribed in the box."""
    box = obj.box
    radii = box.size / 2.0
    origin = (-box.rotation.T @ box.center) / radii
    d = (dirs @ box.rotation) / radii
    a = np.sum(d * d, axis=-1)
    b = 2.0 * np.sum(d * origin, axis=-1)
    c = float(origin @ origin) - 1.0
    disc = b * b - 4.0 * a * c
    ok = disc >= 0
    sq = np.sqrt(np.where(ok, disc, 0.0))
    t0 = (-b - sq) / (2.0 * a)
    t1 = (-b + sq) / (2.0 * a)
    t = np.where(t0 > 1e-9, t0, t1)
    return np.where(ok & (t > 1e-9), t, np.nan)


def _hit_mesh(obj: SceneObject, dirs: np.ndarray) -> np.ndarray:
    """Nearest Moller-Trumbore hit over the object's triangles."""
    box = obj.box
    verts = np.asarray(obj.mesh_vertices, dtype=float) * box.size
    verts = verts @ box.rotation.T + box.center
    faces = np.asarray(obj.mesh_faces, dtype=int)
    h, w, _ = dirs.shape
    rays = dirs.reshape(-1, 3)
    best = np.full(rays.shape[0], np.nan)
    for tri in faces:
        v0, v1, v2 = verts[tri[0]], verts[tri[1]], verts[tri[2]]
        e1 = v1 - v0
        e2 = v2 - v0
        pvec = np.cross(rays, e2)
        det = pvec @ e1
        ok = np.abs(det) > 1e-14
        inv_det = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
        tvec = -v0
        uu = (pvec @ tvec) * inv_det
        qvec = np.cross(tvec, e1)
        vv = (rays @ qvec) * inv_det
        t = (e2 @ qvec) * inv_det
        hit = ok & (uu >= 0) & (vv >= 0) & (uu + vv <= 1) & (t > 1e-9)
        better = hit & (np.isnan(best) | (t < best))
        best = np.where(better, t, best)
    return best.reshape(h, w)


_HIT_FUNCS = {
    SHAPE_BOX: _hit_box,
    SHAPE_ELLIPSOID: _hit_ellipsoid,
    SHAPE_MESH: _hit_mesh,
}


def render_scene(spec: SceneSpec) -> RenderedScene:
    """Render depth, per-object masks, and per-object coordinate maps.

    Masks are occlusion-correct: a pixel belongs to the object that wins
    the z-buffer. Coordinate maps are computed by compute_nocs_map on the
    rendered depth.
    """
    if not spec.objects:
        raise EmptyScene("scene has no objects")
    camera = spec.camera
    dirs = _ray_grid(camera)
    depth_layers = []
    for obj in spec.objects:
        depth_layers.append(_HIT_FUNCS[obj.shape](obj, dirs))
    stack = np.stack(depth_layers, axis=0)
    any_hit = np.any(np.isfinite(stack), axis=0)
    filled = np.where(np.isfinite(stack), stack, np.inf)
    winner = np.argmin(filled, axis=0)
    zbuf = np.min(filled, axis=0)
    depth = DepthMap(depth=np.where(any_hit, zbuf, 1.0), valid=any_hit)

    objects = []
    for idx, obj in enumerate(spec.objects):
        mask = InstanceMask(mask=any_hit & (winner == idx))
        nocs = compute_nocs_map(depth, camera, obj.box, mask)
        objects.append(
            RenderedObject(category=obj.category, box=obj.box, mask=mask, nocs=nocs)
        )
    return RenderedScene(camera=camera, depth=depth, objects=tuple(objects))


def _erode(mask: np.ndarray, iterations: int) -> np.ndarray:
    out = mask.copy()
    for _ in range(iterations):
        shrunk = out.copy()
        shrunk[1:, :] &= out[:-1, :]
        shrunk[:-1, :] &= out[1:, :]
        shrunk[:, 1:] &= out[:, :-1]
        shrunk[:, :-1] &= out[:, 1:]
        out = shrunk
    return out


def perturb_instance(
    nocs: NocsMap, mask: InstanceMask, noise: NoiseSpec, rng: np.random.Generator
) -> tuple[NocsMap, InstanceMask]:
    """Noisy copy of one instance's map and mask (see perturb)."""
    coords = nocs.coords.copy()
    valid = nocs.valid.copy()
    n_valid = int(valid.sum())
    if n_valid:
        if noise.nocs_sigma > 0:
            coords[valid] = np.clip(
                coords[valid] + rng.normal(0, noise.nocs_sigma, (n_valid, 3)),
                -0.5,
                0.5,
            )
        if noise.outlier_fraction > 0:
            n_out = int(round(noise.outlier_fraction * n_valid))
            if n_out:
                pick = rng.choice(n_valid, size=n_out, replace=False)
                vv, uu = np.nonzero(valid)
                coords[vv[pick], uu[pick]] = rng.uniform(-0.5, 0.5, (n_out, 3))
        if noise.pixel_sigma > 0:
            coords, valid = _scatter_pixels(coords, valid, noise.pixel_sigma, rng)
    out_mask = mask.mask
    if noise.mask_erosion > 0:
        out_mask = _erode(out_mask, noise.mask_erosion)
    return NocsMap(coords=coords, valid=valid), InstanceMask(mask=out_mask)


def perturb(scene: RenderedScene, noise: NoiseSpec, seed: int) -> RenderedScene:
    """Deterministically corrupted copy of a rendered scene.

    Gaussian coordinate noise (clamped to the valid range), a fraction of
    valid pixels replaced with uniform outliers, optional scatter of
    values to nearby pixels, and mask erosion. A zero spec returns a
    bitwise-identical copy.
    """
    if noise.is_zero():
        return RenderedScene(
            camera=scene.camera,
            depth=scene.depth,
            objects=tuple(
                RenderedObject(o.category, o.box, o.mask, o.nocs)
                for o in scene.objects
            ),
        )
    rng = np.random.default_rng(seed)
    new_objects = []
    for obj in scene.objects:
        new_nocs, new_mask = perturb_instance(obj.nocs, obj.mask, noise, rng)
        new_objects.append(
            RenderedObject(
                category=obj.category, box=obj.box, mask=new_mask, nocs=new_nocs
            )
        )
    return RenderedScene(
        camera=scene.camera, depth=scene.depth, objects=tuple(new_objects)
    )


def _scatter_pixels(coords, valid, sigma, rng):
    """Displace each valid value to a nearby pixel (correspondence jitter)."""
    h, w, _ = coords.shape
    vv, uu = np.nonzero(valid)
    jitter = np.rint(rng.normal(0, sigma, (len(vv), 2))).astype(int)
    nv = np.clip(vv + jitter[:, 0], 0, h - 1)
    nu = np.clip(uu + jitter[:, 1], 0, w - 1)
    out_coords = np.zeros_like(coords)
    out_valid = np.zeros_like(valid)
    out_coords[nv, nu] = coords[vv, uu]
    out_valid[nv, nu] = True
    return out_coords, out_valid


# ---------------------------------------------------------------------------
# Seeded random scenes for tests and the CLI
# ---------------------------------------------------------------------------

DEFAULT_CAMERA = dict(fx=320.0, fy=320.0, cx=160.0, cy=120.0, width=320, height=240)

_SCENE_CATEGORIES = ("car", "chair", "box", "table", "monitor")
_SCENE_SHAPES = (SHAPE_BOX, SHAPE_ELLIPSOID, SHAPE_MESH)

# A small octahedron-style mesh: generic, non-coplanar surface points.
_MESH_VERTS = np.array(
    [
        [0.5, 0.0, 0.0],
        [-0.5, 0.0, 0.0],
        [0.0, 0.5, 0.0],
        [0.0, -0.5, 0.0],
        [0.0, 0.0, 0.5],
        [0.0, 0.0, -0.5],
    ]
)
_MESH_FACES = np.array(
    [
        [0, 2, 4], [2, 1, 4], [1, 3, 4], [3, 0, 4],
        [2, 0, 5], [1, 2, 5], [3, 1, 5], [0, 3, 5],
    ]
)


def random_scene(
    seed: int,
    n_objects: int = 3,
    camera: Optional[CameraIntrinsics] = None,
    gravity_aligned: bool = True,
    shapes: tuple = _SCENE_SHAPES,
) -> SceneSpec:
    """A deterministic random scene with objects inside the view frustum.

    Boxes sit 3.5-8 m in front of the camera with random yaw about the
    camera vertical (plus a small tilt unless gravity_aligned). The object
    up-axis (+Z) points against camera-frame gravity (+Y down), matching
    the canonical orientation convention.
    """
    rng = np.random.default_rng(seed)
    cam = camera or CameraIntrinsics(**DEFAULT_CAMERA)
    objects = []
    for i in range(n_objects):
        z = rng.uniform(3.5, 8.0)
        margin = 0.35
        x = rng.uniform(-margin, margin) * z * cam.width / (2 * cam.fx)
        y = rng.uniform(-margin, margin) * z * cam.height / (2 * cam.fy)
        size = rng.uniform(0.4, 1.4, size=3)
        # Object +Z up: rotate the identity into the up = -Y convention,
        # then yaw about the vertical.
        base = np.array([[0.0, -1.0, 0.0], [0.0, 0.0, -1.0], [1.0, 0.0, 0.0]])
        yaw = rng.uniform(-np.pi, np.pi)
        R = rotation_about_axis([0.0, -1.0, 0.0], yaw) @ base
        if not gravity_aligned:
            tilt_axis = rng.normal(size=3)
            R = rotation_about_axis(tilt_axis, rng.uniform(0, 0.5)) @ R
        shape = shapes[int(rng.integers(len(shapes)))]
        obj = SceneObject(
            category=_SCENE_CATEGORIES[int(rng.integers(len(_SCENE_CATEGORIES)))],
            box=OrientedBox3D(center=[x, y, z], size=size, rotation=R),
            shape=shape,
            mesh_vertices=_MESH_VERTS if shape == SHAPE_MESH else None,
            mesh_faces=_MESH_FACES if shape == SHAPE_MESH else None,
        )
        objects.append(obj)
    return SceneSpec(camera=cam, objects=tuple(objects), seed=seed)
