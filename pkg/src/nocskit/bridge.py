"""JSON-lines scripting bridge over stdio.

One request per line: ``{"id": n, "op": name, "args": {...}}``; one
response per line: ``{"id": n, "ok": true, "result": ...}`` or
``{"id": n, "ok": false, "error": {"type": variant, "message": ...}}``
where ``type`` is the toolkit error class name.

Arrays cross the boundary as ``{"__array__": {"dtype", "shape", "data"}}``
with ``data`` the base64 of the little-endian buffer, so float64 values
round-trip bit-exactly. Non-finite scalars are transported as null. All
operations take batches (lists of items) to amortize the boundary cost.

``python -m nocskit.bridge --selftest-vectors N --seed S`` prints a JSON
document of randomized cases with expected outputs computed directly by
the library; a bindings layer replays them through the bridge and must
match exactly.
"""

import argparse
import base64
import json
import sys

import numpy as np

from . import __version__
from .errors import NocsKitError
from .geometry import CameraIntrinsics, OrientedBox3D
from .metrics import box3d_iou, localization_metrics, nocs_mae_psnr
from .nocs import DepthMap, InstanceMask, NocsMap, compute_nocs_map
from .solvers import (
    Correspondences2D3D,
    Correspondences3D3D,
    LearnedHead,
    lift_to_box,
    solve_epnp,
    solve_umeyama,
)

_DTYPES = {"float64", "float32", "uint16", "uint8", "int64", "int32", "bool"}


def encode_array(arr: np.ndarray) -> dict:
    arr = np.ascontiguousarray(arr)
    dtype = str(arr.dtype)
    if dtype not in _DTYPES:
        arr = arr.astype(np.float64)
        dtype = "float64"
    buf = arr.astype(arr.dtype.newbyteorder("<")).tobytes()
    return {
        "__array__": {
            "dtype": dtype,
            "shape": list(arr.shape),
            "data": base64.b64encode(buf).decode("ascii"),
        }
    }


def decode_array(obj) -> np.ndarray:
    spec = obj["__array__"]
    if spec["dtype"] not in _DTYPES:
        raise ValueError(f"unsupported dtype {spec['dtype']!r}")
    raw = base64.b64decode(spec["data"])
    arr = np.frombuffer(raw, dtype=np.dtype(spec["dtype"]).newbyteorder("<"))
    return arr.reshape(spec["shape"]).astype(spec["dtype"], copy=True)


def _num(x: float):
    x = float(x)
    return x if np.isfinite(x) else None


def _camera(d: dict) -> CameraIntrinsics:
    return CameraIntrinsics.from_dict(d)


def _box(d: dict) -> OrientedBox3D:
    return OrientedBox3D.from_dict(d)


def _nocs_map(item: dict, prefix: str = "nocs") -> NocsMap:
    return NocsMap(
        coords=decode_array(item[f"{prefix}_coords"]).astype(float),
        valid=decode_array(item[f"{prefix}_valid"]).astype(bool),
    )


def _report_dict(report) -> dict:
    return {
        "rotation": report.pose.rotation.tolist(),
        "translation": report.pose.translation.tolist(),
        "inlier_count": report.inlier_count,
        "rms_reprojection_px": _num(report.rms_reprojection_px),
        "method": report.method,
    }


def _op_version(args: dict):
    return {"version": __version__}


def _op_compute_nocs_map(args: dict):
    out = []
    for item in args["items"]:
        depth_arr = decode_array(item["depth"]).astype(float)
        depth = DepthMap(
            depth=np.where(depth_arr > 0, depth_arr, 1.0), valid=depth_arr > 0
        )
        nocs = compute_nocs_map(
            depth,
            _camera(item["camera"]),
            _box(item["box"]),
            InstanceMask(mask=decode_array(item["mask"]).astype(bool)),
        )
        out.append(
            {"coords": encode_array(nocs.coords), "valid": encode_array(nocs.valid)}
        )
    return out


def _op_lift_to_box(args: dict):
    out = []
    for item in args["items"]:
        kwargs = {}
        if "head" in item and item["head"] is not None:
            kwargs["head"] = LearnedHead(
                rotation_allocentric=np.asarray(
                    item["head"]["rotation_allocentric"], dtype=float
                ),
                centroid_px=np.asarray(item["head"]["centroid_px"], dtype=float),
            )
        if "depth" in item and item["depth"] is not None:
            depth_arr = decode_array(item["depth"]).astype(float)
            kwargs["depth"] = DepthMap(
                depth=np.where(depth_arr > 0, depth_arr, 1.0), valid=depth_arr > 0
            )
        box, report = lift_to_box(
            _nocs_map(item),
            InstanceMask(mask=decode_array(item["mask"]).astype(bool)),
            np.asarray(item["size"], dtype=float),
            _camera(item["camera"]),
            method=item.get("method", "epnp"),
            seed=int(item.get("seed", 0)),
            **kwargs,
        )
        out.append({"box": box.to_dict(), "report": _report_dict(report)})
    return out


def _op_solve_epnp(args: dict):
    out = []
    for item in args["items"]:
        report = solve_epnp(
            Correspondences2D3D(
                decode_array(item["points3d"]), decode_array(item["pixels"])
            ),
            _camera(item["camera"]),
            refine=bool(item.get("refine", True)),
        )
        out.append(_report_dict(report))
    return out


def _op_solve_umeyama(args: dict):
    out = []
    for item in args["items"]:
        scale, pose, rms = solve_umeyama(
            Correspondences3D3D(
                decode_array(item["source"]), decode_array(item["target"])
            ),
            with_scale=bool(item.get("with_scale", False)),
        )
        out.append(
            {
                "scale": scale,
                "rotation": pose.rotation.tolist(),
                "translation": pose.translation.tolist(),
                "rms": _num(rms),
            }
        )
    return out


def _op_nocs_mae_psnr(args: dict):
    out = []
    for item in args["items"]:
        stats = nocs_mae_psnr(
            _nocs_map(item, "pred"),
            decode_array(item["pred_mask"]).astype(bool),
            _nocs_map(item, "gt"),
            decode_array(item["gt_mask"]).astype(bool),
        )
        out.append(None if stats is None else {"mae": stats[0], "psnr": stats[1]})
    return out


def _op_box3d_iou(args: dict):
    return [
        box3d_iou(_box(item["a"]), _box(item["b"]), yaw_only=bool(item.get("yaw_only")))
        for item in args["items"]
    ]


def _op_localization_metrics(args: dict):
    pairs = [
        (_box(item["pred"]), _box(item["gt"]), item["category"])
        for item in args["pairs"]
    ]
    r = localization_metrics(pairs)
    return {
        "mate": r.mate,
        "maoe": r.maoe,
        "mase": r.mase,
        "miou3d": r.miou3d,
        "mate_3d": r.mate_3d,
        "per_category": {
            c: list(v[:5]) + [v[5]] for c, v in r.per_category.items()
        },
    }


_HANDLERS = {
    "version": _op_version,
    "compute_nocs_map": _op_compute_nocs_map,
    "lift_to_box": _op_lift_to_box,
    "solve_epnp": _op_solve_epnp,
    "solve_umeyama": _op_solve_umeyama,
    "nocs_mae_psnr": _op_nocs_mae_psnr,
    "box3d_iou": _op_box3d_iou,
    "localization_metrics": _op_localization_metrics,
}


def handle_request(request: dict) -> dict:
    rid = request.get("id")
    op = request.get("op")
    handler = _HANDLERS.get(op)
    if handler is None:
        return {
            "id": rid,
            "ok": False,
            "error": {"type": "UnknownOp", "message": f"no such op {op!r}"},
        }
    try:
        return {"id": rid, "ok": True, "result": handler(request.get("args", {}))}
    except NocsKitError as exc:
        return {
            "id": rid,
            "ok": False,
            "error": {"type": type(exc).__name__, "message": str(exc)},
        }
    except (ValueError, KeyError, TypeError) as exc:
        return {
            "id": rid,
            "ok": False,
            "error": {"type": type(exc).__name__, "message": str(exc)},
        }


def serve_stdio() -> None:
    """Serve requests line by line until stdin closes."""
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        try:
            request = json.loads(line)
        except json.JSONDecodeError as exc:
            response = {
                "id": None,
                "ok": False,
                "error": {"type": "BadRequest", "message": str(exc)},
            }
        else:
            response = handle_request(request)
        sys.stdout.write(json.dumps(response, separators=(",", ":")) + "\n")
        sys.stdout.flush()


# ---------------------------------------------------------------------------
# Self-test vector generation (the primary acts as its own oracle)
# ---------------------------------------------------------------------------


def generate_selftest_vectors(count: int, seed: int) -> dict:
    """Randomized bridge cases with expected outputs from direct library calls."""
    from .geometry import rotation_about_axis
    from .synth import random_scene, render_scene

    rng = np.random.default_rng(seed)
    lift_cases = []
    scene_cache = {}
    # Small camera keeps the vector payloads compact; instances still
    # project to dozens-to-hundreds of valid pixels.
    vector_camera = CameraIntrinsics(
        fx=110.0, fy=110.0, cx=48.0, cy=36.0, width=96, height=72
    )
    for i in range(count):
        scene_seed = seed * 1000 + i
        if scene_seed not in scene_cache:
            spec = random_scene(scene_seed, n_objects=1, camera=vector_camera)
            scene_cache[scene_seed] = render_scene(spec)
        scene = scene_cache[scene_seed]
        obj = scene.objects[0]
        method = ("epnp", "umeyama", "depth_from_orientation")[i % 3]
        item = {
            "nocs_coords": encode_array(obj.nocs.coords),
            "nocs_valid": encode_array(obj.nocs.valid),
            "mask": encode_array(obj.mask.mask),
            "size": obj.box.size.tolist(),
            "camera": scene.camera.to_dict(),
            "method": method,
            "seed": 0,
        }
        if method == "umeyama":
            item["depth"] = encode_array(
                np.where(scene.depth.valid, scene.depth.depth, 0.0)
            )
        if method == "depth_from_orientation":
            from .geometry import UnitRay, egocentric_to_allocentric, project

            centroid_px = project(obj.box.center, scene.camera)
            ray = UnitRay.through_pixel(centroid_px, scene.camera)
            item["head"] = {
                "rotation_allocentric": egocentric_to_allocentric(
                    obj.box.rotation, ray
                ).tolist(),
                "centroid_px": centroid_px.tolist(),
            }
        expected = _op_lift_to_box({"items": [item]})
        lift_cases.append({"item": item, "expected": expected})

    iou_cases = []
    loc_pairs = []
    for i in range(count):
        Ra = rotation_about_axis(rng.normal(size=3), rng.uniform(0, np.pi))
        Rb = rotation_about_axis(rng.normal(size=3), rng.uniform(0, np.pi))
        a = OrientedBox3D(
            center=rng.uniform(-0.5, 0.5, 3) + [0, 0, 5],
            size=rng.uniform(0.3, 1.5, 3),
            rotation=Ra,
        ).to_dict()
        b = OrientedBox3D(
            center=rng.uniform(-0.5, 0.5, 3) + [0, 0, 5],
            size=rng.uniform(0.3, 1.5, 3),
            rotation=Rb,
        ).to_dict()
        item = {"a": a, "b": b, "yaw_only": bool(i % 2)}
        iou_cases.append(
            {"item": item, "expected": _op_box3d_iou({"items": [item]})}
        )
        loc_pairs.append({"pred": a, "gt": b, "category": f"cat{i % 3}"})

    loc_args = {"pairs": loc_pairs}
    return {
        "seed": seed,
        "count": count,
        "lift": lift_cases,
        "iou": iou_cases,
        "localization": {
            "args": loc_args,
            "expected": _op_localization_metrics(loc_args),
        },
    }


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="nocskit-bridge")
    parser.add_argument("--selftest-vectors", type=int, default=0, metavar="N",
                        help="print N randomized cases with expected outputs")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    if args.selftest_vectors > 0:
        json.dump(
            generate_selftest_vectors(args.selftest_vectors, args.seed),
            sys.stdout,
            separators=(",", ":"),
        )
        sys.stdout.write("\n")
        return 0
    serve_stdio()
    return 0


if __name__ == "__main__":
    sys.exit(main())
