"""Command-line pipeline driver.

Commands: synth, lift, eval, canonicalize, validate, inspect, bridge.
Exit codes: 0 success, 2 input error, 3 solve degradation (> 50% of the
instances failed to solve). Every command is deterministic given its
flags and --seed; reports and shards are byte-identical across reruns.

Flags are long-form only and may be preloaded from a JSON config file via
--config (explicit flags win). The worker-pool size defaults from the
NOCSKIT_JOBS environment variable.
"""

import argparse
import datetime
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, pngio
from .dataset import (
    CanonicalizationTable,
    InstanceRecord,
    Shard,
    ShardInstance,
    apply_canonicalization,
    read_shard,
    transform_nocs,
    validate_dataset,
    write_shard,
)
from .errors import NocsKitError
from .geometry import OrientedBox3D, UnitRay, egocentric_to_allocentric, project
from .metrics import (
    evaluate_nocs,
    localization_metrics,
    map_at_iou,
    orientation_accuracy,
    render_report,
)
from .nocs import decode_png16, encode_png16
from .solvers import LearnedHead, lift_to_box
from .synth import NoiseSpec, SceneSpec, perturb_instance, random_scene, render_scene

EXIT_OK = 0
EXIT_INPUT_ERROR = 2
EXIT_SOLVE_DEGRADED = 3

_METHOD_FLAGS = {
    "epnp": "epnp",
    "epnp-ransac": "epnp_ransac",
    "depth-from-orientation": "depth_from_orientation",
    "umeyama": "umeyama",
}


def _fail(message: str, code: int = EXIT_INPUT_ERROR) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


# ---------------------------------------------------------------------------
# synth
# ---------------------------------------------------------------------------


def cmd_synth(args) -> int:
    if args.spec:
        spec_path = Path(args.spec)
        if not spec_path.is_file():
            return _fail(f"scene spec not found: {spec_path}")
        try:
            raw = json.loads(spec_path.read_text())
        except json.JSONDecodeError as exc:
            return _fail(f"bad scene spec {spec_path}: {exc}")
        scene_dicts = raw["scenes"] if "scenes" in raw else [raw]
        try:
            specs = [SceneSpec.from_json_dict(d) for d in scene_dicts]
        except (KeyError, NocsKitError, ValueError) as exc:
            return _fail(f"bad scene spec {spec_path}: {exc}")
    else:
        specs = [
            random_scene(seed=args.seed + i, n_objects=args.objects)
            for i in range(args.random_scenes)
        ]

    instances = []
    depths = {}
    total_pixels = 0
    for i, spec in enumerate(specs):
        try:
            scene = render_scene(spec)
        except NocsKitError as exc:
            return _fail(f"scene {i}: {exc}")
        frame_id = f"frame{i:04d}"
        depths[frame_id] = scene.depth
        for j, obj in enumerate(scene.objects):
            if obj.mask.area() == 0:
                continue
            vv, uu = np.nonzero(obj.mask.mask)
            record = InstanceRecord(
                instance_id=f"{frame_id}_obj{j:02d}",
                category=obj.category,
                source_dataset="synth",
                box2d=(float(uu.min()), float(vv.min()), float(uu.max()), float(vv.max())),
                box3d=obj.box,
                camera=scene.camera,
                frame_id=frame_id,
            )
            instances.append(ShardInstance(record=record, mask=obj.mask, nocs=obj.nocs))
            total_pixels += obj.nocs.valid_count()
    write_shard(
        instances,
        args.out,
        depths=depths,
        metadata={"generator": "synth", "seed": args.seed, "scenes": len(specs)},
    )
    print(
        f"synth: scenes={len(specs)} instances={len(instances)} "
        f"valid_pixels={total_pixels} out={args.out}"
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# lift
# ---------------------------------------------------------------------------


def _lift_one(task) -> dict:
    """Worker: perturb one instance and solve it. Pure, picklable."""
    (record_dict, noise, method, seed, index, shard_root) = task
    record = InstanceRecord.from_json_dict(record_dict)
    shard = Shard(root=Path(shard_root), records=[record], metadata={})
    nocs = shard.load_nocs(record)
    mask = shard.load_mask(record)
    rng = np.random.default_rng([seed, index])
    nocs, mask = perturb_instance(nocs, mask, noise, rng)

    result = {
        "instance_id": record.instance_id,
        "category": record.category,
        "method": method,
        "box3d_pred": None,
        "failure": None,
        "inlier_count": 0,
        "rms_reprojection_px": None,
        "pred_nocs_path": f"nocs/{record.instance_id}.png",
        "pred_mask_path": f"masks/{record.instance_id}.png",
    }
    try:
        kwargs = {}
        if method == "depth_from_orientation":
            centroid_px = project(record.box3d.center, record.camera)
            ray = UnitRay.through_pixel(centroid_px, record.camera)
            kwargs["head"] = LearnedHead(
                rotation_allocentric=egocentric_to_allocentric(
                    record.box3d.rotation, ray
                ),
                centroid_px=centroid_px,
            )
        elif method == "umeyama":
            depth = shard.load_depth(record)
            if depth is None:
                raise NocsKitError("shard has no depth for 3D-3D alignment")
            kwargs["depth"] = depth
        box, report = lift_to_box(
            nocs,
            mask,
            record.box3d.size,
            record.camera,
            method=method,
            seed=seed,
            **kwargs,
        )
        result["box3d_pred"] = box.to_dict()
        result["inlier_count"] = report.inlier_count
        result["rms_reprojection_px"] = report.rms_reprojection_px
    except NocsKitError as exc:
        result["failure"] = f"{type(exc).__name__}: {exc}"
    return {
        "result": result,
        "nocs_png": encode_png16(nocs),
        "mask_png": pngio.encode_png(mask.mask.astype(np.uint8) * 255),
    }


def cmd_lift(args) -> int:
    try:
        shard = read_shard(args.shard)
    except NocsKitError as exc:
        return _fail(str(exc))
    method = _METHOD_FLAGS.get(args.method)
    if method is None:
        return _fail(f"unknown method {args.method!r}")
    noise = NoiseSpec(
        nocs_sigma=args.nocs_sigma,
        pixel_sigma=args.pixel_sigma,
        mask_erosion=args.mask_erosion,
        outlier_fraction=args.outlier_fraction,
    )
    out_root = Path(args.out)
    (out_root / "nocs").mkdir(parents=True, exist_ok=True)
    (out_root / "masks").mkdir(parents=True, exist_ok=True)

    tasks = [
        (record.to_json_dict(), noise, method, args.seed, idx, str(shard.root))
        for idx, record in enumerate(shard.records)
    ]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            outputs = list(pool.map(_lift_one, tasks))
    else:
        outputs = [_lift_one(t) for t in tasks]

    failures = 0
    with open(out_root / "results.jsonl", "w") as f:
        for out in outputs:
            result = out["result"]
            rid = result["instance_id"]
            (out_root / "nocs" / f"{rid}.png").write_bytes(out["nocs_png"])
            (out_root / "masks" / f"{rid}.png").write_bytes(out["mask_png"])
            if result["failure"] is not None:
                failures += 1
            f.write(json.dumps(result, sort_keys=True, separators=(",", ":")) + "\n")
    total = len(outputs)
    print(f"lift: method={method} instances={total} failures={failures}")
    if total and failures > total / 2:
        print("error: more than half of the instances failed to solve", file=sys.stderr)
        return EXIT_SOLVE_DEGRADED
    return EXIT_OK


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------


def cmd_eval(args) -> int:
    try:
        shard = read_shard(args.shard)
    except NocsKitError as exc:
        return _fail(str(exc))
    results_path = Path(args.results) / "results.jsonl"
    if not results_path.is_file():
        return _fail(f"no results.jsonl under {args.results}")
    results = {}
    for line in results_path.read_text().splitlines():
        if line.strip():
            entry = json.loads(line)
            results[entry["instance_id"]] = entry

    shard_ids = {r.instance_id for r in shard.records}
    if set(results) != shard_ids:
        missing = sorted(shard_ids ^ set(results))[:5]
        return _fail(f"results and shard disagree on instance ids, e.g. {missing}")

    results_root = Path(args.results)
    nocs_pairs = []
    box_pairs = []
    for record in shard.records:  # sorted by instance_id: deterministic
        entry = results[record.instance_id]
        gt_nocs = shard.load_nocs(record)
        gt_mask = shard.load_mask(record)
        pred_nocs = decode_png16(
            (results_root / entry["pred_nocs_path"]).read_bytes()
        )
        pred_mask = (
            pngio.decode_png((results_root / entry["pred_mask_path"]).read_bytes())
            > 127
        )
        nocs_pairs.append(
            (pred_nocs, pred_mask, gt_nocs, gt_mask.mask, record.category)
        )
        if entry["box3d_pred"] is not None:
            box_pairs.append(
                (
                    OrientedBox3D.from_dict(entry["box3d_pred"]),
                    record.box3d,
                    record.category,
                )
            )

    if not box_pairs:
        return _fail("no solved instances to evaluate")
    report = render_report(
        evaluate_nocs(nocs_pairs),
        localization_metrics(box_pairs),
        orientation_accuracy(box_pairs),
        map_at_iou(box_pairs),
    )
    solved = len(box_pairs)
    report += (
        f"\n[summary]\ninstances={len(shard.records)} solved={solved} "
        f"failed={len(shard.records) - solved}\n"
    )
    if args.out:
        Path(args.out).write_text(report)
    print(report, end="")
    return EXIT_OK


# ---------------------------------------------------------------------------
# canonicalize / validate / inspect
# ---------------------------------------------------------------------------


def cmd_canonicalize(args) -> int:
    try:
        shard = read_shard(args.shard)
        table = CanonicalizationTable.load(args.table)
    except (NocsKitError, OSError, json.JSONDecodeError) as exc:
        return _fail(str(exc))

    present = {(r.source_dataset, r.category) for r in shard.records}
    for key in table.entries:
        if key not in present:
            print(f"warning: table entry {key} matches no record", file=sys.stderr)

    instances = []
    depths = {}
    for record in shard.records:
        offset = table.lookup(record)
        if offset is None:
            return _fail(
                f"no table entry for ({record.source_dataset!r}, "
                f"{record.category!r})"
            )
        nocs = transform_nocs(shard.load_nocs(record), offset)
        mask = shard.load_mask(record)
        record2 = replace(
            record, box3d=apply_canonicalization(record.box3d, offset)
        )
        instances.append(ShardInstance(record=record2, mask=mask, nocs=nocs))
        if record.frame_id and record.depth_path and record.frame_id not in depths:
            depth = shard.load_depth(record)
            if depth is not None:
                depths[record.frame_id] = depth

    metadata = dict(shard.metadata)
    metadata["canonicalized_at"] = datetime.datetime.now(
        datetime.timezone.utc
    ).isoformat()
    write_shard(instances, args.out, depths=depths, metadata=metadata)
    print(f"canonicalize: instances={len(instances)} out={args.out}")
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        report = validate_dataset(args.shard)
    except NocsKitError as exc:
        return _fail(str(exc))
    print(report.render(), end="")
    return EXIT_OK


def cmd_inspect(args) -> int:
    try:
        shard = read_shard(args.shard)
        record = shard.record_by_id(args.instance_id)
    except NocsKitError as exc:
        return _fail(str(exc))
    except KeyError:
        return _fail(f"no record with instance_id {args.instance_id!r}")
    nocs = shard.load_nocs(record)
    mask = shard.load_mask(record)
    payload = record.to_json_dict()
    payload["mask_area_px"] = mask.area()
    payload["nocs_valid_px"] = nocs.valid_count()
    if nocs.valid.any():
        payload["nocs_norm_max"] = float(
            np.linalg.norm(nocs.coords[nocs.valid], axis=1).max()
        )
    print(json.dumps(payload, sort_keys=True, indent=1))
    return EXIT_OK


def cmd_bridge(args) -> int:
    from .bridge import serve_stdio

    serve_stdio()
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument plumbing
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nocskit",
        description="Normalized-object-coordinate ground truth, lifting, and evaluation",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    default_jobs = int(os.environ.get("NOCSKIT_JOBS", "1"))

    p = sub.add_parser("synth", help="render scene specs into a shard")
    p.add_argument("--spec", help="scene spec JSON (single scene or {'scenes': [...]})")
    p.add_argument("--out", required=True, help="output shard directory")
    p.add_argument("--random-scenes", type=int, default=0,
                   help="generate this many seeded random scenes instead of --spec")
    p.add_argument("--objects", type=int, default=3, help="objects per random scene")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("lift", help="solve boxes from shard maps")
    p.add_argument("--shard", required=True)
    p.add_argument("--out", required=True, help="output results directory")
    p.add_argument("--method", default="epnp", choices=sorted(_METHOD_FLAGS))
    p.add_argument("--nocs-sigma", type=float, default=0.0)
    p.add_argument("--pixel-sigma", type=float, default=0.0)
    p.add_argument("--mask-erosion", type=int, default=0)
    p.add_argument("--outlier-fraction", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=default_jobs)
    p.set_defaults(func=cmd_lift)

    p = sub.add_parser("eval", help="score results against a shard")
    p.add_argument("--results", required=True)
    p.add_argument("--shard", required=True)
    p.add_argument("--out", help="also write the report to this path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("canonicalize", help="apply orientation offsets and rewrite")
    p.add_argument("--shard", required=True)
    p.add_argument("--table", required=True, help="canonicalization table JSON")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_canonicalize)

    p = sub.add_parser("validate", help="consistency-check a shard")
    p.add_argument("--shard", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("inspect", help="print one record")
    p.add_argument("--shard", required=True)
    p.add_argument("--instance-id", required=True)
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("bridge", help="serve the JSON-lines scripting bridge on stdio")
    p.set_defaults(func=cmd_bridge)

    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list) -> list:
    """Merge --config file values as flag defaults (explicit flags win)."""
    if "--config" not in argv:
        return argv
    idx = argv.index("--config")
    if idx + 1 >= len(argv):
        raise SystemExit("--config needs a path")
    config_path = argv[idx + 1]
    rest = argv[:idx] + argv[idx + 2 :]
    with open(config_path) as f:
        config = json.load(f)
    extra = []
    for key, value in sorted(config.items()):
        flag = "--" + key.replace("_", "-")
        if flag not in rest:
            extra.extend([flag, str(value)])
    # Command goes first; inject config flags after it.
    return rest[:1] + extra + rest[1:]


def main(argv=None) -> int:
    parser = _build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        argv = _apply_config(parser, argv)
    except (OSError, json.JSONDecodeError) as exc:
        return _fail(f"bad config file: {exc}")
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NocsKitError as exc:
        return _fail(f"{type(exc).__name__}: {exc}")


if __name__ == "__main__":
    sys.exit(main())
