"""Evaluation metrics: map quality, localization, orientation, detection AP.

Aggregates follow the mean-of-per-category-means convention so frequent
categories do not dominate. Instances whose metric support is empty (e.g.
no mask intersection) are excluded from the means and surfaced through
counts instead of being scored worst-case.

Frame conventions (see geometry): camera up is -Y, the ground plane is
spanned by camera X and Z, and the object frame has Z up with X as the
heading axis. "Yaw" is rotation about the vertical; yaw-only box IoU
replaces both rotations by their yaw component, intersecting footprint
polygons exactly and multiplying by the vertical overlap.
"""

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .errors import DimensionMismatch, EmptyInput
from .geometry import OrientedBox3D
from .nocs import NocsMap

PSNR_CAP_DB = 99.0

GRAVITY_THRESHOLDS_DEG = (1.0, 5.0, 90.0)
HEADING_THRESHOLDS_DEG = (5.0, 10.0, 90.0)
MAP_IOU_THRESHOLDS = (0.25, 0.50)

# Object-frame axes: X = heading, Z = up.
_HEADING_AXIS = np.array([1.0, 0.0, 0.0])
_UP_AXIS = np.array([0.0, 0.0, 1.0])


# ---------------------------------------------------------------------------
# Per-instance metrics
# ---------------------------------------------------------------------------


def nocs_mae_psnr(
    pred: NocsMap,
    pred_mask: np.ndarray,
    gt: NocsMap,
    gt_mask: np.ndarray,
) -> Optional[tuple[float, float]]:
    """(MAE, PSNR dB) over the mask intersection; None when it is empty.

    PSNR peak is 1.0, the full width of the coordinate range; exact
    predictions are capped at 99 dB so aggregates stay finite.
    """
    pred_mask = np.asarray(pred_mask, dtype=bool)
    gt_mask = np.asarray(gt_mask, dtype=bool)
    if pred.coords.shape != gt.coords.shape:
        raise DimensionMismatch("prediction and ground-truth maps differ in shape")
    if pred_mask.shape != pred.coords.shape[:2] or gt_mask.shape != pred_mask.shape:
        raise DimensionMismatch("mask shapes do not match maps")
    support = pred_mask & gt_mask & pred.valid & gt.valid
    if not support.any():
        return None
    diff = pred.coords[support] - gt.coords[support]
    mae = float(np.mean(np.abs(diff)))
    mse = float(np.mean(diff**2))
    if mse <= 0:
        return mae, PSNR_CAP_DB
    return mae, min(float(10.0 * math.log10(1.0 / mse)), PSNR_CAP_DB)


def mask_iou(pred: np.ndarray, gt: np.ndarray) -> float:
    """Intersection over union of two boolean grids; both empty gives 1.0."""
    pred = np.asarray(pred, dtype=bool)
    gt = np.asarray(gt, dtype=bool)
    if pred.shape != gt.shape:
        raise DimensionMismatch(f"pred {pred.shape} vs gt {gt.shape}")
    union = np.count_nonzero(pred | gt)
    if union == 0:
        return 1.0
    return float(np.count_nonzero(pred & gt) / union)


# ---------------------------------------------------------------------------
# Oriented-box IoU
# ---------------------------------------------------------------------------

_FACE_CORNER_IDX = (
    (0, 2, 6, 4),  # -x
    (1, 3, 7, 5),  # +x
    (0, 1, 5, 4),  # -y
    (2, 3, 7, 6),  # +y
    (0, 1, 3, 2),  # -z
    (4, 5, 7, 6),  # +z
)

_LOCAL_SIGNS = np.array(
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

_CLIP_EPS = 1e-12


def _clip_polygon_slab(poly: list, axis: int, bound: float, sign: float) -> list:
    """Sutherland-Hodgman clip against the half-space sign*p[axis] <= bound."""
    if not poly:
        return poly
    out = []
    for i, cur in enumerate(poly):
        prev = poly[i - 1]
        s_cur = sign * cur[axis] - bound
        s_prev = sign * prev[axis] - bound
        cur_in = s_cur <= _CLIP_EPS
        prev_in = s_prev <= _CLIP_EPS
        if cur_in:
            if not prev_in:
                t = s_prev / (s_prev - s_cur)
                out.append(prev + t * (cur - prev))
            out.append(cur)
        elif prev_in:
            t = s_prev / (s_prev - s_cur)
            out.append(prev + t * (cur - prev))
    return out


def _surface_points_inside(
    box_a: OrientedBox3D, box_b: OrientedBox3D
) -> list:
    """Pieces of box_b's surface inside box_a, expressed in a's object frame."""
    R_rel = box_a.rotation.T @ box_b.rotation
    c_rel = box_a.rotation.T @ (box_b.center - box_a.center)
    corners_b = (_LOCAL_SIGNS * (box_b.size / 2.0)) @ R_rel.T + c_rel
    half_a = box_a.size / 2.0
    points = []
    for face in _FACE_CORNER_IDX:
        poly = [corners_b[i] for i in face]
        for axis in range(3):
            poly = _clip_polygon_slab(poly, axis, half_a[axis], +1.0)
            poly = _clip_polygon_slab(poly, axis, half_a[axis], -1.0)
        points.extend(poly)
    return points


def box3d_iou(a: OrientedBox3D, b: OrientedBox3D, yaw_only: bool = False) -> float:
    """Exact IoU of two oriented boxes.

    With yaw_only, both orientations are reduced to rotation about the
    vertical axis and the IoU is the exact footprint-polygon intersection
    times the vertical overlap. Otherwise the full convex intersection
    volume is computed by clipping each box's faces against the other.
    """
    if yaw_only:
        inter = _yaw_intersection_volume(a, b)
    else:
        pts = _surface_points_inside(a, b)
        pts_ba = _surface_points_inside(b, a)
        # Map the second set from b's frame into a's frame before hulling.
        to_a = a.rotation.T @ b.rotation
        off = a.rotation.T @ (b.center - a.center)
        pts.extend([to_a @ p + off for p in pts_ba])
        inter = _hull_volume(pts)
    union = a.volume + b.volume - inter
    if union <= 0:
        return 0.0
    return float(min(max(inter / union, 0.0), 1.0))


def _hull_volume(points: list) -> float:
    if len(points) < 4:
        return 0.0
    arr = np.asarray(points)
    try:
        return float(ConvexHull(arr).volume)
    except QhullError:
        return 0.0  # flat or degenerate contact


def box_yaw(box: OrientedBox3D) -> float:
    """Yaw of the heading axis about the camera vertical, in (-pi, pi].

    Zero yaw means the object heads along camera +Z (away from the
    camera); positive yaw turns toward camera +X.
    """
    h = box.rotation @ _HEADING_AXIS
    return float(math.atan2(h[0], h[2]))


def _footprint(box: OrientedBox3D) -> np.ndarray:
    """(4, 2) ground-plane rectangle corners (x, z), CCW."""
    yaw = box_yaw(box)
    e_h = np.array([math.sin(yaw), math.cos(yaw)])
    e_p = np.array([e_h[1], -e_h[0]])
    c = np.array([box.center[0], box.center[2]])
    hx, hy = box.size[0] / 2.0, box.size[1] / 2.0
    corners = np.array(
        [
            c + hx * e_h + hy * e_p,
            c - hx * e_h + hy * e_p,
            c - hx * e_h - hy * e_p,
            c + hx * e_h - hy * e_p,
        ]
    )
    if _signed_area(corners) < 0:
        corners = corners[::-1]
    return corners


def _signed_area(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _clip_polygon_halfplane(poly, p0, p1):
    """Keep the part of poly left of the directed edge p0 -> p1."""
    if not len(poly):
        return []
    edge = p1 - p0
    out = []
    for i in range(len(poly)):
        cur = poly[i]
        prev = poly[i - 1]
        s_cur = edge[0] * (cur[1] - p0[1]) - edge[1] * (cur[0] - p0[0])
        s_prev = edge[0] * (prev[1] - p0[1]) - edge[1] * (prev[0] - p0[0])
        cur_in = s_cur >= -_CLIP_EPS
        prev_in = s_prev >= -_CLIP_EPS
        if cur_in:
            if not prev_in:
                t = s_prev / (s_prev - s_cur)
                out.append(prev + t * (cur - prev))
            out.append(cur)
        elif prev_in:
            t = s_prev / (s_prev - s_cur)
            out.append(prev + t * (cur - prev))
    return out


def _yaw_intersection_volume(a: OrientedBox3D, b: OrientedBox3D) -> float:
    poly = [p for p in _footprint(b)]
    rect_a = _footprint(a)
    for i in range(4):
        poly = _clip_polygon_halfplane(poly, rect_a[i], rect_a[(i + 1) % 4])
    if len(poly) < 3:
        return 0.0
    area = abs(_signed_area(np.asarray(poly)))
    lo = max(a.center[1] - a.size[2] / 2.0, b.center[1] - b.size[2] / 2.0)
    hi = min(a.center[1] + a.size[2] / 2.0, b.center[1] + b.size[2] / 2.0)
    return area * max(hi - lo, 0.0)


# ---------------------------------------------------------------------------
# Aggregated localization / orientation / AP metrics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NocsEvalResult:
    """Map-quality aggregate: mean of per-category means."""

    mae: float
    psnr: float
    mask_iou: float
    per_category: dict = field(default_factory=dict)
    skipped: int = 0  # instances with empty metric support


@dataclass(frozen=True)
class LocalizationEvalResult:
    """Matched true-positive localization errors, nuScenes-style."""

    mate: float  # ground-plane translation error (m)
    maoe: float  # yaw error (rad), wrapped to [0, pi]
    mase: float  # 1 - IoU after aligning center and yaw
    miou3d: float  # yaw-only 3D IoU
    mate_3d: float  # full 3D translation error (m)
    per_category: dict = field(default_factory=dict)


@dataclass(frozen=True)
class OrientationEvalResult:
    """Fraction of instances under each angular error threshold."""

    gravity: dict  # threshold deg -> fraction in [0, 1]
    heading: dict
    per_category: dict = field(default_factory=dict)


def _mean_of_category_means(per_category: dict, index: int) -> float:
    return float(np.mean([vals[index] for vals in per_category.values()]))


def evaluate_nocs(instances: Sequence[tuple]) -> NocsEvalResult:
    """Aggregate (pred, pred_mask, gt, gt_mask, category) instances.

    Instances whose mask intersection is empty contribute to ``skipped``
    and to no mean. mask IoU is still averaged over every instance.
    """
    if not instances:
        raise EmptyInput("no instances to evaluate")
    buckets: dict = {}
    skipped = 0
    for pred, pred_mask, gt, gt_mask, category in instances:
        iou = mask_iou(pred_mask, gt_mask)
        stats = nocs_mae_psnr(pred, pred_mask, gt, gt_mask)
        bucket = buckets.setdefault(category, {"mae": [], "psnr": [], "iou": []})
        bucket["iou"].append(iou)
        if stats is None:
            skipped += 1
            continue
        bucket["mae"].append(stats[0])
        bucket["psnr"].append(stats[1])
    per_category = {}
    for category in sorted(buckets):
        b = buckets[category]
        if not b["mae"]:
            continue
        # Sorted before averaging: bit-exact permutation invariance.
        per_category[category] = (
            float(np.mean(sorted(b["mae"]))),
            float(np.mean(sorted(b["psnr"]))),
            float(np.mean(sorted(b["iou"]))),
            len(b["mae"]),
        )
    if not per_category:
        raise EmptyInput("every instance had empty metric support")
    return NocsEvalResult(
        mae=_mean_of_category_means(per_category, 0),
        psnr=_mean_of_category_means(per_category, 1),
        mask_iou=_mean_of_category_means(per_category, 2),
        per_category=per_category,
        skipped=skipped,
    )


def _wrap_angle_pi(angle: float) -> float:
    a = abs(angle) % (2.0 * math.pi)
    return a if a <= math.pi else 2.0 * math.pi - a


def _aligned_size_iou(size_a: np.ndarray, size_b: np.ndarray) -> float:
    inter = float(np.prod(np.minimum(size_a, size_b)))
    union = float(np.prod(size_a) + np.prod(size_b) - inter)
    return inter / union


def localization_metrics(
    pairs: Sequence[tuple[OrientedBox3D, OrientedBox3D, str]],
) -> LocalizationEvalResult:
    """ATE / AOE / ASE / yaw-only IoU over pre-matched (pred, gt, category).

    ATE is the ground-plane center distance; the full 3D distance is
    reported alongside. AOE compares yaw only, wrapped to [0, pi]. ASE is
    one minus the IoU after centers and yaw are aligned, which reduces to
    the axis-aligned size overlap.
    """
    if not pairs:
        raise EmptyInput("no localization pairs")
    buckets: dict = {}
    for pred, gt, category in pairs:
        delta = pred.center - gt.center
        ate = float(math.hypot(delta[0], delta[2]))
        ate3d = float(np.linalg.norm(delta))
        aoe = _wrap_angle_pi(box_yaw(pred) - box_yaw(gt))
        ase = 1.0 - _aligned_size_iou(pred.size, gt.size)
        iou = box3d_iou(pred, gt, yaw_only=True)
        buckets.setdefault(category, []).append((ate, aoe, ase, iou, ate3d))
    per_category = {}
    for category in sorted(buckets):
        # Sorted rows keep the means bit-exact under input permutation.
        arr = np.asarray(sorted(buckets[category]))
        per_category[category] = (
            float(arr[:, 0].mean()),
            float(arr[:, 1].mean()),
            float(arr[:, 2].mean()),
            float(arr[:, 3].mean()),
            float(arr[:, 4].mean()),
            arr.shape[0],
        )
    return LocalizationEvalResult(
        mate=_mean_of_category_means(per_category, 0),
        maoe=_mean_of_category_means(per_category, 1),
        mase=_mean_of_category_means(per_category, 2),
        miou3d=_mean_of_category_means(per_category, 3),
        mate_3d=_mean_of_category_means(per_category, 4),
        per_category=per_category,
    )


def _axis_angle_deg(R_pred: np.ndarray, R_gt: np.ndarray, axis: np.ndarray) -> float:
    a = R_pred @ axis
    b = R_gt @ axis
    c = float(np.clip(np.dot(a, b), -1.0, 1.0))
    return math.degrees(math.acos(c))


def orientation_accuracy(
    pairs: Sequence[tuple[OrientedBox3D, OrientedBox3D, str]],
    thresholds_gravity: Sequence[float] = GRAVITY_THRESHOLDS_DEG,
    thresholds_heading: Sequence[float] = HEADING_THRESHOLDS_DEG,
) -> OrientationEvalResult:
    """Fraction of instances whose axis errors fall under each threshold.

    The gravity error is the angle between predicted and ground-truth
    object up-axes; the heading error likewise for the X axis. Aggregation
    is per-category, then mean of means.
    """
    if not pairs:
        raise EmptyInput("no orientation pairs")
    buckets: dict = {}
    for pred, gt, category in pairs:
        g_err = _axis_angle_deg(pred.rotation, gt.rotation, _UP_AXIS)
        h_err = _axis_angle_deg(pred.rotation, gt.rotation, _HEADING_AXIS)
        buckets.setdefault(category, []).append((g_err, h_err))
    per_category = {}
    for category in sorted(buckets):
        arr = np.asarray(sorted(buckets[category]))
        gravity = {
            t: float(np.mean(arr[:, 0] < t)) for t in thresholds_gravity
        }
        heading = {
            t: float(np.mean(arr[:, 1] < t)) for t in thresholds_heading
        }
        per_category[category] = (gravity, heading, arr.shape[0])
    gravity = {
        t: float(np.mean([per_category[c][0][t] for c in per_category]))
        for t in thresholds_gravity
    }
    heading = {
        t: float(np.mean([per_category[c][1][t] for c in per_category]))
        for t in thresholds_heading
    }
    return OrientationEvalResult(
        gravity=gravity, heading=heading, per_category=per_category
    )


def _average_precision(scores: np.ndarray, hits: np.ndarray, n_gt: int) -> float:
    """All-point interpolated AP for score-ranked binary outcomes."""
    order = np.argsort(-scores, kind="stable")
    hits = hits[order]
    tp = np.cumsum(hits)
    fp = np.cumsum(~hits)
    recall = tp / n_gt
    precision = tp / np.maximum(tp + fp, 1)
    ap = 0.0
    prev_r = 0.0
    for i in range(len(recall)):
        if hits[i]:
            ap += (recall[i] - prev_r) * float(np.max(precision[i:]))
            prev_r = recall[i]
    return ap


def map_at_iou(
    per_instance: Sequence[tuple],
    thresholds: Sequence[float] = MAP_IOU_THRESHOLDS,
    yaw_only: bool = False,
) -> dict:
    """mAP (percent) at the given IoU thresholds over matched pairs.

    Items are (pred_box, gt_box, category) or (pred_box, gt_box, category,
    score). Without scores every pair counts directly: AP per category is
    the fraction of pairs reaching the threshold (the 2D-box-prompted
    setting provides exactly one prediction per ground truth). With scores
    the standard ranked precision-recall AP is computed per category.
    """
    if not per_instance:
        raise EmptyInput("no instances")
    buckets: dict = {}
    for item in per_instance:
        pred, gt, category = item[0], item[1], item[2]
        score = item[3] if len(item) > 3 else None
        iou = box3d_iou(pred, gt, yaw_only=yaw_only)
        buckets.setdefault(category, []).append((iou, score))
    result = {}
    for threshold in thresholds:
        aps = []
        for category in sorted(buckets):
            # Deterministic order regardless of input permutation; score
            # ties resolved by IoU so the ranked AP is well defined.
            entries = sorted(
                buckets[category],
                key=lambda e: (-(e[1] if e[1] is not None else 0.0), -e[0]),
            )
            ious = np.array([e[0] for e in entries])
            scores = [e[1] for e in entries]
            if any(s is None for s in scores):
                aps.append(float(np.mean(ious >= threshold)))
            else:
                aps.append(
                    _average_precision(
                        np.asarray(scores, dtype=float),
                        ious >= threshold,
                        len(entries),
                    )
                )
        result[threshold] = float(np.mean(aps) * 100.0)
    return result


# ---------------------------------------------------------------------------
# Report rendering
# ---------------------------------------------------------------------------


def render_report(
    nocs_result: NocsEvalResult,
    loc_result: LocalizationEvalResult,
    orient_result: OrientationEvalResult,
    map_result: dict,
) -> str:
    """Deterministic plain-text report: one record per category + aggregate."""
    lines = []
    lines.append("[nocs]")
    for category, (mae, psnr, iou, count) in sorted(nocs_result.per_category.items()):
        lines.append(
            f"category={category} mae={mae:.3f} psnr={psnr:.3f} "
            f"mask_iou={iou:.3f} count={count}"
        )
    lines.append(
        f"aggregate mae={nocs_result.mae:.3f} psnr={nocs_result.psnr:.3f} "
        f"mask_iou={nocs_result.mask_iou:.3f} skipped={nocs_result.skipped}"
    )
    lines.append("")
    lines.append("[localization]")
    for category, vals in sorted(loc_result.per_category.items()):
        lines.append(
            f"category={category} mate={vals[0]:.3f} maoe={vals[1]:.3f} "
            f"mase={vals[2]:.3f} miou3d={vals[3]:.3f} mate_3d={vals[4]:.3f} "
            f"count={vals[5]}"
        )
    lines.append(
        f"aggregate mate={loc_result.mate:.3f} maoe={loc_result.maoe:.3f} "
        f"mase={loc_result.mase:.3f} miou3d={loc_result.miou3d:.3f} "
        f"mate_3d={loc_result.mate_3d:.3f}"
    )
    lines.append("")
    lines.append("[orientation]")
    for category, (gravity, heading, count) in sorted(
        orient_result.per_category.items()
    ):
        gtxt = " ".join(
            f"gravity@{t:g}deg={100.0 * v:.2f}" for t, v in sorted(gravity.items())
        )
        htxt = " ".join(
            f"heading@{t:g}deg={100.0 * v:.2f}" for t, v in sorted(heading.items())
        )
        lines.append(f"category={category} {gtxt} {htxt} count={count}")
    gtxt = " ".join(
        f"gravity@{t:g}deg={100.0 * v:.2f}"
        for t, v in sorted(orient_result.gravity.items())
    )
    htxt = " ".join(
        f"heading@{t:g}deg={100.0 * v:.2f}"
        for t, v in sorted(orient_result.heading.items())
    )
    lines.append(f"aggregate {gtxt} {htxt}")
    lines.append("")
    lines.append("[map]")
    for threshold, value in sorted(map_result.items()):
        lines.append(f"map@iou{threshold:g}={value:.1f}")
    lines.append("")
    return "\n".join(lines)
