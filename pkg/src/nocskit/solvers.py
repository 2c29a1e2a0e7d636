"""Pose solvers that lift normalized-coordinate predictions to metric boxes.

Three recovery paths are provided:

* depth-from-orientation: rotation and centroid ray are given (from a
  learned head); only the depth along the ray is solved, as a linear
  least-squares problem over the cross-multiplied projection equations.
* direct PnP: EPnP over the dense 2D-3D correspondences, refined with
  Levenberg-Marquardt on the pixel reprojection error; optionally wrapped
  in RANSAC for robustness to gross outliers.
* 3D-3D: closed-form least-squares similarity (Umeyama) against points
  backprojected from a depth map.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    DegenerateConfiguration,
    InsufficientCorrespondences,
    NegativeDepthSolution,
    NoConsensus,
    Underdetermined,
)
from .geometry import (
    CameraIntrinsics,
    OrientedBox3D,
    RigidPose,
    UnitRay,
    allocentric_to_egocentric,
    backproject_grid,
)
from .nocs import DepthMap, InstanceMask, NocsMap, unnormalize

METHOD_DEPTH_FROM_ORIENTATION = "depth_from_orientation"
METHOD_EPNP = "epnp"
METHOD_EPNP_LM = "epnp_lm"
METHOD_EPNP_RANSAC = "epnp_ransac"
METHOD_UMEYAMA = "umeyama"


@dataclass(frozen=True)
class Correspondences2D3D:
    """N object-frame metric points paired with their observed pixels."""

    points3d: np.ndarray  # (N, 3)
    pixels: np.ndarray  # (N, 2)

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points3d, dtype=float))
        px = np.atleast_2d(np.asarray(self.pixels, dtype=float))
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise DegenerateConfiguration(f"points3d must be (N, 3), got {pts.shape}")
        if px.shape != (pts.shape[0], 2):
            raise DegenerateConfiguration(f"pixels must be (N, 2), got {px.shape}")
        if not (np.all(np.isfinite(pts)) and np.all(np.isfinite(px))):
            raise DegenerateConfiguration("correspondences contain non-finite values")
        object.__setattr__(self, "points3d", pts)
        object.__setattr__(self, "pixels", px)

    def __len__(self) -> int:
        return self.points3d.shape[0]


@dataclass(frozen=True)
class Correspondences3D3D:
    """N source points paired with N target points (camera frame, from depth)."""

    source: np.ndarray  # (N, 3)
    target: np.ndarray  # (N, 3)

    def __post_init__(self):
        src = np.atleast_2d(np.asarray(self.source, dtype=float))
        tgt = np.atleast_2d(np.asarray(self.target, dtype=float))
        if src.ndim != 2 or src.shape[1] != 3 or tgt.shape != src.shape:
            raise DegenerateConfiguration("source/target must both be (N, 3)")
        if not (np.all(np.isfinite(src)) and np.all(np.isfinite(tgt))):
            raise DegenerateConfiguration("correspondences contain non-finite values")
        object.__setattr__(self, "source", src)
        object.__setattr__(self, "target", tgt)

    def __len__(self) -> int:
        return self.source.shape[0]


@dataclass(frozen=True)
class SolveReport:
    """Outcome of one pose solve."""

    pose: RigidPose
    inlier_count: int
    rms_reprojection_px: float
    method: str


@dataclass(frozen=True)
class LearnedHead:
    """Outputs of the learned pose head: allocentric rotation + centroid pixel."""

    rotation_allocentric: np.ndarray  # (3, 3)
    centroid_px: np.ndarray  # (2,)


def _reprojection_rms(
    R: np.ndarray, t: np.ndarray, points: np.ndarray, pixels: np.ndarray,
    camera: CameraIntrinsics,
) -> float:
    """Pixel RMS of the reprojection residual; inf if any point is behind."""
    cam = points @ R.T + t
    z = cam[:, 2]
    if np.any(z <= 1e-9):
        return float("inf")
    u = camera.fx * cam[:, 0] / z + camera.cx
    v = camera.fy * cam[:, 1] / z + camera.cy
    res = np.stack([u, v], axis=1) - pixels
    return float(np.sqrt(np.mean(np.sum(res**2, axis=1))))


def solve_depth_given_orientation(
    corr: Correspondences2D3D,
    rotation: np.ndarray,
    ray: UnitRay,
    camera: CameraIntrinsics,
) -> SolveReport:
    """Recover translation t = lambda * ray given a known rotation.

    Each correspondence yields two equations linear in lambda from the
    cross-multiplied pinhole projection; lambda is their least-squares
    solution. Raises Underdetermined when no correspondence constrains the
    depth (all points project along the centroid ray itself) and
    NegativeDepthSolution when the solution lies behind the camera.
    """
    n = len(corr)
    if n == 0:
        raise Underdetermined("no correspondences")
    d = ray.direction
    R = np.asarray(rotation, dtype=float)
    Y = corr.points3d @ R.T  # rotated object points, translation pending
    u = corr.pixels[:, 0]
    v = corr.pixels[:, 1]

    # (u - cx)(Yz + lam*dz) = fx (Yx + lam*dx)  =>  a_u * lam = b_u
    a_u = (u - camera.cx) * d[2] - camera.fx * d[0]
    b_u = camera.fx * Y[:, 0] - (u - camera.cx) * Y[:, 2]
    a_v = (v - camera.cy) * d[2] - camera.fy * d[1]
    b_v = camera.fy * Y[:, 1] - (v - camera.cy) * Y[:, 2]
    a = np.concatenate([a_u, a_v])
    b = np.concatenate([b_u, b_v])

    denom = float(a @ a)
    scale = n * (camera.fx**2 + camera.fy**2)
    if denom <= 1e-20 * scale:
        raise Underdetermined(
            "correspondences leave the depth along the ray unconstrained"
        )
    lam = float(a @ b) / denom
    if lam <= 0:
        raise NegativeDepthSolution(f"solved depth {lam} is not positive")
    t = lam * d
    rms = _reprojection_rms(R, t, corr.points3d, corr.pixels, camera)
    return SolveReport(
        pose=RigidPose(R, t),
        inlier_count=n,
        rms_reprojection_px=rms,
        method=METHOD_DEPTH_FROM_ORIENTATION,
    )


def _rigid_align(source: np.ndarray, target: np.ndarray):
    """Kabsch: rotation + translation minimizing |R s + t - y|^2 (no scale)."""
    mu_s = source.mean(axis=0)
    mu_t = target.mean(axis=0)
    cov = (target - mu_t).T @ (source - mu_s) / source.shape[0]
    U, _, Vt = np.linalg.svd(cov)
    S = np.eye(3)
    if np.linalg.det(U) * np.linalg.det(Vt) < 0:
        S[2, 2] = -1.0
    R = U @ S @ Vt
    t = mu_t - R @ mu_s
    return R, t


def solve_umeyama(corr: Correspondences3D3D, with_scale: bool = False):
    """Closed-form least-squares similarity aligning source onto target.

    Returns (scale, pose, rms) with target ~ scale * R @ source + t.
    scale is 1.0 when with_scale is False. Raises DegenerateConfiguration
    for fewer than 3 points or a collinear source.
    """
    n = len(corr)
    if n < 3:
        raise DegenerateConfiguration(f"need at least 3 point pairs, got {n}")
    src = corr.source
    tgt = corr.target
    mu_s = src.mean(axis=0)
    mu_t = tgt.mean(axis=0)
    src_c = src - mu_s
    tgt_c = tgt - mu_t

    spread = np.linalg.svd(src_c, compute_uv=False)
    if spread[0] < 1e-12 or spread[1] < 1e-9 * spread[0]:
        raise DegenerateConfiguration("source points are collinear or coincident")

    cov = tgt_c.T @ src_c / n
    U, dvals, Vt = np.linalg.svd(cov)
    S = np.eye(3)
    if np.linalg.det(U) * np.linalg.det(Vt) < 0:
        S[2, 2] = -1.0
    R = U @ S @ Vt
    if with_scale:
        var_s = float(np.mean(np.sum(src_c**2, axis=1)))
        scale = float(np.sum(dvals * np.diag(S))) / var_s
    else:
        scale = 1.0
    t = mu_t - scale * R @ mu_s
    residual = scale * src @ R.T + t - tgt
    rms = float(np.sqrt(np.mean(np.sum(residual**2, axis=1))))
    return scale, RigidPose(R, t), rms


# ---------------------------------------------------------------------------
# EPnP
# ---------------------------------------------------------------------------

_PAIRS4 = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
_PAIRS3 = [(0, 1), (0, 2), (1, 2)]


def _control_points(points: np.ndarray):
    """Centroid + principal directions. Falls back to 3 points when planar."""
    centroid = points.mean(axis=0)
    centered = points - centroid
    _, svals, Vt = np.linalg.svd(centered, full_matrices=False)
    if svals[0] < 1e-12 or svals[1] < 1e-7 * svals[0]:
        raise DegenerateConfiguration("points are collinear or coincident")
    scale = svals / np.sqrt(points.shape[0])
    planar = svals[2] < 1e-7 * svals[0]
    if planar:
        ctrl = np.vstack([centroid, centroid + scale[0] * Vt[0], centroid + scale[1] * Vt[1]])
    else:
        ctrl = np.vstack(
            [
                centroid,
                centroid + scale[0] * Vt[0],
                centroid + scale[1] * Vt[1],
                centroid + scale[2] * Vt[2],
            ]
        )
    return ctrl, planar


def _barycentric(points: np.ndarray, ctrl: np.ndarray) -> np.ndarray:
    """Alphas with sum 1 such that points = alphas @ ctrl."""
    k = ctrl.shape[0]
    A = np.vstack([ctrl.T, np.ones((1, k))])  # (4, k)
    B = np.vstack([points.T, np.ones((1, points.shape[0]))])  # (4, N)
    alphas, *_ = np.linalg.lstsq(A, B, rcond=None)
    return alphas.T  # (N, k)


def _constraint_matrix(
    pixels: np.ndarray, alphas: np.ndarray, camera: CameraIntrinsics
) -> np.ndarray:
    n, k = alphas.shape
    M = np.zeros((2 * n, 3 * k))
    du = camera.cx - pixels[:, 0]
    dv = camera.cy - pixels[:, 1]
    for j in range(k):
        M[0::2, 3 * j + 0] = alphas[:, j] * camera.fx
        M[0::2, 3 * j + 2] = alphas[:, j] * du
        M[1::2, 3 * j + 1] = alphas[:, j] * camera.fy
        M[1::2, 3 * j + 2] = alphas[:, j] * dv
    return M


def _beta_cases(kernel: np.ndarray, ctrl_world: np.ndarray, k: int):
    """Candidate beta vectors for the kernel combination, per classic cases."""
    pairs = _PAIRS4 if k == 4 else _PAIRS3
    rho = np.array(
        [np.sum((ctrl_world[i] - ctrl_world[j]) ** 2) for i, j in pairs]
    )
    dists_w = np.sqrt(rho)

    def pair_diffs(vec):
        cc = vec.reshape(k, 3)
        return np.array([cc[i] - cc[j] for i, j in pairs])

    candidates = []

    # Case 1: single kernel vector, scale by distance ratio.
    d1 = np.linalg.norm(pair_diffs(kernel[:, 0]), axis=1)
    denom = float(d1 @ d1)
    if denom > 1e-30:
        beta = np.zeros(kernel.shape[1])
        beta[0] = float(d1 @ dists_w) / denom
        candidates.append(beta)

    # Case 2: two kernel vectors, linearized [b11, b12, b22].
    if kernel.shape[1] >= 2:
        dv = [pair_diffs(kernel[:, m]) for m in range(2)]
        L = np.stack(
            [
                np.sum(dv[0] * dv[0], axis=1),
                2.0 * np.sum(dv[0] * dv[1], axis=1),
                np.sum(dv[1] * dv[1], axis=1),
            ],
            axis=1,
        )
        sol, *_ = np.linalg.lstsq(L, rho, rcond=None)
        b11, b12, b22 = sol
        beta = np.zeros(kernel.shape[1])
        beta[0] = np.sqrt(abs(b11))
        beta[1] = np.sqrt(abs(b22)) * (-1.0 if (b11 > 0) != (b12 > 0) else 1.0)
        candidates.append(beta)

    # Case 3: three kernel vectors (spatial configuration only).
    if k == 4 and kernel.shape[1] >= 3:
        dv = [pair_diffs(kernel[:, m]) for m in range(3)]
        L = np.stack(
            [
                np.sum(dv[0] * dv[0], axis=1),
                2.0 * np.sum(dv[0] * dv[1], axis=1),
                2.0 * np.sum(dv[0] * dv[2], axis=1),
                np.sum(dv[1] * dv[1], axis=1),
                2.0 * np.sum(dv[1] * dv[2], axis=1),
                np.sum(dv[2] * dv[2], axis=1),
            ],
            axis=1,
        )
        try:
            sol = np.linalg.solve(L, rho)
        except np.linalg.LinAlgError:
            sol = np.linalg.lstsq(L, rho, rcond=None)[0]
        b11, b12, b13, b22, _, b33 = sol
        beta = np.zeros(kernel.shape[1])
        beta[0] = np.sqrt(abs(b11))
        beta[1] = np.sqrt(abs(b22)) * (-1.0 if (b11 > 0) != (b12 > 0) else 1.0)
        beta[2] = np.sqrt(abs(b33)) * (-1.0 if (b11 > 0) != (b13 > 0) else 1.0)
        candidates.append(beta)

    return candidates


def _epnp_closed_form(
    points: np.ndarray, pixels: np.ndarray, camera: CameraIntrinsics
):
    """Closed-form EPnP: best (R, t) over the beta cases, no refinement."""
    ctrl_world, planar = _control_points(points)
    k = ctrl_world.shape[0]
    alphas = _barycentric(points, ctrl_world)
    M = _constraint_matrix(pixels, alphas, camera)
    # Eigenvectors of M^T M for the smallest eigenvalues span the solution.
    _, eigvecs = np.linalg.eigh(M.T @ M)
    kernel = eigvecs[:, : min(4, 3 * k)]  # ascending eigenvalues

    best = None
    for beta in _beta_cases(kernel, ctrl_world, k):
        ctrl_cam = (kernel @ beta).reshape(k, 3)
        pts_cam = alphas @ ctrl_cam
        if np.mean(pts_cam[:, 2]) < 0:
            pts_cam = -pts_cam
        try:
            R, t = _rigid_align(points, pts_cam)
        except np.linalg.LinAlgError:
            continue
        rms = _reprojection_rms(R, t, points, pixels, camera)
        if best is None or rms < best[2]:
            best = (R, t, rms)
    if best is None:
        raise DegenerateConfiguration("no usable EPnP solution candidate")
    return best


def _skew(v: np.ndarray) -> np.ndarray:
    return np.array([[0, -v[2], v[1]], [v[2], 0, -v[0]], [-v[1], v[0], 0]])


def _exp_so3(w: np.ndarray) -> np.ndarray:
    theta = np.linalg.norm(w)
    if theta < 1e-12:
        return np.eye(3) + _skew(w)
    k = w / theta
    kx = _skew(k)
    return np.eye(3) + np.sin(theta) * kx + (1 - np.cos(theta)) * (kx @ kx)


def _lm_refine(
    R: np.ndarray, t: np.ndarray, points: np.ndarray, pixels: np.ndarray,
    camera: CameraIntrinsics, iterations: int = 60,
):
    """Levenberg-Marquardt on (R, t) minimizing squared pixel reprojection.

    Left-multiplicative rotation updates R <- exp([w]x) R. Steps are only
    accepted when the cost decreases, so the refined solution is never
    worse than the input.
    """
    def residuals(Rc, tc):
        cam = points @ Rc.T + tc
        z = cam[:, 2]
        if np.any(z <= 1e-9):
            return None, None
        u = camera.fx * cam[:, 0] / z + camera.cx
        v = camera.fy * cam[:, 1] / z + camera.cy
        r = np.stack([u, v], axis=1) - pixels
        return r.reshape(-1), cam

    r, cam = residuals(R, t)
    if r is None:
        return R, t
    cost = float(r @ r)
    lam = 1e-3
    n = points.shape[0]
    for _ in range(iterations):
        z = cam[:, 2]
        inv_z = 1.0 / z
        # d(pixel)/d(cam point)
        J_pt = np.zeros((n, 2, 3))
        J_pt[:, 0, 0] = camera.fx * inv_z
        J_pt[:, 0, 2] = -camera.fx * cam[:, 0] * inv_z**2
        J_pt[:, 1, 1] = camera.fy * inv_z
        J_pt[:, 1, 2] = -camera.fy * cam[:, 1] * inv_z**2
        # d(cam point)/d(w, t): [-[Rp]x | I]
        rp = cam - t
        S = np.zeros((n, 3, 3))
        S[:, 0, 1] = -rp[:, 2]
        S[:, 0, 2] = rp[:, 1]
        S[:, 1, 0] = rp[:, 2]
        S[:, 1, 2] = -rp[:, 0]
        S[:, 2, 0] = -rp[:, 1]
        S[:, 2, 1] = rp[:, 0]
        J = np.concatenate([-np.einsum("nij,njk->nik", J_pt, S), J_pt], axis=2)
        J = J.reshape(2 * n, 6)
        g = J.T @ r
        H = J.T @ J
        stepped = False
        for _attempt in range(8):
            try:
                delta = np.linalg.solve(H + lam * np.diag(np.diag(H)) + 1e-15 * np.eye(6), -g)
            except np.linalg.LinAlgError:
                lam *= 10
                continue
            R_new = _exp_so3(delta[:3]) @ R
            t_new = t + delta[3:]
            r_new, cam_new = residuals(R_new, t_new)
            if r_new is not None and float(r_new @ r_new) < cost:
                R, t, r, cam = R_new, t_new, r_new, cam_new
                cost = float(r_new @ r_new)
                lam = max(lam / 3.0, 1e-12)
                stepped = True
                break
            lam *= 10
        if not stepped or np.linalg.norm(delta) < 1e-14:
            break
    # Re-orthonormalize against accumulated drift.
    U, _, Vt = np.linalg.svd(R)
    R = U @ Vt
    if np.linalg.det(R) < 0:
        R = U @ np.diag([1.0, 1.0, -1.0]) @ Vt
    return R, t


def solve_epnp(
    corr: Correspondences2D3D, camera: CameraIntrinsics, refine: bool = True
) -> SolveReport:
    """EPnP over the correspondences, LM-refined unless refine=False.

    Requires N >= 4. Planar point sets are handled with a 3-control-point
    fallback. The LM step never increases the reprojection RMS.
    """
    n = len(corr)
    if n < 4:
        raise Underdetermined(f"EPnP needs at least 4 correspondences, got {n}")
    R, t, rms = _epnp_closed_form(corr.points3d, corr.pixels, camera)
    method = METHOD_EPNP
    if refine:
        R, t = _lm_refine(R, t, corr.points3d, corr.pixels, camera)
        rms = min(rms, _reprojection_rms(R, t, corr.points3d, corr.pixels, camera))
        method = METHOD_EPNP_LM
    return SolveReport(
        pose=RigidPose(R, t), inlier_count=n, rms_reprojection_px=rms, method=method
    )


def solve_epnp_ransac(
    corr: Correspondences2D3D,
    camera: CameraIntrinsics,
    max_iters: int = 256,
    inlier_px: float = 2.0,
    seed: int = 0,
) -> SolveReport:
    """RANSAC around minimal-sample EPnP hypotheses, deterministic per seed.

    Hypotheses use 5-point samples (4-point PnP admits multiple exact
    solutions, so 5 is the practical minimum for a unique EPnP fit) with a
    short LM polish. An inlier reprojects within inlier_px of its
    observation; the best hypothesis is refit on its inliers with
    EPnP + LM. Raises NoConsensus when no hypothesis gathers at least 4
    inliers.
    """
    n = len(corr)
    if n < 4:
        raise Underdetermined(f"RANSAC EPnP needs at least 4 correspondences, got {n}")
    rng = np.random.default_rng(seed)
    pts, px = corr.points3d, corr.pixels
    sample_size = min(5, n)

    best_mask = None
    best_count = 0
    for _ in range(max_iters):
        sample = rng.choice(n, size=sample_size, replace=False)
        try:
            R, t, _ = _epnp_closed_form(pts[sample], px[sample], camera)
            R, t = _lm_refine(R, t, pts[sample], px[sample], camera, iterations=20)
        except DegenerateConfiguration:
            continue
        cam = pts @ R.T + t
        z = cam[:, 2]
        ok = z > 1e-9
        u = np.where(ok, camera.fx * cam[:, 0] / np.where(ok, z, 1.0) + camera.cx, np.inf)
        v = np.where(ok, camera.fy * cam[:, 1] / np.where(ok, z, 1.0) + camera.cy, np.inf)
        err = np.hypot(u - px[:, 0], v - px[:, 1])
        mask = ok & (err < inlier_px)
        count = int(np.count_nonzero(mask))
        if count > best_count:
            best_count = count
            best_mask = mask
            if count == n:
                break
    if best_mask is None or best_count < 4:
        raise NoConsensus(
            f"best hypothesis has {best_count} inliers, need at least 4"
        )
    refit = solve_epnp(
        Correspondences2D3D(pts[best_mask], px[best_mask]), camera, refine=True
    )
    return SolveReport(
        pose=refit.pose,
        inlier_count=best_count,
        rms_reprojection_px=refit.rms_reprojection_px,
        method=METHOD_EPNP_RANSAC,
    )


def lift_to_box(
    nocs: NocsMap,
    mask: InstanceMask,
    size: np.ndarray,
    camera: CameraIntrinsics,
    method: str = METHOD_EPNP,
    head: Optional[LearnedHead] = None,
    depth: Optional[DepthMap] = None,
    ransac_iters: int = 256,
    ransac_inlier_px: float = 2.0,
    seed: int = 0,
) -> tuple[OrientedBox3D, SolveReport]:
    """Recover the 9DoF oriented box from a normalized-coordinate map.

    Correspondences are gathered over valid map pixels inside the instance
    mask, unnormalized by the given size. The solve path depends on method:

    * "depth_from_orientation": requires head; the allocentric rotation is
      converted to egocentric via the centroid ray and only depth is solved.
    * "epnp" / "epnp_ransac": full 6DoF from the 2D-3D correspondences.
    * "umeyama": requires depth; rigid 3D-3D alignment against the
      backprojected depth points.

    The returned box has the recovered pose and the given size (the object
    origin is the box center).
    """
    size = np.asarray(size, dtype=float)
    select = nocs.valid & mask.mask
    vv, uu = np.nonzero(select)
    pixels = np.stack([uu.astype(float), vv.astype(float)], axis=1)
    points_obj = unnormalize(nocs.coords[select], size)
    n = pixels.shape[0]

    min_needed = {
        METHOD_DEPTH_FROM_ORIENTATION: 1,
        METHOD_UMEYAMA: 3,
        METHOD_EPNP: 4,
        METHOD_EPNP_RANSAC: 4,
    }
    if method not in min_needed:
        raise ValueError(f"unknown solve method {method!r}")
    if n < min_needed[method]:
        raise InsufficientCorrespondences(
            f"{n} valid pixels, method {method!r} needs {min_needed[method]}"
        )

    if method == METHOD_DEPTH_FROM_ORIENTATION:
        if head is None:
            raise ValueError("depth_from_orientation requires learned-head outputs")
        ray = UnitRay.through_pixel(head.centroid_px, camera)
        rotation = allocentric_to_egocentric(head.rotation_allocentric, ray)
        report = solve_depth_given_orientation(
            Correspondences2D3D(points_obj, pixels), rotation, ray, camera
        )
    elif method == METHOD_UMEYAMA:
        if depth is None:
            raise ValueError("umeyama lifting requires a depth map")
        if (depth.height, depth.width) != (nocs.height, nocs.width):
            raise DegenerateConfiguration("depth dimensions do not match the map")
        usable = select & depth.valid
        if np.count_nonzero(usable) < 3:
            raise InsufficientCorrespondences("fewer than 3 pixels carry valid depth")
        pts_cam = backproject_grid(depth.depth, camera)[usable]
        src = unnormalize(nocs.coords[usable], size)
        _, pose, _ = solve_umeyama(
            Correspondences3D3D(src, pts_cam), with_scale=False
        )
        yy, xx = np.nonzero(usable)
        px_used = np.stack([xx.astype(float), yy.astype(float)], axis=1)
        rms = _reprojection_rms(pose.rotation, pose.translation, src, px_used, camera)
        report = SolveReport(
            pose=pose,
            inlier_count=int(np.count_nonzero(usable)),
            rms_reprojection_px=rms,
            method=METHOD_UMEYAMA,
        )
    elif method == METHOD_EPNP_RANSAC:
        report = solve_epnp_ransac(
            Correspondences2D3D(points_obj, pixels),
            camera,
            max_iters=ransac_iters,
            inlier_px=ransac_inlier_px,
            seed=seed,
        )
    else:
        report = solve_epnp(Correspondences2D3D(points_obj, pixels), camera)

    box = OrientedBox3D(
        center=report.pose.translation, size=size, rotation=report.pose.rotation
    )
    return box, report
