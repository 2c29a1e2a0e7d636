import type { ArrayView, WireArray } from "./arrays.js";

export interface CameraIntrinsics {
  fx: number;
  fy: number;
  cx: number;
  cy: number;
  width: number;
  height: number;
}

/** 9DoF oriented box: camera-frame center (m), per-axis size (m), 3x3
 * camera-from-object rotation in row-major nested arrays. */
export interface OrientedBox3D {
  center: [number, number, number];
  size: [number, number, number];
  rotation: number[][];
}

export type SolveMethod = "epnp" | "epnp_ransac" | "depth_from_orientation" | "umeyama";

export interface LearnedHead {
  rotation_allocentric: number[][];
  centroid_px: [number, number];
}

export interface SolveReport {
  rotation: number[][];
  translation: [number, number, number];
  inlier_count: number;
  rms_reprojection_px: number | null;
  method: string;
}

export interface LiftItem {
  /** (H, W, 3) float64 normalized coordinates. */
  nocsCoords: ArrayView;
  /** (H, W) bool validity of the coordinate map. */
  nocsValid: ArrayView;
  /** (H, W) bool instance mask. */
  mask: ArrayView;
  size: [number, number, number];
  camera: CameraIntrinsics;
  method?: SolveMethod;
  head?: LearnedHead;
  /** (H, W) float64 z-depth, 0 where invalid; required for "umeyama". */
  depth?: ArrayView;
  seed?: number;
}

export interface LiftResult {
  box: OrientedBox3D;
  report: SolveReport;
}

export interface ComputeNocsItem {
  /** (H, W) float64 z-depth, 0 where invalid. */
  depth: ArrayView;
  camera: CameraIntrinsics;
  box: OrientedBox3D;
  /** (H, W) bool instance mask. */
  mask: ArrayView;
}

export interface NocsMapResult {
  coords: ArrayView;
  valid: ArrayView;
}

export interface EpnpItem {
  points3d: ArrayView; // (N, 3) float64
  pixels: ArrayView; // (N, 2) float64
  camera: CameraIntrinsics;
  refine?: boolean;
}

export interface UmeyamaItem {
  source: ArrayView; // (N, 3) float64
  target: ArrayView; // (N, 3) float64
  withScale?: boolean;
}

export interface UmeyamaResult {
  scale: number;
  rotation: number[][];
  translation: [number, number, number];
  rms: number | null;
}

export interface NocsQualityItem {
  predCoords: ArrayView;
  predValid: ArrayView;
  predMask: ArrayView;
  gtCoords: ArrayView;
  gtValid: ArrayView;
  gtMask: ArrayView;
}

export interface NocsQualityResult {
  mae: number;
  psnr: number;
}

export interface BoxIouItem {
  a: OrientedBox3D;
  b: OrientedBox3D;
  yawOnly?: boolean;
}

export interface LocalizationPair {
  pred: OrientedBox3D;
  gt: OrientedBox3D;
  category: string;
}

export interface LocalizationResult {
  mate: number;
  maoe: number;
  mase: number;
  miou3d: number;
  mate_3d: number;
  per_category: Record<string, [number, number, number, number, number, number]>;
}

/** Raw wire payloads (internal). */
export type WireValue = WireArray | number | string | boolean | null | WireValue[] | {
  [key: string]: WireValue;
};
