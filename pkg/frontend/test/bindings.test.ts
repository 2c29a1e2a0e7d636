import assert from "node:assert/strict";
import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { after, before, test } from "node:test";

import {
  BridgeError,
  Nocskit,
  boolView,
  float64View,
  view,
  type OrientedBox3D,
} from "../src/index.js";
import { coreEnv, PYTHON } from "./helpers.js";

const IDENTITY = [
  [1, 0, 0],
  [0, 1, 0],
  [0, 0, 1],
];

const CAMERA = { fx: 100, fy: 100, cx: 32, cy: 32, width: 64, height: 64 };

let kit: Nocskit;

before(() => {
  kit = new Nocskit({ python: PYTHON, env: coreEnv() });
});

after(() => {
  kit.close();
});

test("version mirrors the core package version", async () => {
  const here = dirname(fileURLToPath(import.meta.url));
  const pkg = JSON.parse(
    readFileSync(join(here, "..", "..", "package.json"), "utf-8"),
  );
  assert.equal(await kit.version(), pkg.version);
});

test("identical boxes have IoU exactly 1", async () => {
  const box: OrientedBox3D = {
    center: [0, 0, 5],
    size: [1, 1, 1],
    rotation: IDENTITY,
  };
  const [iou] = await kit.box3dIou([{ a: box, b: box }]);
  assert.equal(iou, 1.0);
});

test("offset cubes have IoU 1/3", async () => {
  const a: OrientedBox3D = { center: [0, 0, 5], size: [1, 1, 1], rotation: IDENTITY };
  const b: OrientedBox3D = { center: [0.5, 0, 5], size: [1, 1, 1], rotation: IDENTITY };
  const [iou] = await kit.box3dIou([{ a, b }]);
  assert.ok(Math.abs(iou - 1 / 3) < 1e-12);
});

test("core errors surface as BridgeError with the variant name", async () => {
  // Three correspondences: the solver needs four.
  await assert.rejects(
    kit.solveEpnp([
      {
        points3d: float64View([3, 3], new Array(9).fill(0)),
        pixels: float64View([3, 2], new Array(6).fill(0)),
        camera: CAMERA,
      },
    ]),
    (err: unknown) => err instanceof BridgeError && err.variant === "Underdetermined",
  );
});

test("wrong-shaped map is rejected at the boundary", async () => {
  await assert.rejects(
    kit.liftToBox([
      {
        nocsCoords: float64View([4, 4], new Array(16).fill(0)), // not (H, W, 3)
        nocsValid: boolView([4, 4], new Array(16).fill(false)),
        mask: boolView([4, 4], new Array(16).fill(false)),
        size: [1, 1, 1],
        camera: CAMERA,
      },
    ]),
    RangeError,
  );
});

test("compute + lift round-trip recovers the box through the bindings", async () => {
  // Depth map of the front face of a unit cube 5 m out.
  const h = 64;
  const w = 64;
  const depth = new Float64Array(h * w);
  const mask = new Uint8Array(h * w);
  for (let row = 20; row < 44; row++) {
    for (let col = 20; col < 44; col++) {
      depth[row * w + col] = 4.5;
      mask[row * w + col] = 1;
    }
  }
  const box: OrientedBox3D = { center: [0, 0, 5], size: [2, 2, 2], rotation: IDENTITY };
  const [nocs] = await kit.computeNocsMap([
    {
      depth: view("float64", [h, w], depth),
      camera: CAMERA,
      box,
      mask: view("bool", [h, w], mask),
    },
  ]);
  assert.deepEqual(nocs.coords.shape, [h, w, 3]);

  const [lifted] = await kit.liftToBox([
    {
      nocsCoords: nocs.coords,
      nocsValid: nocs.valid,
      mask: view("bool", [h, w], mask),
      size: [2, 2, 2],
      camera: CAMERA,
      method: "epnp",
    },
  ]);
  assert.ok(Math.abs(lifted.box.center[2] - 5) < 1e-5);
  assert.equal(lifted.report.method, "epnp_lm");
});

test("umeyama alignment through the bindings", async () => {
  const src = float64View([4, 3], [0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1]);
  const shifted = float64View([4, 3], [1, 2, 3, 2, 2, 3, 1, 3, 3, 1, 2, 4]);
  const [result] = await kit.solveUmeyama([{ source: src, target: shifted }]);
  assert.deepEqual(result.translation, [1, 2, 3]);
  assert.equal(result.scale, 1);
});

test("localization metrics aggregate through the bindings", async () => {
  const box: OrientedBox3D = { center: [0, 0, 5], size: [1, 1, 1], rotation: IDENTITY };
  const result = await kit.localizationMetrics([
    { pred: box, gt: box, category: "car" },
  ]);
  assert.equal(result.mate, 0);
  assert.equal(result.miou3d, 1);
});
