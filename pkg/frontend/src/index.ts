/**
 * Typed bindings for the nocskit core.
 *
 * Every function forwards a batch of items to a shared core subprocess
 * over its JSON-lines bridge and returns the parsed results; numeric
 * outputs are bit-identical to calling the core library directly, and
 * core failures surface as BridgeError with the originating error-variant
 * name. Create one Nocskit instance and reuse it: the subprocess spawn is
 * the expensive part, individual calls just stream lines.
 */

import { fromWire, isWireArray, toWire, type ArrayView } from "./arrays.js";
import { BridgeClient, BridgeError, type BridgeOptions } from "./bridge.js";
import type {
  BoxIouItem,
  ComputeNocsItem,
  EpnpItem,
  LiftItem,
  LiftResult,
  LocalizationPair,
  LocalizationResult,
  NocsMapResult,
  NocsQualityItem,
  NocsQualityResult,
  SolveReport,
  UmeyamaItem,
  UmeyamaResult,
} from "./types.js";

export { BridgeClient, BridgeError } from "./bridge.js";
export * from "./arrays.js";
export * from "./types.js";

function expectShape(a: ArrayView, dims: number, what: string): void {
  if (a.shape.length !== dims) {
    throw new RangeError(`${what} must have ${dims} dimensions, got [${a.shape.join(", ")}]`);
  }
}

export class Nocskit {
  private client: BridgeClient;

  constructor(options: BridgeOptions = {}) {
    this.client = new BridgeClient(options);
  }

  close(): void {
    this.client.close();
  }

  async version(): Promise<string> {
    const result = (await this.client.call("version", {})) as { version: string };
    return result.version;
  }

  /** Normalized-coordinate maps from depth + box + mask, batched. */
  async computeNocsMap(items: ComputeNocsItem[]): Promise<NocsMapResult[]> {
    const wireItems = items.map((item) => {
      expectShape(item.depth, 2, "depth");
      expectShape(item.mask, 2, "mask");
      return {
        depth: toWire(item.depth),
        camera: item.camera,
        box: item.box,
        mask: toWire(item.mask),
      };
    });
    const result = (await this.client.call("compute_nocs_map", {
      items: wireItems,
    })) as Array<{ coords: unknown; valid: unknown }>;
    return result.map((r) => ({
      coords: fromWire(r.coords as never),
      valid: fromWire(r.valid as never),
    }));
  }

  /** 9DoF boxes from coordinate maps, batched; see LiftItem for paths. */
  async liftToBox(items: LiftItem[]): Promise<LiftResult[]> {
    const wireItems = items.map((item) => {
      expectShape(item.nocsCoords, 3, "nocsCoords");
      expectShape(item.nocsValid, 2, "nocsValid");
      expectShape(item.mask, 2, "mask");
      return {
        nocs_coords: toWire(item.nocsCoords),
        nocs_valid: toWire(item.nocsValid),
        mask: toWire(item.mask),
        size: item.size,
        camera: item.camera,
        method: item.method ?? "epnp",
        head: item.head ?? null,
        depth: item.depth ? toWire(item.depth) : null,
        seed: item.seed ?? 0,
      };
    });
    return (await this.client.call("lift_to_box", { items: wireItems })) as LiftResult[];
  }

  async solveEpnp(items: EpnpItem[]): Promise<SolveReport[]> {
    const wireItems = items.map((item) => {
      expectShape(item.points3d, 2, "points3d");
      expectShape(item.pixels, 2, "pixels");
      return {
        points3d: toWire(item.points3d),
        pixels: toWire(item.pixels),
        camera: item.camera,
        refine: item.refine ?? true,
      };
    });
    return (await this.client.call("solve_epnp", { items: wireItems })) as SolveReport[];
  }

  async solveUmeyama(items: UmeyamaItem[]): Promise<UmeyamaResult[]> {
    const wireItems = items.map((item) => ({
      source: toWire(item.source),
      target: toWire(item.target),
      with_scale: item.withScale ?? false,
    }));
    return (await this.client.call("solve_umeyama", {
      items: wireItems,
    })) as UmeyamaResult[];
  }

  /** Per-instance map quality; null where the mask intersection is empty. */
  async nocsMaePsnr(items: NocsQualityItem[]): Promise<Array<NocsQualityResult | null>> {
    const wireItems = items.map((item) => ({
      pred_coords: toWire(item.predCoords),
      pred_valid: toWire(item.predValid),
      pred_mask: toWire(item.predMask),
      gt_coords: toWire(item.gtCoords),
      gt_valid: toWire(item.gtValid),
      gt_mask: toWire(item.gtMask),
    }));
    return (await this.client.call("nocs_mae_psnr", {
      items: wireItems,
    })) as Array<NocsQualityResult | null>;
  }

  async box3dIou(items: BoxIouItem[]): Promise<number[]> {
    const wireItems = items.map((item) => ({
      a: item.a,
      b: item.b,
      yaw_only: item.yawOnly ?? false,
    }));
    return (await this.client.call("box3d_iou", { items: wireItems })) as number[];
  }

  async localizationMetrics(pairs: LocalizationPair[]): Promise<LocalizationResult> {
    return (await this.client.call("localization_metrics", {
      pairs,
    })) as LocalizationResult;
  }

  /** Raw escape hatch used by the parity tests. */
  async rawCall(op: string, args: unknown): Promise<unknown> {
    return this.client.call(op, args);
  }
}

export { isWireArray };
