/**
 * Array views crossing the bridge boundary.
 *
 * An ArrayView pairs a shape with a contiguous typed-array buffer. Inside
 * the process it is zero-copy (the view references the caller's buffer);
 * crossing the bridge serializes the raw little-endian bytes as base64,
 * which round-trips float64 values bit-exactly.
 */

import { Buffer } from "node:buffer";
import { endianness } from "node:os";

if (endianness() !== "LE") {
  throw new Error("nocskit-bindings requires a little-endian host");
}

export type Dtype = "float64" | "float32" | "uint16" | "uint8" | "int64" | "int32" | "bool";

export type BackingArray =
  | Float64Array
  | Float32Array
  | Uint16Array
  | Uint8Array
  | BigInt64Array
  | Int32Array;

export interface ArrayView {
  dtype: Dtype;
  shape: ReadonlyArray<number>;
  data: BackingArray;
}

export interface WireArray {
  __array__: {
    dtype: Dtype;
    shape: number[];
    data: string;
  };
}

const CONSTRUCTORS: Record<Dtype, new (buffer: ArrayBuffer) => BackingArray> = {
  float64: Float64Array,
  float32: Float32Array,
  uint16: Uint16Array,
  uint8: Uint8Array,
  bool: Uint8Array,
  int64: BigInt64Array,
  int32: Int32Array,
};

export function elementCount(shape: ReadonlyArray<number>): number {
  return shape.reduce((a, b) => a * b, 1);
}

/** Wrap an existing typed array without copying. Shape must match length. */
export function view(
  dtype: Dtype,
  shape: ReadonlyArray<number>,
  data: BackingArray,
): ArrayView {
  if (elementCount(shape) !== data.length) {
    throw new RangeError(
      `shape [${shape.join(", ")}] needs ${elementCount(shape)} elements, ` +
        `buffer has ${data.length}`,
    );
  }
  return { dtype, shape, data };
}

export function float64View(shape: ReadonlyArray<number>, values: Iterable<number>): ArrayView {
  return view("float64", shape, Float64Array.from(values));
}

export function boolView(shape: ReadonlyArray<number>, values: Iterable<boolean>): ArrayView {
  return view("bool", shape, Uint8Array.from(Array.from(values, (v) => (v ? 1 : 0))));
}

export function toWire(a: ArrayView): WireArray {
  const bytes = Buffer.from(a.data.buffer, a.data.byteOffset, a.data.byteLength);
  return {
    __array__: {
      dtype: a.dtype,
      shape: [...a.shape],
      data: bytes.toString("base64"),
    },
  };
}

export function fromWire(wire: WireArray): ArrayView {
  const spec = wire.__array__;
  if (!spec || !(spec.dtype in CONSTRUCTORS)) {
    throw new TypeError(`not a wire array: ${JSON.stringify(wire).slice(0, 80)}`);
  }
  const raw = Buffer.from(spec.data, "base64");
  // Copy into a fresh ArrayBuffer so the typed view is aligned and owned.
  const owned = new ArrayBuffer(raw.byteLength);
  new Uint8Array(owned).set(raw);
  const data = new CONSTRUCTORS[spec.dtype](owned);
  if (elementCount(spec.shape) !== data.length) {
    throw new RangeError(
      `wire array shape [${spec.shape.join(", ")}] disagrees with payload ` +
        `of ${data.length} elements`,
    );
  }
  return { dtype: spec.dtype, shape: spec.shape, data };
}

export function isWireArray(value: unknown): value is WireArray {
  return (
    typeof value === "object" &&
    value !== null &&
    "__array__" in (value as Record<string, unknown>)
  );
}
