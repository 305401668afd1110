/**
 * The feature-bank on-disk format consumed by the spalign loader:
 * a manifest.json next to raw little-endian binary tensors (float32 for
 * features, int32 for labels), row-major, no header.
 */

import { mkdirSync, writeFileSync } from "node:fs";
import { join } from "node:path";

export interface TensorEntry {
  file: string;
  shape: number[];
  dtype: "float32" | "int32";
}

export interface Manifest {
  version: 1;
  dim: number;
  grid: [number, number];
  num_classes: number;
  shots: number;
  num_test: number;
  tensors: Record<string, TensorEntry>;
  meta: Record<string, unknown>;
}

export function floatTensorBytes(values: Float64Array, shape: number[]): Buffer {
  const count = shape.reduce((a, b) => a * b, 1);
  if (values.length !== count) {
    throw new Error(`tensor has ${values.length} values, shape ${shape} needs ${count}`);
  }
  const buf = Buffer.alloc(count * 4);
  for (let i = 0; i < count; i++) buf.writeFloatLE(values[i], i * 4);
  return buf;
}

export function intTensorBytes(values: Int32Array, shape: number[]): Buffer {
  const count = shape.reduce((a, b) => a * b, 1);
  if (values.length !== count) {
    throw new Error(`tensor has ${values.length} values, shape ${shape} needs ${count}`);
  }
  const buf = Buffer.alloc(count * 4);
  for (let i = 0; i < count; i++) buf.writeInt32LE(values[i], i * 4);
  return buf;
}

/**
 * Scale every row of a flat [rows, dim] tensor to unit L2 norm, in place.
 * Zero rows are an error: the downstream loader rejects them anyway, and
 * a zero feature always indicates an encoder bug.
 */
export function normalizeRows(values: Float64Array, dim: number, context: string): void {
  for (let row = 0; row * dim < values.length; row++) {
    let sq = 0;
    for (let k = 0; k < dim; k++) sq += values[row * dim + k] ** 2;
    const norm = Math.sqrt(sq);
    if (norm < 1e-9) throw new Error(`${context}: row ${row} has zero norm`);
    for (let k = 0; k < dim; k++) values[row * dim + k] /= norm;
  }
}

export interface BankTensors {
  trainGlobal: Float64Array; // [N, K, d]
  trainLocal: Float64Array; // [N, K, h*w, d]
  text: Float64Array; // [N, d]
  testGlobal: Float64Array; // [M, d]
  testLabels: Int32Array; // [M]
}

export function writeBank(
  outDir: string,
  dim: number,
  grid: [number, number],
  shots: number,
  tensors: BankTensors,
  meta: Record<string, unknown>,
): Manifest {
  const numClasses = tensors.text.length / dim;
  const numTest = tensors.testLabels.length;
  const hw = grid[0] * grid[1];
  const shapes: Record<string, { shape: number[]; dtype: "float32" | "int32" }> = {
    train_global: { shape: [numClasses, shots, dim], dtype: "float32" },
    train_local: { shape: [numClasses, shots, hw, dim], dtype: "float32" },
    text: { shape: [numClasses, dim], dtype: "float32" },
    test_global: { shape: [numTest, dim], dtype: "float32" },
    test_labels: { shape: [numTest], dtype: "int32" },
  };
  const manifest: Manifest = {
    version: 1,
    dim,
    grid,
    num_classes: numClasses,
    shots,
    num_test: numTest,
    tensors: Object.fromEntries(
      Object.entries(shapes).map(([name, info]) => [
        name,
        { file: `${name}.bin`, shape: info.shape, dtype: info.dtype },
      ]),
    ),
    meta,
  };

  mkdirSync(outDir, { recursive: true });
  const payload: Record<string, Buffer> = {
    train_global: floatTensorBytes(tensors.trainGlobal, shapes.train_global.shape),
    train_local: floatTensorBytes(tensors.trainLocal, shapes.train_local.shape),
    text: floatTensorBytes(tensors.text, shapes.text.shape),
    test_global: floatTensorBytes(tensors.testGlobal, shapes.test_global.shape),
    test_labels: intTensorBytes(tensors.testLabels, shapes.test_labels.shape),
  };
  for (const [name, bytes] of Object.entries(payload)) {
    writeFileSync(join(outDir, `${name}.bin`), bytes);
  }
  writeFileSync(join(outDir, "manifest.json"), JSON.stringify(manifest, null, 2) + "\n");
  return manifest;
}
