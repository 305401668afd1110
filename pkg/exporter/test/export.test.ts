import { mkdtempSync, readFileSync, readdirSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterEach, describe, expect, it } from "vitest";

import { DEFAULT_TEMPLATE, ExportJob, runExport } from "../src/export";
import { Manifest } from "../src/format";
import { makeToyDataset } from "./helpers";

const scratch: string[] = [];

function tempDir(): string {
  const dir = mkdtempSync(join(tmpdir(), "exporter-e2e-"));
  scratch.push(dir);
  return dir;
}

afterEach(() => {
  while (scratch.length) rmSync(scratch.pop()!, { recursive: true, force: true });
});

function makeJob(overrides: Partial<ExportJob> = {}): ExportJob {
  const dataset = tempDir();
  makeToyDataset(dataset, { imagesPerClass: 3 });
  return {
    model: "toy-small",
    datasetRoot: dataset,
    template: DEFAULT_TEMPLATE,
    shots: 1,
    testSize: 0,
    outDir: join(tempDir(), "bank"),
    device: "cpu",
    seed: 0,
    ...overrides,
  };
}

function readManifest(dir: string): Manifest {
  return JSON.parse(readFileSync(join(dir, "manifest.json"), "utf-8"));
}

function rows(dir: string, manifest: Manifest, name: string): Float64Array[] {
  const entry = manifest.tensors[name];
  const raw = readFileSync(join(dir, entry.file));
  const dim = entry.shape[entry.shape.length - 1];
  const count = raw.length / 4 / dim;
  const out: Float64Array[] = [];
  for (let r = 0; r < count; r++) {
    const row = new Float64Array(dim);
    for (let k = 0; k < dim; k++) row[k] = raw.readFloatLE((r * dim + k) * 4);
    out.push(row);
  }
  return out;
}

describe("runExport", () => {
  it("writes a conforming bank for a 2-class 1-shot toy folder", () => {
    const job = makeJob();
    const manifest = runExport(job);

    expect(manifest.version).toBe(1);
    expect(manifest.num_classes).toBe(2);
    expect(manifest.shots).toBe(1);
    expect(manifest.dim).toBe(64);
    expect(manifest.grid).toEqual([3, 3]);
    expect(manifest.num_test).toBe(4); // 2 held-out images per class
    expect(manifest.meta.model).toBe("toy-small");
    expect(manifest.meta.template).toBe(DEFAULT_TEMPLATE);

    // file sizes match shape * 4 bytes exactly
    for (const entry of Object.values(manifest.tensors)) {
      const size = readFileSync(join(job.outDir, entry.file)).length;
      expect(size).toBe(entry.shape.reduce((a, b) => a * b, 1) * 4);
    }

    // every feature row is unit-normalized, local cells included
    for (const name of ["train_global", "train_local", "text", "test_global"]) {
      for (const row of rows(job.outDir, manifest, name)) {
        const norm = Math.hypot(...row);
        expect(Math.abs(norm - 1)).toBeLessThan(1e-6);
      }
    }

    // labels are in range and cover both classes
    const labelBytes = readFileSync(join(job.outDir, "test_labels.bin"));
    const labels = Array.from({ length: manifest.num_test }, (_, i) =>
      labelBytes.readInt32LE(i * 4),
    );
    expect(new Set(labels)).toEqual(new Set([0, 1]));
  });

  it("re-export with the same inputs is byte-identical", () => {
    const job = makeJob();
    runExport(job);
    const again = { ...job, outDir: join(tempDir(), "bank2") };
    runExport(again);
    for (const name of readdirSync(job.outDir).sort()) {
      expect(readFileSync(join(again.outDir, name))).toEqual(
        readFileSync(join(job.outDir, name)),
      );
    }
  });

  it("rn50-class backbone reports d=1024 and a 7x7 grid", () => {
    const job = makeJob({ model: "toy-rn50", testSize: 2 });
    const manifest = runExport(job);
    expect(manifest.dim).toBe(1024);
    expect(manifest.grid).toEqual([7, 7]);
    expect(manifest.tensors.train_local.shape).toEqual([2, 1, 49, 1024]);
  });

  it("caps the test split size", () => {
    const manifest = runExport(makeJob({ testSize: 3 }));
    expect(manifest.num_test).toBe(3);
  });

  it("rejects templates without the class placeholder", () => {
    expect(() => runExport(makeJob({ template: "a photo" }))).toThrow(/placeholder/);
  });

  it("rejects shot counts the dataset cannot satisfy", () => {
    expect(() => runExport(makeJob({ shots: 9 }))).toThrow(/has 3 images, need 9/);
  });

  it("rejects datasets where every image is used for shots", () => {
    expect(() => runExport(makeJob({ shots: 3 }))).toThrow(/no test images/);
  });
});
