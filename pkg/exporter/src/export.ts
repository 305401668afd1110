/**
 * The export pipeline: run an encoder over a class-per-folder dataset
 * and class-name prompts, and write a feature-bank directory that the
 * spalign loader accepts unchanged.
 */

import { buildTestSet, collectClasses } from "./dataset.js";
import { makeEncoder } from "./encoder.js";
import { Manifest, normalizeRows, writeBank } from "./format.js";
import { loadPng } from "./image.js";

export const CLASS_PLACEHOLDER = "[class name]";
export const DEFAULT_TEMPLATE = `a photo of a ${CLASS_PLACEHOLDER}.`;

export interface ExportJob {
  model: string;
  datasetRoot: string;
  template: string;
  shots: number;
  /** Cap on total test rows; 0 keeps every held-out image. */
  testSize: number;
  outDir: string;
  /** Reserved for weights-backed encoders; toy backends ignore it. */
  device: string;
  seed: number;
}

export function runExport(job: ExportJob): Manifest {
  if (!job.template.includes(CLASS_PLACEHOLDER)) {
    throw new Error(`template must contain the placeholder '${CLASS_PLACEHOLDER}'`);
  }
  if (job.shots < 1) throw new Error(`shots must be >= 1, got ${job.shots}`);

  const encoder = makeEncoder(job.model);
  const [h, w] = encoder.grid;
  const dim = encoder.dim;
  const hw = h * w;

  const classes = collectClasses(job.datasetRoot, job.shots, job.seed);
  const n = classes.length;
  const k = job.shots;

  const trainGlobal = new Float64Array(n * k * dim);
  const trainLocal = new Float64Array(n * k * hw * dim);
  const text = new Float64Array(n * dim);

  classes.forEach((cls, i) => {
    text.set(encoder.encodeText(job.template.replace(CLASS_PLACEHOLDER, cls.name)), i * dim);
    cls.train.forEach((path, j) => {
      const feats = encoder.encodeImage(loadPng(path));
      trainGlobal.set(feats.global, (i * k + j) * dim);
      trainLocal.set(feats.local, (i * k + j) * hw * dim);
    });
  });

  const testSet = buildTestSet(classes, job.testSize);
  if (testSet.paths.length === 0) {
    throw new Error("no test images: every image was consumed by the shot split");
  }
  const testGlobal = new Float64Array(testSet.paths.length * dim);
  testSet.paths.forEach((path, m) => {
    testGlobal.set(encoder.encodeImage(loadPng(path)).global, m * dim);
  });

  // every feature row goes out unit-normalized, local cells included
  normalizeRows(trainGlobal, dim, "train_global");
  normalizeRows(trainLocal, dim, "train_local");
  normalizeRows(text, dim, "text");
  normalizeRows(testGlobal, dim, "test_global");

  return writeBank(
    job.outDir,
    dim,
    encoder.grid,
    k,
    {
      trainGlobal,
      trainLocal,
      text,
      testGlobal,
      testLabels: Int32Array.from(testSet.labels),
    },
    {
      generator: "spalign-exporter",
      model: encoder.id,
      template: job.template,
      dataset: job.datasetRoot,
      classes: classes.map((c) => c.name),
      seed: job.seed,
      device: job.device,
    },
  );
}
