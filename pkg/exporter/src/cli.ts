#!/usr/bin/env node
/** Command-line front end mirroring the ExportJob fields. */

import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { availableModels } from "./encoder.js";
import { DEFAULT_TEMPLATE, runExport } from "./export.js";

const argv = yargs(hideBin(process.argv))
  .scriptName("spalign-export")
  .usage("$0 --dataset <dir> --out <dir> [options]")
  .option("dataset", {
    type: "string",
    demandOption: true,
    describe: "Class-per-folder image root (optionally with train/ and val/ splits)",
  })
  .option("out", { type: "string", demandOption: true, describe: "Output bank directory" })
  .option("model", {
    type: "string",
    default: "toy-small",
    choices: availableModels(),
    describe: "Encoder backend (toy-rn50 mirrors RN50 shape constants: d=1024, 7x7 grid)",
  })
  .option("template", {
    type: "string",
    default: DEFAULT_TEMPLATE,
    describe: "Prompt template containing the literal placeholder [class name]",
  })
  .option("shots", { type: "number", default: 1, describe: "Training images per class" })
  .option("test-size", {
    type: "number",
    default: 0,
    describe: "Cap on total test rows (0 = keep all held-out images)",
  })
  .option("device", { type: "string", default: "cpu" })
  .option("seed", { type: "number", default: 0 })
  .strict()
  .parseSync();

try {
  const manifest = runExport({
    model: argv.model,
    datasetRoot: argv.dataset,
    template: argv.template,
    shots: argv.shots,
    testSize: argv["test-size"],
    outDir: argv.out,
    device: argv.device,
    seed: argv.seed,
  });
  console.log(
    `wrote bank to ${argv.out}: ${manifest.num_classes} classes x ` +
      `${manifest.shots} shots, dim ${manifest.dim}, grid ` +
      `${manifest.grid[0]}x${manifest.grid[1]}, ${manifest.num_test} test rows`,
  );
} catch (err) {
  console.error(`error: ${err instanceof Error ? err.message : err}`);
  process.exit(1);
}
