import { mkdirSync, writeFileSync } from "node:fs";
import { join } from "node:path";
import { PNG } from "pngjs";

/** Write a small PNG with a class-dependent pattern. */
export function writePattern(
  path: string,
  size: number,
  base: [number, number, number],
  phase: number,
): void {
  const png = new PNG({ width: size, height: size });
  for (let y = 0; y < size; y++) {
    for (let x = 0; x < size; x++) {
      const at = (y * size + x) * 4;
      const wave = Math.sin((x + phase) * 0.7) * Math.cos((y - phase) * 0.5);
      png.data[at] = Math.max(0, Math.min(255, base[0] + 80 * wave));
      png.data[at + 1] = Math.max(0, Math.min(255, base[1] - 60 * wave));
      png.data[at + 2] = Math.max(0, Math.min(255, base[2] + 40 * wave * wave));
      png.data[at + 3] = 255;
    }
  }
  writeFileSync(path, PNG.sync.write(png));
}

export interface ToyDatasetOptions {
  classes?: string[];
  imagesPerClass?: number;
  size?: number;
}

/** Class-per-folder toy dataset with deterministic synthetic images. */
export function makeToyDataset(root: string, opts: ToyDatasetOptions = {}): string[] {
  const classes = opts.classes ?? ["cat", "dog"];
  const count = opts.imagesPerClass ?? 3;
  const size = opts.size ?? 24;
  classes.forEach((name, ci) => {
    const dir = join(root, name);
    mkdirSync(dir, { recursive: true });
    const base: [number, number, number] = [
      60 + 90 * ci,
      200 - 70 * ci,
      40 + 50 * ci,
    ];
    for (let i = 0; i < count; i++) {
      writePattern(join(dir, `img${i}.png`), size, base, ci * 10 + i);
    }
  });
  return classes;
}
