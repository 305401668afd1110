/**
 * PNG loading and grid-cell color statistics. The exporter consumes PNG
 * image folders only; decoding other formats is out of scope.
 */

import { readFileSync } from "node:fs";
import { PNG } from "pngjs";

export interface Image {
  width: number;
  height: number;
  /** RGBA bytes, row-major. */
  data: Buffer;
}

export function loadPng(path: string): Image {
  const png = PNG.sync.read(readFileSync(path));
  return { width: png.width, height: png.height, data: png.data };
}

/** Number of statistics per region; the encoder projects these to dim. */
export const STAT_DIM = 12;

/**
 * Color statistics of a pixel region: channel means and standard
 * deviations, channel products, luma and its square, and a constant term
 * (in [0,1] units throughout).
 */
export function regionStats(
  img: Image,
  x0: number,
  y0: number,
  x1: number,
  y1: number,
): Float64Array {
  let n = 0;
  let sr = 0, sg = 0, sb = 0;
  let srr = 0, sgg = 0, sbb = 0;
  for (let y = y0; y < y1; y++) {
    for (let x = x0; x < x1; x++) {
      const at = (y * img.width + x) * 4;
      const r = img.data[at] / 255;
      const g = img.data[at + 1] / 255;
      const b = img.data[at + 2] / 255;
      sr += r; sg += g; sb += b;
      srr += r * r; sgg += g * g; sbb += b * b;
      n++;
    }
  }
  if (n === 0) throw new Error(`empty region ${x0},${y0}..${x1},${y1}`);
  const mr = sr / n, mg = sg / n, mb = sb / n;
  const vr = Math.max(srr / n - mr * mr, 0);
  const vg = Math.max(sgg / n - mg * mg, 0);
  const vb = Math.max(sbb / n - mb * mb, 0);
  const luma = 0.299 * mr + 0.587 * mg + 0.114 * mb;
  return Float64Array.from([
    mr, mg, mb,
    Math.sqrt(vr), Math.sqrt(vg), Math.sqrt(vb),
    mr * mg, mg * mb, mb * mr,
    luma, luma * luma, 1.0,
  ]);
}

/** Cell boundary for index i of n over an axis of given length. */
export function cellRange(i: number, n: number, length: number): [number, number] {
  const lo = Math.floor((i * length) / n);
  const hi = Math.max(Math.floor(((i + 1) * length) / n), lo + 1);
  return [lo, Math.min(hi, length)];
}
