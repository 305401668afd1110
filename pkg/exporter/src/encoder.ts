/**
 * Encoder backends. An encoder turns an image into a global feature plus
 * an h*w grid of local features (the feature map a real backbone exposes
 * before its pooling layer), and a prompt string into a text feature.
 *
 * The shipped "toy" backends are deterministic and fully offline: local
 * features are seeded random projections of per-cell color statistics,
 * so they depend on actual image content, come in the exact shapes a
 * real backbone would produce, and never require downloading weights. A
 * weights-backed CLIP encoder can be added behind this same interface;
 * for ResNet backbones the local grid is the pre-attention-pooling
 * feature map, while for ViT backbones the patch-token choice must be
 * documented by that backend.
 */

import { Image, STAT_DIM, cellRange, regionStats } from "./image.js";
import { gaussian, hash32, sfc32 } from "./rng.js";

export interface ImageFeatures {
  global: Float64Array; // [dim]
  local: Float64Array; // [h*w, dim] flat
}

export interface Encoder {
  readonly id: string;
  readonly dim: number;
  readonly grid: [number, number];
  encodeImage(img: Image): ImageFeatures;
  encodeText(prompt: string): Float64Array;
}

interface ToyProfile {
  dim: number;
  grid: [number, number];
}

/** "rn50" mirrors the shape constants of a ResNet-50 CLIP visual encoder. */
const TOY_PROFILES: Record<string, ToyProfile> = {
  "toy-small": { dim: 64, grid: [3, 3] },
  "toy-rn50": { dim: 1024, grid: [7, 7] },
};

export function availableModels(): string[] {
  return Object.keys(TOY_PROFILES);
}

function seededMatrix(seedText: string, rows: number, cols: number): Float64Array {
  const draw = gaussian(sfc32(hash32(seedText)));
  const out = new Float64Array(rows * cols);
  for (let i = 0; i < out.length; i++) out[i] = draw();
  return out;
}

class ToyEncoder implements Encoder {
  readonly id: string;
  readonly dim: number;
  readonly grid: [number, number];
  private readonly localProj: Float64Array; // [dim, STAT_DIM]
  private readonly globalProj: Float64Array; // [dim, STAT_DIM]

  constructor(id: string, profile: ToyProfile) {
    this.id = id;
    this.dim = profile.dim;
    this.grid = profile.grid;
    this.localProj = seededMatrix(`${id}:local`, profile.dim, STAT_DIM);
    this.globalProj = seededMatrix(`${id}:global`, profile.dim, STAT_DIM);
  }

  private project(matrix: Float64Array, stats: Float64Array): Float64Array {
    const out = new Float64Array(this.dim);
    for (let i = 0; i < this.dim; i++) {
      let acc = 0;
      for (let k = 0; k < STAT_DIM; k++) acc += matrix[i * STAT_DIM + k] * stats[k];
      out[i] = acc;
    }
    return out;
  }

  encodeImage(img: Image): ImageFeatures {
    const [h, w] = this.grid;
    if (img.width < w || img.height < h) {
      throw new Error(
        `image ${img.width}x${img.height} smaller than the ${h}x${w} feature grid`,
      );
    }
    const local = new Float64Array(h * w * this.dim);
    for (let gy = 0; gy < h; gy++) {
      const [y0, y1] = cellRange(gy, h, img.height);
      for (let gx = 0; gx < w; gx++) {
        const [x0, x1] = cellRange(gx, w, img.width);
        const cell = this.project(this.localProj, regionStats(img, x0, y0, x1, y1));
        local.set(cell, (gy * w + gx) * this.dim);
      }
    }
    const global = this.project(
      this.globalProj,
      regionStats(img, 0, 0, img.width, img.height),
    );
    return { global, local };
  }

  encodeText(prompt: string): Float64Array {
    const draw = gaussian(sfc32(hash32(`${this.id}:text:${prompt}`)));
    const out = new Float64Array(this.dim);
    for (let i = 0; i < this.dim; i++) out[i] = draw();
    return out;
  }
}

export function makeEncoder(model: string): Encoder {
  const profile = TOY_PROFILES[model];
  if (!profile) {
    throw new Error(
      `unknown model '${model}'; available: ${availableModels().join(", ")}`,
    );
  }
  return new ToyEncoder(model, profile);
}
