/**
 * Class-per-folder dataset handling.
 *
 * Two layouts are supported:
 *   root/<class>/*.png                        - seeded per-class holdout
 *   root/train/<class>/*.png + root/val/...   - official validation split
 *
 * Class order is the sorted folder name order; image order within a
 * class is sorted file name order, shuffled with the job seed before the
 * shot/test split so a prefix of a sorted directory is not privileged.
 */

import { readdirSync, statSync } from "node:fs";
import { join } from "node:path";

import { hash32, sfc32, shuffle } from "./rng.js";

export interface ClassSplit {
  name: string;
  train: string[]; // exactly `shots` image paths
  test: string[];
}

function listDirs(root: string): string[] {
  return readdirSync(root)
    .filter((entry) => statSync(join(root, entry)).isDirectory())
    .sort();
}

function listPngs(dir: string): string[] {
  return readdirSync(dir)
    .filter((entry) => entry.toLowerCase().endsWith(".png"))
    .sort()
    .map((entry) => join(dir, entry));
}

export function collectClasses(root: string, shots: number, seed: number): ClassSplit[] {
  const entries = listDirs(root);
  if (entries.length === 0) {
    throw new Error(`no class folders under ${root}`);
  }
  const hasOfficialSplit = entries.includes("train") && entries.includes("val");

  if (hasOfficialSplit) {
    const classes = listDirs(join(root, "train"));
    if (classes.length < 2) throw new Error("need at least 2 classes");
    return classes.map((name) => {
      const trainImages = shuffle(
        listPngs(join(root, "train", name)),
        sfc32(seed ^ hash32(`train:${name}`)),
      );
      if (trainImages.length < shots) {
        throw new Error(
          `class '${name}' has ${trainImages.length} training images, need ${shots}`,
        );
      }
      let test: string[] = [];
      try {
        test = listPngs(join(root, "val", name));
      } catch {
        test = []; // class absent from the validation split
      }
      return { name, train: trainImages.slice(0, shots), test };
    });
  }

  if (entries.length < 2) throw new Error("need at least 2 classes");
  return entries.map((name) => {
    const images = shuffle(
      listPngs(join(root, name)),
      sfc32(seed ^ hash32(`class:${name}`)),
    );
    if (images.length < shots) {
      throw new Error(`class '${name}' has ${images.length} images, need ${shots}`);
    }
    return { name, train: images.slice(0, shots), test: images.slice(shots) };
  });
}

/**
 * Interleave per-class test images round-robin (balanced truncation) and
 * cap the total at `limit` when it is positive.
 */
export function buildTestSet(
  classes: ClassSplit[],
  limit: number,
): { paths: string[]; labels: number[] } {
  const paths: string[] = [];
  const labels: number[] = [];
  const cursors = classes.map(() => 0);
  let remaining = classes.reduce((acc, c) => acc + c.test.length, 0);
  if (limit > 0) remaining = Math.min(remaining, limit);
  while (remaining > 0) {
    for (let i = 0; i < classes.length && remaining > 0; i++) {
      if (cursors[i] < classes[i].test.length) {
        paths.push(classes[i].test[cursors[i]]);
        labels.push(i);
        cursors[i]++;
        remaining--;
      }
    }
  }
  return { paths, labels };
}
