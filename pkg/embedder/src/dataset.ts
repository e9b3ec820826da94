/** Toy image datasets on disk: a split manifest CSV plus raw float32
 * image files, loaded into balanced train/validation/test splits.
 *
 * Layout: `<root>/manifest.csv` with header `label,train,validation,test`,
 * and one `<root>/<label>/<name>.f32` file per image (little-endian
 * float32, size*size values in [0, 1]).  Files sort lexicographically and
 * fill the splits in manifest order: train first, then validation, then
 * test.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { Rng } from "./rng.js";

export interface SplitCounts {
  train: number;
  validation: number;
  test: number;
}

export interface Sample {
  id: string;
  label: string;
  labelIndex: number;
  image: Float32Array;
}

export interface SplitData {
  /** Unique samples, file order; exports iterate these. */
  samples: Sample[];
  /**
   * Training view: indices into `samples`, upsampled by duplication so
   * every class matches the split's largest class.  Identity for test.
   */
  upsampled: number[];
}

export interface Dataset {
  labels: string[];
  imageSize: number;
  train: SplitData;
  validation: SplitData;
  test: SplitData;
}

export function parseManifest(text: string, source = "manifest"): Map<string, SplitCounts> {
  const lines = text.split(/\r?\n/).filter((line) => line.length > 0);
  if (lines.length === 0) {
    throw new Error(`${source}: empty manifest`);
  }
  if (lines[0] !== "label,train,validation,test") {
    throw new Error(`${source}: malformed manifest header ${JSON.stringify(lines[0])}`);
  }
  const counts = new Map<string, SplitCounts>();
  for (const line of lines.slice(1)) {
    const fields = line.split(",");
    if (fields.length !== 4) {
      throw new Error(`${source}: malformed manifest row ${JSON.stringify(line)}`);
    }
    const [label, ...rest] = fields;
    if (counts.has(label)) {
      throw new Error(`${source}: duplicate class ${JSON.stringify(label)}`);
    }
    const numbers = rest.map((field) => Number(field));
    if (numbers.some((n) => !Number.isInteger(n) || n < 0)) {
      throw new Error(`${source}: bad counts for class ${JSON.stringify(label)}`);
    }
    counts.set(label, { train: numbers[0], validation: numbers[1], test: numbers[2] });
  }
  if (counts.size === 0) {
    throw new Error(`${source}: manifest lists no classes`);
  }
  return counts;
}

export function writeManifest(counts: Map<string, SplitCounts>, outPath: string): void {
  const lines = ["label,train,validation,test"];
  for (const [label, c] of counts) {
    lines.push(`${label},${c.train},${c.validation},${c.test}`);
  }
  fs.writeFileSync(outPath, lines.join("\n") + "\n");
}

/**
 * Load every split described by the manifest.
 *
 * Errors on a class with zero samples in any split, on missing image
 * files, and on inconsistent image sizes.  Upsampling duplicates
 * rng-chosen samples in train and validation only.
 */
export function prepareDataset(manifestPath: string, imageRoot: string, rng: Rng): Dataset {
  const counts = parseManifest(fs.readFileSync(manifestPath, "utf8"), manifestPath);
  const labels = [...counts.keys()];

  for (const [label, c] of counts) {
    for (const split of ["train", "validation", "test"] as const) {
      if (c[split] === 0) {
        throw new Error(`class ${JSON.stringify(label)} is absent from the ${split} split`);
      }
    }
  }

  let imageSize = 0;
  const splits = { train: [] as Sample[], validation: [] as Sample[], test: [] as Sample[] };
  labels.forEach((label, labelIndex) => {
    const dir = path.join(imageRoot, label);
    if (!fs.existsSync(dir)) {
      throw new Error(`missing image directory ${dir}`);
    }
    const files = fs.readdirSync(dir).filter((name) => name.endsWith(".f32")).sort();
    const c = counts.get(label)!;
    const needed = c.train + c.validation + c.test;
    if (files.length < needed) {
      throw new Error(
        `class ${JSON.stringify(label)} has ${files.length} images, manifest needs ${needed}`,
      );
    }
    files.slice(0, needed).forEach((name, i) => {
      const raw = fs.readFileSync(path.join(dir, name));
      if (raw.byteLength % 4 !== 0) {
        throw new Error(`${path.join(dir, name)}: length ${raw.byteLength} is not float32 data`);
      }
      const image = new Float32Array(raw.buffer, raw.byteOffset, raw.byteLength / 4);
      const size = Math.round(Math.sqrt(image.length));
      if (size * size !== image.length) {
        throw new Error(`${path.join(dir, name)}: not a square image (${image.length} values)`);
      }
      if (imageSize === 0) {
        imageSize = size;
      } else if (size !== imageSize) {
        throw new Error(`${path.join(dir, name)}: size ${size} != dataset size ${imageSize}`);
      }
      const sample: Sample = {
        id: `${label}_${name.replace(/\.f32$/, "")}`,
        label,
        labelIndex,
        image,
      };
      const split =
        i < c.train ? "train" : i < c.train + c.validation ? "validation" : "test";
      splits[split].push(sample);
    });
  });

  return {
    labels,
    imageSize,
    train: { samples: splits.train, upsampled: upsample(splits.train, rng) },
    validation: { samples: splits.validation, upsampled: upsample(splits.validation, rng) },
    test: { samples: splits.test, upsampled: splits.test.map((_, i) => i) },
  };
}

/** Indices with duplicates so every class reaches the largest class count. */
export function upsample(samples: Sample[], rng: Rng): number[] {
  const byLabel = new Map<string, number[]>();
  samples.forEach((sample, i) => {
    const group = byLabel.get(sample.label);
    if (group) {
      group.push(i);
    } else {
      byLabel.set(sample.label, [i]);
    }
  });
  const target = Math.max(...[...byLabel.values()].map((group) => group.length));
  const result = samples.map((_, i) => i);
  for (const group of byLabel.values()) {
    for (let extra = group.length; extra < target; extra++) {
      result.push(group[rng.int(group.length)]);
    }
  }
  return result;
}

const SHAPES = ["disk", "square", "cross", "ring"] as const;

export interface ShapeDatasetOptions {
  imageSize: number;
  counts: Map<string, SplitCounts>;
  noise: number;
  seed: number;
}

export function defaultShapeCounts(): Map<string, SplitCounts> {
  // deliberately unbalanced train/validation so upsampling has work to do
  return new Map([
    ["disk", { train: 40, validation: 12, test: 10 }],
    ["square", { train: 30, validation: 12, test: 10 }],
    ["cross", { train: 35, validation: 8, test: 10 }],
    ["ring", { train: 25, validation: 10, test: 10 }],
  ]);
}

/** Same split counts for every shape class. */
export function uniformShapeCounts(counts: SplitCounts): Map<string, SplitCounts> {
  return new Map(SHAPES.map((label) => [label, { ...counts }]));
}

/** Render the bundled geometric-shape classes into `<root>` plus a manifest. */
export function generateShapeDataset(root: string, options: ShapeDatasetOptions): void {
  const { imageSize, counts, noise, seed } = options;
  for (const label of counts.keys()) {
    if (!(SHAPES as readonly string[]).includes(label)) {
      throw new Error(`unknown shape class ${JSON.stringify(label)}`);
    }
  }
  const rng = new Rng(seed);
  fs.mkdirSync(root, { recursive: true });
  for (const [label, c] of counts) {
    const dir = path.join(root, label);
    fs.mkdirSync(dir, { recursive: true });
    const total = c.train + c.validation + c.test;
    for (let i = 0; i < total; i++) {
      const image = renderShape(label as (typeof SHAPES)[number], imageSize, noise, rng);
      const name = `img${String(i).padStart(4, "0")}.f32`;
      fs.writeFileSync(path.join(dir, name), Buffer.from(image.buffer));
    }
  }
  writeManifest(counts, path.join(root, "manifest.csv"));
}

function renderShape(
  shape: (typeof SHAPES)[number],
  size: number,
  noise: number,
  rng: Rng,
): Float32Array {
  const image = new Float32Array(size * size);
  const cx = size / 2 + (rng.next() - 0.5) * (size / 4);
  const cy = size / 2 + (rng.next() - 0.5) * (size / 4);
  const r = size * (0.25 + rng.next() * 0.1);
  const arm = Math.max(1.5, r * 0.28);
  // half the images are bright-on-dark, half dark-on-bright, so a class is
  // not a single pixel-space cluster and retrieval has to learn the merge
  const flipped = rng.next() < 0.5;
  const fg = flipped ? 0.1 : 0.85;
  const bg = flipped ? 0.85 : 0.1;
  for (let y = 0; y < size; y++) {
    for (let x = 0; x < size; x++) {
      const dx = x - cx;
      const dy = y - cy;
      let lit = false;
      switch (shape) {
        case "disk":
          lit = dx * dx + dy * dy <= r * r;
          break;
        case "square":
          lit = Math.abs(dx) <= r && Math.abs(dy) <= r;
          break;
        case "cross":
          lit = (Math.abs(dx) <= arm || Math.abs(dy) <= arm) &&
            Math.abs(dx) <= r * 1.5 && Math.abs(dy) <= r * 1.5;
          break;
        case "ring": {
          const d2 = dx * dx + dy * dy;
          lit = d2 <= r * r && d2 >= (r * 0.5) * (r * 0.5);
          break;
        }
      }
      const base = lit ? fg : bg;
      const value = base + noise * rng.normal();
      image[y * size + x] = Math.min(1, Math.max(0, value));
    }
  }
  return image;
}
