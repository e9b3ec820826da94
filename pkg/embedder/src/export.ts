/** Write model outputs as the interchange CSV: header `id,label,e0..e{L-1}`,
 * one row per image, components printed with JavaScript's shortest
 * round-trip formatting so a re-export of the same weights is
 * byte-identical.
 */

import * as fs from "node:fs";

import * as tf from "@tensorflow/tfjs";

import type { Sample } from "./dataset.js";
import { imagesToTensor } from "./model.js";

function csvField(text: string): string {
  return /[",\n\r]/.test(text) ? '"' + text.replace(/"/g, '""') + '"' : text;
}

/**
 * Run `model` over `samples` and write the CSV to `outPath`.  Every
 * component is checked against the sigmoid range; a value outside [0, 1]
 * or non-finite aborts with the offending row named.
 */
export function exportEmbeddings(
  model: tf.LayersModel,
  samples: Sample[],
  imageSize: number,
  outPath: string,
  batchSize = 64,
): number {
  if (samples.length === 0) {
    throw new Error("nothing to export: empty sample list");
  }
  const outputs: Float32Array[] = [];
  let width = 0;
  for (let start = 0; start < samples.length; start += batchSize) {
    const slice = samples.slice(start, start + batchSize);
    const xs = imagesToTensor(slice, imageSize);
    const ys = tf.tidy(() => model.predict(xs, { batchSize }) as tf.Tensor2D);
    xs.dispose();
    width = ys.shape[1];
    const values = ys.dataSync() as Float32Array;
    ys.dispose();
    for (let i = 0; i < slice.length; i++) {
      outputs.push(values.slice(i * width, (i + 1) * width));
    }
  }

  const header = ["id", "label"];
  for (let i = 0; i < width; i++) {
    header.push(`e${i}`);
  }
  const lines = [header.join(",")];
  samples.forEach((sample, row) => {
    const vector = outputs[row];
    for (const value of vector) {
      if (!Number.isFinite(value) || value < 0 || value > 1) {
        throw new Error(`embedding for ${sample.id} leaves [0, 1]: ${value}`);
      }
    }
    const fields = [csvField(sample.id), csvField(sample.label)];
    for (const value of vector) {
      fields.push(String(value));
    }
    lines.push(fields.join(","));
  });

  const tmp = outPath + ".tmp";
  fs.writeFileSync(tmp, lines.join("\n") + "\n");
  fs.renameSync(tmp, outPath);
  return samples.length;
}
