/** Triplet margin loss and within-batch triplet selection.
 *
 * Same-class pairs are pulled together and different-class pairs pushed
 * apart until negatives sit at least `margin` farther than positives:
 * mean(relu(d(a, p) - d(a, n) + margin)) with Euclidean d.
 */

import * as tf from "@tensorflow/tfjs";

import { MiningStrategy } from "./config.js";
import { Rng } from "./rng.js";

export interface Triplets {
  anchors: number[];
  positives: number[];
  negatives: number[];
}

/** Loss over fixed triplet indices into an embedding batch. */
export function tripletLoss(
  embeddings: tf.Tensor2D,
  triplets: Triplets,
  margin: number,
): tf.Scalar {
  return tf.tidy(() => {
    const a = tf.gather(embeddings, triplets.anchors);
    const p = tf.gather(embeddings, triplets.positives);
    const n = tf.gather(embeddings, triplets.negatives);
    const dap = euclidean(a, p);
    const dan = euclidean(a, n);
    return tf.mean(tf.relu(dap.sub(dan).add(margin))) as tf.Scalar;
  });
}

function euclidean(x: tf.Tensor2D, y: tf.Tensor2D): tf.Tensor1D {
  // the epsilon keeps the sqrt gradient finite when a pair coincides
  return tf.sqrt(tf.sum(tf.squaredDifference(x, y), 1).add(1e-12)) as tf.Tensor1D;
}

/**
 * Pick one triplet per eligible anchor in the batch.
 *
 * Random mining draws the positive and negative uniformly; hard mining
 * keeps the random positive but takes the nearest different-class sample
 * as the negative.  Anchors without a same-class partner or without any
 * different-class sample are skipped; an empty result is the caller's
 * signal that the batch cannot form triplets.
 */
export function buildTriplets(
  labels: number[],
  rng: Rng,
  mining: MiningStrategy,
  embeddings?: tf.Tensor2D,
): Triplets {
  const byLabel = new Map<number, number[]>();
  labels.forEach((label, i) => {
    const group = byLabel.get(label);
    if (group) {
      group.push(i);
    } else {
      byLabel.set(label, [i]);
    }
  });

  let nearest: number[] | null = null;
  if (mining === "hard") {
    if (!embeddings) {
      throw new Error("hard mining needs the batch embeddings");
    }
    nearest = nearestOtherClass(labels, embeddings);
  }

  const triplets: Triplets = { anchors: [], positives: [], negatives: [] };
  for (let i = 0; i < labels.length; i++) {
    const same = byLabel.get(labels[i])!;
    if (same.length < 2 || same.length === labels.length) {
      continue;
    }
    let positive = same[rng.int(same.length)];
    while (positive === i) {
      positive = same[rng.int(same.length)];
    }
    let negative: number;
    if (nearest) {
      negative = nearest[i];
    } else {
      negative = rng.int(labels.length);
      while (labels[negative] === labels[i]) {
        negative = rng.int(labels.length);
      }
    }
    triplets.anchors.push(i);
    triplets.positives.push(positive);
    triplets.negatives.push(negative);
  }
  return triplets;
}

/** Index of the closest sample with a different label, per row. */
function nearestOtherClass(labels: number[], embeddings: tf.Tensor2D): number[] {
  const dists = tf.tidy(() => {
    const sq = tf.sum(tf.square(embeddings), 1);
    const cross = tf.matMul(embeddings, embeddings, false, true);
    return sq.reshape([-1, 1]).add(sq.reshape([1, -1])).sub(cross.mul(2));
  });
  const flat = dists.dataSync();
  dists.dispose();
  const n = labels.length;
  const result = new Array<number>(n).fill(-1);
  for (let i = 0; i < n; i++) {
    let best = Infinity;
    for (let j = 0; j < n; j++) {
      if (labels[j] === labels[i]) {
        continue;
      }
      const d = flat[i * n + j];
      if (d < best) {
        best = d;
        result[i] = j;
      }
    }
  }
  return result;
}
