/** Convolutional backbone plus the two heads hung off it: a softmax
 * classifier used only to pretrain the backbone, and the sigmoid hash
 * head whose outputs land in (0, 1) per unit.
 */

import * as tf from "@tensorflow/tfjs";

import type { Sample, SplitData } from "./dataset.js";
import { Rng } from "./rng.js";

export function buildBackbone(imageSize: number, seed: number): tf.LayersModel {
  const model = tf.sequential({ name: "backbone" });
  model.add(
    tf.layers.conv2d({
      inputShape: [imageSize, imageSize, 1],
      filters: 8,
      kernelSize: 3,
      padding: "same",
      activation: "relu",
      kernelInitializer: tf.initializers.glorotUniform({ seed: seed }),
    }),
  );
  model.add(tf.layers.maxPooling2d({ poolSize: 2 }));
  model.add(
    tf.layers.conv2d({
      filters: 16,
      kernelSize: 3,
      padding: "same",
      activation: "relu",
      kernelInitializer: tf.initializers.glorotUniform({ seed: seed + 1 }),
    }),
  );
  model.add(tf.layers.maxPooling2d({ poolSize: 2 }));
  model.add(
    tf.layers.conv2d({
      filters: 32,
      kernelSize: 3,
      padding: "same",
      activation: "relu",
      kernelInitializer: tf.initializers.glorotUniform({ seed: seed + 2 }),
    }),
  );
  model.add(tf.layers.globalAveragePooling2d({}));
  model.add(
    tf.layers.dense({
      units: 32,
      activation: "relu",
      kernelInitializer: tf.initializers.glorotUniform({ seed: seed + 3 }),
    }),
  );
  return model;
}

/** Backbone with a sigmoid dense head of `hashLength` units. */
export function buildHashModel(
  backbone: tf.LayersModel,
  hashLength: number,
  seed: number,
): tf.LayersModel {
  const model = tf.sequential({ name: "hash" });
  model.add(backbone);
  model.add(
    tf.layers.dense({
      units: hashLength,
      activation: "sigmoid",
      name: "hash_head",
      kernelInitializer: tf.initializers.glorotUniform({ seed: seed + 100 }),
    }),
  );
  return model;
}

export function setTrainable(model: tf.LayersModel, flag: boolean): void {
  model.trainable = flag;
  for (const layer of model.layers) {
    layer.trainable = flag;
    if (layer instanceof tf.LayersModel) {
      setTrainable(layer, flag);
    }
  }
}

/** Stack sample images into a [n, size, size, 1] float tensor. */
export function imagesToTensor(samples: Sample[], imageSize: number): tf.Tensor4D {
  const n = samples.length;
  const flat = new Float32Array(n * imageSize * imageSize);
  samples.forEach((sample, i) => {
    flat.set(sample.image, i * imageSize * imageSize);
  });
  return tf.tensor4d(flat, [n, imageSize, imageSize, 1]);
}

export interface PretrainOptions {
  epochs: number;
  batchSize: number;
  learningRate: number;
}

/**
 * Train the backbone as a plain softmax classifier on the train split.
 * Mutates the backbone weights in place and returns per-epoch losses.
 *
 * Shuffling goes through the seeded generator, not tf's Math.random,
 * so reruns with the same seed produce identical weights.
 */
export async function pretrainBackbone(
  backbone: tf.LayersModel,
  train: SplitData,
  numClasses: number,
  imageSize: number,
  seed: number,
  options: PretrainOptions,
): Promise<number[]> {
  const classifier = tf.sequential({ name: "pretrain" });
  classifier.add(backbone);
  classifier.add(
    tf.layers.dense({
      units: numClasses,
      activation: "softmax",
      kernelInitializer: tf.initializers.glorotUniform({ seed: seed + 200 }),
    }),
  );
  classifier.compile({
    optimizer: tf.train.adam(options.learningRate),
    loss: "sparseCategoricalCrossentropy",
  });

  const rng = new Rng(seed + 300);
  const losses: number[] = [];
  for (let epoch = 0; epoch < options.epochs; epoch++) {
    const order = rng.shuffle(train.upsampled.map((i) => i));
    const samples = order.map((i) => train.samples[i]);
    const xs = imagesToTensor(samples, imageSize);
    const ys = tf.tensor1d(samples.map((sample) => sample.labelIndex), "float32");
    try {
      const history = await classifier.fit(xs, ys, {
        epochs: 1,
        batchSize: options.batchSize,
        shuffle: false,
        verbose: 0,
      });
      losses.push(Number(history.history.loss[0]));
    } finally {
      xs.dispose();
      ys.dispose();
    }
  }
  return losses;
}
