/** Two-stage fine-tuning of the hash model under triplet margin loss.
 *
 * Stage 1 freezes the backbone and trains the head alone; since the
 * features cannot move, they are computed once up front and the per-step
 * forward pass touches only the head.  Stage 2 unfreezes everything and
 * runs a fixed number of optimizer steps through the full network.  Both
 * stages ride a triangular learning rate (one cycle per stage, peak
 * lrMax) and apply decoupled weight decay after every step.
 */

import * as tf from "@tensorflow/tfjs";

import { TrainConfig, cyclicalLr } from "./config.js";
import type { Sample, SplitData } from "./dataset.js";
import { buildTriplets, tripletLoss } from "./loss.js";
import { imagesToTensor, setTrainable } from "./model.js";
import { Rng } from "./rng.js";

export interface TrainLog {
  /** Loss per optimizer step, head-only stage. */
  stage1: number[];
  /** Loss per optimizer step, full-network stage. */
  stage2: number[];
}

/**
 * Draws class-balanced batches from the upsampled training view.  Each
 * class keeps its own shuffled pool and cursor, reshuffling on wrap, so
 * every batch holds several samples of several classes and triplet
 * selection never starves.
 */
export class StratifiedSampler {
  private pools: number[][];
  private cursors: number[];
  private rotation = 0;

  constructor(
    private samples: Sample[],
    upsampled: number[],
    private batchSize: number,
    private rng: Rng,
  ) {
    const byClass = new Map<number, number[]>();
    for (const i of upsampled) {
      const key = samples[i].labelIndex;
      const pool = byClass.get(key);
      if (pool) {
        pool.push(i);
      } else {
        byClass.set(key, [i]);
      }
    }
    if (byClass.size < 2) {
      throw new Error("training requires at least two classes");
    }
    const keys = [...byClass.keys()].sort((a, b) => a - b);
    this.pools = keys.map((k) => this.rng.shuffle(byClass.get(k)!));
    this.cursors = keys.map(() => 0);
  }

  /** Sample indices for one batch (into the samples array). */
  nextBatch(): number[] {
    const nClasses = this.pools.length;
    const base = Math.floor(this.batchSize / nClasses);
    const extra = this.batchSize % nClasses;
    const batch: number[] = [];
    for (let c = 0; c < nClasses; c++) {
      // rotate which classes absorb the remainder so none is starved
      const want = base + ((c + this.rotation) % nClasses < extra ? 1 : 0);
      for (let j = 0; j < want; j++) {
        batch.push(this.draw(c));
      }
    }
    this.rotation = (this.rotation + extra) % nClasses;
    return batch;
  }

  private draw(c: number): number {
    if (this.cursors[c] >= this.pools[c].length) {
      this.rng.shuffle(this.pools[c]);
      this.cursors[c] = 0;
    }
    return this.pools[c][this.cursors[c]++];
  }
}

export function movingAverage(values: number[], window: number): number[] {
  if (window < 1 || values.length < window) {
    return [];
  }
  const out: number[] = [];
  let sum = 0;
  for (let i = 0; i < values.length; i++) {
    sum += values[i];
    if (i >= window) {
      sum -= values[i - window];
    }
    if (i >= window - 1) {
      out.push(sum / window);
    }
  }
  return out;
}

function guardFinite(loss: number, stage: string, step: number): void {
  if (!Number.isFinite(loss)) {
    throw new Error(`training diverged: ${stage} loss is ${loss} at step ${step}`);
  }
}

// Both fields exist at runtime but the typings mark them protected.
function variablesOf(layer: { trainableWeights: unknown[] }): tf.Variable[] {
  return layer.trainableWeights.map((w) => (w as { val: tf.Variable }).val);
}

function setLearningRate(optimizer: tf.Optimizer, lr: number): void {
  (optimizer as unknown as { learningRate: number }).learningRate = lr;
}

function decay(vars: tf.Variable[], factor: number): void {
  if (factor <= 0) {
    return;
  }
  for (const v of vars) {
    tf.tidy(() => {
      v.assign(v.mul(1 - factor));
    });
  }
}

export type StepCallback = (stage: number, step: number, loss: number, lr: number) => void;

interface StageContext {
  rng: Rng;
  sampler: StratifiedSampler;
}

function makeContext(train: SplitData, cfg: TrainConfig): StageContext {
  const rng = new Rng(cfg.seed + 1000);
  return {
    rng,
    sampler: new StratifiedSampler(train.samples, train.upsampled, cfg.batchSize, rng),
  };
}

/**
 * Head-only stage: the backbone is frozen, so its features are computed
 * once up front and each step forwards just the head.  The backbone
 * weights are untouched, bit for bit.
 */
export function runStage1(
  model: tf.LayersModel,
  train: SplitData,
  imageSize: number,
  cfg: TrainConfig,
  onStep?: StepCallback,
  ctx = makeContext(train, cfg),
): number[] {
  const backbone = model.layers[0] as tf.LayersModel;
  const head = model.layers[model.layers.length - 1];
  setTrainable(model, true);
  setTrainable(backbone, false);
  const headVars = variablesOf(head);
  const allImages = imagesToTensor(train.samples, imageSize);
  const features = tf.tidy(
    () => (backbone.predict(allImages, { batchSize: 64 }) as tf.Tensor2D).clone(),
  );
  allImages.dispose();

  const stepsPerEpoch = Math.max(1, Math.floor(train.upsampled.length / cfg.batchSize));
  const totalSteps = cfg.stage1Epochs * stepsPerEpoch;
  const losses: number[] = [];
  const optimizer = tf.train.adam(cyclicalLr(0, totalSteps, cfg.lrMax));
  for (let step = 0; step < totalSteps; step++) {
    const lr = cyclicalLr(step, totalSteps, cfg.lrMax);
    setLearningRate(optimizer, lr);
    const batch = ctx.sampler.nextBatch();
    const labels = batch.map((i) => train.samples[i].labelIndex);
    const feats = tf.tidy(() => tf.gather(features, batch) as tf.Tensor2D);
    const loss = runStep(
      optimizer,
      () => head.apply(feats) as tf.Tensor2D,
      labels,
      headVars,
      cfg,
      ctx.rng,
    );
    feats.dispose();
    guardFinite(loss, "stage 1", step);
    decay(headVars, lr * cfg.weightDecay);
    losses.push(loss);
    onStep?.(1, step, loss, lr);
  }
  optimizer.dispose();
  features.dispose();
  return losses;
}

/** Full-network stage: everything unfrozen, one forward per step. */
export function runStage2(
  model: tf.LayersModel,
  train: SplitData,
  imageSize: number,
  cfg: TrainConfig,
  onStep?: StepCallback,
  ctx = makeContext(train, cfg),
): number[] {
  setTrainable(model, true);
  const allVars = variablesOf(model);
  const losses: number[] = [];
  const optimizer = tf.train.adam(cyclicalLr(0, cfg.stage2Iterations, cfg.lrMax));
  for (let step = 0; step < cfg.stage2Iterations; step++) {
    const lr = cyclicalLr(step, cfg.stage2Iterations, cfg.lrMax);
    setLearningRate(optimizer, lr);
    const batch = ctx.sampler.nextBatch();
    const labels = batch.map((i) => train.samples[i].labelIndex);
    const xs = imagesToTensor(batch.map((i) => train.samples[i]), imageSize);
    const loss = runStep(
      optimizer,
      () => model.apply(xs) as tf.Tensor2D,
      labels,
      allVars,
      cfg,
      ctx.rng,
    );
    xs.dispose();
    guardFinite(loss, "stage 2", step);
    decay(allVars, lr * cfg.weightDecay);
    losses.push(loss);
    onStep?.(2, step, loss, lr);
  }
  optimizer.dispose();
  return losses;
}

/**
 * Run both stages on `model` (backbone at layers[0], hash head last),
 * mutating its weights in place.  Returns per-step losses.
 */
export function trainHashModel(
  model: tf.LayersModel,
  train: SplitData,
  imageSize: number,
  cfg: TrainConfig,
  onStep?: StepCallback,
): TrainLog {
  const ctx = makeContext(train, cfg);
  return {
    stage1: runStage1(model, train, imageSize, cfg, onStep, ctx),
    stage2: runStage2(model, train, imageSize, cfg, onStep, ctx),
  };
}

function runStep(
  optimizer: tf.Optimizer,
  forward: () => tf.Tensor2D,
  labels: number[],
  vars: tf.Variable[],
  cfg: TrainConfig,
  rng: Rng,
): number {
  let triplets;
  if (cfg.mining === "hard") {
    const embeddings = tf.tidy(() => forward().clone());
    triplets = buildTriplets(labels, rng, "hard", embeddings);
    embeddings.dispose();
  } else {
    triplets = buildTriplets(labels, rng, "random");
  }
  if (triplets.anchors.length === 0) {
    throw new Error("batch cannot form a single triplet; check class balance");
  }
  const lossTensor = optimizer.minimize(
    () => tripletLoss(forward(), triplets, cfg.margin),
    true,
    vars,
  )!;
  const loss = lossTensor.dataSync()[0];
  lossTensor.dispose();
  return loss;
}
