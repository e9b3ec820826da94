/** Training hyperparameters, with the recipe's defaults baked in. */

export type MiningStrategy = "random" | "hard";

export interface TrainConfig {
  /** Input images are square, imageSize x imageSize, one channel. */
  imageSize: number;
  /** Width of the hash head; the export writes this many components. */
  hashLength: number;
  /** Stage 1: head-only epochs over the train split, backbone frozen. */
  stage1Epochs: number;
  /** Stage 2: optimizer steps with the whole network unfrozen. */
  stage2Iterations: number;
  /** Peak of the triangular learning-rate wave; the floor is 0. */
  lrMax: number;
  /** Decoupled weight decay applied after every optimizer step. */
  weightDecay: number;
  /** Triplet margin: negatives must sit this much farther than positives. */
  margin: number;
  /** Triplet selection within a batch. */
  mining: MiningStrategy;
  batchSize: number;
  seed: number;
}

export const DEFAULT_CONFIG: TrainConfig = {
  imageSize: 224,
  hashLength: 8,
  stage1Epochs: 15,
  stage2Iterations: 200,
  lrMax: 1e-3,
  weightDecay: 1e-3,
  margin: 1.0,
  mining: "random",
  batchSize: 32,
  seed: 0,
};

export function makeConfig(overrides: Partial<TrainConfig> = {}): TrainConfig {
  const cfg = { ...DEFAULT_CONFIG, ...overrides };
  validateConfig(cfg);
  return cfg;
}

export function validateConfig(cfg: TrainConfig): void {
  const positive: Array<[string, number]> = [
    ["imageSize", cfg.imageSize],
    ["hashLength", cfg.hashLength],
    ["stage1Epochs", cfg.stage1Epochs],
    ["stage2Iterations", cfg.stage2Iterations],
    ["lrMax", cfg.lrMax],
    ["weightDecay", cfg.weightDecay],
    ["margin", cfg.margin],
    ["batchSize", cfg.batchSize],
  ];
  for (const [name, value] of positive) {
    if (!Number.isFinite(value) || value <= 0) {
      throw new Error(`${name} must be positive, got ${value}`);
    }
  }
  for (const name of ["imageSize", "hashLength", "stage1Epochs",
                      "stage2Iterations", "batchSize"] as const) {
    if (!Number.isInteger(cfg[name])) {
      throw new Error(`${name} must be an integer, got ${cfg[name]}`);
    }
  }
  if (cfg.batchSize < 4) {
    throw new Error(`batchSize must be >= 4 to form triplets, got ${cfg.batchSize}`);
  }
  if (cfg.mining !== "random" && cfg.mining !== "hard") {
    throw new Error(`mining must be "random" or "hard", got ${cfg.mining}`);
  }
  if (!Number.isInteger(cfg.seed)) {
    throw new Error(`seed must be an integer, got ${cfg.seed}`);
  }
}

/**
 * Triangular learning-rate wave bounded by [0, lrMax].
 *
 * One cycle ramps linearly 0 -> lrMax over the first half and back down
 * over the second; step counts from 0.  The peak value itself is hit at
 * the midpoint, the floor at every cycle boundary.
 */
export function cyclicalLr(step: number, cycleSteps: number, lrMax: number): number {
  if (cycleSteps < 2) {
    return lrMax;
  }
  const phase = (step % cycleSteps) / cycleSteps;
  return lrMax * (1 - Math.abs(2 * phase - 1));
}
