/** Command line entry point.
 *
 *   generate  --root DIR [--image-size N] [--per-class N] [--noise F] [--seed N]
 *   pretrain  --root DIR --out FILE [--epochs N] [--seed N]
 *   train     --root DIR --backbone FILE --out FILE [config flags]
 *   export    --root DIR --model FILE --split NAME --out FILE
 *   pipeline  --workdir DIR [config flags]
 *
 * pipeline chains all of the above on the bundled shape classes and
 * leaves reference.csv (train split) and queries.csv (test split) in the
 * workdir, ready for the retrieval CLI.
 */

import * as path from "node:path";

import { TrainConfig, DEFAULT_CONFIG, makeConfig, MiningStrategy } from "./config.js";
import { loadModel, saveModel } from "./checkpoint.js";
import {
  Dataset,
  defaultShapeCounts,
  generateShapeDataset,
  prepareDataset,
  uniformShapeCounts,
} from "./dataset.js";
import { exportEmbeddings } from "./export.js";
import { buildBackbone, buildHashModel, pretrainBackbone } from "./model.js";
import { Rng } from "./rng.js";
import { movingAverage, trainHashModel } from "./train.js";

function parseArgs(argv: string[]): Map<string, string> {
  const args = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    if (!key.startsWith("--") || i + 1 >= argv.length) {
      throw new UsageError(`expected --flag value pairs, got ${JSON.stringify(key)}`);
    }
    args.set(key.slice(2), argv[i + 1]);
  }
  return args;
}

class UsageError extends Error {}

function num(args: Map<string, string>, key: string, fallback: number): number {
  const raw = args.get(key);
  if (raw === undefined) {
    return fallback;
  }
  const value = Number(raw);
  if (!Number.isFinite(value)) {
    throw new UsageError(`--${key} needs a number, got ${JSON.stringify(raw)}`);
  }
  return value;
}

function need(args: Map<string, string>, key: string): string {
  const value = args.get(key);
  if (value === undefined) {
    throw new UsageError(`missing required --${key}`);
  }
  return value;
}

function configFromArgs(args: Map<string, string>, imageSize: number): TrainConfig {
  return makeConfig({
    imageSize,
    hashLength: num(args, "hash-length", DEFAULT_CONFIG.hashLength),
    stage1Epochs: num(args, "stage1-epochs", DEFAULT_CONFIG.stage1Epochs),
    stage2Iterations: num(args, "stage2-iterations", DEFAULT_CONFIG.stage2Iterations),
    lrMax: num(args, "lr-max", DEFAULT_CONFIG.lrMax),
    weightDecay: num(args, "weight-decay", DEFAULT_CONFIG.weightDecay),
    margin: num(args, "margin", DEFAULT_CONFIG.margin),
    mining: (args.get("mining") ?? DEFAULT_CONFIG.mining) as MiningStrategy,
    batchSize: num(args, "batch-size", DEFAULT_CONFIG.batchSize),
    seed: num(args, "seed", DEFAULT_CONFIG.seed),
  });
}

function loadDataset(root: string, seed: number): Dataset {
  return prepareDataset(path.join(root, "manifest.csv"), root, new Rng(seed + 2000));
}

async function cmdGenerate(args: Map<string, string>): Promise<void> {
  const root = need(args, "root");
  const perClass = args.get("per-class");
  const counts = perClass
    ? uniformShapeCounts({ train: num(args, "per-class", 0), validation: 12, test: 10 })
    : defaultShapeCounts();
  generateShapeDataset(root, {
    imageSize: num(args, "image-size", 32),
    counts,
    noise: num(args, "noise", 0.1),
    seed: num(args, "seed", 0),
  });
  console.log(`wrote shape dataset to ${root}`);
}

async function cmdPretrain(args: Map<string, string>): Promise<void> {
  const root = need(args, "root");
  const out = need(args, "out");
  const seed = num(args, "seed", 0);
  const dataset = loadDataset(root, seed);
  const backbone = buildBackbone(dataset.imageSize, seed);
  const losses = await pretrainBackbone(
    backbone,
    dataset.train,
    dataset.labels.length,
    dataset.imageSize,
    seed,
    {
      epochs: num(args, "epochs", 8),
      batchSize: num(args, "batch-size", 32),
      learningRate: num(args, "lr", 3e-3),
    },
  );
  losses.forEach((loss, epoch) => {
    console.log(`pretrain epoch ${epoch + 1}: loss ${loss.toFixed(4)}`);
  });
  await saveModel(backbone, out);
  console.log(`saved backbone to ${out}`);
}

async function cmdTrain(args: Map<string, string>): Promise<void> {
  const root = need(args, "root");
  const out = need(args, "out");
  const backbonePath = need(args, "backbone");
  const dataset = loadDataset(root, num(args, "seed", 0));
  const cfg = configFromArgs(args, dataset.imageSize);
  const backbone = await loadModel(backbonePath);
  const model = buildHashModel(backbone, cfg.hashLength, cfg.seed);
  const log = trainHashModel(model, dataset.train, dataset.imageSize, cfg, (stage, step, loss, lr) => {
    if (step % 25 === 0) {
      console.log(`stage ${stage} step ${step}: loss ${loss.toFixed(4)} lr ${lr.toExponential(2)}`);
    }
  });
  const s1 = movingAverage(log.stage1, Math.min(10, log.stage1.length));
  console.log(
    `stage 1: ${log.stage1.length} steps, smoothed loss ` +
      `${s1[0]?.toFixed(4)} -> ${s1[s1.length - 1]?.toFixed(4)}`,
  );
  console.log(`stage 2: ${log.stage2.length} steps, final loss ${log.stage2.at(-1)?.toFixed(4)}`);
  await saveModel(model, out);
  console.log(`saved model to ${out}`);
}

async function cmdExport(args: Map<string, string>): Promise<void> {
  const root = need(args, "root");
  const modelPath = need(args, "model");
  const split = need(args, "split");
  const out = need(args, "out");
  if (split !== "train" && split !== "validation" && split !== "test") {
    throw new UsageError(`--split must be train, validation, or test, got ${split}`);
  }
  const dataset = loadDataset(root, num(args, "seed", 0));
  const model = await loadModel(modelPath);
  const samples = dataset[split as "train" | "validation" | "test"].samples;
  const rows = exportEmbeddings(model, samples, dataset.imageSize, out);
  console.log(`wrote ${rows} rows to ${out}`);
}

function withArgs(args: Map<string, string>, overrides: Record<string, string>): Map<string, string> {
  const merged = new Map(args);
  for (const [key, value] of Object.entries(overrides)) {
    merged.set(key, value);
  }
  return merged;
}

async function cmdPipeline(args: Map<string, string>): Promise<void> {
  const workdir = need(args, "workdir");
  const dataRoot = path.join(workdir, "data");
  const backbonePath = path.join(workdir, "backbone.ckpt.json");
  const modelPath = path.join(workdir, "hash.ckpt.json");
  const reference = path.join(workdir, "reference.csv");
  const queries = path.join(workdir, "queries.csv");
  await cmdGenerate(withArgs(args, { root: dataRoot }));
  await cmdPretrain(withArgs(args, { root: dataRoot, out: backbonePath }));
  await cmdTrain(withArgs(args, { root: dataRoot, backbone: backbonePath, out: modelPath }));
  await cmdExport(
    withArgs(args, { root: dataRoot, model: modelPath, split: "train", out: reference }),
  );
  await cmdExport(
    withArgs(args, { root: dataRoot, model: modelPath, split: "test", out: queries }),
  );
  console.log(`next: hashfind eval --references ${reference} --queries ${queries}`);
}

const COMMANDS: Record<string, (args: Map<string, string>) => Promise<void>> = {
  generate: cmdGenerate,
  pretrain: cmdPretrain,
  train: cmdTrain,
  export: cmdExport,
  pipeline: cmdPipeline,
};

async function main(): Promise<void> {
  const [command, ...rest] = process.argv.slice(2);
  const run = command ? COMMANDS[command] : undefined;
  if (!run) {
    console.error(`usage: cli.ts <${Object.keys(COMMANDS).join("|")}> --flag value ...`);
    process.exit(2);
  }
  try {
    await run(parseArgs(rest));
  } catch (err) {
    if (err instanceof UsageError) {
      console.error(`error: ${err.message}`);
      process.exit(2);
    }
    throw err;
  }
}

main().catch((err) => {
  console.error(`error: ${err instanceof Error ? err.message : err}`);
  process.exit(1);
});
