import { execFileSync } from "node:child_process";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { loadModel, saveModel } from "../src/checkpoint.js";
import { makeConfig } from "../src/config.js";
import { Dataset, generateShapeDataset, prepareDataset, uniformShapeCounts } from "../src/dataset.js";
import { exportEmbeddings } from "../src/export.js";
import { buildBackbone, buildHashModel, pretrainBackbone } from "../src/model.js";
import { Rng } from "../src/rng.js";
import { TrainLog, movingAverage, trainHashModel } from "../src/train.js";

const IMG = 16;
const SEED = 0;

/** mAP of queries against references, judged by the retrieval engine. */
function retrievalMap(referencesCsv: string, queriesCsv: string): number {
  let stdout: string;
  try {
    stdout = execFileSync(
      "hashfind",
      ["eval", "--references", referencesCsv, "--queries", queriesCsv, "--percentile", "50"],
      { encoding: "utf8" },
    );
  } catch (err) {
    if ((err as NodeJS.ErrnoException).code === "ENOENT") {
      throw new Error("retrieval CLI `hashfind` not on PATH; install the retrieval package");
    }
    throw err;
  }
  return JSON.parse(stdout).map as number;
}

function readEmbeddingCsv(file: string): { header: string; rows: string[][] } {
  const lines = fs.readFileSync(file, "utf8").trimEnd().split("\n");
  return { header: lines[0], rows: lines.slice(1).map((line) => line.split(",")) };
}

describe("toy pipeline against the retrieval engine", () => {
  let tmp: string;
  let dataset: Dataset;
  let log: TrainLog;
  let baselineMap: number;
  let trainedMap: number;
  let baselineValMap: number;
  let trainedValMap: number;
  let elapsedSeconds: number;
  const files = {} as Record<
    "baseRef" | "baseQry" | "baseVal" | "ref" | "qry" | "qry2" | "val",
    string
  >;

  beforeAll(async () => {
    const t0 = Date.now();
    tmp = fs.mkdtempSync(path.join(os.tmpdir(), "pipeline-"));
    for (const name of ["baseRef", "baseQry", "baseVal", "ref", "qry", "qry2", "val"] as const) {
      files[name] = path.join(tmp, `${name}.csv`);
    }

    const root = path.join(tmp, "data");
    generateShapeDataset(root, {
      imageSize: IMG,
      counts: uniformShapeCounts({ train: 100, validation: 12, test: 25 }),
      noise: 0.1,
      seed: SEED,
    });
    dataset = prepareDataset(path.join(root, "manifest.csv"), root, new Rng(SEED + 2000));

    const backbone = buildBackbone(IMG, SEED);
    await pretrainBackbone(backbone, dataset.train, dataset.labels.length, IMG, SEED, {
      epochs: 8,
      batchSize: 32,
      learningRate: 3e-3,
    });
    const checkpoint = path.join(tmp, "backbone.ckpt.json");
    await saveModel(backbone, checkpoint);

    // baseline: the same pretrained backbone under a head that never trained
    const baseline = buildHashModel(backbone, 8, SEED);
    exportEmbeddings(baseline, dataset.train.samples, IMG, files.baseRef);
    exportEmbeddings(baseline, dataset.test.samples, IMG, files.baseQry);
    exportEmbeddings(baseline, dataset.validation.samples, IMG, files.baseVal);
    baselineMap = retrievalMap(files.baseRef, files.baseQry);
    baselineValMap = retrievalMap(files.baseRef, files.baseVal);

    const cfg = makeConfig({
      imageSize: IMG,
      hashLength: 8,
      stage1Epochs: 15,
      stage2Iterations: 200,
      mining: "hard",
      batchSize: 32,
      seed: SEED,
    });
    const model = buildHashModel(await loadModel(checkpoint), cfg.hashLength, cfg.seed);
    log = trainHashModel(model, dataset.train, IMG, cfg);
    exportEmbeddings(model, dataset.train.samples, IMG, files.ref);
    exportEmbeddings(model, dataset.test.samples, IMG, files.qry);
    exportEmbeddings(model, dataset.test.samples, IMG, files.qry2);
    exportEmbeddings(model, dataset.validation.samples, IMG, files.val);
    trainedMap = retrievalMap(files.ref, files.qry);
    trainedValMap = retrievalMap(files.ref, files.val);
    elapsedSeconds = (Date.now() - t0) / 1000;
    console.log(
      `pipeline: baseline mAP ${baselineMap.toFixed(4)}, trained mAP ${trainedMap.toFixed(4)}, ` +
        `validation ${baselineValMap.toFixed(4)} -> ${trainedValMap.toFixed(4)}, ` +
        `${elapsedSeconds.toFixed(0)}s`,
    );
  });

  afterAll(() => {
    fs.rmSync(tmp, { recursive: true, force: true });
  });

  it("stage 1 loss decreases across averaged windows", () => {
    const smoothed = movingAverage(log.stage1, 10);
    expect(smoothed.length).toBeGreaterThan(1);
    expect(smoothed[smoothed.length - 1]).toBeLessThan(smoothed[0]);
    const half = Math.floor(log.stage1.length / 2);
    const mean = (xs: number[]) => xs.reduce((a, b) => a + b, 0) / xs.length;
    expect(mean(log.stage1.slice(half))).toBeLessThan(mean(log.stage1.slice(0, half)));
  });

  it("exports stay inside [0, 1]^8 and re-export identically", () => {
    for (const file of [files.ref, files.qry]) {
      const { header, rows } = readEmbeddingCsv(file);
      expect(header).toBe("id,label,e0,e1,e2,e3,e4,e5,e6,e7");
      for (const row of rows) {
        expect(row.length).toBe(10);
        for (const field of row.slice(2)) {
          const v = Number(field);
          expect(v).toBeGreaterThanOrEqual(0);
          expect(v).toBeLessThanOrEqual(1);
        }
      }
    }
    expect(readEmbeddingCsv(files.ref).rows.length).toBe(dataset.train.samples.length);
    expect(readEmbeddingCsv(files.qry).rows.length).toBe(dataset.test.samples.length);
    expect(fs.readFileSync(files.qry2, "utf8")).toBe(fs.readFileSync(files.qry, "utf8"));
  });

  it("beats the random-head baseline by at least 0.15 mAP at the median threshold", () => {
    expect(trainedMap - baselineMap).toBeGreaterThanOrEqual(0.15);
  });

  it("improves validation retrieval over the random-head baseline", () => {
    expect(trainedValMap).toBeGreaterThan(baselineValMap);
  });

  it("finishes the whole pipeline inside the time budget", () => {
    expect(elapsedSeconds).toBeLessThan(15 * 60);
  });
});
