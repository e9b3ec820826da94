/** Model checkpoints as a single JSON file: layer topology, weight specs,
 * and the weight buffer base64-encoded.  tfjs in plain Node has no file://
 * save handler, so this goes through the in-memory IO hooks.
 */

import * as fs from "node:fs";

import * as tf from "@tensorflow/tfjs";

interface CheckpointFile {
  modelTopology: unknown;
  weightSpecs: tf.io.WeightsManifestEntry[];
  weightData: string;
}

export async function saveModel(model: tf.LayersModel, outPath: string): Promise<void> {
  let artifacts: tf.io.ModelArtifacts | null = null;
  await model.save(
    tf.io.withSaveHandler(async (a) => {
      artifacts = a;
      return { modelArtifactsInfo: { dateSaved: new Date(), modelTopologyType: "JSON" } };
    }),
  );
  if (!artifacts) {
    throw new Error("model.save produced no artifacts");
  }
  const got = artifacts as tf.io.ModelArtifacts;
  const payload: CheckpointFile = {
    modelTopology: got.modelTopology,
    weightSpecs: got.weightSpecs ?? [],
    weightData: Buffer.from(got.weightData as ArrayBuffer).toString("base64"),
  };
  const tmp = outPath + ".tmp";
  fs.writeFileSync(tmp, JSON.stringify(payload));
  fs.renameSync(tmp, outPath);
}

export async function loadModel(checkpointPath: string): Promise<tf.LayersModel> {
  const payload = JSON.parse(fs.readFileSync(checkpointPath, "utf8")) as CheckpointFile;
  if (!payload.modelTopology || !payload.weightSpecs || !payload.weightData) {
    throw new Error(`${checkpointPath}: not a model checkpoint`);
  }
  const raw = Buffer.from(payload.weightData, "base64");
  const weightData = raw.buffer.slice(raw.byteOffset, raw.byteOffset + raw.byteLength);
  return tf.loadLayersModel(
    tf.io.fromMemory({
      modelTopology: payload.modelTopology as object,
      weightSpecs: payload.weightSpecs,
      weightData,
    }),
  );
}
