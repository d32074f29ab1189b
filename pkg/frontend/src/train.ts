/** Deterministic single-threaded training loop with Adam. */

import * as fs from "node:fs";
import { classCounts, cropSample, loadCohortSamples, Sample } from "./data.js";
import { classBalancedWeights, softmaxCrossEntropy } from "./loss.js";
import { NetConfig, SegNet } from "./net.js";
import { Rng } from "./rng.js";
import { listPatients } from "./vgrid.js";

export interface TrainConfig {
  cohortDir: string;
  labelSource: string;
  patientIds?: string[];
  folds: number;
  epochs: number;
  batchSize: number;
  learningRate: number;
  dualEncoder: boolean;
  seed: number;
  baseChannels: number;
  cropSize: number; // 0 disables cropping
}

export const DEFAULT_TRAIN: Omit<TrainConfig, "cohortDir" | "labelSource"> = {
  folds: 5,
  epochs: 20,
  batchSize: 8,
  learningRate: 1e-4,
  dualEncoder: false,
  seed: 42,
  baseChannels: 8,
  cropSize: 64,
};

export interface TrainResult {
  net: SegNet;
  epochLosses: number[];
  classWeights: number[];
}

export function train(cfg: TrainConfig, log: (line: string) => void = () => {}): TrainResult {
  const ids = cfg.patientIds ?? listPatients(cfg.cohortDir);
  const counts = classCounts(cfg.cohortDir, cfg.labelSource, ids);
  const weights = classBalancedWeights(counts);
  const samples = loadCohortSamples(cfg.cohortDir, cfg.labelSource, ids);
  const rng = new Rng(cfg.seed);
  const netCfg: NetConfig = { dualEncoder: cfg.dualEncoder, baseChannels: cfg.baseChannels };
  const net = new SegNet(netCfg, rng);

  const order = samples.map((_, i) => i);
  const epochLosses: number[] = [];
  let step = 0;
  for (let epoch = 0; epoch < cfg.epochs; epoch++) {
    rng.shuffle(order);
    let epochLoss = 0;
    let nBatches = 0;
    for (let start = 0; start < order.length; start += cfg.batchSize) {
      const batch = order.slice(start, start + cfg.batchSize);
      net.zeroGrad();
      let batchLoss = 0;
      for (const si of batch) {
        let s: Sample = samples[si];
        if (cfg.cropSize > 0 && cfg.cropSize < s.h) {
          const y0 = rng.int(s.h - cfg.cropSize + 1);
          const x0 = rng.int(s.w - cfg.cropSize + 1);
          s = cropSample(s, y0, x0, cfg.cropSize);
        }
        const logits = net.forward(s.input, s.h, s.w);
        const { loss, grad } = softmaxCrossEntropy(logits, s.target, weights, s.mask);
        if (loss > 0) {
          // scale so the batch gradient is the mean of per-sample gradients
          for (let i = 0; i < grad.length; i++) grad[i] /= batch.length;
          net.backward(grad);
          batchLoss += loss;
        }
      }
      step++;
      net.adamStep(cfg.learningRate, step);
      epochLoss += batchLoss / batch.length;
      nBatches++;
    }
    epochLosses.push(epochLoss / nBatches);
    log(`epoch ${epoch + 1}/${cfg.epochs} loss ${(epochLoss / nBatches).toFixed(5)}`);
  }
  return { net, epochLosses, classWeights: Array.from(weights) };
}

export function saveCheckpoint(result: TrainResult, cfg: TrainConfig, file: string): void {
  const payload = {
    format: "toytrainer-checkpoint-v1",
    trainConfig: { ...cfg, patientIds: cfg.patientIds ?? null },
    classWeights: result.classWeights,
    epochLosses: result.epochLosses,
    net: result.net.serialize(),
  };
  fs.writeFileSync(file, JSON.stringify(payload), "utf-8");
}

export function loadCheckpoint(file: string): { net: SegNet; trainConfig: any } {
  const payload = JSON.parse(fs.readFileSync(file, "utf-8"));
  if (payload.format !== "toytrainer-checkpoint-v1") {
    throw new Error(`${file}: not a toy-trainer checkpoint`);
  }
  return { net: SegNet.deserialize(payload.net), trainConfig: payload.trainConfig };
}
