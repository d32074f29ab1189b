/** Toy-trainer command line.
 *
 *   train   --cohort DIR --label-source SRC --out ckpt.json [training flags]
 *   predict --checkpoint ckpt.json --cohort DIR --out DIR
 *   cv      --cohort DIR --label-source SRC --out DIR [training flags]
 *
 * `cv` runs k-fold cross-validation: each fold's model predicts its held-out
 * patients, so the output directory holds one prediction per patient, ready
 * for the evaluation harness.
 */

import * as fs from "node:fs";
import * as path from "node:path";
import { splitFolds } from "./folds.js";
import { DEFAULT_TRAIN, loadCheckpoint, saveCheckpoint, train, TrainConfig } from "./train.js";
import { writePrediction } from "./predict.js";
import { listPatients } from "./vgrid.js";

function parseFlags(argv: string[]): Map<string, string> {
  const flags = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    if (!key.startsWith("--") || i + 1 >= argv.length) {
      throw new Error(`expected --flag value pairs, got ${key}`);
    }
    flags.set(key.slice(2), argv[i + 1]);
  }
  return flags;
}

function need(flags: Map<string, string>, key: string): string {
  const v = flags.get(key);
  if (v === undefined) throw new Error(`missing required --${key}`);
  return v;
}

function trainConfig(flags: Map<string, string>): TrainConfig {
  return {
    cohortDir: need(flags, "cohort"),
    labelSource: need(flags, "label-source"),
    folds: Number(flags.get("folds") ?? DEFAULT_TRAIN.folds),
    epochs: Number(flags.get("epochs") ?? DEFAULT_TRAIN.epochs),
    batchSize: Number(flags.get("batch-size") ?? DEFAULT_TRAIN.batchSize),
    learningRate: Number(flags.get("learning-rate") ?? DEFAULT_TRAIN.learningRate),
    dualEncoder: (flags.get("dual-encoder") ?? "false") === "true",
    seed: Number(flags.get("seed") ?? DEFAULT_TRAIN.seed),
    baseChannels: Number(flags.get("base-channels") ?? DEFAULT_TRAIN.baseChannels),
    cropSize: Number(flags.get("crop-size") ?? DEFAULT_TRAIN.cropSize),
  };
}

function cmdTrain(flags: Map<string, string>): void {
  const cfg = trainConfig(flags);
  const out = need(flags, "out");
  const result = train(cfg, (line) => console.log(line));
  saveCheckpoint(result, cfg, out);
  console.log(`wrote checkpoint ${out}`);
}

function cmdPredict(flags: Map<string, string>): void {
  const { net } = loadCheckpoint(need(flags, "checkpoint"));
  const cohort = need(flags, "cohort");
  const out = need(flags, "out");
  fs.mkdirSync(out, { recursive: true });
  const ids = listPatients(cohort);
  for (const id of ids) writePrediction(net, cohort, id, out);
  console.log(`wrote ${ids.length} predictions to ${out}`);
}

function cmdCrossValidate(flags: Map<string, string>): void {
  const cfg = trainConfig(flags);
  const out = need(flags, "out");
  fs.mkdirSync(out, { recursive: true });
  const ids = listPatients(cfg.cohortDir);
  const folds = splitFolds(ids, cfg.folds, cfg.seed);
  folds.forEach((validation, foldIdx) => {
    const trainIds = ids.filter((id) => !validation.includes(id));
    console.log(
      `fold ${foldIdx + 1}/${folds.length}: train ${trainIds.length}, validate ${validation.length}`,
    );
    const result = train(
      { ...cfg, patientIds: trainIds, seed: cfg.seed + foldIdx },
      (line) => console.log(`  ${line}`),
    );
    for (const id of validation) writePrediction(result.net, cfg.cohortDir, id, out);
  });
  const manifest = [
    "command = cv",
    `cohort = ${cfg.cohortDir}`,
    `label_source = ${cfg.labelSource}`,
    `folds = ${cfg.folds}`,
    `epochs = ${cfg.epochs}`,
    `seed = ${cfg.seed}`,
    "",
  ].join("\n");
  fs.writeFileSync(path.join(out, "manifest_cv.txt"), manifest, "utf-8");
  console.log(`wrote ${ids.length} cross-validated predictions to ${out}`);
}

export function main(argv: string[]): number {
  const [command, ...rest] = argv;
  try {
    const flags = parseFlags(rest);
    if (command === "train") cmdTrain(flags);
    else if (command === "predict") cmdPredict(flags);
    else if (command === "cv") cmdCrossValidate(flags);
    else {
      console.error("usage: cli.js {train|predict|cv} --flag value ...");
      return 2;
    }
    return 0;
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    return 1;
  }
}

const invokedDirectly =
  process.argv[1] && path.resolve(process.argv[1]) === new URL(import.meta.url).pathname;
if (invokedDirectly) {
  process.exit(main(process.argv.slice(2)));
}
