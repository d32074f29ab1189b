import { Rng } from "./rng.js";

/** Deterministic near-equal k-fold split; every patient lands in exactly
 * one validation fold. */
export function splitFolds(patientIds: string[], folds: number, seed: number): string[][] {
  if (folds < 2) throw new Error("folds must be >= 2");
  if (patientIds.length < folds) throw new Error("need at least one patient per fold");
  const ids = [...patientIds].sort();
  const rng = new Rng(seed);
  rng.shuffle(ids);
  const out: string[][] = Array.from({ length: folds }, () => []);
  ids.forEach((id, i) => out[i % folds].push(id));
  return out.map((fold) => fold.sort());
}
