/** Class-balanced softmax cross-entropy over pixels.
 *
 * Per-class weights are inverse frequencies capped by eps and normalized to
 * mean one; the loss is the weighted mean of per-pixel negative log
 * likelihoods, restricted to pixels with a positive pixel weight (the
 * prostate mask during training).
 */

export const N_CLASSES = 3;
const EPS_FREQ = 1e-6;

export function classBalancedWeights(counts: number[]): Float64Array {
  if (counts.length !== N_CLASSES) throw new Error("need three class counts");
  const total = counts.reduce((a, b) => a + b, 0);
  if (total <= 0) throw new Error("no labelled voxels");
  const raw = counts.map((c) => 1 / Math.max(c / total, EPS_FREQ));
  const mean = raw.reduce((a, b) => a + b, 0) / N_CLASSES;
  return Float64Array.from(raw.map((w) => w / mean));
}

export interface LossResult {
  loss: number;
  /** d(loss)/d(logits), same layout as logits: [class][pixel]. */
  grad: Float32Array;
}

/**
 * logits: Float32Array of length 3*n, class-major ([c*n + i]).
 * targets: Uint8Array of n class ids.
 * pixelWeight: per-pixel weight (0 excludes the pixel), length n.
 */
export function softmaxCrossEntropy(
  logits: Float32Array,
  targets: Uint8Array,
  classWeights: Float64Array,
  pixelWeight: Uint8Array | Float32Array,
): LossResult {
  const n = targets.length;
  if (logits.length !== N_CLASSES * n) throw new Error("logits length mismatch");
  const grad = new Float32Array(N_CLASSES * n);
  let lossSum = 0;
  let weightSum = 0;
  for (let i = 0; i < n; i++) {
    const pw = pixelWeight[i];
    if (pw <= 0) continue;
    weightSum += pw * classWeights[targets[i]];
  }
  if (weightSum <= 0) return { loss: 0, grad };
  for (let i = 0; i < n; i++) {
    const pw = pixelWeight[i];
    if (pw <= 0) continue;
    const l0 = logits[i];
    const l1 = logits[n + i];
    const l2 = logits[2 * n + i];
    const m = Math.max(l0, l1, l2);
    const e0 = Math.exp(l0 - m);
    const e1 = Math.exp(l1 - m);
    const e2 = Math.exp(l2 - m);
    const z = e0 + e1 + e2;
    const t = targets[i];
    const w = (pw * classWeights[t]) / weightSum;
    const pt = (t === 0 ? e0 : t === 1 ? e1 : e2) / z;
    lossSum += -w * Math.log(Math.max(pt, 1e-30));
    grad[i] = w * (e0 / z - (t === 0 ? 1 : 0));
    grad[n + i] = w * (e1 / z - (t === 1 ? 1 : 0));
    grad[2 * n + i] = w * (e2 / z - (t === 2 ? 1 : 0));
  }
  return { loss: lossSum, grad };
}

/** Per-pixel softmax of class-major logits, emitted pixel-major as triples. */
export function softmaxProbs(logits: Float32Array, n: number): Float32Array {
  const out = new Float32Array(n * N_CLASSES);
  for (let i = 0; i < n; i++) {
    const l0 = logits[i];
    const l1 = logits[n + i];
    const l2 = logits[2 * n + i];
    const m = Math.max(l0, l1, l2);
    const e0 = Math.exp(l0 - m);
    const e1 = Math.exp(l1 - m);
    const e2 = Math.exp(l2 - m);
    const z = e0 + e1 + e2;
    out[i * 3] = e0 / z;
    out[i * 3 + 1] = e1 / z;
    out[i * 3 + 2] = e2 / z;
  }
  return out;
}
