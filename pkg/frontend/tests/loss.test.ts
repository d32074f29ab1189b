import { describe, expect, it } from "vitest";
import { classBalancedWeights, softmaxCrossEntropy, softmaxProbs } from "../src/loss.js";
import { Rng } from "../src/rng.js";

describe("class-balanced weights", () => {
  it("equal frequencies give unit weights", () => {
    const w = classBalancedWeights([100, 100, 100]);
    expect([...w]).toEqual([1, 1, 1]);
  });

  it("rare classes get proportionally larger weights", () => {
    const w = classBalancedWeights([9800, 100, 100]);
    // before normalization the normal-class weight is 1/0.98 and the rare
    // ones 1/0.01, a ratio of about 0.0102
    expect(w[0] / w[1]).toBeCloseTo(0.01 / 0.98, 6);
    const mean = (w[0] + w[1] + w[2]) / 3;
    expect(mean).toBeCloseTo(1.0, 12);
  });

  it("absent class gets a finite capped weight", () => {
    const w = classBalancedWeights([1000, 0, 500]);
    expect(Number.isFinite(w[1])).toBe(true);
    expect(w[1]).toBeGreaterThan(w[0]);
  });
});

describe("weighted softmax cross-entropy", () => {
  it("criterion 12: gradient matches finite differences on a 4x4x3 micro-batch", () => {
    const rng = new Rng(12);
    const n = 16; // 4x4 pixels, 3 classes
    const logits = Float32Array.from({ length: 3 * n }, () => rng.gauss());
    const targets = Uint8Array.from({ length: n }, () => rng.int(3));
    const mask = new Uint8Array(n).fill(1);
    mask[3] = 0; // one excluded pixel exercises the pixel weighting
    const weights = classBalancedWeights([50, 30, 20]);

    const { grad } = softmaxCrossEntropy(logits, targets, weights, mask);
    const eps = 1e-3;
    let maxRel = 0;
    for (let i = 0; i < logits.length; i++) {
      const orig = logits[i];
      logits[i] = orig + eps;
      const lp = softmaxCrossEntropy(logits, targets, weights, mask).loss;
      logits[i] = orig - eps;
      const lm = softmaxCrossEntropy(logits, targets, weights, mask).loss;
      logits[i] = orig;
      const fd = (lp - lm) / (2 * eps);
      const denom = Math.max(Math.abs(fd), 1e-8);
      maxRel = Math.max(maxRel, Math.abs(fd - grad[i]) / denom);
    }
    expect(maxRel).toBeLessThan(1e-3);
  });

  it("loss is zero when every pixel is excluded", () => {
    const n = 4;
    const logits = new Float32Array(3 * n);
    const targets = new Uint8Array(n);
    const out = softmaxCrossEntropy(logits, targets, classBalancedWeights([1, 1, 1]), new Uint8Array(n));
    expect(out.loss).toBe(0);
    expect([...out.grad].every((g) => g === 0)).toBe(true);
  });

  it("perfect logits give near-zero loss", () => {
    const n = 8;
    const targets = Uint8Array.from({ length: n }, (_, i) => i % 3);
    const logits = new Float32Array(3 * n);
    for (let i = 0; i < n; i++) logits[targets[i] * n + i] = 30;
    const { loss } = softmaxCrossEntropy(
      logits, targets, classBalancedWeights([1, 1, 1]), new Uint8Array(n).fill(1),
    );
    expect(loss).toBeLessThan(1e-9);
  });
});

describe("softmax probabilities", () => {
  it("outputs lie on the simplex", () => {
    const rng = new Rng(5);
    const n = 50;
    const logits = Float32Array.from({ length: 3 * n }, () => 4 * rng.gauss());
    const probs = softmaxProbs(logits, n);
    for (let i = 0; i < n; i++) {
      const s = probs[i * 3] + probs[i * 3 + 1] + probs[i * 3 + 2];
      expect(Math.abs(s - 1)).toBeLessThan(1e-6);
      for (let c = 0; c < 3; c++) expect(probs[i * 3 + c]).toBeGreaterThanOrEqual(0);
    }
  });
});
