import { describe, expect, it } from "vitest";
import { splitFolds } from "../src/folds.js";

const IDS = Array.from({ length: 10 }, (_, i) => `p${String(i).padStart(4, "0")}`);

describe("splitFolds", () => {
  it("10 patients over 5 folds gives folds of size 2", () => {
    const folds = splitFolds(IDS, 5, 42);
    expect(folds).toHaveLength(5);
    for (const fold of folds) expect(fold).toHaveLength(2);
  });

  it("same seed reproduces the split; different seed changes it", () => {
    expect(splitFolds(IDS, 5, 42)).toEqual(splitFolds(IDS, 5, 42));
    const a = splitFolds(IDS, 5, 42).flat().join(",");
    const b = splitFolds(IDS, 5, 43).flat().join(",");
    expect(a).not.toEqual(b);
  });

  it("folds are disjoint and cover all patients", () => {
    const folds = splitFolds(IDS, 3, 7);
    const flat = folds.flat().sort();
    expect(flat).toEqual([...IDS].sort());
    const sizes = folds.map((f) => f.length).sort();
    expect(sizes[sizes.length - 1] - sizes[0]).toBeLessThanOrEqual(1);
  });

  it("rejects undersized inputs", () => {
    expect(() => splitFolds(IDS.slice(0, 3), 5, 1)).toThrow();
    expect(() => splitFolds(IDS, 1, 1)).toThrow();
  });
});
