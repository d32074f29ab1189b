/** Full-volume inference: per-slice forward pass, per-voxel softmax,
 * normal-class outside the prostate, written as f32x3 VGRID volumes the
 * evaluation harness reads directly. */

import * as path from "node:path";
import { loadPatient, patientSamples } from "./data.js";
import { softmaxProbs } from "./loss.js";
import { SegNet } from "./net.js";
import { writeVolume } from "./vgrid.js";

export function predictPatient(net: SegNet, cohortDir: string, patientId: string): {
  dims: [number, number, number];
  spacing: [number, number, number];
  probs: Float32Array;
} {
  const p = loadPatient(cohortDir, patientId, null);
  const [nx, ny, nz] = p.dims;
  const plane = nx * ny;
  const probs = new Float32Array(nz * plane * 3);
  for (const sample of patientSamples(p)) {
    const logits = net.forward(sample.input, ny, nx);
    const sliceProbs = softmaxProbs(logits, plane);
    const base = sample.z * plane * 3;
    for (let i = 0; i < plane; i++) {
      if (p.mask[sample.z * plane + i]) {
        probs[base + i * 3] = sliceProbs[i * 3];
        probs[base + i * 3 + 1] = sliceProbs[i * 3 + 1];
        probs[base + i * 3 + 2] = sliceProbs[i * 3 + 2];
      } else {
        probs[base + i * 3] = 1.0;
      }
    }
  }
  return { dims: p.dims, spacing: p.spacing, probs };
}

export function writePrediction(
  net: SegNet,
  cohortDir: string,
  patientId: string,
  outDir: string,
): void {
  const { dims, spacing, probs } = predictPatient(net, cohortDir, patientId);
  writeVolume(
    { dims, spacing, dtype: "f32x3", data: probs },
    path.join(outDir, `${patientId}_prob.vgh`),
  );
}
