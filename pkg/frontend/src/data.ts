/** Cohort loading and sample construction.
 *
 * A training sample is one axial slice: six input planes (t2w and adc at
 * z-1, z, z+1 with clamped ends), the label slice as the target and the
 * prostate mask slice as the pixel weight. Each intensity volume is z-score
 * normalized over its prostate voxels before slicing.
 */

import * as path from "node:path";
import { IN_CHANNELS } from "./net.js";
import { listPatients, readVolume, Volume } from "./vgrid.js";

export interface Sample {
  patientId: string;
  z: number;
  h: number;
  w: number;
  input: Float32Array; // 6 * h * w, channel-major
  target: Uint8Array; // h * w class ids
  mask: Uint8Array; // h * w, 1 inside the prostate
}

export interface PatientVolumes {
  id: string;
  dims: [number, number, number];
  spacing: [number, number, number];
  mask: Uint8Array;
  channels: Float32Array[]; // normalized t2w, adc
  label: Uint8Array | null;
}

function normalizeInMask(vol: Volume, mask: Uint8Array): Float32Array {
  const data = vol.data as Float32Array;
  let sum = 0;
  let count = 0;
  for (let i = 0; i < data.length; i++) {
    if (mask[i]) {
      sum += data[i];
      count++;
    }
  }
  const mean = count ? sum / count : 0;
  let varSum = 0;
  for (let i = 0; i < data.length; i++) {
    if (mask[i]) {
      const d = data[i] - mean;
      varSum += d * d;
    }
  }
  const std = count ? Math.sqrt(varSum / count) : 1;
  const out = new Float32Array(data.length);
  const inv = std > 0 ? 1 / std : 1;
  for (let i = 0; i < data.length; i++) out[i] = (data[i] - mean) * inv;
  return out;
}

export function loadPatient(
  cohortDir: string,
  patientId: string,
  labelSource: string | null,
): PatientVolumes {
  const maskVol = readVolume(path.join(cohortDir, `${patientId}_mask.vgh`));
  const mask = maskVol.data as Uint8Array;
  const channels = ["t2w", "adc"].map((name) =>
    normalizeInMask(
      readVolume(path.join(cohortDir, `${patientId}_int_${name}.vgh`)),
      mask,
    ),
  );
  let label: Uint8Array | null = null;
  if (labelSource) {
    const vol = readVolume(path.join(cohortDir, `${patientId}_label_${labelSource}.vgh`));
    label = vol.data as Uint8Array;
  }
  return {
    id: patientId,
    dims: maskVol.dims,
    spacing: maskVol.spacing,
    mask,
    channels,
    label,
  };
}

export function patientSamples(p: PatientVolumes): Sample[] {
  const [nx, ny, nz] = p.dims;
  const plane = nx * ny;
  const samples: Sample[] = [];
  for (let z = 0; z < nz; z++) {
    const input = new Float32Array(IN_CHANNELS * plane);
    let ch = 0;
    for (const volume of p.channels) {
      for (const dz of [-1, 0, 1]) {
        const zz = Math.min(nz - 1, Math.max(0, z + dz));
        input.set(volume.subarray(zz * plane, (zz + 1) * plane), ch * plane);
        ch++;
      }
    }
    samples.push({
      patientId: p.id,
      z,
      h: ny,
      w: nx,
      input,
      target: p.label ? p.label.subarray(z * plane, (z + 1) * plane) as Uint8Array : new Uint8Array(plane),
      mask: p.mask.subarray(z * plane, (z + 1) * plane) as Uint8Array,
    });
  }
  return samples;
}

export function loadCohortSamples(
  cohortDir: string,
  labelSource: string,
  patientIds?: string[],
): Sample[] {
  const ids = patientIds ?? listPatients(cohortDir);
  const out: Sample[] = [];
  for (const id of ids) {
    out.push(...patientSamples(loadPatient(cohortDir, id, labelSource)));
  }
  return out;
}

/** In-mask class voxel counts over a set of patients' label volumes. */
export function classCounts(cohortDir: string, labelSource: string, ids: string[]): number[] {
  const counts = [0, 0, 0];
  for (const id of ids) {
    const p = loadPatient(cohortDir, id, labelSource);
    for (let i = 0; i < p.mask.length; i++) {
      if (p.mask[i]) counts[p.label![i]]++;
    }
  }
  return counts;
}

/** Crop a sample to size x size at (y0, x0); pixels keep channel-major order. */
export function cropSample(s: Sample, y0: number, x0: number, size: number): Sample {
  const input = new Float32Array(IN_CHANNELS * size * size);
  const target = new Uint8Array(size * size);
  const mask = new Uint8Array(size * size);
  for (let c = 0; c < IN_CHANNELS; c++) {
    for (let y = 0; y < size; y++) {
      const src = c * s.h * s.w + (y0 + y) * s.w + x0;
      input.set(s.input.subarray(src, src + size), c * size * size + y * size);
    }
  }
  for (let y = 0; y < size; y++) {
    const src = (y0 + y) * s.w + x0;
    target.set(s.target.subarray(src, src + size), y * size);
    mask.set(s.mask.subarray(src, src + size), y * size);
  }
  return { patientId: s.patientId, z: s.z, h: size, w: size, input, target, mask };
}
