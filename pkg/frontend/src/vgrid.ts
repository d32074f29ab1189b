/** VGRID volume I/O, byte-compatible with the Python toolkit.
 *
 * A volume is a `.vgh` text header (key = value lines: dims, spacing_mm,
 * dtype, order=xyz, byteorder=little, data=<raw file>) plus a dense raw
 * dump in x-fastest order. dtypes: u8, bool8, f32, f32x3 (per-voxel
 * normal/indolent/aggressive probability triple).
 */

import * as fs from "node:fs";
import * as path from "node:path";

export type Dtype = "u8" | "bool8" | "f32" | "f32x3";

export interface Volume {
  dims: [number, number, number]; // nx, ny, nz
  spacing: [number, number, number];
  dtype: Dtype;
  /** u8/bool8 -> Uint8Array; f32/f32x3 -> Float32Array (x fastest). */
  data: Uint8Array | Float32Array;
}

const REQUIRED_KEYS = ["dims", "spacing_mm", "dtype", "order", "byteorder", "data"];
const ELEMENT_FLOATS: Record<Dtype, number> = { u8: 0, bool8: 0, f32: 1, f32x3: 3 };

export function nvoxels(vol: { dims: [number, number, number] }): number {
  return vol.dims[0] * vol.dims[1] * vol.dims[2];
}

function parseHeader(text: string, file: string): Map<string, string> {
  const fields = new Map<string, string>();
  for (const rawLine of text.split("\n")) {
    const line = rawLine.trim();
    if (!line) continue;
    const eq = line.indexOf("=");
    if (eq < 0) throw new Error(`${file}: expected 'key = value', got ${line}`);
    const key = line.slice(0, eq).trim();
    const value = line.slice(eq + 1).trim();
    if (!key || !value) throw new Error(`${file}: empty key or value`);
    if (fields.has(key)) throw new Error(`${file}: duplicate field ${key}`);
    if (!REQUIRED_KEYS.includes(key)) throw new Error(`${file}: unknown field ${key}`);
    fields.set(key, value);
  }
  for (const key of REQUIRED_KEYS) {
    if (!fields.has(key)) throw new Error(`${file}: missing field ${key}`);
  }
  return fields;
}

export function readVolume(headerPath: string): Volume {
  const fields = parseHeader(fs.readFileSync(headerPath, "utf-8"), headerPath);
  const dims = fields.get("dims")!.split(/\s+/).map(Number);
  const spacing = fields.get("spacing_mm")!.split(/\s+/).map(Number);
  if (dims.length !== 3 || dims.some((d) => !Number.isInteger(d) || d < 1)) {
    throw new Error(`${headerPath}: bad dims`);
  }
  if (spacing.length !== 3 || spacing.some((s) => !(s > 0))) {
    throw new Error(`${headerPath}: bad spacing_mm`);
  }
  const dtype = fields.get("dtype") as Dtype;
  if (!(dtype in ELEMENT_FLOATS)) throw new Error(`${headerPath}: unknown dtype ${dtype}`);
  if (fields.get("order") !== "xyz") throw new Error(`${headerPath}: order must be xyz`);
  if (fields.get("byteorder") !== "little") {
    throw new Error(`${headerPath}: byteorder must be little`);
  }
  const rawPath = path.join(path.dirname(headerPath), fields.get("data")!);
  const raw = fs.readFileSync(rawPath);
  const n = dims[0] * dims[1] * dims[2];
  if (dtype === "u8" || dtype === "bool8") {
    if (raw.length !== n) throw new Error(`${rawPath}: raw length ${raw.length} != ${n}`);
    const data = new Uint8Array(raw.buffer.slice(raw.byteOffset, raw.byteOffset + n));
    const limit = dtype === "u8" ? 2 : 1;
    for (let i = 0; i < n; i++) {
      if (data[i] > limit) throw new Error(`${rawPath}: voxel value ${data[i]} out of range`);
    }
    return { dims: dims as [number, number, number], spacing: spacing as [number, number, number], dtype, data };
  }
  const floats = n * ELEMENT_FLOATS[dtype];
  if (raw.length !== floats * 4) {
    throw new Error(`${rawPath}: raw length ${raw.length} != ${floats * 4}`);
  }
  const view = new DataView(raw.buffer, raw.byteOffset, raw.length);
  const data = new Float32Array(floats);
  for (let i = 0; i < floats; i++) {
    data[i] = view.getFloat32(i * 4, true);
    if (!Number.isFinite(data[i])) throw new Error(`${rawPath}: non-finite value`);
  }
  return { dims: dims as [number, number, number], spacing: spacing as [number, number, number], dtype, data };
}

/** Shortest decimal form for the header (matches Python's repr for floats). */
function fmtNumber(v: number): string {
  return Number.isInteger(v) ? `${v}.0` : String(v);
}

export function writeVolume(vol: Volume, headerPath: string): void {
  if (!headerPath.endsWith(".vgh")) headerPath += ".vgh";
  const rawName = path.basename(headerPath).replace(/\.vgh$/, ".raw");
  const [nx, ny, nz] = vol.dims;
  const [sx, sy, sz] = vol.spacing;
  const header =
    `dims = ${nx} ${ny} ${nz}\n` +
    `spacing_mm = ${fmtNumber(sx)} ${fmtNumber(sy)} ${fmtNumber(sz)}\n` +
    `dtype = ${vol.dtype}\n` +
    "order = xyz\n" +
    "byteorder = little\n" +
    `data = ${rawName}\n`;
  const n = nvoxels(vol);
  let payload: Buffer;
  if (vol.dtype === "u8" || vol.dtype === "bool8") {
    if (vol.data.length !== n) throw new Error("data length mismatch");
    payload = Buffer.from(vol.data as Uint8Array);
  } else {
    const floats = n * ELEMENT_FLOATS[vol.dtype];
    if (vol.data.length !== floats) throw new Error("data length mismatch");
    payload = Buffer.alloc(floats * 4);
    for (let i = 0; i < floats; i++) payload.writeFloatLE((vol.data as Float32Array)[i], i * 4);
  }
  fs.writeFileSync(headerPath, header, "utf-8");
  fs.writeFileSync(path.join(path.dirname(headerPath), rawName), payload);
}

export function readManifest(filePath: string): Map<string, string> {
  const fields = new Map<string, string>();
  for (const rawLine of fs.readFileSync(filePath, "utf-8").split("\n")) {
    const line = rawLine.trim();
    if (!line) continue;
    const eq = line.indexOf("=");
    if (eq < 0) throw new Error(`${filePath}: expected 'key = value'`);
    const key = line.slice(0, eq).trim();
    if (fields.has(key)) throw new Error(`${filePath}: duplicate key ${key}`);
    fields.set(key, line.slice(eq + 1).trim());
  }
  return fields;
}

export function listPatients(cohortDir: string): string[] {
  return fs
    .readdirSync(cohortDir)
    .filter((f) => f.endsWith("_mask.vgh"))
    .map((f) => f.slice(0, -"_mask.vgh".length))
    .sort();
}
