/**
 * Binary feature-file layout shared with the graph workbench loader:
 * 8-byte magic "GFEAT64\0", then row and column counts as little-endian
 * u64, then the matrix as little-endian float64, row-major. Labels ride in
 * a plain text file, one label per line, in row order.
 */

import { readFileSync, writeFileSync } from "node:fs";

export const MAGIC = Buffer.from("GFEAT64\0", "latin1");
const HEADER_BYTES = MAGIC.length + 16;

export function encodeFeatures(rows: Float64Array[], dimension: number): Buffer {
  const out = Buffer.alloc(HEADER_BYTES + rows.length * dimension * 8);
  MAGIC.copy(out, 0);
  out.writeBigUInt64LE(BigInt(rows.length), MAGIC.length);
  out.writeBigUInt64LE(BigInt(dimension), MAGIC.length + 8);
  let offset = HEADER_BYTES;
  for (const row of rows) {
    if (row.length !== dimension) {
      throw new Error(`row has ${row.length} values, expected ${dimension}`);
    }
    for (const value of row) {
      out.writeDoubleLE(value, offset);
      offset += 8;
    }
  }
  return out;
}

export function writeFeatureFile(
  path: string,
  rows: Float64Array[],
  dimension: number,
): void {
  writeFileSync(path, encodeFeatures(rows, dimension));
}

/** Read back a feature file; used by the round-trip tests. */
export function readFeatureFile(path: string): {
  rows: number;
  dimension: number;
  data: Float64Array;
} {
  const raw = readFileSync(path);
  if (raw.length < HEADER_BYTES || !raw.subarray(0, MAGIC.length).equals(MAGIC)) {
    throw new Error(`${path}: not a feature file`);
  }
  const rows = Number(raw.readBigUInt64LE(MAGIC.length));
  const dimension = Number(raw.readBigUInt64LE(MAGIC.length + 8));
  const expected = HEADER_BYTES + rows * dimension * 8;
  if (raw.length !== expected) {
    throw new Error(`${path}: payload is ${raw.length} bytes, header implies ${expected}`);
  }
  const data = new Float64Array(rows * dimension);
  for (let i = 0; i < data.length; i++) {
    data[i] = raw.readDoubleLE(HEADER_BYTES + i * 8);
  }
  return { rows, dimension, data };
}

export function writeLabelFile(path: string, labels: string[]): void {
  writeFileSync(path, labels.map((label) => `${label}\n`).join(""));
}
