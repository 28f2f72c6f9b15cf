import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import {
  MAGIC,
  encodeFeatures,
  readFeatureFile,
  writeFeatureFile,
  writeLabelFile,
} from "../src/featfile.js";
import { readFileSync } from "node:fs";

function scratch(): string {
  return mkdtempSync(join(tmpdir(), "featfile-"));
}

describe("encodeFeatures", () => {
  it("lays out header and payload exactly", () => {
    const buffer = encodeFeatures([Float64Array.from([1.5, -2.0])], 2);
    expect(buffer.length).toBe(8 + 16 + 16);
    expect(buffer.subarray(0, 8).toString("latin1")).toBe("GFEAT64\0");
    expect(buffer.readBigUInt64LE(8)).toBe(1n);
    expect(buffer.readBigUInt64LE(16)).toBe(2n);
    // 1.5 in IEEE 754 binary64, little-endian
    expect([...buffer.subarray(24, 32)]).toEqual([0, 0, 0, 0, 0, 0, 0xf8, 0x3f]);
    expect(buffer.readDoubleLE(32)).toBe(-2.0);
  });

  it("rejects ragged rows", () => {
    expect(() => encodeFeatures([Float64Array.from([1, 2, 3])], 2)).toThrow(
      /expected 2/,
    );
  });
});

describe("feature file round trip", () => {
  it("survives write and read bit for bit", () => {
    const dir = scratch();
    const path = join(dir, "x.feat");
    const rows = [
      Float64Array.from([0.1, -0.25, 1e-300]),
      Float64Array.from([Number.MIN_VALUE, 42.0, -0.0]),
    ];
    writeFeatureFile(path, rows, 3);
    const back = readFeatureFile(path);
    expect(back.rows).toBe(2);
    expect(back.dimension).toBe(3);
    const flattened = Float64Array.from([...rows[0], ...rows[1]]);
    expect(Buffer.from(back.data.buffer).equals(Buffer.from(flattened.buffer))).toBe(
      true,
    );
  });

  it("rejects a wrong magic", () => {
    const dir = scratch();
    const path = join(dir, "bad.feat");
    writeFileSync(path, Buffer.from("NOTAFEAT00000000000000000000"));
    expect(() => readFeatureFile(path)).toThrow(/not a feature file/);
  });

  it("rejects truncated payloads", () => {
    const dir = scratch();
    const path = join(dir, "short.feat");
    const good = encodeFeatures([Float64Array.from([1, 2])], 2);
    writeFileSync(path, good.subarray(0, good.length - 4));
    expect(() => readFeatureFile(path)).toThrow(/header implies/);
  });
});

describe("writeLabelFile", () => {
  it("writes one label per line in order", () => {
    const dir = scratch();
    const path = join(dir, "x.labels");
    writeLabelFile(path, ["b", "a", "b"]);
    expect(readFileSync(path, "utf8")).toBe("b\na\nb\n");
  });
});

describe("MAGIC", () => {
  it("is eight bytes with a trailing NUL", () => {
    expect(MAGIC.length).toBe(8);
    expect(MAGIC[7]).toBe(0);
  });
});
