import { readCorpus } from "./corpus.js";
import { selectEncoder } from "./encoder.js";
import { writeFeatureFile, writeLabelFile } from "./featfile.js";
import { writeFileSync } from "node:fs";

export interface ExtractResult {
  rows: number;
  dimension: number;
  files: { features: string; labels: string; manifest: string };
}

/**
 * Corpus in, three files out: <prefix>.feat, <prefix>.labels, and a
 * <prefix>.manifest JSON recording how the embeddings were produced. Row
 * order follows corpus order exactly.
 */
export async function extract(
  corpusPath: string,
  encoderName: string,
  outPrefix: string,
): Promise<ExtractResult> {
  const corpus = readCorpus(corpusPath);
  const encoder = selectEncoder(encoderName);
  const rows = await encoder.encode(corpus.map((record) => record.text));
  const dimension = rows[0].length;

  const files = {
    features: `${outPrefix}.feat`,
    labels: `${outPrefix}.labels`,
    manifest: `${outPrefix}.manifest`,
  };
  writeFeatureFile(files.features, rows, dimension);
  writeLabelFile(files.labels, corpus.map((record) => record.label));
  const manifest = {
    format: "GFEAT64",
    encoder: encoder.name,
    pooling: encoder.pooling,
    rows: rows.length,
    dimension,
    corpus: corpusPath,
  };
  writeFileSync(files.manifest, `${JSON.stringify(manifest, null, 2)}\n`);
  return { rows: rows.length, dimension, files };
}
