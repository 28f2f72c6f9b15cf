import { readFileSync } from "node:fs";

export interface CorpusRow {
  label: string;
  text: string;
}

/**
 * One record per line, label first, then a tab, then the text. Blank lines
 * are skipped so trailing newlines don't create phantom rows.
 */
export function parseCorpus(raw: string, source = "corpus"): CorpusRow[] {
  const rows: CorpusRow[] = [];
  const lines = raw.split("\n");
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i];
    if (line.trim() === "") continue;
    const tab = line.indexOf("\t");
    if (tab < 0) {
      throw new Error(`${source}:${i + 1}: expected "label<TAB>text"`);
    }
    const label = line.slice(0, tab);
    const text = line.slice(tab + 1);
    if (label === "") throw new Error(`${source}:${i + 1}: empty label`);
    if (text.trim() === "") throw new Error(`${source}:${i + 1}: empty text`);
    rows.push({ label, text });
  }
  if (rows.length === 0) {
    throw new Error(`${source}: empty corpus`);
  }
  return rows;
}

export function readCorpus(path: string): CorpusRow[] {
  return parseCorpus(readFileSync(path, "utf8"), path);
}
