#!/usr/bin/env node
import { parseArgs } from "node:util";
import { pathToFileURL } from "node:url";
import { extract } from "./extract.js";

const USAGE = `usage: embed-extract extract --corpus <path> [--encoder <name>] --out <prefix>

Reads a tab-separated corpus (label<TAB>text per line) and writes
<prefix>.feat, <prefix>.labels, and <prefix>.manifest. The default encoder
"hash-768" is a deterministic offline feature hasher; pass a pretrained
model id to embed with transformers.js instead.`;

export async function main(argv: string[]): Promise<number> {
  if (argv[0] !== "extract") {
    console.error(USAGE);
    return 2;
  }
  let values;
  try {
    ({ values } = parseArgs({
      args: argv.slice(1),
      options: {
        corpus: { type: "string" },
        encoder: { type: "string", default: "hash-768" },
        out: { type: "string" },
      },
    }));
  } catch (error) {
    console.error(`error: ${(error as Error).message}`);
    return 2;
  }
  if (!values.corpus || !values.out) {
    console.error(USAGE);
    return 2;
  }
  try {
    const result = await extract(values.corpus, values.encoder!, values.out);
    console.log(`embedded ${result.rows} rows at dimension ${result.dimension}`);
    for (const path of Object.values(result.files)) {
      console.log(`wrote ${path}`);
    }
  } catch (error) {
    console.error(`error: ${(error as Error).message}`);
    return 1;
  }
  return 0;
}

const invokedDirectly =
  process.argv[1] !== undefined &&
  import.meta.url === pathToFileURL(process.argv[1]).href;
if (invokedDirectly) {
  main(process.argv.slice(2)).then((code) => {
    process.exitCode = code;
  });
}
