/**
 * Sentence encoders behind one interface. "hash-768" is the built-in
 * fallback: a feature-hashing encoder that needs no model download and is
 * bit-reproducible, so pipelines stay testable on machines that cannot
 * reach a model hub. Any other name is treated as a pretrained model id
 * and run through transformers.js with mean pooling over the final layer.
 */

export interface Encoder {
  readonly name: string;
  readonly pooling: string;
  encode(texts: string[]): Promise<Float64Array[]>;
}

export class EncoderLoadError extends Error {}

export const HASH_DIMENSION = 768;

/** FNV-1a, 32-bit. Stable across platforms, which is the whole point. */
function fnv1a(text: string): number {
  let hash = 0x811c9dc5;
  for (let i = 0; i < text.length; i++) {
    hash ^= text.charCodeAt(i);
    hash = Math.imul(hash, 0x01000193) >>> 0;
  }
  return hash;
}

function tokenize(text: string): string[] {
  return text.toLowerCase().split(/[^\p{L}\p{N}]+/u).filter((t) => t.length > 0);
}

export function hashEmbed(text: string): Float64Array {
  const row = new Float64Array(HASH_DIMENSION);
  const tokens = tokenize(text);
  const grams = tokens.slice();
  for (let i = 0; i + 1 < tokens.length; i++) {
    grams.push(`${tokens[i]} ${tokens[i + 1]}`);
  }
  for (const gram of grams) {
    const hash = fnv1a(gram);
    const bucket = hash % HASH_DIMENSION;
    const sign = (hash & 0x80000000) === 0 ? 1.0 : -1.0;
    row[bucket] += sign;
  }
  let squared = 0.0;
  for (const value of row) squared += value * value;
  const norm = Math.sqrt(squared);
  if (norm > 0) {
    for (let i = 0; i < row.length; i++) row[i] /= norm;
  }
  return row;
}

const hashEncoder: Encoder = {
  name: "hash-768",
  pooling: "token-hashing",
  async encode(texts) {
    return texts.map(hashEmbed);
  },
};

function pretrainedEncoder(name: string): Encoder {
  return {
    name,
    pooling: "mean",
    async encode(texts) {
      // Optional dependency, resolved at run time so the package builds and
      // tests without it.
      const moduleName = "@huggingface/transformers";
      let pipeline;
      try {
        ({ pipeline } = await import(moduleName));
      } catch {
        throw new EncoderLoadError(
          `encoder load failure for ${name}: ${moduleName} is not installed ` +
            `(npm install ${moduleName})`,
        );
      }
      let extract;
      try {
        extract = await pipeline("feature-extraction", name);
      } catch (cause) {
        throw new EncoderLoadError(
          `encoder load failure for ${name}: ${(cause as Error).message}`,
        );
      }
      const rows: Float64Array[] = [];
      for (const text of texts) {
        const output = await extract(text, { pooling: "mean", normalize: false });
        rows.push(Float64Array.from(output.data as Iterable<number>));
      }
      return rows;
    },
  };
}

export function selectEncoder(name: string): Encoder {
  return name === hashEncoder.name ? hashEncoder : pretrainedEncoder(name);
}
