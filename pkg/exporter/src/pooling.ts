// Document encoding: sub-tokenize, encode in overlapping windows, average
// the overlaps, then mean-pool sub-token vectors back to corpus tokens so
// the output has exactly one vector per input token.

import { SubTokenEncoder, subTokenize } from './encoder.js';

export class AlignmentError extends Error {}

export function encodeDocumentTokens(
  encoder: SubTokenEncoder,
  tokens: string[],
  docId: string,
): Float64Array[] {
  const subTokens: string[] = [];
  const owner: number[] = []; // sub-token index -> corpus token index
  tokens.forEach((token, tokenIndex) => {
    const parts = subTokenize(token);
    if (parts.length === 0) {
      throw new AlignmentError(
        `${docId}: token ${tokenIndex} (${JSON.stringify(token)}) produced ` +
          'no sub-tokens',
      );
    }
    for (const part of parts) {
      subTokens.push(part);
      owner.push(tokenIndex);
    }
  });

  // Encode in windows; positions covered by several windows get the mean
  // of their per-window vectors.
  const total = subTokens.length;
  const sums: Float64Array[] = Array.from(
    { length: total },
    () => new Float64Array(encoder.dim),
  );
  const counts = new Array<number>(total).fill(0);
  const starts: number[] = [];
  if (total <= encoder.windowSize) {
    starts.push(0);
  } else {
    for (let start = 0; start < total; start += encoder.stride) {
      starts.push(start);
      if (start + encoder.windowSize >= total) break;
    }
  }
  for (const start of starts) {
    const window = subTokens.slice(start, start + encoder.windowSize);
    const vectors = encoder.encodeWindow(window);
    vectors.forEach((vec, offset) => {
      const position = start + offset;
      const sum = sums[position];
      for (let i = 0; i < encoder.dim; i++) sum[i] += vec[i];
      counts[position]++;
    });
  }

  // Mean-pool sub-token vectors to corpus tokens.
  const pooled = tokens.map(() => new Float64Array(encoder.dim));
  const subPerToken = new Array<number>(tokens.length).fill(0);
  for (let position = 0; position < total; position++) {
    const tokenIndex = owner[position];
    const target = pooled[tokenIndex];
    const count = counts[position];
    const sum = sums[position];
    for (let i = 0; i < encoder.dim; i++) target[i] += sum[i] / count;
    subPerToken[tokenIndex]++;
  }
  pooled.forEach((vec, tokenIndex) => {
    const n = subPerToken[tokenIndex];
    for (let i = 0; i < encoder.dim; i++) vec[i] /= n;
  });
  return pooled;
}
