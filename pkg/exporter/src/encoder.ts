// Pluggable sub-token encoders. An encoder sees one window of sub-tokens
// at a time and returns a vector per sub-token; anything matching this
// interface (a transformer runtime included) can sit behind the exporter.
//
// The built-in "hash-<dim>" encoder is fully deterministic and local: each
// sub-token gets a content vector derived from a SHA-256 hash, mixed with a
// sinusoidal signal for its position inside the window. Window position
// matters, so overlap averaging is observable, and no model download is
// ever needed.

import { createHash } from 'node:crypto';

export interface SubTokenEncoder {
  readonly id: string;
  readonly dim: number;
  /** Maximum sub-tokens per encoded window. */
  readonly windowSize: number;
  /** Window start step for long documents. */
  readonly stride: number;
  encodeWindow(subTokens: string[]): Float64Array[];
}

export class EncoderError extends Error {}

/**
 * Split a corpus token into sub-tokens: lowercase chunks of at most four
 * characters, continuation chunks marked with a leading "##". Tokens with
 * no non-whitespace content produce no sub-tokens (an alignment failure
 * upstream).
 */
export function subTokenize(token: string): string[] {
  const text = token.trim().toLowerCase();
  if (!text) return [];
  const parts: string[] = [];
  for (let i = 0; i < text.length; i += 4) {
    const chunk = text.slice(i, i + 4);
    parts.push(i === 0 ? chunk : `##${chunk}`);
  }
  return parts;
}

// Deterministic uniform values in [-1, 1] from a seed string, via SHA-256
// rehashing in counter mode. Stable across platforms and runs.
function hashVector(seed: string, dim: number): Float64Array {
  const out = new Float64Array(dim);
  let filled = 0;
  let counter = 0;
  while (filled < dim) {
    const digest = createHash('sha256')
      .update(`${seed}${counter}`)
      .digest();
    for (let off = 0; off + 4 <= digest.length && filled < dim; off += 4) {
      const u = digest.readUInt32LE(off);
      out[filled++] = (u / 0xffffffff) * 2 - 1;
    }
    counter++;
  }
  return out;
}

function positionSignal(position: number, dim: number): Float64Array {
  const out = new Float64Array(dim);
  for (let i = 0; i < dim; i++) {
    const angle = position / Math.pow(10000, (2 * Math.floor(i / 2)) / dim);
    out[i] = i % 2 === 0 ? Math.sin(angle) : Math.cos(angle);
  }
  return out;
}

export class HashEncoder implements SubTokenEncoder {
  readonly id: string;
  readonly dim: number;
  readonly windowSize: number;
  readonly stride: number;
  private cache = new Map<string, Float64Array>();

  constructor(dim: number, windowSize = 512, stride = 256) {
    if (!Number.isInteger(dim) || dim < 1) {
      throw new EncoderError(`bad encoder dimension ${dim}`);
    }
    this.id = `hash-${dim}`;
    this.dim = dim;
    this.windowSize = windowSize;
    this.stride = stride;
  }

  private contentVector(subToken: string): Float64Array {
    let vec = this.cache.get(subToken);
    if (!vec) {
      vec = hashVector(`${this.id}${subToken}`, this.dim);
      this.cache.set(subToken, vec);
    }
    return vec;
  }

  encodeWindow(subTokens: string[]): Float64Array[] {
    if (subTokens.length > this.windowSize) {
      throw new EncoderError(
        `window of ${subTokens.length} sub-tokens exceeds size ${this.windowSize}`,
      );
    }
    return subTokens.map((sub, pos) => {
      const content = this.contentVector(sub);
      const signal = positionSignal(pos, this.dim);
      const out = new Float64Array(this.dim);
      for (let i = 0; i < this.dim; i++) {
        out[i] = 0.8 * content[i] + 0.2 * signal[i];
      }
      return out;
    });
  }
}

/** Resolve an encoder identifier, currently "hash-<dim>". */
export function getEncoder(id: string): SubTokenEncoder {
  const match = /^hash-(\d+)$/.exec(id);
  if (match) {
    return new HashEncoder(Number(match[1]));
  }
  throw new EncoderError(
    `unknown encoder ${id}; built-in encoders match hash-<dim>`,
  );
}
