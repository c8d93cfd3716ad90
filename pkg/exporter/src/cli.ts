#!/usr/bin/env node
// Usage: ddut-export export --input corpus.jsonl --encoder hash-768 --out out.ddut

import { existsSync } from 'node:fs';

import { CorpusFormatError } from './corpus.js';
import { EncoderError } from './encoder.js';
import { AlignmentError } from './pooling.js';
import { exportCorpus, manifestPath } from './export.js';

const USAGE =
  'usage: ddut-export export --input <corpus.jsonl> --encoder <id> --out <file.ddut>';

function parseArgs(argv: string[]): { input: string; encoder: string; out: string } {
  if (argv[0] !== 'export') {
    throw new Error(USAGE);
  }
  const options: Record<string, string> = {};
  for (let i = 1; i < argv.length; i += 2) {
    const flag = argv[i];
    const value = argv[i + 1];
    if (!flag.startsWith('--') || value === undefined) {
      throw new Error(USAGE);
    }
    options[flag.slice(2)] = value;
  }
  const { input, encoder, out, ...rest } = options;
  if (!input || !encoder || !out || Object.keys(rest).length > 0) {
    throw new Error(USAGE);
  }
  return { input, encoder, out };
}

export function main(argv: string[]): number {
  let args;
  try {
    args = parseArgs(argv);
  } catch (err) {
    console.error(String(err instanceof Error ? err.message : err));
    return 1;
  }
  if (!existsSync(args.input)) {
    console.error(`error: input corpus not found: ${args.input}`);
    return 2;
  }
  try {
    const manifest = exportCorpus(args.input, args.encoder, args.out);
    const docs = Object.keys(manifest.documents).length;
    const tokens = Object.values(manifest.documents).reduce((a, b) => a + b, 0);
    console.log(
      `exported ${docs} documents, ${tokens} tokens, dim ${manifest.dim} ` +
        `-> ${args.out}`,
    );
    console.log(`manifest: ${manifestPath(args.out)} (sha256 ${manifest.checksum})`);
    return 0;
  } catch (err) {
    if (
      err instanceof CorpusFormatError ||
      err instanceof EncoderError ||
      err instanceof AlignmentError
    ) {
      console.error(`error: ${err.message}`);
      return 1;
    }
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    return 2;
  }
}

if (import.meta.url === `file://${process.argv[1]}`) {
  process.exit(main(process.argv.slice(2)));
}
