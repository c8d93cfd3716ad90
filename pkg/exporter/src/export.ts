// Orchestration: corpus in, DDUT file + JSON manifest out.

import { createHash } from 'node:crypto';
import { renameSync, writeFileSync } from 'node:fs';

import { readCorpus, tokenCount, flatTokens } from './corpus.js';
import { getEncoder } from './encoder.js';
import { encodeDocumentTokens } from './pooling.js';
import { writeDdut, DocumentBlock } from './ddut.js';

export interface ExportManifest {
  corpus: string;
  encoder: string;
  dim: number;
  documents: Record<string, number>;
  checksum: string;
}

export class ExportError extends Error {}

export function manifestPath(outPath: string): string {
  return `${outPath}.manifest.json`;
}

export function exportCorpus(
  corpusPath: string,
  encoderId: string,
  outPath: string,
): ExportManifest {
  const docs = readCorpus(corpusPath);
  const encoder = getEncoder(encoderId);

  const blocks: DocumentBlock[] = [];
  const documents: Record<string, number> = {};
  for (const doc of docs) {
    const tokens = flatTokens(doc);
    const vectors = encodeDocumentTokens(encoder, tokens, doc.docId);
    if (vectors.length !== tokenCount(doc)) {
      throw new ExportError(
        `${doc.docId}: encoded ${vectors.length} vectors for ` +
          `${tokenCount(doc)} tokens`,
      );
    }
    blocks.push({ docId: doc.docId, vectors });
    documents[doc.docId] = vectors.length;
  }

  const data = writeDdut(outPath, encoder.dim, blocks);
  const manifest: ExportManifest = {
    corpus: corpusPath,
    encoder: encoder.id,
    dim: encoder.dim,
    documents,
    checksum: createHash('sha256').update(data).digest('hex'),
  };
  const tmp = `${manifestPath(outPath)}.tmp-${process.pid}`;
  writeFileSync(tmp, JSON.stringify(manifest, null, 2) + '\n');
  renameSync(tmp, manifestPath(outPath));
  return manifest;
}
