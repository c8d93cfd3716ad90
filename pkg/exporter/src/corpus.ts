// Minimal reader for the canonical JSONL dialogue corpus: one document per
// line with doc_id and utterances carrying pre-tokenized text. Clusters and
// pos tags are ignored here; the exporter only needs tokens.

import { readFileSync } from 'node:fs';

export interface Utterance {
  speaker: string;
  tokens: string[];
}

export interface CorpusDocument {
  docId: string;
  utterances: Utterance[];
}

export class CorpusFormatError extends Error {}

export function tokenCount(doc: CorpusDocument): number {
  return doc.utterances.reduce((n, u) => n + u.tokens.length, 0);
}

export function flatTokens(doc: CorpusDocument): string[] {
  return doc.utterances.flatMap(u => u.tokens);
}

export function readCorpus(path: string): CorpusDocument[] {
  const text = readFileSync(path, 'utf-8');
  const docs: CorpusDocument[] = [];
  const seen = new Set<string>();
  const lines = text.split('\n');
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i].trim();
    if (!line) continue;
    let record: unknown;
    try {
      record = JSON.parse(line);
    } catch (err) {
      throw new CorpusFormatError(`line ${i + 1}: malformed JSON: ${err}`);
    }
    const obj = record as { doc_id?: unknown; utterances?: unknown };
    if (typeof obj.doc_id !== 'string' || !Array.isArray(obj.utterances)) {
      throw new CorpusFormatError(
        `line ${i + 1}: record must have doc_id and utterances`,
      );
    }
    if (seen.has(obj.doc_id)) {
      throw new CorpusFormatError(`line ${i + 1}: duplicate doc_id ${obj.doc_id}`);
    }
    seen.add(obj.doc_id);
    const utterances: Utterance[] = obj.utterances.map((u, j) => {
      const utt = u as { speaker?: unknown; tokens?: unknown };
      if (
        typeof utt.speaker !== 'string' ||
        !Array.isArray(utt.tokens) ||
        utt.tokens.length === 0 ||
        !utt.tokens.every(t => typeof t === 'string')
      ) {
        throw new CorpusFormatError(
          `line ${i + 1}: bad utterance ${j} in ${obj.doc_id}`,
        );
      }
      return { speaker: utt.speaker, tokens: utt.tokens as string[] };
    });
    docs.push({ docId: obj.doc_id, utterances });
  }
  return docs;
}
