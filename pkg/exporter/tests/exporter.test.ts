import { mkdtempSync, readdirSync, writeFileSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';
import { describe, expect, it } from 'vitest';

import { readCorpus, tokenCount, CorpusFormatError } from '../src/corpus.js';
import {
  HashEncoder,
  getEncoder,
  subTokenize,
  EncoderError,
} from '../src/encoder.js';
import { encodeDocumentTokens, AlignmentError } from '../src/pooling.js';
import { readDdut, serializeDdut, writeDdut } from '../src/ddut.js';
import { exportCorpus } from '../src/export.js';

function tmp(): string {
  return mkdtempSync(join(tmpdir(), 'ddut-'));
}

function corpusLine(docId: string, utterances: string[][]): string {
  return JSON.stringify({
    doc_id: docId,
    utterances: utterances.map((tokens, i) => ({
      speaker: `S${i % 2}`,
      tokens,
    })),
  });
}

function writeCorpus(path: string, lines: string[]): void {
  writeFileSync(path, lines.join('\n') + '\n');
}

describe('corpus reader', () => {
  it('reads documents and counts tokens', () => {
    const dir = tmp();
    const path = join(dir, 'c.jsonl');
    writeCorpus(path, [
      corpusLine('a', [['hello', 'there'], ['ok']]),
      corpusLine('b', [['one', 'two', 'three']]),
    ]);
    const docs = readCorpus(path);
    expect(docs.map(d => d.docId)).toEqual(['a', 'b']);
    expect(docs.map(tokenCount)).toEqual([3, 3]);
  });

  it('reports malformed JSON with the line number', () => {
    const dir = tmp();
    const path = join(dir, 'c.jsonl');
    writeFileSync(path, corpusLine('a', [['x']]) + '\n{nope\n');
    expect(() => readCorpus(path)).toThrowError(/line 2/);
  });

  it('rejects duplicate doc ids and empty utterances', () => {
    const dir = tmp();
    const path = join(dir, 'c.jsonl');
    writeCorpus(path, [corpusLine('a', [['x']]), corpusLine('a', [['y']])]);
    expect(() => readCorpus(path)).toThrowError(CorpusFormatError);

    const path2 = join(dir, 'c2.jsonl');
    writeCorpus(path2, [corpusLine('a', [[]])]);
    expect(() => readCorpus(path2)).toThrowError(CorpusFormatError);
  });
});

describe('sub-tokenizer and hash encoder', () => {
  it('chunks long tokens with continuation markers', () => {
    expect(subTokenize('it')).toEqual(['it']);
    expect(subTokenize('Telecommunications')).toEqual([
      'tele',
      '##comm',
      '##unic',
      '##atio',
      '##ns',
    ]);
    expect(subTokenize('   ')).toEqual([]);
  });

  it('is deterministic per window and position-sensitive', () => {
    const enc = new HashEncoder(16);
    const [a1, b1] = enc.encodeWindow(['plan', 'plan']);
    const [a2] = enc.encodeWindow(['plan', 'plan']);
    expect(Array.from(a1)).toEqual(Array.from(a2));
    // Same sub-token at different window positions differs.
    expect(Array.from(a1)).not.toEqual(Array.from(b1));
  });

  it('resolves encoder ids', () => {
    expect(getEncoder('hash-768').dim).toBe(768);
    expect(getEncoder('hash-8').windowSize).toBe(512);
    expect(() => getEncoder('spooky-99')).toThrowError(EncoderError);
  });

  it('rejects oversized windows', () => {
    const enc = new HashEncoder(4, 8, 4);
    expect(() =>
      enc.encodeWindow(Array.from({ length: 9 }, () => 'x')),
    ).toThrowError(EncoderError);
  });
});

describe('document encoding', () => {
  it('short document equals a single-window encode, mean-pooled', () => {
    const enc = new HashEncoder(8);
    const tokens = ['the', 'move', 'closely', 'follows'];
    const pooled = encodeDocumentTokens(enc, tokens, 'd');

    const subs = tokens.flatMap(subTokenize);
    const vectors = enc.encodeWindow(subs);
    let cursor = 0;
    tokens.forEach((token, t) => {
      const n = subTokenize(token).length;
      const expected = new Float64Array(enc.dim);
      for (let k = 0; k < n; k++) {
        for (let i = 0; i < enc.dim; i++) expected[i] += vectors[cursor + k][i];
      }
      for (let i = 0; i < enc.dim; i++) expected[i] /= n;
      cursor += n;
      expect(Array.from(pooled[t])).toEqual(Array.from(expected));
    });
  });

  it('window-spanning document stays aligned and finite', () => {
    const enc = new HashEncoder(6, 32, 16); // small window to force spans
    const tokens = Array.from({ length: 100 }, (_, i) => `token${i}`);
    const pooled = encodeDocumentTokens(enc, tokens, 'long');
    expect(pooled.length).toBe(100);
    for (const vec of pooled) {
      expect(vec.length).toBe(6);
      for (const v of vec) expect(Number.isFinite(v)).toBe(true);
    }
  });

  it('overlapped positions average their per-window vectors', () => {
    const enc = new HashEncoder(4, 4, 2);
    // Six single-sub-token words: windows [0..3], [2..5], [4..5].
    const tokens = ['aa', 'bb', 'cc', 'dd', 'ee', 'ff'];
    const pooled = encodeDocumentTokens(enc, tokens, 'd');

    // Position 2 ("cc") is covered by window 0 (offset 2) and window 1
    // (offset 0); recompute the average directly.
    const w0 = enc.encodeWindow(['aa', 'bb', 'cc', 'dd']);
    const w1 = enc.encodeWindow(['cc', 'dd', 'ee', 'ff']);
    const expected = w0[2].map((v, i) => (v + w1[0][i]) / 2);
    expect(Array.from(pooled[2])).toEqual(Array.from(expected));
  });

  it('names the document and token on alignment failure', () => {
    const enc = new HashEncoder(4);
    expect(() => encodeDocumentTokens(enc, ['ok', ' '], 'doc-7')).toThrowError(
      AlignmentError,
    );
    try {
      encodeDocumentTokens(enc, ['ok', ' '], 'doc-7');
    } catch (err) {
      expect(String(err)).toContain('doc-7');
      expect(String(err)).toContain('token 1');
    }
  });
});

describe('ddut container', () => {
  it('write-then-read is the identity (after float32 rounding)', () => {
    const dir = tmp();
    const path = join(dir, 'e.ddut');
    const vectors = [
      new Float64Array([0.125, -1.5, 3.25]),
      new Float64Array([7.0, 0.0, -0.0625]),
    ];
    writeDdut(path, 3, [{ docId: 'doc', vectors }]);
    const file = readDdut(path);
    expect(file.dim).toBe(3);
    expect(Array.from(file.documents.get('doc')![0])).toEqual([0.125, -1.5, 3.25]);
    expect(Array.from(file.documents.get('doc')![1])).toEqual([7.0, 0.0, -0.0625]);
  });

  it('atomic write leaves no temp files', () => {
    const dir = tmp();
    const path = join(dir, 'e.ddut');
    writeDdut(path, 2, [{ docId: 'd', vectors: [new Float64Array([1, 2])] }]);
    expect(readdirSync(dir)).toEqual(['e.ddut']);
  });

  it('rejects dimension mismatches and non-finite values', () => {
    expect(() =>
      serializeDdut(3, [{ docId: 'd', vectors: [new Float64Array([1, 2])] }]),
    ).toThrowError(/dim/);
    expect(() =>
      serializeDdut(1, [{ docId: 'd', vectors: [new Float64Array([NaN])] }]),
    ).toThrowError(/non-finite/);
  });
});

describe('export', () => {
  it('one 5-token document with a dim-768 encoder gives a 5x768 block', () => {
    const dir = tmp();
    const corpus = join(dir, 'c.jsonl');
    writeCorpus(corpus, [
      corpusLine('only', [['a', 'tiny', 'five', 'token', 'corpus']]),
    ]);
    const out = join(dir, 'c.ddut');
    const manifest = exportCorpus(corpus, 'hash-768', out);
    expect(manifest.documents).toEqual({ only: 5 });

    const file = readDdut(out);
    expect(file.dim).toBe(768);
    expect(file.documents.size).toBe(1);
    expect(file.documents.get('only')!.length).toBe(5);
    expect(file.documents.get('only')![0].length).toBe(768);
  });

  it('re-export produces an identical checksum', () => {
    const dir = tmp();
    const corpus = join(dir, 'c.jsonl');
    writeCorpus(corpus, [
      corpusLine('a', [['we', 'should', 'go'], ['that', 'works']]),
      corpusLine('b', [['long'.repeat(3), 'words', 'here']]),
    ]);
    const m1 = exportCorpus(corpus, 'hash-32', join(dir, 'one.ddut'));
    const m2 = exportCorpus(corpus, 'hash-32', join(dir, 'two.ddut'));
    expect(m1.checksum).toBe(m2.checksum);
  });

  it('manifest token counts match the corpus exactly', () => {
    const dir = tmp();
    const corpus = join(dir, 'c.jsonl');
    writeCorpus(corpus, [
      corpusLine('a', [['one', 'two'], ['three']]),
      corpusLine('b', [['four', 'five', 'six', 'seven']]),
    ]);
    const manifest = exportCorpus(corpus, 'hash-16', join(dir, 'c.ddut'));
    const docs = readCorpus(corpus);
    for (const doc of docs) {
      expect(manifest.documents[doc.docId]).toBe(tokenCount(doc));
    }
    expect(manifest.encoder).toBe('hash-16');
  });
});
