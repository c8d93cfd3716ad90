// The DDUT binary embedding container (little-endian):
//   magic "DDUT" | u32 version=1 | u32 dim
//   per document: u16 byte-length + doc_id utf-8, u32 token_count,
//                 token_count * dim float32 row-major
// Writes are atomic: a temp file in the target directory, then rename.

import { readFileSync, renameSync, writeFileSync } from 'node:fs';

export const DDUT_MAGIC = 'DDUT';
export const DDUT_VERSION = 1;

export class DdutError extends Error {}

export interface DocumentBlock {
  docId: string;
  vectors: Float64Array[];
}

export function serializeDdut(dim: number, blocks: DocumentBlock[]): Buffer {
  const parts: Buffer[] = [];
  const header = Buffer.alloc(12);
  header.write(DDUT_MAGIC, 0, 'ascii');
  header.writeUInt32LE(DDUT_VERSION, 4);
  header.writeUInt32LE(dim, 8);
  parts.push(header);

  for (const block of blocks) {
    const idBytes = Buffer.from(block.docId, 'utf-8');
    const head = Buffer.alloc(2 + idBytes.length + 4);
    head.writeUInt16LE(idBytes.length, 0);
    idBytes.copy(head, 2);
    head.writeUInt32LE(block.vectors.length, 2 + idBytes.length);
    parts.push(head);

    const payload = Buffer.alloc(block.vectors.length * dim * 4);
    block.vectors.forEach((vec, row) => {
      if (vec.length !== dim) {
        throw new DdutError(
          `${block.docId}: row ${row} has dim ${vec.length}, expected ${dim}`,
        );
      }
      for (let i = 0; i < dim; i++) {
        const value = Math.fround(vec[i]);
        if (!Number.isFinite(value)) {
          throw new DdutError(`${block.docId}: non-finite value in row ${row}`);
        }
        payload.writeFloatLE(value, (row * dim + i) * 4);
      }
    });
    parts.push(payload);
  }
  return Buffer.concat(parts);
}

export function writeDdut(
  path: string,
  dim: number,
  blocks: DocumentBlock[],
): Buffer {
  const data = serializeDdut(dim, blocks);
  const tmp = `${path}.tmp-${process.pid}`;
  writeFileSync(tmp, data);
  renameSync(tmp, path);
  return data;
}

export interface DdutFile {
  dim: number;
  documents: Map<string, Float32Array[]>;
}

/** Reader used for self-checks and tests; mirrors the primary loader. */
export function readDdut(path: string): DdutFile {
  const data = readFileSync(path);
  let off = 0;
  const need = (n: number, what: string) => {
    if (off + n > data.length) {
      throw new DdutError(
        `truncated DDUT file: needed ${n} bytes for ${what} at offset ${off}`,
      );
    }
    const start = off;
    off += n;
    return start;
  };
  if (data.toString('ascii', need(4, 'magic'), 4) !== DDUT_MAGIC) {
    throw new DdutError('bad magic; not a DDUT file');
  }
  const version = data.readUInt32LE(need(4, 'version'));
  if (version !== DDUT_VERSION) {
    throw new DdutError(`unsupported DDUT version ${version}`);
  }
  const dim = data.readUInt32LE(need(4, 'dim'));
  const documents = new Map<string, Float32Array[]>();
  while (off < data.length) {
    const idLen = data.readUInt16LE(need(2, 'doc_id length'));
    const idStart = need(idLen, 'doc_id');
    const docId = data.toString('utf-8', idStart, idStart + idLen);
    if (documents.has(docId)) {
      throw new DdutError(`duplicate doc_id ${docId}`);
    }
    const count = data.readUInt32LE(need(4, 'token count'));
    const rows: Float32Array[] = [];
    for (let row = 0; row < count; row++) {
      const start = need(dim * 4, `vectors of ${docId}`);
      const vec = new Float32Array(dim);
      for (let i = 0; i < dim; i++) vec[i] = data.readFloatLE(start + i * 4);
      rows.push(vec);
    }
    documents.set(docId, rows);
  }
  return { dim, documents };
}
