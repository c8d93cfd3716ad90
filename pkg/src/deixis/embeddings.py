"""Per-token embedding vectors: binary file store and deterministic generator.

The binary format ("DDUT", little-endian) is:

    magic "DDUT" | u32 version=1 | u32 dim
    repeated:  u16 len | doc_id utf-8 | u32 token_count
               token_count * dim float32, row-major

Vectors are stored and served as float32; loading is bit-exact.
"""

from __future__ import annotations

import hashlib
import struct
from pathlib import Path

import numpy as np

from .corpus import Document

MAGIC = b"DDUT"
VERSION = 1


class EmbeddingError(Exception):
    pass


class EmbeddingStore:
    """Immutable map doc_id -> (token_count, dim) float32 matrix.

    Rows are ordered by (utterance index, token offset).
    """

    def __init__(self, dim: int, matrices: dict[str, np.ndarray]):
        if dim < 1:
            raise EmbeddingError("dim must be >= 1")
        self.dim = dim
        self._matrices: dict[str, np.ndarray] = {}
        for doc_id, mat in matrices.items():
            mat = np.asarray(mat, dtype=np.float32)
            if mat.ndim != 2 or mat.shape[1] != dim:
                raise EmbeddingError(
                    f"{doc_id}: matrix shape {mat.shape} does not match dim {dim}"
                )
            if not np.isfinite(mat).all():
                raise EmbeddingError(f"{doc_id}: non-finite embedding values")
            mat.flags.writeable = False
            self._matrices[doc_id] = mat

    def doc_ids(self) -> list[str]:
        return list(self._matrices)

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._matrices

    def matrix(self, doc_id: str) -> np.ndarray:
        try:
            return self._matrices[doc_id]
        except KeyError:
            raise EmbeddingError(f"no embeddings for document {doc_id!r}") from None

    def for_document(self, doc: Document) -> np.ndarray:
        mat = self.matrix(doc.doc_id)
        if mat.shape[0] != doc.token_count:
            raise EmbeddingError(
                f"{doc.doc_id}: store has {mat.shape[0]} rows but document "
                f"has {doc.token_count} tokens"
            )
        return mat


def load_embedding_file(path: str | Path) -> EmbeddingStore:
    data = Path(path).read_bytes()
    off = 0

    def need(n: int, what: str) -> bytes:
        nonlocal off
        if off + n > len(data):
            raise EmbeddingError(
                f"truncated embedding file: needed {n} bytes for {what} at "
                f"byte offset {off}, file has {len(data)}"
            )
        chunk = data[off : off + n]
        off += n
        return chunk

    if need(4, "magic") != MAGIC:
        raise EmbeddingError("bad magic; not a DDUT embedding file")
    (version,) = struct.unpack("<I", need(4, "version"))
    if version != VERSION:
        raise EmbeddingError(f"unsupported DDUT version {version}")
    (dim,) = struct.unpack("<I", need(4, "dim"))

    matrices: dict[str, np.ndarray] = {}
    while off < len(data):
        (id_len,) = struct.unpack("<H", need(2, "doc_id length"))
        doc_id = need(id_len, "doc_id").decode("utf-8")
        if doc_id in matrices:
            raise EmbeddingError(f"duplicate doc_id {doc_id!r} in embedding file")
        (count,) = struct.unpack("<I", need(4, "token count"))
        payload = need(count * dim * 4, f"vectors of {doc_id!r}")
        mat = np.frombuffer(payload, dtype="<f4").reshape(count, dim)
        matrices[doc_id] = mat
    return EmbeddingStore(dim=dim, matrices=matrices)


def write_embedding_file(store: EmbeddingStore, path: str | Path) -> None:
    with Path(path).open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, store.dim))
        for doc_id in store.doc_ids():
            raw = doc_id.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            mat = store.matrix(doc_id)
            fh.write(struct.pack("<I", mat.shape[0]))
            fh.write(np.ascontiguousarray(mat, dtype="<f4").tobytes())


def _token_vector(text: str, dim: int, seed: int) -> np.ndarray:
    digest = hashlib.blake2b(
        f"{seed}\x1f{text}".encode("utf-8"), digest_size=8
    ).digest()
    rng = np.random.default_rng(int.from_bytes(digest, "little"))
    return rng.uniform(-1.0, 1.0, size=dim)


def _position_signal(position: int, dim: int) -> np.ndarray:
    i = np.arange(dim, dtype=np.float64)
    angle = position / np.power(10000.0, 2.0 * (i // 2) / dim)
    out = np.where(i % 2 == 0, np.sin(angle), np.cos(angle))
    return out


def deterministic_embeddings(doc: Document, dim: int, seed: int) -> np.ndarray:
    """Content + position test embeddings: a pure function of the inputs.

    Each row mixes a hash-derived vector for the token text with a
    sinusoidal signal for the token's flat position; values lie in [-1, 1].
    """
    if dim < 1:
        raise EmbeddingError("dim must be >= 1")
    rows = np.empty((doc.token_count, dim), dtype=np.float64)
    pos = 0
    cache: dict[str, np.ndarray] = {}
    for utt in doc.utterances:
        for token in utt.tokens:
            content = cache.get(token.text)
            if content is None:
                content = _token_vector(token.text, dim, seed)
                cache[token.text] = content
            rows[pos] = 0.5 * content + 0.5 * _position_signal(pos, dim)
            pos += 1
    return rows.astype(np.float32)


class DeterministicEmbeddings:
    """Embedding provider computing vectors on demand (test substitute)."""

    def __init__(self, dim: int, seed: int):
        if dim < 1:
            raise EmbeddingError("dim must be >= 1")
        self.dim = dim
        self.seed = seed
        self._cache: dict[str, np.ndarray] = {}

    def for_document(self, doc: Document) -> np.ndarray:
        mat = self._cache.get(doc.doc_id)
        if mat is None:
            mat = deterministic_embeddings(doc, self.dim, self.seed)
            mat.flags.writeable = False
            self._cache[doc.doc_id] = mat
        return mat

    def as_store(self, docs: list[Document]) -> EmbeddingStore:
        return EmbeddingStore(
            dim=self.dim, matrices={d.doc_id: self.for_document(d) for d in docs}
        )
