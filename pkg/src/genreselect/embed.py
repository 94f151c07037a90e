"""Sentence-embedding storage, cosine geometry and a hash-based fallback.

The on-disk format ("GSEM") is little-endian binary:

    magic "GSEM" | u32 version=1 | u32 dim | u64 count
    count * dim float32 row-major
    count length-prefixed (u32) UTF-8 id strings, in row order

Bit-exact round-trips are part of the contract; golden tests depend on it.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import Sentence
from .errors import DataError, FormatError

MAGIC = b"GSEM"
FORMAT_VERSION = 1


@dataclass
class EmbeddingMatrix:
    """Dense float32 matrix with one row per sentence id."""

    ids: list[str]
    rows: np.ndarray
    _index: dict[str, int] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        self.rows = np.asarray(self.rows, dtype=np.float32)
        if self.rows.ndim != 2:
            raise DataError(f"embedding rows must be 2-D, got shape {self.rows.shape}")
        if len(self.ids) != self.rows.shape[0]:
            raise DataError(
                f"id/row count mismatch: {len(self.ids)} ids, {self.rows.shape[0]} rows"
            )
        if self.rows.size and not np.isfinite(self.rows).all():
            raise DataError("embedding matrix contains NaN or Inf")
        self._index = {gid: i for i, gid in enumerate(self.ids)}
        if len(self._index) != len(self.ids):
            raise DataError("duplicate ids in embedding matrix")

    @property
    def dim(self) -> int:
        return int(self.rows.shape[1])

    def __len__(self) -> int:
        return len(self.ids)

    def row(self, global_id: str) -> np.ndarray:
        try:
            return self.rows[self._index[global_id]]
        except KeyError:
            raise DataError(f"unknown embedding id: {global_id}") from None

    def has(self, global_id: str) -> bool:
        return global_id in self._index

    def positions(self, ids: Sequence[str]) -> np.ndarray:
        try:
            return np.array([self._index[i] for i in ids], dtype=np.int64)
        except KeyError as exc:
            raise DataError(f"unknown embedding id: {exc.args[0]}") from None

    def subset(self, ids: Sequence[str]) -> "EmbeddingMatrix":
        pos = self.positions(ids)
        return EmbeddingMatrix(ids=list(ids), rows=self.rows[pos])


def save_embeddings(matrix: EmbeddingMatrix, path: str | Path) -> None:
    with open(path, "wb") as handle:
        handle.write(MAGIC)
        handle.write(struct.pack("<IIQ", FORMAT_VERSION, matrix.dim, len(matrix)))
        handle.write(np.ascontiguousarray(matrix.rows, dtype="<f4").tobytes())
        for gid in matrix.ids:
            encoded = gid.encode("utf-8")
            handle.write(struct.pack("<I", len(encoded)))
            handle.write(encoded)


def load_embeddings(path: str | Path) -> EmbeddingMatrix:
    data = Path(path).read_bytes()
    if len(data) < 20:
        raise FormatError(f"{path}: truncated header ({len(data)} bytes)")
    if data[:4] != MAGIC:
        raise FormatError(f"{path}: bad magic {data[:4]!r}")
    version, dim, count = struct.unpack("<IIQ", data[4:20])
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported format version {version}")
    payload_size = count * dim * 4
    offset = 20
    if len(data) < offset + payload_size:
        raise FormatError(f"{path}: truncated payload")
    rows = np.frombuffer(data[offset : offset + payload_size], dtype="<f4").reshape(count, dim)
    offset += payload_size
    ids: list[str] = []
    for _ in range(count):
        if len(data) < offset + 4:
            raise FormatError(f"{path}: truncated id table")
        (length,) = struct.unpack_from("<I", data, offset)
        offset += 4
        if len(data) < offset + length:
            raise FormatError(f"{path}: truncated id entry")
        ids.append(data[offset : offset + length].decode("utf-8"))
        offset += length
    if offset != len(data):
        raise FormatError(f"{path}: {len(data) - offset} trailing bytes")
    return EmbeddingMatrix(ids=ids, rows=rows.copy())


def mean_embedding(matrix: EmbeddingMatrix, ids: Sequence[str]) -> np.ndarray:
    """Per-dimension arithmetic mean of the rows for ``ids`` (float64)."""
    if not ids:
        raise DataError("mean_embedding over an empty id set")
    pos = matrix.positions(ids)
    return matrix.rows[pos].astype(np.float64).mean(axis=0)


def cosine_distance(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DataError(f"vector shape mismatch: {a.shape} vs {b.shape}")
    norm_a = float(np.linalg.norm(a))
    norm_b = float(np.linalg.norm(b))
    if norm_a == 0.0 or norm_b == 0.0:
        raise DataError("cosine distance undefined for zero-norm vector")
    return 1.0 - float(np.dot(a, b)) / (norm_a * norm_b)


def cosine_distances(rows: np.ndarray, vector: np.ndarray) -> np.ndarray:
    """Cosine distance of every row to ``vector``, computed in float64."""
    rows = np.asarray(rows, dtype=np.float64)
    vector = np.asarray(vector, dtype=np.float64)
    norm_v = float(np.linalg.norm(vector))
    if norm_v == 0.0:
        raise DataError("cosine distance undefined for zero-norm vector")
    norms = np.linalg.norm(rows, axis=1)
    if np.any(norms == 0.0):
        bad = int(np.argmin(norms))
        raise DataError(f"zero-norm embedding row at position {bad}")
    return 1.0 - (rows @ vector) / (norms * norm_v)


def _sign_row(seed: int, gram: str, dim: int) -> np.ndarray:
    # Stable across processes: derive the RNG seed from a cryptographic
    # hash, never from builtin hash().
    digest = hashlib.sha256(f"{seed}|{gram}".encode("utf-8")).digest()
    rng = np.random.Generator(np.random.PCG64(int.from_bytes(digest[:8], "little")))
    return rng.integers(0, 2, size=dim).astype(np.float64) * 2.0 - 1.0


def _char_ngrams(text: str, n_min: int, n_max: int) -> dict[str, int]:
    counts: dict[str, int] = {}
    length = len(text)
    for n in range(n_min, n_max + 1):
        for start in range(length - n + 1):
            gram = text[start : start + n]
            counts[gram] = counts.get(gram, 0) + 1
    return counts


def fallback_featurize(
    sentences: Iterable[Sentence], dim: int = 256, seed: int = 0
) -> EmbeddingMatrix:
    """Deterministic text-only sentence embeddings.

    Character 3-5-gram counts of the sentence text are L2-normalized and
    projected to ``dim`` dimensions through a seeded random +-1 matrix whose
    rows are derived per gram. A stand-in for model-based extraction so the
    rest of the pipeline runs self-contained.
    """
    if dim < 2:
        raise DataError(f"fallback embedding dim must be >= 2, got {dim}")
    ids: list[str] = []
    rows: list[np.ndarray] = []
    sign_cache: dict[str, np.ndarray] = {}
    for sentence in sentences:
        counts = _char_ngrams(sentence.text, 3, 5)
        if not counts:
            raise DataError(f"unembeddable sentence (no character n-grams): {sentence.global_id}")
        vector = np.zeros(dim, dtype=np.float64)
        norm = float(np.sqrt(sum(c * c for c in counts.values())))
        for gram, count in counts.items():
            row = sign_cache.get(gram)
            if row is None:
                row = _sign_row(seed, gram, dim)
                sign_cache[gram] = row
            vector += (count / norm) * row
        ids.append(sentence.global_id)
        rows.append(vector.astype(np.float32))
    rows_arr = np.vstack(rows) if rows else np.zeros((0, dim), dtype=np.float32)
    return EmbeddingMatrix(ids=ids, rows=rows_arr)
