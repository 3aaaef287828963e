"""Frozen contextual-embedding archives.

An archive maps sentence ids to T x D matrices of 32-bit float vectors, one
row per corpus token.  The on-disk layout is little-endian and bit-exact:

    magic ``MICEEMB1`` (8 bytes)
    u32 version = 1
    u32 dim
    u32 entry count
    provider tag: u16 length + UTF-8 bytes
    per entry: sentence id (u16 length + UTF-8 bytes),
               u32 token count T,
               T x D f32 row-major payload

Vectors are stored word-aligned.  A :class:`SentenceEmbedding` may carry a
subword-to-word alignment map in memory; writing applies it exactly once.
Archives are immutable after opening and safe to share across threads.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass

import numpy as np

from .corpus import TokenLabel
from .errors import ArchiveFormatError

MAGIC = b"MICEEMB1"
VERSION = 1


@dataclass
class SentenceEmbedding:
    """Per-token vectors for one sentence.

    ``alignment`` maps word index -> first-subtoken row index when the rows
    are subword vectors that have not been collapsed to words yet.
    """

    sentence_id: str
    vectors: np.ndarray
    alignment: dict[int, int] | None = None

    def __post_init__(self):
        self.vectors = np.ascontiguousarray(self.vectors, dtype=np.float32)
        if self.vectors.ndim != 2:
            raise ValueError(f"entry {self.sentence_id!r}: vectors must be 2-D")
        if not np.all(np.isfinite(self.vectors)):
            raise ValueError(f"entry {self.sentence_id!r}: non-finite vector values")

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def word_aligned(self) -> "SentenceEmbedding":
        """Collapse subword rows to one row per word, if an alignment is set."""
        if self.alignment is None:
            return self
        rows = [self.alignment[w] for w in sorted(self.alignment)]
        if sorted(self.alignment) != list(range(len(self.alignment))):
            raise ValueError(f"entry {self.sentence_id!r}: alignment word indices not contiguous")
        return SentenceEmbedding(self.sentence_id, self.vectors[rows])


class EmbeddingArchive:
    """Ordered, id-unique collection of sentence embeddings of a shared dim."""

    def __init__(self, dim: int, entries, provider_tag: str = ""):
        self.dim = int(dim)
        self.entries = list(entries)
        self.provider_tag = provider_tag
        self._by_id: dict[str, SentenceEmbedding] = {}
        for entry in self.entries:
            if entry.dim != self.dim:
                raise ArchiveFormatError(
                    f"entry {entry.sentence_id!r} has dim {entry.dim}, archive dim {self.dim}"
                )
            if entry.sentence_id in self._by_id:
                raise ArchiveFormatError(f"duplicate sentence id {entry.sentence_id!r}")
            self._by_id[entry.sentence_id] = entry

    def __len__(self):
        return len(self.entries)

    def __contains__(self, sentence_id):
        return sentence_id in self._by_id

    def __iter__(self):
        return iter(self.entries)

    def get(self, sentence_id: str) -> SentenceEmbedding:
        return self._by_id[sentence_id]

    def ids(self) -> list[str]:
        return [e.sentence_id for e in self.entries]


def average_layers(layers) -> np.ndarray:
    """Elementwise mean of equally-weighted embedding layers."""
    layers = [np.asarray(layer) for layer in layers]
    if not layers:
        raise ValueError("need at least one layer")
    shape = layers[0].shape
    for layer in layers[1:]:
        if layer.shape != shape:
            raise ValueError(f"layer shape mismatch: {layer.shape} vs {shape}")
    return np.mean(np.stack(layers), axis=0)


def align_first_subtoken(subtoken_vectors, word_to_subtokens) -> np.ndarray:
    """One row per word: the vector of the word's first subtoken."""
    subtoken_vectors = np.asarray(subtoken_vectors)
    n_subtokens = subtoken_vectors.shape[0]
    if isinstance(word_to_subtokens, dict):
        keys = sorted(word_to_subtokens)
        if keys != list(range(len(keys))):
            raise ValueError("word indices must be contiguous from 0")
        groups = [word_to_subtokens[k] for k in keys]
    else:
        groups = list(word_to_subtokens)
    firsts = []
    for word, subtokens in enumerate(groups):
        subtokens = list(subtokens)
        if not subtokens:
            raise ValueError(f"word {word} maps to no subtokens")
        first = subtokens[0]
        if not 0 <= first < n_subtokens:
            raise ValueError(f"word {word}: subtoken index {first} out of range")
        firsts.append(first)
    return subtoken_vectors[firsts]


# ---------------------------------------------------------------------------
# Binary archive i/o
# ---------------------------------------------------------------------------


def _pack_str(text: str) -> bytes:
    data = text.encode("utf-8")
    if len(data) > 0xFFFF:
        raise ArchiveFormatError(f"string too long for u16 length prefix: {len(data)} bytes")
    return struct.pack("<H", len(data)) + data


def write_archive(archive: EmbeddingArchive, path) -> None:
    """Write an archive; subword entries are word-aligned before writing."""
    entries = [e.word_aligned() for e in archive.entries]
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<III", VERSION, archive.dim, len(entries)))
        fh.write(_pack_str(archive.provider_tag))
        for entry in entries:
            fh.write(_pack_str(entry.sentence_id))
            fh.write(struct.pack("<I", entry.vectors.shape[0]))
            fh.write(entry.vectors.astype("<f4").tobytes(order="C"))


class _Reader:
    def __init__(self, buf: bytes, path):
        self.buf = buf
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise ArchiveFormatError(f"{self.path}: truncated payload at byte {self.pos}")
        chunk = self.buf[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u16(self) -> int:
        return struct.unpack("<H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def string(self) -> str:
        return self.take(self.u16()).decode("utf-8")


def open_archive(path) -> EmbeddingArchive:
    """Open and eagerly validate an archive file."""
    with open(path, "rb") as fh:
        buf = fh.read()
    reader = _Reader(buf, path)
    if reader.take(len(MAGIC)) != MAGIC:
        raise ArchiveFormatError(f"{path}: bad magic bytes")
    version = reader.u32()
    if version != VERSION:
        raise ArchiveFormatError(f"{path}: unsupported version {version}")
    dim = reader.u32()
    if dim == 0:
        raise ArchiveFormatError(f"{path}: dim must be positive")
    count = reader.u32()
    provider_tag = reader.string()
    entries = []
    for _ in range(count):
        sentence_id = reader.string()
        tokens = reader.u32()
        payload = reader.take(tokens * dim * 4)
        vectors = np.frombuffer(payload, dtype="<f4").reshape(tokens, dim)
        if not np.all(np.isfinite(vectors)):
            raise ArchiveFormatError(f"{path}: non-finite values in entry {sentence_id!r}")
        entries.append(SentenceEmbedding(sentence_id, vectors))
    if reader.pos != len(buf):
        raise ArchiveFormatError(f"{path}: {len(buf) - reader.pos} trailing bytes after last entry")
    return EmbeddingArchive(dim=dim, entries=entries, provider_tag=provider_tag)


# ---------------------------------------------------------------------------
# Deterministic synthetic provider
# ---------------------------------------------------------------------------


def _base_vector(surface: str, dim: int, seed: int, cache: dict) -> np.ndarray:
    vec = cache.get(surface)
    if vec is None:
        digest = hashlib.blake2b(
            f"{seed}\x1f{surface}".encode("utf-8"), digest_size=16
        ).digest()
        words = [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]
        rng = np.random.default_rng(np.random.SeedSequence(words))
        vec = rng.standard_normal(dim)
        cache[surface] = vec
    return vec


def synthetic_provider(
    corpus, dim: int, seed: int = 0, planted_signal: float | None = None
) -> EmbeddingArchive:
    """Deterministic pseudo-random embeddings for testing without real models.

    Every token's base vector is a hash of (surface, seed) mapped to
    standard-normal values, so identical surfaces always embed identically.
    With ``planted_signal`` set, idiomatic tokens get that constant added to
    every component, and non-idiomatic tokens within distance 3 of an
    idiomatic one get half of it; the planted offset is the only cue that
    separates idiomatic from literal occurrences of the same expression.
    """
    if dim < 2:
        raise ValueError(f"dim must be >= 2, got {dim}")
    signal = float(planted_signal) if planted_signal else 0.0
    cache: dict[str, np.ndarray] = {}
    entries = []
    for sentence in corpus:
        base = np.stack(
            [_base_vector(tok, dim, seed, cache) for tok in sentence.tokens]
        )
        if signal != 0.0:
            idiomatic = [
                i
                for i, label in enumerate(sentence.token_labels)
                if label is TokenLabel.IDIOMATIC
            ]
            if idiomatic:
                for i in range(len(sentence.tokens)):
                    if i in idiomatic:
                        base[i] += signal
                    elif min(abs(i - j) for j in idiomatic) <= 3:
                        base[i] += signal / 2.0
        entries.append(SentenceEmbedding(sentence.id, base.astype(np.float32)))
    tag = f"synthetic(dim={dim},seed={seed},signal={signal})"
    return EmbeddingArchive(dim=dim, entries=entries, provider_tag=tag)
