"""Writer for the binary embedding-archive wire format.

Layout (all integers little-endian):

    magic ``MICEEMB1`` (8 bytes)
    u32 version = 1
    u32 dim
    u32 entry count
    provider tag: u16 length + UTF-8 bytes
    per entry: sentence id (u16 length + UTF-8 bytes),
               u32 token count T,
               T x D f32 row-major payload

Writing is single-writer: everything goes to a temporary file that is
atomically renamed into place at the end.
"""

from __future__ import annotations

import os
import struct

import numpy as np

MAGIC = b"MICEEMB1"
VERSION = 1


def _pack_str(text: str) -> bytes:
    data = text.encode("utf-8")
    if len(data) > 0xFFFF:
        raise ValueError(f"string too long for u16 length prefix: {len(data)} bytes")
    return struct.pack("<H", len(data)) + data


def write_archive(entries, dim: int, provider_tag: str, path) -> None:
    """``entries`` is an ordered iterable of (sentence_id, T x D float array)."""
    entries = list(entries)
    seen = set()
    for sentence_id, vectors in entries:
        if sentence_id in seen:
            raise ValueError(f"duplicate sentence id {sentence_id!r}")
        seen.add(sentence_id)
        if vectors.ndim != 2 or vectors.shape[1] != dim:
            raise ValueError(
                f"entry {sentence_id!r}: expected (T, {dim}) vectors, got {vectors.shape}"
            )
        if not np.all(np.isfinite(vectors)):
            raise ValueError(f"entry {sentence_id!r}: non-finite vector values")
    tmp_path = f"{path}.tmp.{os.getpid()}"
    with open(tmp_path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<III", VERSION, dim, len(entries)))
        fh.write(_pack_str(provider_tag))
        for sentence_id, vectors in entries:
            fh.write(_pack_str(sentence_id))
            fh.write(struct.pack("<I", vectors.shape[0]))
            fh.write(np.ascontiguousarray(vectors, dtype="<f4").tobytes(order="C"))
    os.replace(tmp_path, path)
