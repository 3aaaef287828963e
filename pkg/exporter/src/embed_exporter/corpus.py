"""Minimal corpus readers: (sentence id, word list) pairs for embedding.

Formats are sniffed by extension: ``.cupt`` for PARSEME files, ``.tsv`` for
the tab-separated idiom-corpus layout, and anything else as plain text with
one whitespace-tokenized sentence per line.
"""

from __future__ import annotations

import re


def read_tsv(path):
    """Column layout: id, expression, two annotator columns, tokens, mask."""
    sentences = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            cols = line.split("\t")
            if len(cols) != 6:
                raise ValueError(f"{path}:{lineno}: expected 6 columns, got {len(cols)}")
            sentences.append((cols[0], cols[4].split(" ")))
    return sentences


_SENT_ID_RE = re.compile(r"#\s*(?:source_)?sent_id\s*=\s*(\S+)")


def read_cupt(path):
    sentences = []
    words: list[str] = []
    sentence_id = None
    index = 0

    def flush():
        nonlocal words, sentence_id, index
        if words:
            index += 1
            sentences.append((sentence_id or f"s{index}", words))
        words, sentence_id = [], None

    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.rstrip("\n")
            if not line.strip():
                flush()
                continue
            if line.startswith("#"):
                match = _SENT_ID_RE.match(line)
                if match:
                    sentence_id = match.group(1)
                continue
            cols = line.split("\t")
            if cols[0].isdigit():
                words.append(cols[1])
    flush()
    return sentences


def read_plain(path):
    sentences = []
    with open(path, encoding="utf-8") as fh:
        for i, raw in enumerate(fh, start=1):
            line = raw.strip()
            if line:
                sentences.append((f"s{i}", line.split()))
    return sentences


def read_corpus(path):
    name = str(path)
    if name.endswith(".cupt"):
        return read_cupt(path)
    if name.endswith(".tsv"):
        return read_tsv(path)
    return read_plain(path)
