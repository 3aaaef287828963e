"""Embedding model providers.

A provider turns a batch of word lists into per-layer subtoken matrices plus
the word-to-subtoken alignment.  Model identifiers are opaque strings routed
by prefix:

    hash3:<seed>[,dim=D][,maxlen=N][,layer=K][,skip=WORD]
        Deterministic pseudo-model for tests: words split into 4-character
        chunks, three layers of hashed standard-normal vectors.  ``layer=K``
        exposes only that layer (a single-layer model); ``skip=WORD`` makes
        that surface untokenizable; ``maxlen=N`` imposes a subtoken limit.

    hf:<path-or-model-name>
        BERT-style subword model loaded through the transformers library
        (lazy import); layers are the hidden states of every encoder level.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np


@dataclass
class SentenceEncoding:
    """Per-layer subtoken matrices plus word alignment for one sentence."""

    layers: list  # [n_layers] arrays of shape (n_subtokens, dim)
    word_to_subtokens: list  # per word: subtoken row indices (may be empty)
    truncated_words: list  # word indices cut off by the model length limit


class HashProvider:
    """Deterministic stand-in for a pretrained model; no weights needed."""

    CHUNK = 4

    def __init__(self, identifier: str):
        self.identifier = identifier
        spec = identifier.split(":", 1)[1]
        parts = spec.split(",")
        self.seed = int(parts[0])
        options = dict(p.split("=", 1) for p in parts[1:])
        self.dim = int(options.get("dim", 12))
        self.max_tokens = int(options["maxlen"]) if "maxlen" in options else None
        self.only_layer = int(options["layer"]) if "layer" in options else None
        self.skip_word = options.get("skip")
        self.n_layers = 1 if self.only_layer is not None else 3

    @property
    def is_three_layer(self) -> bool:
        return self.n_layers == 3

    def _chunks(self, word: str):
        if self.skip_word is not None and word == self.skip_word:
            return []
        return [word[i : i + self.CHUNK] for i in range(0, len(word), self.CHUNK)]

    def _vector(self, chunk: str, layer: int) -> np.ndarray:
        digest = hashlib.blake2b(
            f"{self.seed}\x1f{layer}\x1f{chunk}".encode("utf-8"), digest_size=16
        ).digest()
        words = [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]
        rng = np.random.default_rng(np.random.SeedSequence(words))
        return rng.standard_normal(self.dim).astype(np.float32)

    def embed_batch(self, batch):
        encodings = []
        for words in batch:
            word_to_subtokens = []
            subtoken_chunks = []
            truncated = []
            for word_index, word in enumerate(words):
                indices = []
                for chunk in self._chunks(word):
                    if self.max_tokens is not None and len(subtoken_chunks) >= self.max_tokens:
                        truncated.append(word_index)
                        break
                    indices.append(len(subtoken_chunks))
                    subtoken_chunks.append(chunk)
                word_to_subtokens.append(indices)
            layer_ids = [self.only_layer] if self.only_layer is not None else [0, 1, 2]
            layers = [
                np.stack([self._vector(c, layer) for c in subtoken_chunks])
                if subtoken_chunks
                else np.zeros((0, self.dim), dtype=np.float32)
                for layer in layer_ids
            ]
            encodings.append(
                SentenceEncoding(
                    layers=layers,
                    word_to_subtokens=word_to_subtokens,
                    truncated_words=sorted(set(truncated)),
                )
            )
        return encodings


class HFProvider:
    """Transformer models via the transformers library; frozen weights."""

    def __init__(self, identifier: str, device: str = "cpu"):
        import torch
        from transformers import AutoModel, AutoTokenizer

        self.identifier = identifier
        self._torch = torch
        source = identifier.split(":", 1)[1]
        self.tokenizer = AutoTokenizer.from_pretrained(source)
        self.model = AutoModel.from_pretrained(source).to(device).eval()
        self.device = device
        self.dim = int(self.model.config.hidden_size)
        self.n_layers = int(self.model.config.num_hidden_layers) + 1
        self.max_tokens = int(
            min(
                getattr(self.model.config, "max_position_embeddings", 1 << 30),
                self.tokenizer.model_max_length,
            )
        )

    @property
    def is_three_layer(self) -> bool:
        return self.n_layers == 3

    def embed_batch(self, batch):
        encoded = self.tokenizer(
            list(batch),
            is_split_into_words=True,
            padding=True,
            truncation=True,
            max_length=self.max_tokens,
            return_tensors="pt",
        ).to(self.device)
        with self._torch.no_grad():
            output = self.model(**encoded, output_hidden_states=True)
        hidden = [h.cpu().numpy().astype(np.float32) for h in output.hidden_states]
        encodings = []
        for i, words in enumerate(batch):
            word_ids = encoded.word_ids(i)
            length = int(encoded["attention_mask"][i].sum())
            word_to_subtokens = [[] for _ in words]
            for position in range(length):
                word = word_ids[position]
                if word is not None:
                    word_to_subtokens[word].append(position)
            truncated = [w for w, rows in enumerate(word_to_subtokens) if not rows]
            layers = [h[i, :length] for h in hidden]
            encodings.append(
                SentenceEncoding(
                    layers=layers,
                    word_to_subtokens=word_to_subtokens,
                    truncated_words=truncated,
                )
            )
        return encodings


def resolve_provider(model_id: str, device: str = "cpu"):
    if model_id.startswith("hash3:"):
        return HashProvider(model_id)
    if model_id.startswith("hf:"):
        return HFProvider(model_id, device=device)
    raise ValueError(
        f"unknown model identifier {model_id!r}; expected a 'hash3:' or 'hf:' prefix"
    )
