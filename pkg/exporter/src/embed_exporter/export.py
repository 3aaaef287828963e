"""Export jobs: corpus in, archive file plus manifest sidecar out.

Every corpus word gets exactly one vector row.  Words the tokenizer cannot
represent, and words cut off by the model length limit, get zero vectors
and are recorded in the manifest so downstream token counts always match.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .archive import write_archive
from .corpus import read_corpus
from .providers import resolve_provider


class LayerPolicy(Enum):
    AVERAGE_ALL = "average_all"
    LAST = "last"


class AlignmentPolicy(Enum):
    FIRST_SUBTOKEN = "first_subtoken"
    WHOLE_WORD = "whole_word"


@dataclass
class ExportJob:
    corpus_path: str
    model_id: str
    out_path: str
    layer_policy: LayerPolicy = LayerPolicy.AVERAGE_ALL
    alignment_policy: AlignmentPolicy = AlignmentPolicy.FIRST_SUBTOKEN
    batch_size: int = 16
    device: str = "cpu"

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


def _combine_layers(layers, policy: LayerPolicy) -> np.ndarray:
    if policy is LayerPolicy.LAST:
        return layers[-1]
    return np.mean(np.stack(layers), axis=0)


def _align(subtokens, word_to_subtokens, policy: AlignmentPolicy, dim: int):
    rows = np.zeros((len(word_to_subtokens), dim), dtype=np.float32)
    missing = []
    for word_index, indices in enumerate(word_to_subtokens):
        if not indices:
            missing.append(word_index)
            continue
        if policy is AlignmentPolicy.FIRST_SUBTOKEN:
            rows[word_index] = subtokens[indices[0]]
        else:
            rows[word_index] = subtokens[indices].mean(axis=0)
    return rows, missing


def export(job: ExportJob) -> dict:
    """Run the job; returns the manifest that was written alongside."""
    provider = resolve_provider(job.model_id, device=job.device)
    if provider.is_three_layer and job.layer_policy is not LayerPolicy.AVERAGE_ALL:
        raise ValueError(
            "three-layer models must be exported with the average_all layer policy"
        )
    sentences = read_corpus(job.corpus_path)
    seen = set()
    for sentence_id, _ in sentences:
        if sentence_id in seen:
            raise ValueError(f"duplicate sentence id {sentence_id!r} in corpus")
        seen.add(sentence_id)

    entries = []
    truncated_sentences = []
    zero_vector_words = []
    for start in range(0, len(sentences), job.batch_size):
        batch = sentences[start : start + job.batch_size]
        encodings = provider.embed_batch([words for _, words in batch])
        for (sentence_id, words), encoding in zip(batch, encodings):
            combined = _combine_layers(encoding.layers, job.layer_policy)
            rows, missing = _align(
                combined, encoding.word_to_subtokens, job.alignment_policy, provider.dim
            )
            if encoding.truncated_words:
                truncated_sentences.append(
                    {"sentence_id": sentence_id, "word_indexes": encoding.truncated_words}
                )
                warnings.warn(
                    f"sentence {sentence_id!r}: {len(encoding.truncated_words)} words "
                    f"beyond the model length limit; their vectors are zeros"
                )
            for word_index in missing:
                if word_index not in encoding.truncated_words:
                    zero_vector_words.append(
                        {"sentence_id": sentence_id, "word_index": word_index}
                    )
                    warnings.warn(
                        f"sentence {sentence_id!r}: word {word_index} "
                        f"({words[word_index]!r}) produced no subtokens; vector is zeros"
                    )
            entries.append((sentence_id, rows))

    provider_tag = (
        f"{job.model_id}|layers={job.layer_policy.value}"
        f"|alignment={job.alignment_policy.value}"
    )
    write_archive(entries, provider.dim, provider_tag, job.out_path)
    manifest = {
        "archive": str(job.out_path),
        "model": job.model_id,
        "layer_policy": job.layer_policy.value,
        "alignment_policy": job.alignment_policy.value,
        "dim": provider.dim,
        "sentences": len(entries),
        "truncated": truncated_sentences,
        "zero_vector_words": zero_vector_words,
    }
    manifest_path = f"{job.out_path}.manifest.json"
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest
