"""Readers, filters, splitters and statistics for idiom-annotated corpora.

Two on-disk formats are supported:

* a sentence-per-line TSV with per-token idiomaticity masks
  (``id, expression, annotator A, annotator B, tokens, mask``), and
* the PARSEME ``.cupt`` format (10 CoNLL-U columns plus one MWE column).

All loaders are pure functions of the file bytes and all samplers are pure
functions of their seed, so corpora and splits are reproducible and safe to
build concurrently.  Returned sentences are immutable.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import CorpusFormatError


class AnnotatorLabel(Enum):
    YES = "YES"
    NO = "NO"
    DONT_KNOW = "DONT_KNOW"
    VAGUE = "VAGUE"


class TokenLabel(Enum):
    IDIOMATIC = "I"
    LITERAL_EXPR = "L"
    OUTSIDE = "O"


class SentenceLabel(Enum):
    IDIOMATIC = "IDIOMATIC"
    LITERAL = "LITERAL"


class SplitMode(Enum):
    RANDOM = "RANDOM"
    EXPRESSION_DISJOINT = "EXPRESSION_DISJOINT"
    LEAVE_ONE_EXPRESSION_OUT = "LEAVE_ONE_EXPRESSION_OUT"


@dataclass(frozen=True)
class AnnotatedSentence:
    """One corpus sentence with token- and sentence-level idiomaticity labels."""

    id: str
    language: str
    tokens: tuple[str, ...]
    expression: str
    token_labels: tuple[TokenLabel, ...]
    sentence_label: SentenceLabel
    annotator_a: AnnotatorLabel
    annotator_b: AnnotatorLabel

    def __post_init__(self):
        if len(self.token_labels) != len(self.tokens):
            raise ValueError(
                f"sentence {self.id!r}: {len(self.token_labels)} token labels "
                f"for {len(self.tokens)} tokens"
            )
        if not self.expression:
            raise ValueError(f"sentence {self.id!r}: expression must be non-empty")
        expected = (
            SentenceLabel.IDIOMATIC
            if any(l is TokenLabel.IDIOMATIC for l in self.token_labels)
            else SentenceLabel.LITERAL
        )
        if self.sentence_label is not expected:
            raise ValueError(
                f"sentence {self.id!r}: sentence_label {self.sentence_label.value} "
                f"inconsistent with token labels"
            )

    @property
    def is_idiomatic(self) -> bool:
        return self.sentence_label is SentenceLabel.IDIOMATIC


def make_sentence(
    id: str,
    language: str,
    tokens,
    expression: str,
    token_labels,
    annotator_a: AnnotatorLabel = AnnotatorLabel.YES,
    annotator_b: AnnotatorLabel = AnnotatorLabel.YES,
) -> AnnotatedSentence:
    """Build a sentence, deriving the sentence label from the token labels."""
    labels = tuple(token_labels)
    sentence_label = (
        SentenceLabel.IDIOMATIC
        if any(l is TokenLabel.IDIOMATIC for l in labels)
        else SentenceLabel.LITERAL
    )
    return AnnotatedSentence(
        id=id,
        language=language,
        tokens=tuple(tokens),
        expression=expression,
        token_labels=labels,
        sentence_label=sentence_label,
        annotator_a=annotator_a,
        annotator_b=annotator_b,
    )


@dataclass(frozen=True)
class CorpusStats:
    sentences: int
    tokens: int
    idiomatic_sentences: int
    literal_sentences: int
    idiomatic_tokens: int
    literal_tokens: int
    expressions: int

    def __post_init__(self):
        if self.idiomatic_sentences + self.literal_sentences != self.sentences:
            raise ValueError("sentence counts do not add up")
        if self.idiomatic_tokens + self.literal_tokens != self.tokens:
            raise ValueError("token counts do not add up")


@dataclass(frozen=True)
class DataSplit:
    train: frozenset[str]
    test: frozenset[str]
    dev: frozenset[str]
    mode: SplitMode

    def __post_init__(self):
        if self.train & self.test or self.train & self.dev or self.test & self.dev:
            raise ValueError("split sections overlap")

    @property
    def all_ids(self) -> frozenset[str]:
        return self.train | self.test | self.dev


# ---------------------------------------------------------------------------
# TSV corpus format
# ---------------------------------------------------------------------------

_MASK_CHARS = {label.value: label for label in TokenLabel}


def load_sloie(path, language: str = "sl") -> list[AnnotatedSentence]:
    """Load a sentence-per-line TSV corpus.

    Columns: ``id``, ``expression``, ``annotator A``, ``annotator B``,
    space-separated tokens, and a space-separated ``{I,L,O}`` mask of the
    same length.  Malformed lines raise, reporting the line number; blank
    lines are skipped.
    """
    sentences = []
    seen_ids = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            cols = line.split("\t")
            if len(cols) != 6:
                raise CorpusFormatError(
                    f"expected 6 tab-separated columns, got {len(cols)}",
                    path=path,
                    line=lineno,
                )
            sid, expression, ann_a_raw, ann_b_raw, token_col, mask_col = cols
            if sid in seen_ids:
                raise CorpusFormatError(f"duplicate sentence id {sid!r}", path=path, line=lineno)
            seen_ids.add(sid)
            try:
                ann_a = AnnotatorLabel(ann_a_raw)
                ann_b = AnnotatorLabel(ann_b_raw)
            except ValueError:
                raise CorpusFormatError(
                    f"unknown annotator label in {ann_a_raw!r}/{ann_b_raw!r}",
                    path=path,
                    line=lineno,
                ) from None
            tokens = token_col.split(" ")
            mask = mask_col.split(" ")
            if len(mask) != len(tokens):
                raise CorpusFormatError(
                    f"mask has {len(mask)} entries for {len(tokens)} tokens",
                    path=path,
                    line=lineno,
                )
            try:
                labels = tuple(_MASK_CHARS[c] for c in mask)
            except KeyError as exc:
                raise CorpusFormatError(
                    f"unknown mask character {exc.args[0]!r}", path=path, line=lineno
                ) from None
            if not expression:
                raise CorpusFormatError("empty expression column", path=path, line=lineno)
            sentences.append(
                make_sentence(
                    id=sid,
                    language=language,
                    tokens=tokens,
                    expression=expression,
                    token_labels=labels,
                    annotator_a=ann_a,
                    annotator_b=ann_b,
                )
            )
    return sentences


def save_sloie(sentences, path) -> None:
    """Write sentences back to the TSV layout accepted by :func:`load_sloie`."""
    with open(path, "w", encoding="utf-8") as fh:
        for s in sentences:
            mask = " ".join(l.value for l in s.token_labels)
            fh.write(
                "\t".join(
                    [
                        s.id,
                        s.expression,
                        s.annotator_a.value,
                        s.annotator_b.value,
                        " ".join(s.tokens),
                        mask,
                    ]
                )
                + "\n"
            )


def convert_sloie_release(src, dst, column_map, language: str = "sl") -> int:
    """Convert a differently-columned TSV release into the layout above.

    ``column_map`` names the zero-based source columns, e.g.
    ``{"id": 0, "expression": 1, "annotator_a": 2, "annotator_b": 3,
    "tokens": 4, "mask": 5}``.  Returns the number of converted lines.
    Published releases vary in column order; adjust the map to match.
    """
    required = {"id", "expression", "annotator_a", "annotator_b", "tokens", "mask"}
    missing = required - set(column_map)
    if missing:
        raise ValueError(f"column_map lacks entries for: {sorted(missing)}")
    count = 0
    with open(src, encoding="utf-8") as fin, open(dst, "w", encoding="utf-8") as fout:
        for lineno, raw in enumerate(fin, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            cols = line.split("\t")
            try:
                row = [cols[column_map[k]] for k in
                       ("id", "expression", "annotator_a", "annotator_b", "tokens", "mask")]
            except IndexError:
                raise CorpusFormatError(
                    f"line has only {len(cols)} columns", path=src, line=lineno
                ) from None
            fout.write("\t".join(row) + "\n")
            count += 1
    return count


# ---------------------------------------------------------------------------
# Agreement filtering and statistics
# ---------------------------------------------------------------------------

_KEPT_AGREEMENT = {AnnotatorLabel.YES, AnnotatorLabel.NO}


def filter_agreement(sentences) -> list[AnnotatedSentence]:
    """Keep sentences whose annotators agree on YES or NO, preserving order.

    Agreement on DONT_KNOW or VAGUE is dropped along with disagreements.
    """
    return [
        s
        for s in sentences
        if s.annotator_a is s.annotator_b and s.annotator_a in _KEPT_AGREEMENT
    ]


def inter_annotator_agreement(sentences) -> float:
    """Raw agreement: fraction of sentences where both annotators match."""
    sentences = list(sentences)
    if not sentences:
        raise ValueError("agreement is undefined for an empty corpus")
    agreeing = sum(1 for s in sentences if s.annotator_a is s.annotator_b)
    return agreeing / len(sentences)


def compute_stats(sentences) -> CorpusStats:
    sentences = list(sentences)
    idiomatic_sentences = sum(1 for s in sentences if s.is_idiomatic)
    tokens = sum(len(s.tokens) for s in sentences)
    idiomatic_tokens = sum(
        1 for s in sentences for l in s.token_labels if l is TokenLabel.IDIOMATIC
    )
    return CorpusStats(
        sentences=len(sentences),
        tokens=tokens,
        idiomatic_sentences=idiomatic_sentences,
        literal_sentences=len(sentences) - idiomatic_sentences,
        idiomatic_tokens=idiomatic_tokens,
        literal_tokens=tokens - idiomatic_tokens,
        expressions=len({s.expression for s in sentences}),
    )


# ---------------------------------------------------------------------------
# Splitting and sampling
# ---------------------------------------------------------------------------


def split_random(sentences, ratios=(0.63, 0.30, 0.07), seed: int = 0) -> DataSplit:
    """Seeded uniform split into train/test/dev with largest-remainder sizing."""
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r < 0 for r in ratios):
        raise ValueError("ratios must be three nonnegative fractions")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {sum(ratios)}")
    ids = [s.id for s in sentences]
    n = len(ids)
    raw = [r * n for r in ratios]
    sizes = [int(math.floor(x + 1e-9)) for x in raw]
    leftovers = sorted(range(3), key=lambda i: (-(raw[i] - sizes[i]), i))
    for i in leftovers[: n - sum(sizes)]:
        sizes[i] += 1
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    shuffled = [ids[i] for i in order]
    train = frozenset(shuffled[: sizes[0]])
    test = frozenset(shuffled[sizes[0] : sizes[0] + sizes[1]])
    dev = frozenset(shuffled[sizes[0] + sizes[1] :])
    return DataSplit(train=train, test=test, dev=dev, mode=SplitMode.RANDOM)


def split_expression_disjoint(sentences, test_fraction: float, seed: int = 0) -> DataSplit:
    """Partition whole expressions so none is shared between train and test.

    Expressions are assigned greedily by sentence count toward the target
    test fraction; a seeded shuffle breaks ties between same-sized
    expressions.  The achieved fraction is approximate because expressions
    are indivisible.
    """
    sentences = list(sentences)
    by_expression: dict[str, list[str]] = {}
    for s in sentences:
        by_expression.setdefault(s.expression, []).append(s.id)
    if len(by_expression) < 2:
        raise ValueError("expression-disjoint split needs at least 2 distinct expressions")
    expressions = sorted(by_expression)
    rng = np.random.default_rng(seed)
    shuffled = [expressions[i] for i in rng.permutation(len(expressions))]
    shuffled.sort(key=lambda e: -len(by_expression[e]))  # stable: shuffle breaks ties
    target = test_fraction * len(sentences)
    test_ids: set[str] = set()
    train_ids: set[str] = set()
    test_expressions: set[str] = set()
    assigned = 0
    for expr in shuffled:
        ids = by_expression[expr]
        if abs(assigned + len(ids) - target) < abs(assigned - target):
            test_ids.update(ids)
            test_expressions.add(expr)
            assigned += len(ids)
        else:
            train_ids.update(ids)
    train_expressions = {s.expression for s in sentences if s.id in train_ids}
    assert not train_expressions & test_expressions, "expression leaked across split"
    return DataSplit(
        train=frozenset(train_ids),
        test=frozenset(test_ids),
        dev=frozenset(),
        mode=SplitMode.EXPRESSION_DISJOINT,
    )


def split_leave_one_out(sentences, expression: str) -> DataSplit:
    """Test on every sentence of one expression, train on all the others."""
    sentences = list(sentences)
    test_ids = frozenset(s.id for s in sentences if s.expression == expression)
    if not test_ids:
        raise ValueError(f"expression {expression!r} does not occur in the corpus")
    train_ids = frozenset(s.id for s in sentences) - test_ids
    return DataSplit(
        train=train_ids,
        test=test_ids,
        dev=frozenset(),
        mode=SplitMode.LEAVE_ONE_EXPRESSION_OUT,
    )


def subsample(sentences, fraction: float, seed: int = 0) -> list[AnnotatedSentence]:
    """Uniform random subset of size round(fraction * N), in corpus order."""
    if not 0 < fraction <= 1:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    sentences = list(sentences)
    k = int(round(fraction * len(sentences)))
    rng = np.random.default_rng(seed)
    chosen = sorted(rng.choice(len(sentences), size=k, replace=False))
    return [sentences[i] for i in chosen]


def balance_per_expression(sentences, seed: int = 0) -> list[AnnotatedSentence]:
    """Equalize idiomatic and literal sentence counts within each expression.

    For each expression, keeps k idiomatic and k literal sentences where
    k = min of the two counts; expressions lacking one of the senses are
    dropped entirely.  Output preserves corpus order.
    """
    sentences = list(sentences)
    groups: dict[str, list[int]] = {}
    for i, s in enumerate(sentences):
        groups.setdefault(s.expression, []).append(i)
    rng = np.random.default_rng(seed)
    keep: set[int] = set()
    for expr in sorted(groups):
        idiomatic = [i for i in groups[expr] if sentences[i].is_idiomatic]
        literal = [i for i in groups[expr] if not sentences[i].is_idiomatic]
        k = min(len(idiomatic), len(literal))
        if k == 0:
            continue
        keep.update(rng.choice(idiomatic, size=k, replace=False))
        keep.update(rng.choice(literal, size=k, replace=False))
    return [s for i, s in enumerate(sentences) if i in keep]


def balance_sentence_level(sentences, seed: int = 0) -> list[AnnotatedSentence]:
    """Equal numbers of idiomatic and literal sentences, ignoring expressions."""
    sentences = list(sentences)
    idiomatic = [i for i, s in enumerate(sentences) if s.is_idiomatic]
    literal = [i for i, s in enumerate(sentences) if not s.is_idiomatic]
    k = min(len(idiomatic), len(literal))
    rng = np.random.default_rng(seed)
    keep = set(rng.choice(idiomatic, size=k, replace=False))
    keep.update(rng.choice(literal, size=k, replace=False))
    return [s for i, s in enumerate(sentences) if i in keep]


def save_split(split: DataSplit, path) -> None:
    """Persist a split as a three-section id-list text file."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# mode: {split.mode.value}\n")
        for name, ids in (("train", split.train), ("test", split.test), ("dev", split.dev)):
            fh.write(f"[{name}]\n")
            for sid in sorted(ids):
                fh.write(sid + "\n")


def load_split(path) -> DataSplit:
    sections: dict[str, set[str]] = {"train": set(), "test": set(), "dev": set()}
    mode = SplitMode.RANDOM
    current = None
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("# mode:"):
                mode = SplitMode(line.split(":", 1)[1].strip())
                continue
            if line.startswith("#"):
                continue
            if line.startswith("[") and line.endswith("]"):
                current = line[1:-1]
                if current not in sections:
                    raise CorpusFormatError(f"unknown section {current!r}", path=path, line=lineno)
                continue
            if current is None:
                raise CorpusFormatError("id listed before any section header", path=path, line=lineno)
            sections[current].add(line)
    return DataSplit(
        train=frozenset(sections["train"]),
        test=frozenset(sections["test"]),
        dev=frozenset(sections["dev"]),
        mode=mode,
    )


# ---------------------------------------------------------------------------
# PARSEME cupt format
# ---------------------------------------------------------------------------

CUPT_COLUMNS = 11


@dataclass(frozen=True)
class CuptRow:
    """One line of a cupt sentence; non-token lines (ranges, empty nodes) keep
    token_index None and are carried through for round-tripping."""

    token_index: int | None
    surface: str
    mwe: str
    columns: tuple[str, ...]


@dataclass(frozen=True)
class MweSpan:
    mwe_id: int
    category: str
    token_indexes: frozenset[int]


@dataclass(frozen=True)
class CuptSentence:
    sentence_id: str
    comments: tuple[str, ...]
    rows: tuple[CuptRow, ...]
    mwe_spans: tuple[MweSpan, ...]

    def __post_init__(self):
        indexes = [r.token_index for r in self.rows if r.token_index is not None]
        if any(b <= a for a, b in zip(indexes, indexes[1:])):
            raise ValueError(f"sentence {self.sentence_id!r}: token indices not increasing")
        index_set = set(indexes)
        for span in self.mwe_spans:
            if not span.token_indexes <= index_set:
                raise ValueError(
                    f"sentence {self.sentence_id!r}: span {span.mwe_id} references "
                    f"missing token indices"
                )

    @property
    def token_rows(self) -> list[CuptRow]:
        return [r for r in self.rows if r.token_index is not None]


_SENT_ID_RE = re.compile(r"#\s*(?:source_)?sent_id\s*=\s*(\S+)")
_MWE_NONE = {"*", "_"}  # "_" is the unannotated placeholder in blind files


def _finish_cupt_sentence(path, lineno, index, comments, rows, pending, keep_categories):
    spans = []
    for mwe_id in sorted(pending):
        category, indexes = pending[mwe_id]
        spans.append(
            MweSpan(mwe_id=mwe_id, category=category, token_indexes=frozenset(indexes))
        )
    if keep_categories is not None:
        spans = [s for s in spans if s.category in keep_categories]
    sentence_id = f"s{index}"
    for comment in comments:
        match = _SENT_ID_RE.match(comment)
        if match:
            sentence_id = match.group(1)
            break
    return CuptSentence(
        sentence_id=sentence_id,
        comments=tuple(comments),
        rows=tuple(rows),
        mwe_spans=tuple(spans),
    )


def load_cupt(path, keep_categories=frozenset({"VID"})) -> list[CuptSentence]:
    """Parse a PARSEME cupt file, resolving multi-token MWE spans.

    Spans whose category is not in ``keep_categories`` are discarded;
    pass ``keep_categories=None`` to keep every span.  Comment lines are
    preserved as sentence metadata.
    """
    sentences = []
    comments: list[str] = []
    rows: list[CuptRow] = []
    pending: dict[int, tuple[str, set[int]]] = {}
    count = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                if rows or comments:
                    count += 1
                    sentences.append(
                        _finish_cupt_sentence(
                            path, lineno, count, comments, rows, pending, keep_categories
                        )
                    )
                    comments, rows, pending = [], [], {}
                continue
            if line.startswith("#"):
                comments.append(line)
                continue
            cols = line.split("\t")
            if len(cols) != CUPT_COLUMNS:
                raise CorpusFormatError(
                    f"expected {CUPT_COLUMNS} columns, got {len(cols)}",
                    path=path,
                    line=lineno,
                )
            token_id_col, surface, mwe_col = cols[0], cols[1], cols[10]
            if token_id_col.isdigit():
                token_index = int(token_id_col)
                if mwe_col not in _MWE_NONE:
                    for code in mwe_col.split(";"):
                        if ":" in code:
                            id_part, category = code.split(":", 1)
                            if not id_part.isdigit() or not category:
                                raise CorpusFormatError(
                                    f"malformed MWE code {code!r}", path=path, line=lineno
                                )
                            mwe_id = int(id_part)
                            if mwe_id in pending:
                                raise CorpusFormatError(
                                    f"MWE id {mwe_id} redefined with category {category!r}",
                                    path=path,
                                    line=lineno,
                                )
                            pending[mwe_id] = (category, {token_index})
                        else:
                            if not code.isdigit():
                                raise CorpusFormatError(
                                    f"malformed MWE code {code!r}", path=path, line=lineno
                                )
                            mwe_id = int(code)
                            if mwe_id not in pending:
                                raise CorpusFormatError(
                                    f"continuation of MWE id {mwe_id} before its "
                                    f"category-defining token",
                                    path=path,
                                    line=lineno,
                                )
                            pending[mwe_id][1].add(token_index)
            else:
                token_index = None
            rows.append(
                CuptRow(
                    token_index=token_index,
                    surface=surface,
                    mwe=mwe_col,
                    columns=tuple(cols),
                )
            )
    if rows or comments:
        count += 1
        sentences.append(
            _finish_cupt_sentence(path, lineno, count, comments, rows, pending, keep_categories)
        )
    return sentences


def save_cupt(sentences, path) -> None:
    """Write cupt sentences back out, rebuilding the MWE column from spans."""
    with open(path, "w", encoding="utf-8") as fh:
        for sentence in sentences:
            for comment in sentence.comments:
                fh.write(comment + "\n")
            codes: dict[int, list[str]] = {}
            for span in sorted(sentence.mwe_spans, key=lambda s: s.mwe_id):
                first = min(span.token_indexes)
                for idx in span.token_indexes:
                    code = f"{span.mwe_id}:{span.category}" if idx == first else str(span.mwe_id)
                    codes.setdefault(idx, []).append(code)
            for row in sentence.rows:
                cols = list(row.columns)
                if row.token_index is not None:
                    together = codes.get(row.token_index)
                    cols[10] = ";".join(together) if together else "*"
                fh.write("\t".join(cols) + "\n")
            fh.write("\n")


def cupt_to_annotated(sentence: CuptSentence, language: str) -> AnnotatedSentence:
    """Flatten cupt spans to binary token labels.

    Overlapping spans are unioned; annotator fields are set to synthetic
    agreement so downstream filters are no-ops.  Literal sentences get the
    placeholder expression ``-``.
    """
    token_rows = sentence.token_rows
    covered: set[int] = set()
    for span in sentence.mwe_spans:
        covered |= span.token_indexes
    labels = [
        TokenLabel.IDIOMATIC if row.token_index in covered else TokenLabel.OUTSIDE
        for row in token_rows
    ]
    if sentence.mwe_spans:
        first = min(sentence.mwe_spans, key=lambda s: s.mwe_id)
        by_index = {row.token_index: row.surface for row in token_rows}
        expression = " ".join(by_index[i] for i in sorted(first.token_indexes)).lower()
        annotator = AnnotatorLabel.YES
    else:
        expression = "-"
        annotator = AnnotatorLabel.NO
    return make_sentence(
        id=sentence.sentence_id,
        language=language,
        tokens=[row.surface for row in token_rows],
        expression=expression,
        token_labels=labels,
        annotator_a=annotator,
        annotator_b=annotator,
    )


# ---------------------------------------------------------------------------
# Synthetic corpora for desk-scale experiments
# ---------------------------------------------------------------------------


def synthetic_corpus(
    n_sentences: int = 1000,
    n_expressions: int = 20,
    seed: int = 0,
    idiomatic_fraction: float = 0.5,
    filler_vocab: int = 150,
    language: str = "xx",
) -> list[AnnotatedSentence]:
    """Generate a corpus of filler tokens with planted multi-token expressions.

    Each expression has 2-3 fixed member tokens and occurs in both an
    idiomatic and a literal sense; the surface form is identical in both,
    so only planted embedding signal can separate them downstream.
    """
    rng = np.random.default_rng(seed)
    fillers = [f"w{i:03d}" for i in range(filler_vocab)]
    expressions = []
    for e in range(n_expressions):
        length = int(rng.integers(2, 4))
        expressions.append([f"e{e:02d}_{chr(ord('a') + j)}" for j in range(length)])
    sentences = []
    for i in range(n_sentences):
        expr_idx = int(rng.integers(n_expressions))
        members = expressions[expr_idx]
        idiomatic = bool(rng.random() < idiomatic_fraction)
        length = int(rng.integers(8, 15))
        tokens = [fillers[int(rng.integers(filler_vocab))] for _ in range(length)]
        pos = int(rng.integers(0, length - len(members) + 1))
        labels = [TokenLabel.OUTSIDE] * length
        for j, member in enumerate(members):
            tokens[pos + j] = member
            labels[pos + j] = TokenLabel.IDIOMATIC if idiomatic else TokenLabel.LITERAL_EXPR
        annotator = AnnotatorLabel.YES if idiomatic else AnnotatorLabel.NO
        sentences.append(
            make_sentence(
                id=f"syn{i:05d}",
                language=language,
                tokens=tokens,
                expression=" ".join(members),
                token_labels=labels,
                annotator_a=annotator,
                annotator_b=annotator,
            )
        )
    return sentences
