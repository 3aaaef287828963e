"""Metrics, experiment protocols, and report emission.

Scores are classification accuracy and the F1 of the idiomatic class
(F1 is 0 when its denominator is 0).  Protocols cover: random-split
evaluation, expression-disjoint evaluation, per-expression leave-one-out,
dataset-size ablation, the balanced-vs-imbalanced study, and cross-lingual
transfer.  Reports serialize to TSV and versioned JSON deterministically.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .corpus import (
    TokenLabel,
    balance_per_expression,
    split_expression_disjoint,
    split_leave_one_out,
    split_random,
    subsample,
)
from .model import Task
from .util import derive_seed


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int
    level: Task

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be nonnegative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def score(predictions, gold, level: Task):
    """Confusion counts, accuracy, and idiomatic-class F1 for 0/1 sequences."""
    predictions = np.asarray(predictions, dtype=np.intp)
    gold = np.asarray(gold, dtype=np.intp)
    if predictions.shape != gold.shape:
        raise ValueError(
            f"prediction/gold length mismatch: {predictions.shape} vs {gold.shape}"
        )
    tp = int(np.sum((predictions == 1) & (gold == 1)))
    fp = int(np.sum((predictions == 1) & (gold == 0)))
    tn = int(np.sum((predictions == 0) & (gold == 0)))
    fn = int(np.sum((predictions == 0) & (gold == 1)))
    counts = ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn, level=level)
    total = counts.total
    ca = (tp + tn) / total if total else 0.0
    denom = 2 * tp + fp + fn
    f1 = (2 * tp / denom) if denom else 0.0
    return counts, ca, f1


def all_positive_f1(prevalence: float) -> float:
    """F1 of the always-idiomatic predictor: 2p/(1+p)."""
    return 2.0 * prevalence / (1.0 + prevalence)


def majority_ca(prevalence: float) -> float:
    """Accuracy of the majority predictor: the max-class prevalence."""
    return max(prevalence, 1.0 - prevalence)


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

REPORT_SCHEMA_VERSION = 1


@dataclass
class ReportRow:
    system: str
    level: str
    ca: float
    f1: float
    extra: dict = field(default_factory=dict)


@dataclass
class ExpressionRow:
    expression: str
    f1: float
    detected: int


@dataclass
class EvalReport:
    experiment: str
    split: str
    rows: list[ReportRow] = field(default_factory=list)
    per_expression: list[ExpressionRow] | None = None
    metadata: dict = field(default_factory=dict)


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)


def _extra_column(extra: dict) -> str:
    if not extra:
        return "-"
    return ";".join(f"{k}={_fmt(extra[k])}" for k in sorted(extra))


def render_report_tsv(report: EvalReport) -> str:
    lines = ["experiment\tsplit\tsystem\tlevel\tca\tf1\textra"]
    for row in report.rows:
        lines.append(
            "\t".join(
                [
                    report.experiment,
                    report.split,
                    row.system,
                    row.level,
                    f"{row.ca:.4f}",
                    f"{row.f1:.4f}",
                    _extra_column(row.extra),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def _round_floats(value):
    if isinstance(value, float):
        return round(value, 4)
    if isinstance(value, dict):
        return {k: _round_floats(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_round_floats(v) for v in value]
    return value


def render_report_json(report: EvalReport) -> str:
    payload = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "experiment": report.experiment,
        "split": report.split,
        "rows": [
            {
                "system": r.system,
                "level": r.level,
                "ca": r.ca,
                "f1": r.f1,
                "extra": r.extra,
            }
            for r in report.rows
        ],
        "per_expression": (
            None
            if report.per_expression is None
            else [
                {"expression": e.expression, "f1": e.f1, "detected": e.detected}
                for e in report.per_expression
            ]
        ),
        "metadata": report.metadata,
    }
    return json.dumps(_round_floats(payload), sort_keys=True, indent=2) + "\n"


def report_from_json(text: str) -> EvalReport:
    payload = json.loads(text)
    if payload.get("schema_version") != REPORT_SCHEMA_VERSION:
        raise ValueError(f"unsupported report schema: {payload.get('schema_version')}")
    return EvalReport(
        experiment=payload["experiment"],
        split=payload["split"],
        rows=[
            ReportRow(
                system=r["system"],
                level=r["level"],
                ca=r["ca"],
                f1=r["f1"],
                extra=r.get("extra", {}),
            )
            for r in payload["rows"]
        ],
        per_expression=(
            None
            if payload.get("per_expression") is None
            else [
                ExpressionRow(e["expression"], e["f1"], e["detected"])
                for e in payload["per_expression"]
            ]
        ),
        metadata=payload.get("metadata", {}),
    )


def render_per_expression_tsv(report: EvalReport) -> str:
    lines = ["expression\tf1\tdetected"]
    for row in report.per_expression or []:
        lines.append(f"{row.expression}\t{row.f1:.4f}\t{row.detected}")
    return "\n".join(lines) + "\n"


def emit_report(report: EvalReport, fmt: str, path) -> None:
    """Write the report; byte-for-byte deterministic for a given report value."""
    if fmt == "tsv":
        text = render_report_tsv(report)
    elif fmt == "json":
        text = render_report_json(report)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def f1_histogram(f1_values, n_bins: int = 10):
    """Counts per [i/n, (i+1)/n) bin; the last bin includes 1.0."""
    counts = [0] * n_bins
    for value in f1_values:
        idx = min(int(value * n_bins), n_bins - 1)
        counts[idx] += 1
    return [(i / n_bins, counts[i]) for i in range(n_bins)]


def render_histogram_tsv(histogram) -> str:
    lines = ["bin_low\tcount"]
    for bin_low, count in histogram:
        lines.append(f"{bin_low:.2f}\t{count}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Protocol plumbing
# ---------------------------------------------------------------------------


def _select(corpus, ids):
    return [s for s in corpus if s.id in ids]


def _token_mask(sentences, expression_tokens_only: bool):
    """Which token positions to score; by default, every token counts."""
    if not expression_tokens_only:
        return np.ones(sum(len(s.tokens) for s in sentences), dtype=bool)
    return np.array(
        [l is not TokenLabel.OUTSIDE for s in sentences for l in s.token_labels]
    )


def _gold_labels(sentences, task: Task, expression_tokens_only: bool = False):
    if task is Task.TOKEN:
        flat = np.array(
            [
                1 if l is TokenLabel.IDIOMATIC else 0
                for s in sentences
                for l in s.token_labels
            ]
        )
        return flat[_token_mask(sentences, expression_tokens_only)]
    return np.array([1 if s.is_idiomatic else 0 for s in sentences])


def _predicted_labels(system, sentences, archive, task: Task, expression_tokens_only: bool = False):
    probs = system.predict_proba(sentences, archive, task)
    if task is Task.TOKEN:
        flat = np.concatenate([np.asarray(p) for p in probs]) if probs else np.array([])
        labels = (flat >= 0.5).astype(np.intp)
        return labels[_token_mask(sentences, expression_tokens_only)]
    return (np.asarray(probs) >= 0.5).astype(np.intp)


def _score_systems(systems, train, test, archive, tasks, seed, extra=None,
                   expression_tokens_only=False):
    rows = []
    for system in systems:
        for task in tasks:
            system.fit(train, archive, task, derive_seed(seed, f"{system.name}/{task.value}"))
            predictions = _predicted_labels(
                system, test, archive, task, expression_tokens_only
            )
            gold = _gold_labels(test, task, expression_tokens_only)
            _, ca, f1 = score(predictions, gold, task)
            rows.append(
                ReportRow(
                    system=system.name,
                    level=task.value,
                    ca=ca,
                    f1=f1,
                    extra=dict(extra or {}),
                )
            )
    return rows


# ---------------------------------------------------------------------------
# The five evaluation protocols
# ---------------------------------------------------------------------------


def run_in_training_eval(
    corpus, archive, systems, seed: int, ratios=(0.63, 0.30, 0.07),
    tasks=(Task.TOKEN, Task.SENTENCE), expression_tokens_only=False,
) -> EvalReport:
    """Random split; expressions may occur on both sides.

    ``expression_tokens_only`` restricts token-level scoring to tokens that
    belong to an expression (off by default: every token is scored).
    """
    corpus = list(corpus)
    split = split_random(corpus, ratios=ratios, seed=derive_seed(seed, "split"))
    train = _select(corpus, split.train)
    test = _select(corpus, split.test)
    report = EvalReport(
        experiment="in_training",
        split=f"random {ratios[0]:.2f}:{ratios[1]:.2f}:{ratios[2]:.2f} seed={seed}",
        metadata={
            "train_size": len(train),
            "test_size": len(test),
            "dev_size": len(split.dev),
        },
    )
    report.rows = _score_systems(
        systems, train, test, archive, tasks, seed,
        expression_tokens_only=expression_tokens_only,
    )
    return report


def run_out_of_training_eval(
    corpus, archive, systems, seed: int, test_fraction: float = 0.30,
    tasks=(Task.TOKEN, Task.SENTENCE), expression_tokens_only=False,
) -> EvalReport:
    """Expression-disjoint split: test expressions never occur in training."""
    corpus = list(corpus)
    split = split_expression_disjoint(
        corpus, test_fraction=test_fraction, seed=derive_seed(seed, "split")
    )
    train = _select(corpus, split.train)
    test = _select(corpus, split.test)
    train_exprs = {s.expression for s in train}
    test_exprs = {s.expression for s in test}
    assert not (train_exprs & test_exprs), "expression-disjoint split leaked expressions"
    report = EvalReport(
        experiment="out_of_training",
        split=f"expression-disjoint test={test_fraction:.2f} seed={seed}",
        metadata={
            "train_size": len(train),
            "test_size": len(test),
            "train_expressions": len(train_exprs),
            "test_expressions": len(test_exprs),
        },
    )
    report.rows = _score_systems(
        systems, train, test, archive, tasks, seed,
        expression_tokens_only=expression_tokens_only,
    )
    return report


def run_per_expression_eval(corpus, archive, system, seed: int) -> EvalReport:
    """Leave-one-expression-out: one sentence-level F1 row per expression."""
    corpus = list(corpus)
    expressions = sorted({s.expression for s in corpus})
    if len(expressions) < 2:
        raise ValueError("per-expression evaluation needs at least 2 expressions")
    per_expression = []
    for expression in expressions:
        split = split_leave_one_out(corpus, expression)
        train = _select(corpus, split.train)
        test = _select(corpus, split.test)
        assert not ({s.expression for s in train} & {expression})
        system.fit(train, archive, Task.SENTENCE, derive_seed(seed, f"loo/{expression}"))
        predictions = _predicted_labels(system, test, archive, Task.SENTENCE)
        gold = _gold_labels(test, Task.SENTENCE)
        counts, _, f1 = score(predictions, gold, Task.SENTENCE)
        per_expression.append(
            ExpressionRow(expression=expression, f1=f1, detected=counts.tp)
        )
    per_expression.sort(key=lambda row: (-row.f1, row.expression))
    report = EvalReport(
        experiment="per_expression",
        split=f"leave-one-expression-out seed={seed}",
        per_expression=per_expression,
        metadata={"expressions": len(expressions), "system": system.name},
    )
    return report


def run_size_ablation(
    corpus, archive, system, fractions=(1.0, 0.8, 0.6, 0.4, 0.2, 0.1), seed: int = 0
) -> EvalReport:
    """Sentence-level scores over shrinking random subsets of the corpus."""
    corpus = list(corpus)
    report = EvalReport(
        experiment="size_ablation", split=f"random 0.63:0.30:0.07 per fraction seed={seed}"
    )
    for fraction in sorted(fractions, reverse=True):
        subset = subsample(corpus, fraction, seed=derive_seed(seed, f"subsample/{fraction}"))
        split = split_random(subset, seed=derive_seed(seed, f"split/{fraction}"))
        train = _select(subset, split.train)
        test = _select(subset, split.test)
        rows = _score_systems(
            [system],
            train,
            test,
            archive,
            (Task.SENTENCE,),
            derive_seed(seed, f"fit/{fraction}"),
            extra={"fraction": fraction, "train_size": len(train)},
        )
        report.rows.extend(rows)
    return report


def run_balanced_study(corpus, archive, system, seed: int) -> EvalReport:
    """Balanced corpus vs a size-matched imbalanced subset, with default rows.

    The default cells are the majority-accuracy and all-positive-F1
    identities evaluated on each dataset's full prevalence.
    """
    corpus = list(corpus)
    balanced = balance_per_expression(corpus, seed=derive_seed(seed, "balance"))
    rng = np.random.default_rng(derive_seed(seed, "match"))
    # Size-matched imbalanced control: per expression, as many sentences as
    # the balanced set kept, but drawn without regard to the label.
    balanced_sizes: dict[str, int] = {}
    for s in balanced:
        balanced_sizes[s.expression] = balanced_sizes.get(s.expression, 0) + 1
    by_expression: dict[str, list[int]] = {}
    for i, s in enumerate(corpus):
        by_expression.setdefault(s.expression, []).append(i)
    keep: set[int] = set()
    for expression in sorted(balanced_sizes):
        candidates = by_expression[expression]
        keep.update(rng.choice(candidates, size=balanced_sizes[expression], replace=False))
    imbalanced = [s for i, s in enumerate(corpus) if i in keep]

    report = EvalReport(
        experiment="balanced_study", split=f"random 0.70:0.30:0.00 seed={seed}"
    )
    for dataset_name, dataset in (("balanced", balanced), ("imbalanced", imbalanced)):
        split = split_random(
            dataset, ratios=(0.70, 0.30, 0.0), seed=derive_seed(seed, f"split/{dataset_name}")
        )
        train = _select(dataset, split.train)
        test = _select(dataset, split.test)
        prevalence = float(np.mean(_gold_labels(dataset, Task.SENTENCE))) if dataset else 0.0
        extra = {
            "dataset": dataset_name,
            "size": len(dataset),
            "default_ca": majority_ca(prevalence),
            "default_f1": all_positive_f1(prevalence),
        }
        rows = _score_systems(
            [system],
            train,
            test,
            archive,
            (Task.SENTENCE,),
            derive_seed(seed, f"fit/{dataset_name}"),
            extra=extra,
        )
        report.rows.extend(rows)
    return report


def run_crosslingual_eval(
    train_corpus, test_corpus_by_language, archives, system, seed: int = 0
) -> EvalReport:
    """Train once, score sentence-level per language; 2/3 is the balanced default.

    ``archives`` maps language codes to archives and must cover the training
    corpus's language as well as every test language.
    """
    train_corpus = list(train_corpus)
    if not train_corpus:
        raise ValueError("empty training corpus")
    train_language = train_corpus[0].language
    system.fit(
        train_corpus, archives[train_language], Task.SENTENCE, derive_seed(seed, "fit")
    )
    report = EvalReport(
        experiment="crosslingual",
        split=f"train={train_language} seed={seed}",
        metadata={"train_size": len(train_corpus), "system": system.name},
    )
    for language in sorted(test_corpus_by_language):
        test = list(test_corpus_by_language[language])
        predictions = _predicted_labels(system, test, archives[language], Task.SENTENCE)
        gold = _gold_labels(test, Task.SENTENCE)
        _, ca, f1 = score(predictions, gold, Task.SENTENCE)
        prevalence = float(np.mean(gold)) if len(gold) else 0.0
        report.rows.append(
            ReportRow(
                system=system.name,
                level=Task.SENTENCE.value,
                ca=ca,
                f1=f1,
                extra={
                    "language": language,
                    "default_f1": all_positive_f1(prevalence),
                    "test_size": len(test),
                },
            )
        )
    return report
