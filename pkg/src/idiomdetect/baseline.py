"""Reference classifiers: tf-idf + linear SVM, and the two trivial defaults.

The SVM is trained on L2-normalized tf-idf vectors with primal hinge-loss
SGD (Pegasos-style schedule).  The default classifiers are the majority
predictor, whose accuracy equals the max-class prevalence, and the
all-positive predictor, whose F1 equals 2p/(1+p) for positive prevalence p.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .corpus import TokenLabel
from .model import Task


@dataclass
class TfIdfVocabulary:
    index: dict[str, int]
    document_frequency: np.ndarray
    n_documents: int

    @property
    def size(self) -> int:
        return len(self.index)

    def idf(self) -> np.ndarray:
        # Smoothed: ln((1+N)/(1+df)) + 1, so unseen-corpus terms still score.
        return np.log((1.0 + self.n_documents) / (1.0 + self.document_frequency)) + 1.0


def build_tfidf(documents) -> TfIdfVocabulary:
    """Vocabulary with document frequencies from tokenized documents."""
    documents = list(documents)
    if not documents:
        raise ValueError("tf-idf needs at least one document")
    index: dict[str, int] = {}
    df: list[int] = []
    for doc in documents:
        for term in set(doc):
            if term not in index:
                index[term] = len(index)
                df.append(0)
            df[index[term]] += 1
    return TfIdfVocabulary(
        index=index,
        document_frequency=np.array(df, dtype=np.float64),
        n_documents=len(documents),
    )


def tfidf_vector(vocab: TfIdfVocabulary, tokens):
    """Sparse L2-normalized tf-idf vector as (indices, values) arrays.

    Terms outside the vocabulary are ignored.
    """
    counts: dict[int, int] = {}
    for term in tokens:
        idx = vocab.index.get(term)
        if idx is not None:
            counts[idx] = counts.get(idx, 0) + 1
    if not counts:
        return np.array([], dtype=np.intp), np.array([], dtype=np.float64)
    idx = np.array(sorted(counts), dtype=np.intp)
    idf = vocab.idf()[idx]
    values = np.array([counts[i] for i in idx], dtype=np.float64) * idf
    norm = math.sqrt(float(values @ values))
    if norm > 0:
        values /= norm
    return idx, values


def token_window(tokens, index: int, k: int = 3):
    """The target token plus up to k neighbors on each side, clipped."""
    if not 0 <= index < len(tokens):
        raise IndexError(f"token index {index} out of range")
    return list(tokens[max(0, index - k) : index + k + 1])


@dataclass
class LinearSvm:
    weights: np.ndarray
    bias: float
    regularization: float

    def decision(self, features) -> float:
        idx, values = features
        return float(self.weights[idx] @ values) + self.bias

    def predict(self, features) -> int:
        return 1 if self.decision(features) >= 0 else 0

    def predict_proba(self, features) -> float:
        # Logistic squash of the margin; adequate for thresholding at 0.5.
        return 1.0 / (1.0 + math.exp(-self.decision(features)))


def train_svm(features, labels, regularization=1e-4, epochs=20, seed=0, dim=None) -> LinearSvm:
    """Primal hinge-loss SGD with the 1/(lambda t) step schedule.

    ``features`` are sparse (indices, values) pairs; ``labels`` are 0/1.
    The bias is updated without regularization.  Deterministic per seed.
    """
    features = list(features)
    labels = [int(y) for y in labels]
    if len(set(labels)) < 2:
        raise ValueError("SVM training needs examples of both classes")
    if dim is None:
        dim = 1 + max((int(idx.max()) for idx, _ in features if len(idx)), default=-1)
    w = np.zeros(dim)
    b = 0.0
    rng = np.random.default_rng(seed)
    t = 0
    for _ in range(epochs):
        for i in rng.permutation(len(features)):
            t += 1
            eta = 1.0 / (regularization * t)
            idx, values = features[i]
            y = 1.0 if labels[i] == 1 else -1.0
            margin = y * (float(w[idx] @ values) + b)
            w *= 1.0 - eta * regularization
            if margin < 1.0:
                w[idx] += eta * y * values
                b += eta * y
    return LinearSvm(weights=w, bias=b, regularization=regularization)


# ---------------------------------------------------------------------------
# Default classifiers
# ---------------------------------------------------------------------------


@dataclass
class DefaultClassifier:
    """Constant predictor; ``positive`` is what it answers everywhere."""

    positive: bool
    name: str

    def predict(self, n: int) -> np.ndarray:
        return np.full(n, 1 if self.positive else 0, dtype=np.intp)


def default_majority(train_labels) -> DefaultClassifier:
    """Predicts the most frequent training label; ties go to the positive class."""
    labels = [int(y) for y in train_labels]
    positives = sum(labels)
    return DefaultClassifier(positive=positives >= len(labels) - positives, name="majority")


def default_all_positive() -> DefaultClassifier:
    return DefaultClassifier(positive=True, name="all_positive")


# ---------------------------------------------------------------------------
# System adapters for the evaluation protocols
# ---------------------------------------------------------------------------


def _token_documents(sentences, k=3):
    docs = []
    for s in sentences:
        for i in range(len(s.tokens)):
            docs.append(token_window(s.tokens, i, k))
    return docs


def _token_labels(sentences):
    return [
        1 if l is TokenLabel.IDIOMATIC else 0 for s in sentences for l in s.token_labels
    ]


class SvmSystem:
    """tf-idf + linear SVM over sentences, or over +-k token windows."""

    def __init__(self, regularization=1e-4, epochs=20, window=3, name="svm"):
        self.regularization = regularization
        self.epochs = epochs
        self.window = window
        self.name = name
        self.fitted: dict[Task, tuple[TfIdfVocabulary, LinearSvm]] = {}

    def fit(self, sentences, archive, task: Task, seed: int):
        sentences = list(sentences)
        if task is Task.TOKEN:
            docs = _token_documents(sentences, self.window)
            labels = _token_labels(sentences)
        else:
            docs = [list(s.tokens) for s in sentences]
            labels = [1 if s.is_idiomatic else 0 for s in sentences]
        vocab = build_tfidf(docs)
        vectors = [tfidf_vector(vocab, doc) for doc in docs]
        svm = train_svm(
            vectors, labels, self.regularization, self.epochs, seed=seed, dim=vocab.size
        )
        self.fitted[task] = (vocab, svm)

    def predict_proba(self, sentences, archive, task: Task):
        vocab, svm = self.fitted[task]
        out = []
        for s in sentences:
            if task is Task.TOKEN:
                probs = [
                    svm.predict_proba(tfidf_vector(vocab, token_window(s.tokens, i, self.window)))
                    for i in range(len(s.tokens))
                ]
                out.append(np.array(probs))
            else:
                out.append(svm.predict_proba(tfidf_vector(vocab, s.tokens)))
        return out


class MajoritySystem:
    """Constant majority-class predictor (the accuracy-matching default)."""

    def __init__(self, name="majority"):
        self.name = name
        self.positive: dict[Task, bool] = {}

    def fit(self, sentences, archive, task: Task, seed: int):
        sentences = list(sentences)
        if task is Task.TOKEN:
            labels = _token_labels(sentences)
        else:
            labels = [1 if s.is_idiomatic else 0 for s in sentences]
        self.positive[task] = default_majority(labels).positive

    def predict_proba(self, sentences, archive, task: Task):
        p = 1.0 if self.positive[task] else 0.0
        if task is Task.TOKEN:
            return [np.full(len(s.tokens), p) for s in sentences]
        return [p for _ in sentences]


class AllPositiveSystem:
    """Constant idiomatic predictor (the F1-matching default)."""

    def __init__(self, name="all_positive"):
        self.name = name

    def fit(self, sentences, archive, task: Task, seed: int):
        pass

    def predict_proba(self, sentences, archive, task: Task):
        if task is Task.TOKEN:
            return [np.ones(len(s.tokens)) for s in sentences]
        return [1.0 for _ in sentences]
