import math

import numpy as np
import pytest

from idiomdetect.baseline import (
    AllPositiveSystem,
    MajoritySystem,
    SvmSystem,
    build_tfidf,
    default_all_positive,
    default_majority,
    tfidf_vector,
    token_window,
    train_svm,
)
from idiomdetect.corpus import synthetic_corpus
from idiomdetect.embeddings import synthetic_provider
from idiomdetect.model import Task


class TestTfIdf:
    def test_single_document_idf_is_one(self):
        vocab = build_tfidf([["a", "b", "a"]])
        np.testing.assert_allclose(vocab.idf(), [1.0, 1.0])

    def test_two_document_idfs(self):
        vocab = build_tfidf([["both", "only1"], ["both"]])
        idf = vocab.idf()
        assert idf[vocab.index["both"]] == pytest.approx(1.0, abs=1e-12)
        assert idf[vocab.index["only1"]] == pytest.approx(1.4054651081081644, abs=1e-12)

    def test_vectors_unit_norm(self):
        docs = [["a", "b", "c"], ["a", "a", "d"], ["e"]]
        vocab = build_tfidf(docs)
        for doc in docs:
            _, values = tfidf_vector(vocab, doc)
            assert math.sqrt(float(values @ values)) == pytest.approx(1.0, abs=1e-9)

    def test_unknown_terms_ignored(self):
        vocab = build_tfidf([["a"]])
        idx, values = tfidf_vector(vocab, ["zzz"])
        assert len(idx) == 0 and len(values) == 0

    def test_empty_corpus_rejected(self):
        with pytest.raises(ValueError):
            build_tfidf([])


class TestTokenWindow:
    def test_middle_gives_seven(self):
        tokens = [f"t{i}" for i in range(20)]
        assert token_window(tokens, 10) == tokens[7:14]

    def test_left_edge_clipped(self):
        tokens = ["a", "b", "c", "d", "e"]
        assert token_window(tokens, 0) == ["a", "b", "c", "d"]

    def test_two_token_sentence(self):
        assert token_window(["a", "b"], 1) == ["a", "b"]

    def test_out_of_range(self):
        with pytest.raises(IndexError):
            token_window(["a"], 1)


def _dense(points):
    idx = np.array([0, 1], dtype=np.intp)
    return [(idx, np.asarray(p, dtype=np.float64)) for p in points]


def _accuracy(svm, features, labels):
    return np.mean([svm.predict(f) == y for f, y in zip(features, labels)])


def _best_linear_separator(points, labels, angles=720, offsets=81):
    """Exhaustive 2-D oracle: grid over direction and offset."""
    points = np.asarray(points)
    best = 0.0
    spread = np.abs(points).max() + 1.0
    for a in range(angles):
        theta = math.pi * a / angles
        w = np.array([math.cos(theta), math.sin(theta)])
        projections = points @ w
        for b in np.linspace(-spread, spread, offsets):
            pred = (projections + b >= 0).astype(int)
            accuracy = max(
                np.mean(pred == labels), np.mean((1 - pred) == labels)
            )
            best = max(best, accuracy)
    return best


class TestTrainSvm:
    def test_separable_two_points(self):
        features = _dense([[1.0, 0.0], [-1.0, 0.0]])
        svm = train_svm(features, [1, 0], epochs=20, seed=0)
        assert _accuracy(svm, features, [1, 0]) == 1.0

    def test_xor_not_separable(self):
        features = _dense([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
        labels = [0, 0, 1, 1]
        svm = train_svm(features, labels, epochs=50, seed=0)
        assert _accuracy(svm, features, labels) <= 0.75

    def test_blobs_close_to_exhaustive_separator(self):
        rng = np.random.default_rng(12)
        n = 60
        pos = rng.standard_normal((n, 2)) * 0.5 + [2.5, 2.5]
        neg = rng.standard_normal((n, 2)) * 0.5 + [-2.5, -2.5]
        points = np.vstack([pos, neg])
        labels = np.array([1] * n + [0] * n)
        oracle_accuracy = _best_linear_separator(points, labels)
        assert oracle_accuracy == 1.0  # sanity: the blobs are separable
        svm = train_svm(_dense(points), labels, epochs=20, seed=3)
        assert _accuracy(svm, _dense(points), labels) >= 0.95

    def test_single_class_rejected(self):
        with pytest.raises(ValueError, match="both classes"):
            train_svm(_dense([[1, 0], [2, 0]]), [1, 1])

    def test_deterministic(self):
        rng = np.random.default_rng(4)
        points = rng.standard_normal((30, 2))
        labels = (points[:, 0] > 0).astype(int)
        a = train_svm(_dense(points), labels, seed=5)
        b = train_svm(_dense(points), labels, seed=5)
        np.testing.assert_array_equal(a.weights, b.weights)
        assert a.bias == b.bias

    def test_joint_rescaling_preserves_decisions(self):
        rng = np.random.default_rng(5)
        points = rng.standard_normal((40, 2))
        labels = (points @ [1.0, -0.5] > 0).astype(int)
        svm = train_svm(_dense(points), labels, seed=6)
        c = 7.3
        rescaled_weights = svm.weights / c
        for feature in _dense(points * c):
            idx, values = feature
            rescaled = float(rescaled_weights[idx] @ values) + svm.bias
            original = svm.decision((idx, values / c))
            assert math.copysign(1, rescaled) == math.copysign(1, original)
            assert rescaled == pytest.approx(original, rel=1e-9)


class TestDefaults:
    def test_majority_prediction(self):
        clf = default_majority([0, 0, 0, 1])
        assert clf.positive is False
        np.testing.assert_array_equal(clf.predict(3), [0, 0, 0])

    def test_majority_tie_breaks_positive(self):
        assert default_majority([0, 1]).positive is True

    def test_all_positive(self):
        clf = default_all_positive()
        np.testing.assert_array_equal(clf.predict(2), [1, 1])


class TestSystems:
    def test_svm_system_learns_surface_signal(self):
        # Synthetic expressions have distinct member surfaces, so an SVM on
        # token windows should beat chance at spotting expression tokens.
        corpus = synthetic_corpus(n_sentences=80, n_expressions=4, seed=3)
        train_set, test_set = corpus[:60], corpus[60:]
        archive = synthetic_provider(corpus, dim=4, seed=0)
        system = SvmSystem()
        system.fit(train_set, archive, Task.SENTENCE, seed=0)
        probs = system.predict_proba(test_set, archive, Task.SENTENCE)
        assert len(probs) == len(test_set)
        assert all(0.0 <= p <= 1.0 for p in probs)

    def test_majority_system_constant(self):
        corpus = synthetic_corpus(n_sentences=30, n_expressions=3, seed=4)
        archive = synthetic_provider(corpus, dim=4, seed=0)
        system = MajoritySystem()
        system.fit(corpus, archive, Task.TOKEN, seed=0)
        probs = system.predict_proba(corpus[:2], archive, Task.TOKEN)
        # Tokens are mostly non-idiomatic, so the majority verdict is 0.
        assert all(np.all(p == 0.0) for p in probs)

    def test_all_positive_system_constant(self):
        corpus = synthetic_corpus(n_sentences=10, n_expressions=2, seed=5)
        archive = synthetic_provider(corpus, dim=4, seed=0)
        system = AllPositiveSystem()
        system.fit(corpus, archive, Task.SENTENCE, seed=0)
        assert system.predict_proba(corpus, archive, Task.SENTENCE) == [1.0] * 10
