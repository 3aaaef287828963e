"""Combining member classifiers via Gaussian class-conditional densities.

Each member's positive-class probability is mapped through an inverse
logistic transform; the concatenated transforms of r members form an
r-dimensional latent vector.  Per class, the latent distribution over the
training set is modeled as a mixture of K Gaussians (K=1 by default, which
makes the model a quadratic discriminant).  Test posteriors weight each
class's density by gamma_t * n_t, the class frequency prior times the class
count, and are computed in log space so they never underflow to NaN.

A plain unweighted vote over member class predictions is the baseline
combiner.
"""

from __future__ import annotations

import math
import struct
import warnings
from dataclasses import dataclass

import numpy as np

from .corpus import TokenLabel
from .errors import ArchiveFormatError
from .model import Task
from .util import derive_seed

DEFAULT_EPS = 1e-6
DEFAULT_RIDGE = 1e-6


def inverse_logistic(p: float, eps: float = DEFAULT_EPS) -> float:
    """log-odds of p after clamping into [eps, 1-eps]."""
    p = min(max(float(p), eps), 1.0 - eps)
    return math.log(p / (1.0 - p))


def stack_latents(per_model_probabilities, eps: float = DEFAULT_EPS) -> np.ndarray:
    """Latent vector: componentwise inverse logistic, in fixed model order."""
    probs = list(per_model_probabilities)
    if len(probs) < 2:
        raise ValueError("stacking needs at least 2 member models")
    return np.array([inverse_logistic(p, eps) for p in probs])


@dataclass
class GaussianMixture:
    """One class's latent density: K components with full covariances."""

    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray

    def log_density(self, u: np.ndarray) -> float:
        parts = []
        for k in range(len(self.weights)):
            parts.append(
                math.log(self.weights[k]) + _gaussian_log_density(u, self.means[k], self.covariances[k])
            )
        return _logsumexp(parts)


@dataclass
class ClassDensityModel:
    """Fitted per-class mixtures plus the gamma_t and n_t prior factors."""

    mixtures: tuple[GaussianMixture, ...]
    gammas: np.ndarray
    counts: np.ndarray

    @property
    def n_classes(self) -> int:
        return len(self.mixtures)

    @property
    def dim(self) -> int:
        return self.mixtures[0].means.shape[1]


def _logsumexp(values) -> float:
    m = max(values)
    if m == -math.inf:
        return -math.inf
    return m + math.log(sum(math.exp(v - m) for v in values))


def _gaussian_log_density(u, mean, cov) -> float:
    d = len(mean)
    diff = u - mean
    chol = np.linalg.cholesky(cov)
    y = np.linalg.solve(chol, diff)
    log_det = 2.0 * float(np.sum(np.log(np.diag(chol))))
    return -0.5 * (d * math.log(2.0 * math.pi) + log_det + float(y @ y))


def _fit_single_gaussian(points, ridge):
    mean = points.mean(axis=0)
    centered = points - mean
    cov = (centered.T @ centered) / len(points)
    cov += ridge * np.eye(points.shape[1])
    return mean, cov


def _fit_em(points, k, ridge, seed, max_iter=100, tol=1e-8):
    """Seeded EM for a K-component mixture; stops on log-likelihood change."""
    n, d = points.shape
    rng = np.random.default_rng(seed)
    means = points[rng.choice(n, size=k, replace=False)].copy()
    # Partition by nearest seed mean so components start separated instead
    # of all covering the whole cloud.
    assignment = np.argmin(
        ((points[:, None, :] - means[None, :, :]) ** 2).sum(axis=2), axis=1
    )
    covs = np.empty((k, d, d))
    weights = np.empty(k)
    fallback_cov = _fit_single_gaussian(points, ridge)[1]
    for j in range(k):
        members = points[assignment == j]
        if len(members) > d:
            means[j], covs[j] = _fit_single_gaussian(members, ridge)
        else:
            covs[j] = fallback_cov
        weights[j] = max(len(members), 1) / n
    weights /= weights.sum()
    prev_ll = -math.inf
    for _ in range(max_iter):
        log_resp = np.empty((n, k))
        for j in range(k):
            for i in range(n):
                log_resp[i, j] = math.log(weights[j]) + _gaussian_log_density(
                    points[i], means[j], covs[j]
                )
        row_norm = np.array([_logsumexp(list(row)) for row in log_resp])
        ll = float(row_norm.sum())
        resp = np.exp(log_resp - row_norm[:, None])
        nk = resp.sum(axis=0) + 1e-12
        weights = nk / n
        means = (resp.T @ points) / nk[:, None]
        for j in range(k):
            centered = points - means[j]
            covs[j] = (centered.T @ (centered * resp[:, j : j + 1])) / nk[j]
            covs[j] += ridge * np.eye(d)
        if abs(ll - prev_ll) < tol:
            break
        prev_ll = ll
    return weights, means, covs


def fit_mm(latents, labels, k: int = 1, ridge: float = DEFAULT_RIDGE, seed: int = 0) -> ClassDensityModel:
    """Fit per-class latent densities from training-set member predictions.

    With k=1 each class gets its maximum-likelihood Gaussian (ridge-
    regularized); with k>1, seeded EM.  Classes with fewer points than
    dim+1 fall back to a diagonal covariance with a warning.
    """
    latents = np.asarray(latents, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.intp)
    if latents.ndim != 2 or len(latents) != len(labels):
        raise ValueError("latents must be (n, d) with one label per row")
    n, d = latents.shape
    classes = (0, 1)
    mixtures = []
    counts = []
    for t in classes:
        points = latents[labels == t]
        if len(points) == 0:
            raise ValueError(f"class {t} has no training examples")
        if len(points) < d + 1:
            warnings.warn(
                f"class {t}: only {len(points)} examples for a {d}-dim latent; "
                f"falling back to diagonal covariance"
            )
            mean = points.mean(axis=0)
            var = points.var(axis=0) + ridge
            mixtures.append(
                GaussianMixture(
                    weights=np.ones(1),
                    means=mean[None, :],
                    covariances=np.diag(var)[None, :, :],
                )
            )
        elif k == 1:
            mean, cov = _fit_single_gaussian(points, ridge)
            mixtures.append(
                GaussianMixture(
                    weights=np.ones(1), means=mean[None, :], covariances=cov[None, :, :]
                )
            )
        else:
            weights, means, covs = _fit_em(points, k, ridge, seed)
            mixtures.append(GaussianMixture(weights=weights, means=means, covariances=covs))
        counts.append(len(points))
    counts = np.array(counts, dtype=np.float64)
    return ClassDensityModel(
        mixtures=tuple(mixtures), gammas=counts / n, counts=counts
    )


def predict_mm(densities: ClassDensityModel, u) -> np.ndarray:
    """Class posterior at latent point u, stable in log space.

    posterior_t  proportional to  p(u | theta_t) * gamma_t * n_t.
    """
    u = np.asarray(u, dtype=np.float64)
    log_scores = []
    for t in range(densities.n_classes):
        prior = densities.gammas[t] * densities.counts[t]
        log_scores.append(densities.mixtures[t].log_density(u) + math.log(prior))
    norm = _logsumexp(log_scores)
    return np.exp(np.array(log_scores) - norm)


def vote(per_model_class_predictions) -> int:
    """Unweighted majority vote; even-count ties go to the positive class."""
    votes = [int(v) for v in per_model_class_predictions]
    if not votes:
        raise ValueError("no votes to count")
    if len(votes) % 2 == 0:
        warnings.warn("even number of voters; ties break toward the positive class")
    positives = sum(votes)
    return 1 if positives * 2 >= len(votes) else 0


# ---------------------------------------------------------------------------
# Serialization (same container conventions as the embedding archive)
# ---------------------------------------------------------------------------

ENSEMBLE_MAGIC = b"MICEENS1"
ENSEMBLE_VERSION = 1


def save_ensemble(densities: ClassDensityModel, path) -> None:
    with open(path, "wb") as fh:
        fh.write(ENSEMBLE_MAGIC)
        fh.write(
            struct.pack("<III", ENSEMBLE_VERSION, densities.dim, densities.n_classes)
        )
        for t in range(densities.n_classes):
            mixture = densities.mixtures[t]
            fh.write(
                struct.pack(
                    "<ddI",
                    densities.gammas[t],
                    densities.counts[t],
                    len(mixture.weights),
                )
            )
            for k in range(len(mixture.weights)):
                fh.write(struct.pack("<d", mixture.weights[k]))
                fh.write(mixture.means[k].astype("<f8").tobytes())
                fh.write(mixture.covariances[k].astype("<f8").tobytes())


def load_ensemble(path) -> ClassDensityModel:
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[: len(ENSEMBLE_MAGIC)] != ENSEMBLE_MAGIC:
        raise ArchiveFormatError(f"{path}: bad magic bytes")
    pos = len(ENSEMBLE_MAGIC)
    version, dim, n_classes = struct.unpack_from("<III", buf, pos)
    pos += 12
    if version != ENSEMBLE_VERSION:
        raise ArchiveFormatError(f"{path}: unsupported version {version}")
    mixtures = []
    gammas = []
    counts = []
    for _ in range(n_classes):
        gamma, count, k = struct.unpack_from("<ddI", buf, pos)
        pos += struct.calcsize("<ddI")
        weights = np.empty(k)
        means = np.empty((k, dim))
        covs = np.empty((k, dim, dim))
        for j in range(k):
            (weights[j],) = struct.unpack_from("<d", buf, pos)
            pos += 8
            means[j] = np.frombuffer(buf, dtype="<f8", count=dim, offset=pos)
            pos += 8 * dim
            covs[j] = np.frombuffer(buf, dtype="<f8", count=dim * dim, offset=pos).reshape(
                dim, dim
            )
            pos += 8 * dim * dim
        mixtures.append(GaussianMixture(weights=weights, means=means, covariances=covs))
        gammas.append(gamma)
        counts.append(count)
    if pos != len(buf):
        raise ArchiveFormatError(f"{path}: trailing bytes")
    return ClassDensityModel(
        mixtures=tuple(mixtures), gammas=np.array(gammas), counts=np.array(counts)
    )


# ---------------------------------------------------------------------------
# System adapter
# ---------------------------------------------------------------------------


class EnsembleSystem:
    """Combines member systems' probabilities via MM densities or voting."""

    def __init__(self, members, mode: str = "mm", k: int = 1, name=None, fit_members: bool = True):
        if mode not in ("mm", "vote"):
            raise ValueError("mode must be 'mm' or 'vote'")
        self.members = list(members)
        self.mode = mode
        self.k = k
        self.fit_members = fit_members
        self.name = name if name is not None else f"{mode}_ensemble"
        self.densities: dict = {}

    def _member_probs(self, sentences, archive, task):
        return [m.predict_proba(sentences, archive, task) for m in self.members]

    def _flatten(self, per_member, task):
        if task is Task.TOKEN:
            return [np.concatenate(probs) for probs in per_member]
        return [np.asarray(probs, dtype=np.float64) for probs in per_member]

    def fit(self, sentences, archive, task, seed: int):
        sentences = list(sentences)
        if self.fit_members:
            for i, member in enumerate(self.members):
                member.fit(sentences, archive, task, derive_seed(seed, f"member{i}"))
        if self.mode == "vote":
            return
        flat = self._flatten(self._member_probs(sentences, archive, task), task)
        latents = np.stack([stack_latents(col) for col in zip(*flat)])
        if task is Task.TOKEN:
            labels = np.concatenate(
                [
                    [1 if l is TokenLabel.IDIOMATIC else 0 for l in s.token_labels]
                    for s in sentences
                ]
            )
        else:
            labels = np.array([1 if s.is_idiomatic else 0 for s in sentences])
        self.densities[task] = fit_mm(latents, labels, k=self.k, seed=seed)

    def predict_proba(self, sentences, archive, task):
        sentences = list(sentences)
        per_member = self._member_probs(sentences, archive, task)
        out = []
        for i, s in enumerate(sentences):
            if task is Task.TOKEN:
                rows = []
                for t in range(len(s.tokens)):
                    probs = [per_member[m][i][t] for m in range(len(self.members))]
                    rows.append(self._combine(probs, task))
                out.append(np.array(rows))
            else:
                probs = [per_member[m][i] for m in range(len(self.members))]
                out.append(self._combine(probs, task))
        return out

    def _combine(self, probs, task) -> float:
        if self.mode == "vote":
            return float(vote([1 if p >= 0.5 else 0 for p in probs]))
        posterior = predict_mm(self.densities[task], stack_latents(probs))
        return float(posterior[1])
