"""Bidirectional GRU classifier over frozen per-token embeddings.

The recurrent cell uses an update gate z and reset gate r:

    z_t = sigmoid(W_z x_t + U_z h_{t-1} + b_z)
    r_t = sigmoid(W_r x_t + U_r h_{t-1} + b_r)
    h_t = z_t * h_{t-1} + (1 - z_t) * tanh(W_h x_t + U_h (r_t * h_{t-1}) + b_h)

so z_t carries the previous state.  One cell runs left-to-right and an
independent cell right-to-left, both from h_0 = 0.  A 2-unit softmax head
over the (dropout-regularized) concatenated states predicts each token; a
second head over the concatenated final states predicts the sentence.
Training minimizes mean binary cross-entropy of the positive class with
hand-derived backpropagation through time and RMSProp updates; everything
is float64 internally and fully determined by (seed, data, config).
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, asdict, replace
from enum import Enum

import numpy as np

from .errors import (
    CheckpointFormatError,
    MissingEmbeddingError,
    TrainingDivergedError,
)
from .corpus import TokenLabel
from .util import substream

PROB_CLIP = 1e-12


class Task(Enum):
    TOKEN = "token"
    SENTENCE = "sentence"


@dataclass
class GruCellParams:
    W_z: np.ndarray
    U_z: np.ndarray
    b_z: np.ndarray
    W_r: np.ndarray
    U_r: np.ndarray
    b_r: np.ndarray
    W_h: np.ndarray
    U_h: np.ndarray
    b_h: np.ndarray

    def __post_init__(self):
        h, d = self.W_z.shape
        expected = {
            "W_z": (h, d), "U_z": (h, h), "b_z": (h,),
            "W_r": (h, d), "U_r": (h, h), "b_r": (h,),
            "W_h": (h, d), "U_h": (h, h), "b_h": (h,),
        }
        for name, shape in expected.items():
            arr = getattr(self, name)
            if arr.shape != shape:
                raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite values")

    @property
    def hidden_size(self) -> int:
        return self.W_z.shape[0]

    @property
    def input_dim(self) -> int:
        return self.W_z.shape[1]


@dataclass
class TrainConfig:
    epochs: int = 10
    learning_rate: float = 0.001
    rho: float = 0.9
    epsilon: float = 1e-7
    batch_size: int = 32
    seed: int = 0
    clip_norm: float | None = None

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if not 0 < self.rho < 1:
            raise ValueError("rho must be in (0, 1)")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass
class BiGruModel:
    forward_cell: GruCellParams
    backward_cell: GruCellParams
    head_token_w: np.ndarray
    head_token_b: np.ndarray
    head_sentence_w: np.ndarray
    head_sentence_b: np.ndarray
    dropout_rate: float = 0.5
    rng_seed: int = 0

    def __post_init__(self):
        if not 0 <= self.dropout_rate < 1:
            raise ValueError("dropout_rate must be in [0, 1)")
        two_h = 2 * self.hidden_size
        for name in ("head_token_w", "head_sentence_w"):
            if getattr(self, name).shape != (2, two_h):
                raise ValueError(f"{name} must have shape (2, {two_h})")
        for name in ("head_token_b", "head_sentence_b"):
            if getattr(self, name).shape != (2,):
                raise ValueError(f"{name} must have shape (2,)")

    @property
    def hidden_size(self) -> int:
        return self.forward_cell.hidden_size

    @property
    def input_dim(self) -> int:
        return self.forward_cell.input_dim


def init_model(
    input_dim: int, hidden_size: int = 100, dropout_rate: float = 0.5, seed: int = 0
) -> BiGruModel:
    """Glorot-uniform matrices, zero biases, all draws in a fixed order."""
    rng = substream(seed, "init")

    def glorot(rows, cols):
        limit = math.sqrt(6.0 / (rows + cols))
        return rng.uniform(-limit, limit, size=(rows, cols))

    def cell():
        h, d = hidden_size, input_dim
        return GruCellParams(
            W_z=glorot(h, d), U_z=glorot(h, h), b_z=np.zeros(h),
            W_r=glorot(h, d), U_r=glorot(h, h), b_r=np.zeros(h),
            W_h=glorot(h, d), U_h=glorot(h, h), b_h=np.zeros(h),
        )

    return BiGruModel(
        forward_cell=cell(),
        backward_cell=cell(),
        head_token_w=glorot(2, 2 * hidden_size),
        head_token_b=np.zeros(2),
        head_sentence_w=glorot(2, 2 * hidden_size),
        head_sentence_b=np.zeros(2),
        dropout_rate=dropout_rate,
        rng_seed=seed,
    )


def _sigmoid(x):
    # tanh form: overflow-free for any magnitude, identical to 1/(1+e^-x).
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _softmax_rows(logits):
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=-1, keepdims=True)


def gru_cell_step(params: GruCellParams, x_t, h_prev) -> np.ndarray:
    """One recurrence step; z and r stay in (0,1), h stays in (-1,1)."""
    x_t = np.asarray(x_t, dtype=np.float64)
    h_prev = np.asarray(h_prev, dtype=np.float64)
    if not (np.all(np.isfinite(x_t)) and np.all(np.isfinite(h_prev))):
        raise ValueError("non-finite input to gru_cell_step")
    z = _sigmoid(params.W_z @ x_t + params.U_z @ h_prev + params.b_z)
    r = _sigmoid(params.W_r @ x_t + params.U_r @ h_prev + params.b_r)
    c = np.tanh(params.W_h @ x_t + params.U_h @ (r * h_prev) + params.b_h)
    return z * h_prev + (1.0 - z) * c


def _run_cell(params: GruCellParams, xs):
    """Unrolled forward over xs (T, D) from h_0 = 0, caching for backprop."""
    T = xs.shape[0]
    H = params.hidden_size
    ax_z = xs @ params.W_z.T + params.b_z
    ax_r = xs @ params.W_r.T + params.b_r
    ax_h = xs @ params.W_h.T + params.b_h
    states = np.empty((T, H))
    zs = np.empty((T, H))
    rs = np.empty((T, H))
    cs = np.empty((T, H))
    h_prevs = np.empty((T, H))
    h = np.zeros(H)
    for t in range(T):
        z = _sigmoid(ax_z[t] + params.U_z @ h)
        r = _sigmoid(ax_r[t] + params.U_r @ h)
        c = np.tanh(ax_h[t] + params.U_h @ (r * h))
        zs[t], rs[t], cs[t], h_prevs[t] = z, r, c, h
        h = z * h + (1.0 - z) * c
        states[t] = h
    return states, (xs, zs, rs, cs, h_prevs)


def _cell_backward(params: GruCellParams, cache, dstates, grads, prefix):
    """Backprop through time for one direction; accumulates into grads."""
    xs, zs, rs, cs, h_prevs = cache
    dh = np.zeros(params.hidden_size)
    for t in range(xs.shape[0] - 1, -1, -1):
        dh = dh + dstates[t]
        z, r, c, h_prev, x = zs[t], rs[t], cs[t], h_prevs[t], xs[t]
        dz = dh * (h_prev - c)
        dc = dh * (1.0 - z)
        da_c = dc * (1.0 - c * c)
        da_z = dz * z * (1.0 - z)
        dhr = params.U_h.T @ da_c
        dr = dhr * h_prev
        da_r = dr * r * (1.0 - r)
        grads[prefix + ".W_h"] += np.outer(da_c, x)
        grads[prefix + ".U_h"] += np.outer(da_c, r * h_prev)
        grads[prefix + ".b_h"] += da_c
        grads[prefix + ".W_r"] += np.outer(da_r, x)
        grads[prefix + ".U_r"] += np.outer(da_r, h_prev)
        grads[prefix + ".b_r"] += da_r
        grads[prefix + ".W_z"] += np.outer(da_z, x)
        grads[prefix + ".U_z"] += np.outer(da_z, h_prev)
        grads[prefix + ".b_z"] += da_z
        dh = dh * z + dhr * r + params.U_r.T @ da_r + params.U_z.T @ da_z


def _forward_full(model: BiGruModel, xs):
    if xs.shape[0] < 1:
        raise ValueError("need at least one token")
    if xs.shape[1] != model.input_dim:
        raise ValueError(
            f"embedding dim {xs.shape[1]} does not match model input dim {model.input_dim}"
        )
    states_f, cache_f = _run_cell(model.forward_cell, xs)
    states_b_rev, cache_b = _run_cell(model.backward_cell, xs[::-1])
    token_states = np.concatenate([states_f, states_b_rev[::-1]], axis=1)
    pooled = np.concatenate([states_f[-1], states_b_rev[-1]])
    return token_states, pooled, cache_f, cache_b


def bigru_forward(model: BiGruModel, embeddings):
    """Per-token concatenated states (T, 2H) and the pooled final state (2H,)."""
    xs = np.asarray(embeddings, dtype=np.float64)
    token_states, pooled, _, _ = _forward_full(model, xs)
    return token_states, pooled


def _dropout_mask(rng, shape, rate):
    # Inverted dropout: scaling here makes eval mode the identity.
    if rate <= 0.0:
        return np.ones(shape)
    keep = 1.0 - rate
    return (rng.random(shape) < keep).astype(np.float64) / keep


def predict_tokens(model: BiGruModel, embeddings, train_mode: bool = False, rng=None):
    """Softmax rows (T, 2) per token; column 1 is the idiomatic class."""
    xs = np.asarray(embeddings, dtype=np.float64)
    token_states, _, _, _ = _forward_full(model, xs)
    if train_mode:
        if rng is None:
            rng = substream(model.rng_seed, "dropout")
        token_states = token_states * _dropout_mask(rng, token_states.shape, model.dropout_rate)
    logits = token_states @ model.head_token_w.T + model.head_token_b
    return _softmax_rows(logits)


def predict_sentence(model: BiGruModel, embeddings, train_mode: bool = False, rng=None):
    """Softmax pair for the whole sentence; index 1 is the idiomatic class."""
    xs = np.asarray(embeddings, dtype=np.float64)
    _, pooled, _, _ = _forward_full(model, xs)
    if train_mode:
        if rng is None:
            rng = substream(model.rng_seed, "dropout")
        pooled = pooled * _dropout_mask(rng, pooled.shape, model.dropout_rate)
    logits = model.head_sentence_w @ pooled + model.head_sentence_b
    return _softmax_rows(logits)


def bce_loss(probabilities, labels) -> float:
    """Mean binary cross-entropy of positive-class probabilities."""
    p = np.clip(np.asarray(probabilities, dtype=np.float64), PROB_CLIP, 1.0 - PROB_CLIP)
    y = np.asarray(labels, dtype=np.float64)
    return float(np.mean(-(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))))


# ---------------------------------------------------------------------------
# Parameters, gradients, optimizer
# ---------------------------------------------------------------------------

_CELL_FIELDS = ("W_z", "U_z", "b_z", "W_r", "U_r", "b_r", "W_h", "U_h", "b_h")


def model_parameters(model: BiGruModel) -> dict[str, np.ndarray]:
    """Live views of every trainable array, in a fixed order."""
    params: dict[str, np.ndarray] = {}
    for prefix, cell in (("fwd", model.forward_cell), ("bwd", model.backward_cell)):
        for name in _CELL_FIELDS:
            params[f"{prefix}.{name}"] = getattr(cell, name)
    params["head_token.W"] = model.head_token_w
    params["head_token.b"] = model.head_token_b
    params["head_sentence.W"] = model.head_sentence_w
    params["head_sentence.b"] = model.head_sentence_b
    return params


def zero_gradients(model: BiGruModel) -> dict[str, np.ndarray]:
    return {name: np.zeros_like(arr) for name, arr in model_parameters(model).items()}


def make_dropout_masks(model: BiGruModel, batch, task: Task, rng):
    """Pre-drawn scaled masks, shared between loss and gradient evaluations."""
    masks = []
    for xs, _ in batch:
        shape = (xs.shape[0], 2 * model.hidden_size) if task is Task.TOKEN else (2 * model.hidden_size,)
        masks.append(_dropout_mask(rng, shape, model.dropout_rate))
    return masks


def _batch_units(batch, task: Task) -> int:
    if task is Task.TOKEN:
        return sum(xs.shape[0] for xs, _ in batch)
    return len(batch)


def forward_loss(model: BiGruModel, batch, task: Task, masks) -> float:
    """Mean BCE over the batch's predicted units, with fixed dropout masks."""
    total = 0.0
    units = _batch_units(batch, task)
    for (xs, y), mask in zip(batch, masks):
        token_states, pooled, _, _ = _forward_full(model, xs)
        if task is Task.TOKEN:
            logits = (token_states * mask) @ model.head_token_w.T + model.head_token_b
            p = _softmax_rows(logits)[:, 1]
            total += bce_loss(p, y) * xs.shape[0]
        else:
            logits = model.head_sentence_w @ (pooled * mask) + model.head_sentence_b
            p = _softmax_rows(logits)[1]
            total += bce_loss([p], [y])
    return total / units


def backward(model: BiGruModel, batch, task: Task, rng=None, masks=None):
    """Loss and exact gradients of mean BCE for a batch.

    ``batch`` is a list of (embedding matrix, labels) pairs: labels are a
    0/1 vector per token for the token task, a 0/1 scalar for the sentence
    task.  Gradients flow through softmax, the active head, the dropout
    masks, and the unrolled recurrences of both directions.
    """
    if masks is None:
        if rng is None:
            rng = substream(model.rng_seed, "dropout")
        masks = make_dropout_masks(model, batch, task, rng)
    grads = zero_gradients(model)
    units = _batch_units(batch, task)
    H = model.hidden_size
    total = 0.0
    for (xs, y), mask in zip(batch, masks):
        token_states, pooled, cache_f, cache_b = _forward_full(model, xs)
        T = xs.shape[0]
        if task is Task.TOKEN:
            dropped = token_states * mask
            logits = dropped @ model.head_token_w.T + model.head_token_b
            p = _softmax_rows(logits)[:, 1]
            total += bce_loss(p, y) * T
            # d(mean BCE)/d(logits) through the 2-unit softmax collapses to (p - y)
            delta = (p - np.asarray(y, dtype=np.float64)) / units
            dlogits = np.stack([-delta, delta], axis=1)
            grads["head_token.W"] += dlogits.T @ dropped
            grads["head_token.b"] += dlogits.sum(axis=0)
            dstates = (dlogits @ model.head_token_w) * mask
            dstream_f = dstates[:, :H]
            dstream_b = dstates[::-1, H:]
        else:
            dropped = pooled * mask
            logits = model.head_sentence_w @ dropped + model.head_sentence_b
            p = _softmax_rows(logits)[1]
            total += bce_loss([p], [y])
            delta = (p - float(y)) / units
            dlogits = np.array([-delta, delta])
            grads["head_sentence.W"] += np.outer(dlogits, dropped)
            grads["head_sentence.b"] += dlogits
            dpooled = (model.head_sentence_w.T @ dlogits) * mask
            dstream_f = np.zeros((T, H))
            dstream_f[-1] = dpooled[:H]
            dstream_b = np.zeros((T, H))
            dstream_b[-1] = dpooled[H:]
        _cell_backward(model.forward_cell, cache_f, dstream_f, grads, "fwd")
        _cell_backward(model.backward_cell, cache_b, dstream_b, grads, "bwd")
    return total / units, grads


def init_rmsprop_state(params: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    """Running mean-square accumulators, one per parameter, starting at zero."""
    return {name: np.zeros_like(arr) for name, arr in params.items()}


def rmsprop_step(params, grads, state, config: TrainConfig):
    """In-place update: E <- rho E + (1-rho) g^2; theta <- theta - lr g/(sqrt(E)+eps)."""
    for name, p in params.items():
        g = grads[name]
        acc = state[name]
        acc *= config.rho
        acc += (1.0 - config.rho) * g * g
        p -= config.learning_rate * g / (np.sqrt(acc) + config.epsilon)
    return params


def _clip_gradients(grads, max_norm):
    norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if norm > max_norm > 0:
        scale = max_norm / norm
        for g in grads.values():
            g *= scale
    return grads


def _labels_for(sentence, task: Task):
    if task is Task.TOKEN:
        return np.array(
            [1 if l is TokenLabel.IDIOMATIC else 0 for l in sentence.token_labels]
        )
    return 1 if sentence.is_idiomatic else 0


def train(model: BiGruModel, sentences, archive, task: Task, config: TrainConfig):
    """Train in place; returns the model and the per-epoch mean loss trace.

    Sentences are shuffled each epoch and grouped into batches; within a
    batch each sentence is processed singly (no padding), and the batch loss
    is the mean over its predicted units.  Shuffle order, dropout masks, and
    initialization all derive from fixed seeds, so the trained parameters
    are bitwise reproducible.
    """
    sentences = list(sentences)
    if not sentences:
        raise ValueError("no training sentences")
    missing = sorted(s.id for s in sentences if s.id not in archive)
    if missing:
        raise MissingEmbeddingError(missing)
    data = [
        (archive.get(s.id).vectors.astype(np.float64), _labels_for(s, task))
        for s in sentences
    ]
    params = model_parameters(model)
    state = init_rmsprop_state(params)
    shuffle_rng = substream(config.seed, "shuffle")
    dropout_rng = substream(config.seed, "dropout")
    trace = []
    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(len(data))
        loss_sum = 0.0
        unit_sum = 0
        for start in range(0, len(order), config.batch_size):
            batch = [data[i] for i in order[start : start + config.batch_size]]
            loss, grads = backward(model, batch, task, rng=dropout_rng)
            if not math.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite loss in epoch {epoch + 1} at batch offset {start}"
                )
            if config.clip_norm is not None:
                _clip_gradients(grads, config.clip_norm)
            rmsprop_step(params, grads, state, config)
            units = _batch_units(batch, task)
            loss_sum += loss * units
            unit_sum += units
        trace.append(loss_sum / unit_sum)
    return model, trace


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

CHECKPOINT_MAGIC = b"MICEMDL1"
CHECKPOINT_VERSION = 1


def save_checkpoint(model: BiGruModel, config: TrainConfig, path) -> None:
    params = model_parameters(model)
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(
            struct.pack(
                "<IIIdq",
                CHECKPOINT_VERSION,
                model.input_dim,
                model.hidden_size,
                model.dropout_rate,
                model.rng_seed,
            )
        )
        fh.write(struct.pack("<I", len(params)))
        for name, arr in params.items():
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)) + encoded)
            fh.write(struct.pack("<B", arr.ndim))
            for d in arr.shape:
                fh.write(struct.pack("<I", d))
            fh.write(arr.astype("<f8").tobytes(order="C"))
        meta = json.dumps(asdict(config), sort_keys=True).encode("utf-8")
        fh.write(struct.pack("<I", len(meta)) + meta)


def load_checkpoint(path):
    """Returns (model, config) rebuilt from a checkpoint file."""
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[: len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise CheckpointFormatError(f"{path}: bad magic bytes")
    pos = len(CHECKPOINT_MAGIC)
    try:
        version, dim, hidden, dropout_rate, rng_seed = struct.unpack_from("<IIIdq", buf, pos)
        pos += struct.calcsize("<IIIdq")
        if version != CHECKPOINT_VERSION:
            raise CheckpointFormatError(f"{path}: unsupported version {version}")
        (n_tensors,) = struct.unpack_from("<I", buf, pos)
        pos += 4
        tensors = {}
        for _ in range(n_tensors):
            (name_len,) = struct.unpack_from("<H", buf, pos)
            pos += 2
            name = buf[pos : pos + name_len].decode("utf-8")
            pos += name_len
            (ndim,) = struct.unpack_from("<B", buf, pos)
            pos += 1
            shape = struct.unpack_from(f"<{ndim}I", buf, pos)
            pos += 4 * ndim
            count = int(np.prod(shape)) if ndim else 1
            tensors[name] = (
                np.frombuffer(buf, dtype="<f8", count=count, offset=pos)
                .reshape(shape)
                .copy()
            )
            pos += 8 * count
        (meta_len,) = struct.unpack_from("<I", buf, pos)
        pos += 4
        meta = json.loads(buf[pos : pos + meta_len].decode("utf-8"))
        pos += meta_len
    except (struct.error, IndexError, ValueError) as exc:
        raise CheckpointFormatError(f"{path}: truncated or corrupt checkpoint") from exc
    if pos != len(buf):
        raise CheckpointFormatError(f"{path}: trailing bytes after checkpoint")

    def cell(prefix):
        return GruCellParams(**{f: tensors[f"{prefix}.{f}"] for f in _CELL_FIELDS})

    try:
        model = BiGruModel(
            forward_cell=cell("fwd"),
            backward_cell=cell("bwd"),
            head_token_w=tensors["head_token.W"],
            head_token_b=tensors["head_token.b"],
            head_sentence_w=tensors["head_sentence.W"],
            head_sentence_b=tensors["head_sentence.b"],
            dropout_rate=dropout_rate,
            rng_seed=rng_seed,
        )
        config = TrainConfig(**meta)
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointFormatError(f"{path}: inconsistent checkpoint contents") from exc
    return model, config


# ---------------------------------------------------------------------------
# System adapter for the evaluation protocols
# ---------------------------------------------------------------------------


class GruSystem:
    """Trains one biGRU per task and predicts positive-class probabilities."""

    def __init__(self, hidden_size=100, dropout_rate=0.5, config=None, name="gru"):
        self.hidden_size = hidden_size
        self.dropout_rate = dropout_rate
        self.config = config if config is not None else TrainConfig()
        self.name = name
        self.models: dict[Task, BiGruModel] = {}
        self.traces: dict[Task, list[float]] = {}

    def fit(self, sentences, archive, task: Task, seed: int):
        cfg = replace(self.config, seed=seed)
        model = init_model(
            archive.dim, self.hidden_size, self.dropout_rate, seed=seed
        )
        _, trace = train(model, sentences, archive, task, cfg)
        self.models[task] = model
        self.traces[task] = trace

    def predict_proba(self, sentences, archive, task: Task):
        model = self.models[task]
        out = []
        for s in sentences:
            xs = archive.get(s.id).vectors.astype(np.float64)
            if task is Task.TOKEN:
                out.append(predict_tokens(model, xs)[:, 1])
            else:
                out.append(float(predict_sentence(model, xs)[1]))
        return out


class PretrainedGruSystem(GruSystem):
    """A GruSystem wrapping already-trained checkpoints; fit is a no-op."""

    def __init__(self, models: dict[Task, BiGruModel], name="gru"):
        super().__init__(name=name)
        self.models = dict(models)

    def fit(self, sentences, archive, task: Task, seed: int):
        if task not in self.models:
            raise ValueError(f"no checkpoint loaded for task {task.value}")
