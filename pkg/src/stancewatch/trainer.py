"""Cross-entropy fine-tuning with Adam.

The optimizer is plain Adam (no weight decay, no warmup, no schedule):
    m <- b1*m + (1-b1)*g        mhat = m / (1 - b1^t)
    v <- b2*v + (1-b2)*g^2      vhat = v / (1 - b2^t)
    theta <- theta - lr * mhat / (sqrt(vhat) + eps)

Everything is deterministic given the three seeds (init, shuffle, dropout).
The per-epoch permutation and the per-step dropout masks are derived from
numpy SeedSequences spawned at (epoch,) and (epoch, step), so the schedule
does not depend on how many batches an epoch happens to have.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .corpus import DatasetSplit, Tweet
from .encoder import (
    EncoderConfig,
    ModelParams,
    backward_from_logits,
    collate,
    forward_with_cache,
    init_params,
    param_tensors,
)
from .errors import DataValidationError, NumericalError
from .tokenizer import Encoding, Vocabulary, encode

HEAD_TENSOR_NAMES = frozenset({"pooler_w", "pooler_b", "classifier_w", "classifier_b"})


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 5e-6
    epochs: int = 25
    batch_size: int = 16
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    shuffle_seed: int = 0
    class_weights: tuple[float, float, float, float] | None = None
    init_seed: int = 0
    dropout_seed: int = 0
    head_only: bool = False

    def __post_init__(self) -> None:
        if self.learning_rate < 0:
            raise DataValidationError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.epochs < 1:
            raise DataValidationError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise DataValidationError(f"batch_size must be >= 1, got {self.batch_size}")
        for name in ("beta1", "beta2"):
            b = getattr(self, name)
            if not 0.0 <= b < 1.0:
                raise DataValidationError(f"{name} must be in [0, 1), got {b}")
        if self.adam_eps <= 0:
            raise DataValidationError(f"adam_eps must be positive, got {self.adam_eps}")
        if self.class_weights is not None:
            if len(self.class_weights) != 4:
                raise DataValidationError("class_weights must have exactly 4 entries")
            if any(w < 0 for w in self.class_weights):
                raise DataValidationError("class_weights must be non-negative")
            object.__setattr__(self, "class_weights", tuple(float(w) for w in self.class_weights))


@dataclass
class TrainTrace:
    """Per-epoch mean loss and on-the-fly training accuracy, plus the result."""

    epoch_losses: list[float]
    epoch_accuracies: list[float]
    params: ModelParams


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def _weight_vector(weights: Sequence[float] | None) -> np.ndarray:
    if weights is None:
        return np.ones(4, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (4,):
        raise DataValidationError(f"class weight vector must have shape (4,), got {w.shape}")
    return w


def cross_entropy(
    logits: np.ndarray, labels: Sequence[int], weights: Sequence[float] | None = None
) -> float:
    """Mean over the batch of -w_y * log softmax(logits)_y."""
    logits = np.asarray(logits, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2 or logits.shape[0] != y.shape[0]:
        raise DataValidationError(
            f"need one label per logit row, got logits {logits.shape} and {y.shape[0]} labels"
        )
    w = _weight_vector(weights)
    logp = _log_softmax(logits)
    return float(-(w[y] * logp[np.arange(len(y)), y]).mean())


def _loss_and_dlogits(
    logits: np.ndarray, labels: Sequence[int], weights: Sequence[float] | None
) -> tuple[float, np.ndarray]:
    y = np.asarray(labels, dtype=np.int64)
    w = _weight_vector(weights)
    logp = _log_softmax(logits)
    rows = np.arange(len(y))
    loss = float(-(w[y] * logp[rows, y]).mean())
    dlogits = np.exp(logp)
    dlogits[rows, y] -= 1.0
    dlogits *= w[y][:, None] / len(y)
    return loss, dlogits


def gradients(
    params: ModelParams,
    batch: Sequence[Encoding],
    labels: Sequence[int],
    config: TrainConfig | None = None,
    train_mode: bool = False,
    dropout_seed: int | np.random.SeedSequence | None = None,
) -> dict[str, np.ndarray]:
    """Exact gradient of cross_entropy(forward(batch)) for every tensor.

    ``train_mode`` stays off for gradient checking; train() turns it on so
    the dropout masks participate in the backward pass.
    """
    weights = config.class_weights if config is not None else None
    ids, mask = collate(batch, params.config)
    logits, cache = forward_with_cache(
        params, ids, mask, train_mode=train_mode, dropout_seed=dropout_seed, need_cache=True
    )
    _, dlogits = _loss_and_dlogits(logits, labels, weights)
    grads = backward_from_logits(params, cache, dlogits)
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericalError(f"non-finite gradient in tensor {name}")
    return grads


@dataclass
class AdamState:
    t: int
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]

    @classmethod
    def for_params(cls, params: ModelParams) -> "AdamState":
        m = {name: np.zeros_like(arr) for name, arr in param_tensors(params)}
        v = {name: np.zeros_like(arr) for name, arr in param_tensors(params)}
        return cls(t=0, m=m, v=v)


def adam_step(
    params: ModelParams,
    grads: Mapping[str, np.ndarray],
    state: AdamState,
    config: TrainConfig,
) -> None:
    """One bias-corrected Adam update, in place. Tensors without an entry in
    ``grads`` are left untouched (that is how frozen tensors are skipped)."""
    state.t += 1
    b1, b2 = config.beta1, config.beta2
    bc1 = 1.0 - b1**state.t
    bc2 = 1.0 - b2**state.t
    for name, tensor in param_tensors(params):
        g = grads.get(name)
        if g is None:
            continue
        if g.shape != tensor.shape:
            raise DataValidationError(
                f"gradient shape {g.shape} does not match tensor {name} {tensor.shape}"
            )
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        mhat = m / bc1
        vhat = v / bc2
        tensor -= config.learning_rate * mhat / (np.sqrt(vhat) + config.adam_eps)


def _epoch_permutation(shuffle_seed: int, epoch: int, n: int) -> np.ndarray:
    ss = np.random.SeedSequence(entropy=shuffle_seed, spawn_key=(epoch,))
    return np.random.default_rng(ss).permutation(n)


def _step_dropout_seed(dropout_seed: int, epoch: int, step: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=dropout_seed, spawn_key=(epoch, step))


def train(
    split: DatasetSplit,
    vocab: Vocabulary,
    model_config: EncoderConfig,
    train_config: TrainConfig,
) -> TrainTrace:
    """Fine-tune a freshly initialized model on the split's train half."""
    tweets: Sequence[Tweet] = split.train.examples
    if not tweets:
        raise DataValidationError("train set is empty")
    encodings = [encode(vocab, t.text, model_config.max_len) for t in tweets]
    labels = np.array([int(t.gold_label) for t in tweets], dtype=np.int64)
    n = len(encodings)

    params = init_params(model_config, train_config.init_seed, vocab.content_hash())
    state = AdamState.for_params(params)
    head_only = train_config.head_only

    epoch_losses: list[float] = []
    epoch_accuracies: list[float] = []
    for epoch in range(train_config.epochs):
        perm = _epoch_permutation(train_config.shuffle_seed, epoch, n)
        loss_sum = 0.0
        hit = 0
        for step, start in enumerate(range(0, n, train_config.batch_size)):
            take = perm[start : start + train_config.batch_size]
            batch = [encodings[i] for i in take]
            batch_labels = labels[take]
            ids, mask = collate(batch, model_config)
            logits, cache = forward_with_cache(
                params,
                ids,
                mask,
                train_mode=True,
                dropout_seed=_step_dropout_seed(train_config.dropout_seed, epoch, step),
                need_cache=True,
            )
            loss, dlogits = _loss_and_dlogits(logits, batch_labels, train_config.class_weights)
            if not np.isfinite(loss):
                raise NumericalError(f"non-finite loss at epoch {epoch} batch {step}")
            grads = backward_from_logits(params, cache, dlogits)
            for name, g in grads.items():
                if not np.all(np.isfinite(g)):
                    raise NumericalError(
                        f"non-finite gradient in tensor {name} at epoch {epoch} batch {step}"
                    )
            if head_only:
                grads = {k: v for k, v in grads.items() if k in HEAD_TENSOR_NAMES}
            adam_step(params, grads, state, train_config)
            loss_sum += loss * len(take)
            hit += int((logits.argmax(axis=1) == batch_labels).sum())
        epoch_losses.append(loss_sum / n)
        epoch_accuracies.append(hit / n)
    return TrainTrace(epoch_losses=epoch_losses, epoch_accuracies=epoch_accuracies, params=params)


def write_trace(trace: TrainTrace, path: str | Path) -> None:
    """Plain-text table: epoch, mean_loss, train_accuracy."""
    lines = ["epoch  mean_loss       train_accuracy"]
    for i, (loss, acc) in enumerate(zip(trace.epoch_losses, trace.epoch_accuracies), start=1):
        lines.append(f"{i:5d}  {loss:<14.10f}  {acc:.6f}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
