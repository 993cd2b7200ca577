from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from ..errors import NonFiniteLoss
from ..labeler import LabeledExample
from .encoder import DEFAULT_ENCODER, ContextEncoder, SparseRows
from .model import Mode, argmax_tags, backward, forward, total_loss
from .params import EncoderConfig, TaggerParams

log = logging.getLogger(__name__)

MAX_CLASS_WEIGHT = 20.0


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    dropout_rate: float = 0.3
    class_weights: Optional[Sequence[float]] = None  # None: derive from label frequencies
    epochs: int = 10
    batch_size: int = 8
    seed: int = 13
    target_accuracy: Optional[float] = None  # stop once eval accuracy reaches this

    def __post_init__(self):
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")
        if self.class_weights is not None and any(w <= 0 for w in self.class_weights):
            raise ValueError("class weights must be positive")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")
        if self.target_accuracy is not None and not 0.0 < self.target_accuracy <= 1.0:
            raise ValueError("target_accuracy must be in (0, 1]")


@dataclass
class EpochStats:
    epoch: int
    loss_sgt: float
    loss_gd: float
    loss_ged: float
    loss_final: float
    token_acc: float

    def tsv(self) -> str:
        return (f"{self.epoch}\t{self.loss_sgt:.6f}\t{self.loss_gd:.6f}\t{self.loss_ged:.6f}"
                f"\t{self.loss_final:.6f}\t{self.token_acc:.6f}")


@dataclass
class TrainResult:
    params: TaggerParams
    history: List[EpochStats] = field(default_factory=list)
    best_params: Optional[TaggerParams] = None
    best_epoch: int = 0
    best_accuracy: float = 0.0


def default_class_weights(examples: Sequence[LabeledExample], n_classes: int) -> np.ndarray:
    """weight(O) = 1, weight(I_k) = clamp(freq(O) / freq(I_k), 1, 20)."""
    counts = np.zeros(n_classes)
    for ex in examples:
        counts += np.bincount(ex.y_sgt, minlength=n_classes)[:n_classes]
    weights = np.ones(n_classes)
    for k in range(1, n_classes):
        ratio = counts[0] / counts[k] if counts[k] else np.inf
        weights[k] = min(max(ratio, 1.0), MAX_CLASS_WEIGHT)
    return weights


class Adam:
    """Adaptive moment optimizer. Tables listed in ``sparse`` only step the
    rows that received gradient in the current batch."""

    def __init__(self, params: TaggerParams, lr=1e-3, b1=0.9, b2=0.999, eps=1e-8,
                 sparse=("token_embeddings",)):
        self.params = params
        self.lr, self.b1, self.b2, self.eps = lr, b1, b2, eps
        self.sparse = set(sparse)
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.tensors.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.tensors.items()}
        self.row_steps = {k: np.zeros(params.tensors[k].shape[0], dtype=np.int64) for k in self.sparse}

    def step(self, grads: dict) -> None:
        self.t += 1
        for name, g in grads.items():
            if isinstance(g, SparseRows):
                self._sparse_step(name, g)
            else:
                self._dense_step(name, g)

    def _dense_step(self, name, g):
        m, v = self.m[name], self.v[name]
        m *= self.b1
        m += (1 - self.b1) * g
        v *= self.b2
        v += (1 - self.b2) * g * g
        m_hat = m / (1 - self.b1 ** self.t)
        v_hat = v / (1 - self.b2 ** self.t)
        self.params.tensors[name] -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def _sparse_step(self, name, g: SparseRows):
        ids, inverse = np.unique(g.ids, return_inverse=True)
        rows = np.zeros((len(ids), g.rows.shape[1]))
        np.add.at(rows, inverse, g.rows)
        steps = self.row_steps[name]
        steps[ids] += 1
        t = steps[ids][:, None]
        m = self.b1 * self.m[name][ids] + (1 - self.b1) * rows
        v = self.b2 * self.v[name][ids] + (1 - self.b2) * rows * rows
        self.m[name][ids] = m
        self.v[name][ids] = v
        m_hat = m / (1 - self.b1 ** t)
        v_hat = v / (1 - self.b2 ** t)
        self.params.tensors[name][ids] -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def _merge(acc: dict, grads: dict, scale: float) -> None:
    for name, g in grads.items():
        if isinstance(g, SparseRows):
            prev = acc.get(name)
            rows = g.rows * scale
            acc[name] = SparseRows(g.ids, rows) if prev is None else SparseRows(
                np.concatenate([prev.ids, g.ids]), np.concatenate([prev.rows, rows]))
        elif name in acc:
            acc[name] += g * scale
        else:
            acc[name] = g * scale


def token_accuracy(params: TaggerParams, examples: Sequence[LabeledExample],
                   encoder: ContextEncoder = DEFAULT_ENCODER) -> float:
    correct = total = 0
    for ex in examples:
        pred = argmax_tags(forward(ex.input, params, Mode.INFER, encoder=encoder).logits_sgt)
        correct += sum(int(p == y) for p, y in zip(pred, ex.y_sgt))
        total += len(ex.y_sgt)
    return correct / total if total else 0.0


def train(examples: Sequence[LabeledExample], config: TrainConfig,
          encoder_config: Optional[EncoderConfig] = None, n_classes: int = 11,
          speaker_width: int = 1, connection_words: Sequence[str] = (),
          dev: Optional[Sequence[LabeledExample]] = None,
          on_epoch: Optional[Callable[[EpochStats], None]] = None,
          encoder: ContextEncoder = DEFAULT_ENCODER,
          init: Optional[TaggerParams] = None) -> TrainResult:
    """Mini-batch Adam on L_sgt + L_gd + L_ged.

    Shuffling, initialization and dropout draw from separate streams seeded
    by ``config.seed``, so two runs with the same inputs are bit-identical.
    Token accuracy per epoch is measured without dropout on ``dev`` (or on
    the training examples when no dev set is given); ``best_params`` tracks
    the epoch with the highest accuracy.
    """
    examples = list(examples)
    if not examples:
        raise ValueError("train needs at least one example")
    encoder_config = encoder_config or EncoderConfig()
    params = init.copy() if init is not None else TaggerParams.init(
        encoder_config, n_classes, speaker_width, config.seed, connection_words)
    weights = (np.asarray(config.class_weights, dtype=float) if config.class_weights is not None
               else default_class_weights(examples, params.n_classes))
    if len(weights) != params.n_classes:
        raise ValueError(f"expected {params.n_classes} class weights, got {len(weights)}")

    shuffle_rng = np.random.default_rng([config.seed, 1])
    dropout_rng = np.random.default_rng([config.seed, 2])
    opt = Adam(params, lr=config.learning_rate)
    result = TrainResult(params)
    eval_set = dev if dev else examples
    last_good = params.copy()

    for epoch in range(1, config.epochs + 1):
        order = shuffle_rng.permutation(len(examples))
        sums = np.zeros(3)
        for b in range(0, len(order), config.batch_size):
            batch = [examples[i] for i in order[b:b + config.batch_size]]
            acc: dict = {}
            scale = 1.0 / len(batch)
            for ex in batch:
                trace = forward(ex.input, params, Mode.TRAIN, config.dropout_rate, dropout_rng,
                                encoder=encoder)
                losses = total_loss(trace, ex.y_sgt, ex.y_gd, ex.y_ged, weights)
                if not np.isfinite(losses.total):
                    raise NonFiniteLoss(f"non-finite loss at epoch {epoch}", last_good, epoch)
                sums += (losses.sgt, losses.gd, losses.ged)
                _merge(acc, backward(trace, ex.y_sgt, ex.y_gd, ex.y_ged, params, weights, encoder), scale)
            opt.step(acc)
        if not all(np.all(np.isfinite(v)) for v in params.tensors.values()):
            raise NonFiniteLoss(f"non-finite parameters after epoch {epoch}", last_good, epoch)
        last_good = params.copy()

        mean = sums / len(examples)
        stats = EpochStats(epoch, *mean, float(mean.sum()), token_accuracy(params, eval_set, encoder))
        result.history.append(stats)
        log.info("epoch %d loss %.5f acc %.4f", epoch, stats.loss_final, stats.token_acc)
        if result.best_params is None or stats.token_acc > result.best_accuracy:
            result.best_params = last_good
            result.best_epoch = epoch
            result.best_accuracy = stats.token_acc
        if on_epoch is not None:
            on_epoch(stats)
        if config.target_accuracy is not None and stats.token_acc >= config.target_accuracy:
            break

    if result.best_params is None:
        result.best_params = params.copy()
    return result
