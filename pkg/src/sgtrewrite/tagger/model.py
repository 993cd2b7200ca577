"""Forward pass, multi-task losses and their analytic gradient.

E comes from the encoder, EA = [dropout(E), speaker_track], and three
independent linear heads read EA: the ordered-fragment tagger (N classes),
fragment detection (2 classes) and fragment edge detection (2 classes).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np

from ..corpus import AssembledInput
from ..errors import LabelOutOfRange, NonFiniteGradient
from .encoder import DEFAULT_ENCODER, ContextEncoder, SparseRows
from .params import TaggerParams

HEADS = ("sgt", "gd", "ged")


class Mode(enum.Enum):
    TRAIN = "train"
    INFER = "infer"


@dataclass
class ForwardTrace:
    E: np.ndarray
    EA: np.ndarray
    logits_sgt: np.ndarray
    logits_gd: np.ndarray
    logits_ged: np.ndarray
    dropout_mask: Optional[np.ndarray] = None
    cache: object = None

    def logits(self, head: str) -> np.ndarray:
        return getattr(self, "logits_" + head)


@dataclass(frozen=True)
class Losses:
    sgt: float
    gd: float
    ged: float

    @property
    def total(self) -> float:
        return self.sgt + self.gd + self.ged


def encode(inp: AssembledInput, params: TaggerParams, mode: Mode = Mode.INFER,
           encoder: ContextEncoder = DEFAULT_ENCODER) -> np.ndarray:
    # the reference encoder has no stochastic parts; dropout lives in apply_speaker
    E, _ = encoder.encode(params, inp.texts)
    return E


def dropout_mask(shape, rate: float, rng: np.random.Generator) -> np.ndarray:
    """Inverted-dropout mask: kept entries are scaled by 1/(1-rate)."""
    if not 0.0 <= rate < 1.0:
        raise ValueError("dropout rate must be in [0, 1)")
    if rate == 0.0:
        return np.ones(shape)
    keep = rng.random(shape) >= rate
    return keep / (1.0 - rate)


def apply_speaker(E: np.ndarray, speaker_track: np.ndarray, dropout_rate: float = 0.0,
                  mode: Mode = Mode.INFER, rng: Optional[np.random.Generator] = None,
                  mask: Optional[np.ndarray] = None):
    """Return ``(EA, mask)``. The speaker columns are never dropped."""
    track = np.asarray(speaker_track, dtype=float)
    if track.ndim == 1:
        track = track[:, None]
    if track.shape[0] != E.shape[0]:
        raise ValueError(f"speaker track has {track.shape[0]} rows, E has {E.shape[0]}")
    if mode is Mode.TRAIN and mask is None and dropout_rate > 0.0:
        if rng is None:
            raise ValueError("train-mode dropout needs an rng or an explicit mask")
        mask = dropout_mask(E.shape, dropout_rate, rng)
    if mode is Mode.INFER:
        mask = None
    dropped = E * mask if mask is not None else E
    return np.concatenate([dropped, track], axis=1), mask


def forward(inp: AssembledInput, params: TaggerParams, mode: Mode = Mode.INFER,
            dropout_rate: float = 0.0, rng: Optional[np.random.Generator] = None,
            mask: Optional[np.ndarray] = None,
            encoder: ContextEncoder = DEFAULT_ENCODER) -> ForwardTrace:
    E, cache = encoder.encode(params, inp.texts)
    EA, mask = apply_speaker(E, inp.speaker_track, dropout_rate, mode, rng, mask)
    return ForwardTrace(
        E, EA,
        EA @ params.head_sgt_w + params.head_sgt_b,
        EA @ params.head_gd_w + params.head_gd_b,
        EA @ params.head_ged_w + params.head_ged_b,
        mask, cache,
    )


def log_softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax(z: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(z))


def _targets(y, n: int) -> np.ndarray:
    y = np.asarray(y, dtype=np.int64)
    if y.size and (y.min() < 0 or y.max() >= n):
        raise LabelOutOfRange(f"labels must lie in [0, {n}), got range [{y.min()}, {y.max()}]")
    return y


def weighted_ce(logits: np.ndarray, y, weights: Optional[np.ndarray] = None) -> float:
    """(1/M) * sum_i w[y_i] * -log softmax(logits_i)[y_i]."""
    m, n = logits.shape
    y = _targets(y, n)
    if m == 0:
        return 0.0
    nll = -log_softmax(logits)[np.arange(m), y]
    if weights is not None:
        nll = nll * np.asarray(weights, dtype=float)[y]
    return float(nll.sum() / m)


def _ce_grad(logits: np.ndarray, y: np.ndarray, weights: Optional[np.ndarray]) -> np.ndarray:
    m = logits.shape[0]
    g = softmax(logits)
    g[np.arange(m), y] -= 1.0
    if weights is not None:
        g *= np.asarray(weights, dtype=float)[y][:, None]
    return g / m


def loss_sgt(logits_sgt: np.ndarray, y_sgt, class_weights=None) -> float:
    return weighted_ce(logits_sgt, y_sgt, class_weights)


def loss_gd(logits_gd: np.ndarray, y_gd) -> float:
    return weighted_ce(logits_gd, y_gd)


def loss_ged(logits_ged: np.ndarray, y_ged) -> float:
    return weighted_ce(logits_ged, y_ged)


def total_loss(trace: ForwardTrace, y_sgt, y_gd, y_ged, class_weights=None) -> Losses:
    return Losses(
        loss_sgt(trace.logits_sgt, y_sgt, class_weights),
        loss_gd(trace.logits_gd, y_gd),
        loss_ged(trace.logits_ged, y_ged),
    )


def backward(trace: ForwardTrace, y_sgt, y_gd, y_ged, params: TaggerParams,
             class_weights=None, encoder: ContextEncoder = DEFAULT_ENCODER) -> Dict[str, object]:
    """Gradient of the summed loss for one example; the token embedding
    gradient comes back as :class:`SparseRows`."""
    h = params.config.hidden_dim
    targets = {
        "sgt": (_targets(y_sgt, params.n_classes), class_weights),
        "gd": (_targets(y_gd, 2), None),
        "ged": (_targets(y_ged, 2), None),
    }
    grads: Dict[str, object] = {}
    dEA = np.zeros_like(trace.EA)
    for head in HEADS:
        y, w = targets[head]
        dz = _ce_grad(trace.logits(head), y, w)
        W = getattr(params, f"head_{head}_w")
        grads[f"head_{head}_w"] = trace.EA.T @ dz
        grads[f"head_{head}_b"] = dz.sum(axis=0)
        dEA += dz @ W.T
    dE = dEA[:, :h]
    if trace.dropout_mask is not None:
        dE = dE * trace.dropout_mask
    grads.update(encoder.backward(params, trace.cache, dE))
    return grads


def gradient(inp: AssembledInput, y_sgt, y_gd, y_ged, params: TaggerParams,
             class_weights=None, mode: Mode = Mode.INFER, dropout_rate: float = 0.0,
             rng: Optional[np.random.Generator] = None, mask: Optional[np.ndarray] = None,
             encoder: ContextEncoder = DEFAULT_ENCODER):
    """Return ``(losses, grads)`` with grads a dense TaggerParams."""
    trace = forward(inp, params, mode, dropout_rate, rng, mask, encoder)
    losses = total_loss(trace, y_sgt, y_gd, y_ged, class_weights)
    raw = backward(trace, y_sgt, y_gd, y_ged, params, class_weights, encoder)
    out = params.zeros_like()
    for name, g in raw.items():
        out.tensors[name] = g.densify(params.tensors[name].shape) if isinstance(g, SparseRows) else g
        if not np.all(np.isfinite(out.tensors[name])):
            raise NonFiniteGradient(f"non-finite gradient in {name}")
    return losses, out


def predict_tags(inp: AssembledInput, params: TaggerParams,
                 encoder: ContextEncoder = DEFAULT_ENCODER) -> List[int]:
    trace = forward(inp, params, Mode.INFER, encoder=encoder)
    return argmax_tags(trace.logits_sgt)


def argmax_tags(logits: np.ndarray) -> List[int]:
    # np.argmax returns the first maximum, so ties go to the lower class index
    return [int(k) for k in np.argmax(logits, axis=1)]


def predict_proba(inp: AssembledInput, params: TaggerParams,
                  encoder: ContextEncoder = DEFAULT_ENCODER) -> np.ndarray:
    return softmax(forward(inp, params, Mode.INFER, encoder=encoder).logits_sgt)
