"""Contextual encoders producing the per-token representation E.

Any object with ``encode`` and ``backward`` methods matching
:class:`ContextEncoder` can stand in for the windowed reference encoder; the
labeler, splicer and metrics never see the encoder.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Protocol, Sequence, Tuple

import numpy as np

from ..errors import SequenceTooLong
from .params import TaggerParams, bucket_id


@dataclass
class EncoderCache:
    ids: np.ndarray
    windows: np.ndarray  # (M, w*d)
    E: np.ndarray


@dataclass
class SparseRows:
    """Gradient of an embedding table restricted to the rows that were used."""

    ids: np.ndarray
    rows: np.ndarray

    def densify(self, shape) -> np.ndarray:
        out = np.zeros(shape)
        np.add.at(out, self.ids, self.rows)
        return out


class ContextEncoder(Protocol):
    def encode(self, params: TaggerParams, texts: Sequence[str]) -> Tuple[np.ndarray, object]:
        ...

    def backward(self, params: TaggerParams, cache, dE: np.ndarray) -> Dict[str, object]:
        ...


class WindowEncoder:
    """e_i = tanh(W_mix . [x_{i-r}; ...; x_{i+r}] + b) with
    x_j = token_embedding(bucket(text_j)) + position_embedding(j).

    Positions outside the sequence contribute a zero vector.
    """

    def token_ids(self, params: TaggerParams, texts: Sequence[str]) -> np.ndarray:
        v = params.config.buckets
        return np.fromiter((bucket_id(t, v) for t in texts), dtype=np.int64, count=len(texts))

    def encode(self, params: TaggerParams, texts: Sequence[str]) -> Tuple[np.ndarray, EncoderCache]:
        cfg = params.config
        m = len(texts)
        if m > cfg.max_positions:
            raise SequenceTooLong(f"input has {m} tokens, limit is {cfg.max_positions}")
        ids = self.token_ids(params, texts)
        x = params.token_embeddings[ids] + params.position_embeddings[:m]
        windows = self._windows(x, cfg.context_window)
        E = np.tanh(windows @ params.mixer_w + params.mixer_b)
        return E, EncoderCache(ids, windows, E)

    @staticmethod
    def _windows(x: np.ndarray, w: int) -> np.ndarray:
        m, d = x.shape
        r = w // 2
        padded = np.zeros((m + 2 * r, d))
        padded[r:r + m] = x
        return np.concatenate([padded[k:k + m] for k in range(w)], axis=1)

    def backward(self, params: TaggerParams, cache: EncoderCache, dE: np.ndarray) -> Dict[str, object]:
        cfg = params.config
        m = dE.shape[0]
        d, w = cfg.embedding_dim, cfg.context_window
        r = w // 2
        dZ = dE * (1.0 - cache.E ** 2)
        grads: Dict[str, object] = {
            "mixer_w": cache.windows.T @ dZ,
            "mixer_b": dZ.sum(axis=0),
        }
        dwin = (dZ @ params.mixer_w.T).reshape(m, w, d)
        dpadded = np.zeros((m + 2 * r, d))
        for k in range(w):
            dpadded[k:k + m] += dwin[:, k]
        dx = dpadded[r:r + m]
        dpos = np.zeros_like(params.position_embeddings)
        dpos[:m] = dx
        grads["position_embeddings"] = dpos
        grads["token_embeddings"] = SparseRows(cache.ids, dx.copy())
        return grads


DEFAULT_ENCODER = WindowEncoder()
