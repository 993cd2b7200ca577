"""Decode a predicted tag sequence into the rewritten utterance."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .corpus import AssembledInput, Dialogue, assemble_input
from .labeler import O_LABEL, GlcsSpan
from .tagger.model import argmax_tags, forward, softmax, Mode
from .tagger.params import TaggerParams
from .text_units import Token, detokenize

Run = Tuple[int, int]  # (start, end) end exclusive


class DuplicateResolution(enum.Enum):
    LATEST_RUN = "latest"
    HIGHEST_MEAN_SCORE = "score"


class EmptyFallback(enum.Enum):
    COPY_LAST_UTTERANCE = "copy"
    EMPTY_OUTPUT = "empty"


@dataclass(frozen=True)
class DecodePolicy:
    duplicate_resolution: DuplicateResolution = DuplicateResolution.LATEST_RUN
    empty_fallback: EmptyFallback = EmptyFallback.COPY_LAST_UTTERANCE


def labels_to_runs(tags: Sequence[int], tokens: Sequence[Token],
                   separator_positions=frozenset()) -> Dict[int, List[Run]]:
    """Maximal blocks of one fragment label, keyed by fragment order
    (label k+1 -> order k). Separator positions never belong to a run."""
    if len(tags) != len(tokens):
        raise ValueError(f"{len(tags)} tags for {len(tokens)} tokens")
    runs: Dict[int, List[Run]] = {}
    start = None
    current = O_LABEL
    for i, tag in enumerate(list(tags) + [O_LABEL]):
        if i in separator_positions:
            tag = O_LABEL
        if tag != current:
            if current != O_LABEL:
                runs.setdefault(current - 1, []).append((start, i))
            start = i
            current = tag
    return runs


def resolve_runs(runs: Dict[int, List[Run]], policy: DecodePolicy = DecodePolicy(),
                 scores: Optional[np.ndarray] = None,
                 tokens: Optional[Sequence[Token]] = None) -> List[GlcsSpan]:
    """Pick one run per fragment order, returned in order.

    ``scores`` is an (M, N) array of per-token class probabilities, needed
    for HIGHEST_MEAN_SCORE.
    """
    spans = []
    for order in sorted(runs):
        candidates = runs[order]
        if policy.duplicate_resolution is DuplicateResolution.HIGHEST_MEAN_SCORE:
            if scores is None:
                raise ValueError("HIGHEST_MEAN_SCORE needs per-token scores")
            start, end = max(candidates, key=lambda r: (scores[r[0]:r[1], order + 1].mean(), r[0]))
        else:
            start, end = max(candidates, key=lambda r: r[0])
        source = tokens[start].utterance_index if tokens is not None else -1
        spans.append(GlcsSpan(order, start, end - start, source))
    return spans


def splice(spans: Sequence[GlcsSpan], tokens: Sequence[Token], fallback: str = "") -> str:
    if not spans:
        return fallback
    out: List[Token] = []
    for s in sorted(spans, key=lambda s: s.order):
        out.extend(tokens[s.start:s.end])
    return detokenize(out)


def decode(tags: Sequence[int], inp: AssembledInput, dialogue: Optional[Dialogue] = None,
           policy: DecodePolicy = DecodePolicy(), scores: Optional[np.ndarray] = None) -> str:
    runs = labels_to_runs(tags, inp.tokens, inp.separator_positions)
    spans = resolve_runs(runs, policy, scores, inp.tokens)
    fallback = ""
    if policy.empty_fallback is EmptyFallback.COPY_LAST_UTTERANCE and dialogue is not None:
        fallback = dialogue.current.raw_text
    return splice(spans, inp.tokens, fallback)


class Rewriter:
    """Bundles a trained model with a decode policy."""

    def __init__(self, params: TaggerParams, policy: DecodePolicy = DecodePolicy()):
        self.params = params
        self.policy = policy

    def assemble(self, d: Dialogue) -> AssembledInput:
        return assemble_input(d, self.params.connection_words, self.params.speaker_width)

    def rewrite(self, d: Dialogue) -> str:
        inp = self.assemble(d)
        logits = forward(inp, self.params, Mode.INFER).logits_sgt
        scores = None
        if self.policy.duplicate_resolution is DuplicateResolution.HIGHEST_MEAN_SCORE:
            scores = softmax(logits)
        return decode(argmax_tags(logits), inp, d, self.policy, scores)


def rewrite(d: Dialogue, params: TaggerParams, policy: DecodePolicy = DecodePolicy()) -> str:
    return Rewriter(params, policy).rewrite(d)
