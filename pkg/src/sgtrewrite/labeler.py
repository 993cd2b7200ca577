"""Training-label construction.

The reference rewrite is decomposed greedily into ordered fragments of the
assembled input: at each step the longest prefix of what is left of the
reference that occurs contiguously inside one region (the connection-word
prefix or a single utterance) becomes the next fragment. Ties go to the
occurrence that starts latest in the input. Tokens already used by a fragment
cannot be used again.
"""

from __future__ import annotations

import logging
import string
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .corpus import CONNECTION_UTTERANCE, AssembledInput, Dialogue, assemble_input, separator_token
from .errors import OrderOverflow, Uncoverable
from .text_units import Token, detokenize, tokenize

log = logging.getLogger(__name__)

DEFAULT_TAG_CLASSES = 11
O_LABEL = 0


def tag_name(label: int) -> str:
    """0 -> "O", 1 -> "I-A", 2 -> "I-B", ..."""
    if label == O_LABEL:
        return "O"
    return "I-" + order_letter(label - 1)


def order_letter(order: int) -> str:
    letters = string.ascii_uppercase
    if order < len(letters):
        return letters[order]
    return f"Z{order - len(letters) + 1}"


@dataclass(frozen=True)
class GlcsSpan:
    order: int
    start: int
    length: int
    source_utterance: int

    @property
    def end(self) -> int:
        return self.start + self.length

    @property
    def letter(self) -> str:
        return order_letter(self.order)


@dataclass
class LabelConfig:
    connection_words: Sequence[str] = ()
    speaker_width: int = 1
    n_classes: int = DEFAULT_TAG_CLASSES


@dataclass
class LabeledExample:
    input: AssembledInput
    y_sgt: List[int]
    y_gd: List[int]
    y_ged: List[int]
    spans: List[GlcsSpan]
    reference: str = ""
    current_text: str = ""

    def to_record(self) -> dict:
        return {
            "tokens": self.input.texts,
            "speaker_track": [[_num(v) for v in row] for row in self.input.speaker_track.tolist()],
            "y_sgt": list(self.y_sgt),
            "y_gd": list(self.y_gd),
            "y_ged": list(self.y_ged),
            "spans": [
                {"order": s.order, "tag": s.letter, "start": s.start, "length": s.length,
                 "source_utterance": s.source_utterance}
                for s in self.spans
            ],
            "separator_positions": sorted(self.input.separator_positions),
            "n_connection": self.input.n_connection,
            "reference": self.reference,
            "current": self.current_text,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "LabeledExample":
        inp = input_from_record(rec["tokens"], rec["speaker_track"],
                                rec.get("separator_positions", ()), rec.get("n_connection", 0))
        spans = [GlcsSpan(s["order"], s["start"], s["length"], s["source_utterance"])
                 for s in rec["spans"]]
        return cls(inp, list(rec["y_sgt"]), list(rec["y_gd"]), list(rec["y_ged"]), spans,
                   rec.get("reference", ""), rec.get("current", ""))


def _num(v: float):
    return int(v) if float(v).is_integer() else v


def input_from_record(texts: Sequence[str], speaker_track, separator_positions,
                      n_connection: int) -> AssembledInput:
    """Rebuild an AssembledInput from its serialized label-file form."""
    seps = frozenset(int(p) for p in separator_positions)
    track = np.asarray(speaker_track, dtype=float).reshape(len(texts), -1)
    tokens: List[Token] = []
    regions = []
    utt = 0
    region_start = 0
    pos = 0
    for i, text in enumerate(texts):
        if i < n_connection:
            tok = tokenize(text)[0]
            tokens.append(Token(text, tok.granularity, CONNECTION_UTTERANCE, i, 0))
            continue
        if i == n_connection:
            if n_connection:
                regions.append((CONNECTION_UTTERANCE, 0, n_connection))
            region_start = i
        if i in seps:
            regions.append((utt, region_start, i))
            tokens.append(separator_token(utt, pos))
            utt += 1
            pos = 0
            region_start = i + 1
            continue
        tok = tokenize(text)[0]
        speaker = int(track[i].argmax()) if track.shape[1] > 1 else int(track[i, 0])
        tokens.append(Token(text, tok.granularity, utt, pos, speaker))
        pos += 1
    if len(texts) > n_connection:
        regions.append((utt, region_start, len(texts)))
    return AssembledInput(tuple(tokens), track, seps, n_connection, tuple(regions))


def _keys(tokens: Iterable[Token]) -> List[tuple]:
    return [t.key for t in tokens]


def longest_prefix_match(reference_remainder: Sequence[Token], utterance_tokens: Sequence[Token],
                         blocked: Optional[Sequence[bool]] = None) -> Optional[Tuple[int, int]]:
    """Longest prefix of ``reference_remainder`` occurring contiguously in
    ``utterance_tokens``.

    Returns ``(position, length)`` with the rightmost position among the
    longest matches, or None when not even the first token occurs. Positions
    flagged in ``blocked`` never take part in a match.
    """
    if not reference_remainder:
        raise ValueError("reference_remainder must be non-empty")
    ref = _keys(reference_remainder)
    utt = _keys(utterance_tokens)
    best_len, best_pos = 0, -1
    n_ref = len(ref)
    first = ref[0]
    for j in range(len(utt)):
        if utt[j] != first or (blocked is not None and blocked[j]):
            continue
        k = 1
        while (k < n_ref and j + k < len(utt) and utt[j + k] == ref[k]
               and not (blocked is not None and blocked[j + k])):
            k += 1
        if k >= best_len:
            best_len, best_pos = k, j
    if best_len == 0:
        return None
    return best_pos, best_len


def build_glcs_spans(inp: AssembledInput, reference: Sequence[Token],
                     n_classes: int = DEFAULT_TAG_CLASSES) -> List[GlcsSpan]:
    if not reference:
        raise ValueError("reference must be non-empty")
    claimed = [False] * len(inp.tokens)
    remainder = list(reference)
    spans: List[GlcsSpan] = []
    while remainder:
        best = None  # (length, absolute start, utterance)
        for utt, start, end in inp.regions:
            hit = longest_prefix_match(remainder, inp.tokens[start:end], claimed[start:end])
            if hit is None:
                continue
            pos, length = hit
            cand = (length, start + pos, utt)
            if best is None or cand[:2] > best[:2]:
                best = cand
        if best is None:
            raise Uncoverable(remainder, "no match")
        if len(spans) >= n_classes - 1:
            raise Uncoverable(remainder, f"more than {n_classes - 1} fragments")
        length, abs_start, utt = best
        spans.append(GlcsSpan(len(spans), abs_start, length, utt))
        for i in range(abs_start, abs_start + length):
            claimed[i] = True
        remainder = remainder[length:]
    return spans


def _check_disjoint(spans: Sequence[GlcsSpan], m: int) -> None:
    seen = [False] * m
    for s in spans:
        if s.length < 1 or s.start < 0 or s.end > m:
            raise ValueError(f"span {s} out of range for length {m}")
        for i in range(s.start, s.end):
            if seen[i]:
                raise ValueError(f"overlapping spans at position {i}")
            seen[i] = True


def spans_to_sgt_labels(spans: Sequence[GlcsSpan], m: int,
                        n_classes: int = DEFAULT_TAG_CLASSES) -> List[int]:
    _check_disjoint(spans, m)
    labels = [O_LABEL] * m
    for s in spans:
        if s.order > n_classes - 2:
            raise OrderOverflow(f"order {s.order} needs more than {n_classes} tag classes")
        for i in range(s.start, s.end):
            labels[i] = s.order + 1
    return labels


def spans_to_gd_labels(spans: Sequence[GlcsSpan], m: int) -> List[int]:
    _check_disjoint(spans, m)
    labels = [0] * m
    for s in spans:
        for i in range(s.start, s.end):
            labels[i] = 1
    return labels


def spans_to_ged_labels(spans: Sequence[GlcsSpan], m: int) -> List[int]:
    """Edge labels: every token of a 1- or 2-token span, otherwise just the
    first and last token (3-token spans included)."""
    _check_disjoint(spans, m)
    labels = [0] * m
    for s in spans:
        if s.length <= 2:
            for i in range(s.start, s.end):
                labels[i] = 1
        else:
            labels[s.start] = 1
            labels[s.end - 1] = 1
    return labels


def build_labeled_example(d: Dialogue, config: Optional[LabelConfig] = None) -> LabeledExample:
    config = config or LabelConfig()
    if d.reference is None:
        raise ValueError("dialogue has no reference")
    inp = assemble_input(d, config.connection_words, config.speaker_width)
    ref_tokens = d.reference_tokens()
    spans = build_glcs_spans(inp, ref_tokens, config.n_classes)
    m = len(inp)
    return LabeledExample(
        inp,
        spans_to_sgt_labels(spans, m, config.n_classes),
        spans_to_gd_labels(spans, m),
        spans_to_ged_labels(spans, m),
        spans,
        detokenize(ref_tokens),
        d.current.raw_text,
    )


def splice_spans(inp: AssembledInput, spans: Sequence[GlcsSpan]) -> str:
    toks: List[Token] = []
    for s in sorted(spans, key=lambda s: s.order):
        toks.extend(inp.tokens[s.start:s.end])
    return detokenize(toks)


@dataclass
class CoverageReport:
    total: int = 0
    coverable: int = 0
    fragment_histogram: Counter = field(default_factory=Counter)
    uncoverable_lines: List[int] = field(default_factory=list)

    def add(self, example: Optional[LabeledExample], line: int = 0) -> None:
        self.total += 1
        if example is None:
            self.uncoverable_lines.append(line)
        else:
            self.coverable += 1
            self.fragment_histogram[len(example.spans)] += 1

    @property
    def coverage(self) -> float:
        return self.coverable / self.total if self.total else 0.0

    def share_within(self, k: int) -> float:
        """Fraction of coverable examples composed of at most ``k`` fragments."""
        if not self.coverable:
            return 0.0
        return sum(c for n, c in self.fragment_histogram.items() if n <= k) / self.coverable

    def as_dict(self) -> Dict:
        return {
            "total": self.total,
            "coverable": self.coverable,
            "coverage": self.coverage,
            "fragment_histogram": {str(k): v for k, v in sorted(self.fragment_histogram.items())},
            "uncoverable_lines": list(self.uncoverable_lines),
        }

    def format(self) -> str:
        lines = [f"coverage: {self.coverable}/{self.total} ({100 * self.coverage:.2f}%)",
                 "fragments  count"]
        for n, c in sorted(self.fragment_histogram.items()):
            lines.append(f"{n:>9}  {c}")
        return "\n".join(lines)


def label_corpus(dialogues: Iterable[Dialogue], config: Optional[LabelConfig] = None):
    """Yield ``(line_index, LabeledExample or None)``; None marks an uncoverable dialogue."""
    config = config or LabelConfig()
    for i, d in enumerate(dialogues):
        try:
            yield i, build_labeled_example(d, config)
        except Uncoverable as exc:
            log.warning("dialogue %d skipped: %s", i, exc)
            yield i, None

