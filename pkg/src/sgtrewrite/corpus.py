"""Dialogue data model, dataset file ingestion, and assembly of the tagger
input sequence (connection words, utterances, separators, speaker track)."""

from __future__ import annotations

import dataclasses
import logging
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import FrozenSet, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .errors import EmptyDialogue, EmptyField, EncodingFailure, IoFailure, MalformedLine
from .text_units import GranularityClass, Token, detokenize, tokenize

log = logging.getLogger(__name__)

SEP_TEXT = "[SEP]"
CONNECTION_UTTERANCE = -1
_SPEAKER_PREFIXES = {"A:": 0, "B:": 1}


@dataclass(frozen=True)
class Utterance:
    tokens: Tuple[Token, ...]
    speaker: int
    raw_text: str

    @classmethod
    def from_text(cls, text: str, index: int, speaker: int) -> "Utterance":
        toks = tuple(
            dataclasses.replace(t, utterance_index=index, speaker=speaker)
            for t in tokenize(text)
        )
        return cls(toks, speaker, text)


@dataclass(frozen=True)
class Dialogue:
    utterances: Tuple[Utterance, ...]
    reference: Optional[str] = None

    def __post_init__(self):
        if not self.utterances:
            raise EmptyDialogue("a dialogue needs at least one utterance")

    @classmethod
    def from_texts(cls, texts: Sequence[str], reference: Optional[str] = None,
                   speakers: Optional[Sequence[int]] = None) -> "Dialogue":
        if speakers is None:
            speakers = [i % 2 for i in range(len(texts))]
        utts = tuple(Utterance.from_text(t, i, s) for i, (t, s) in enumerate(zip(texts, speakers)))
        return cls(utts, reference)

    @property
    def current(self) -> Utterance:
        return self.utterances[-1]

    @property
    def context(self) -> Tuple[Utterance, ...]:
        return self.utterances[:-1]

    def reference_tokens(self) -> List[Token]:
        if self.reference is None:
            raise ValueError("dialogue has no reference")
        return tokenize(self.reference)

    def to_line(self) -> str:
        return "\t".join([u.raw_text for u in self.utterances] + [self.reference or ""])


@dataclass(frozen=True)
class AssembledInput:
    tokens: Tuple[Token, ...]
    speaker_track: np.ndarray  # (M, S)
    separator_positions: FrozenSet[int]
    n_connection: int
    # (utterance_index, start, end) for every matchable region, in H order
    regions: Tuple[Tuple[int, int, int], ...] = field(default=())

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def texts(self) -> List[str]:
        return [t.text for t in self.tokens]

    def utterance_range(self, index: int) -> Tuple[int, int]:
        for utt, start, end in self.regions:
            if utt == index:
                return start, end
        raise KeyError(index)

    def __eq__(self, other):
        if not isinstance(other, AssembledInput):
            return NotImplemented
        return (self.tokens == other.tokens
                and self.separator_positions == other.separator_positions
                and self.n_connection == other.n_connection
                and self.regions == other.regions
                and self.speaker_track.shape == other.speaker_track.shape
                and bool(np.array_equal(self.speaker_track, other.speaker_track)))

    __hash__ = None


def speaker_indicator(speaker: int, width: int) -> np.ndarray:
    if width == 1:
        return np.array([float(speaker % 2)])
    vec = np.zeros(width)
    vec[speaker % width] = 1.0
    return vec


def separator_token(utterance_index: int, position: int) -> Token:
    return Token(SEP_TEXT, GranularityClass.PUNCT, utterance_index, position, 0)


def assemble_input(d: Dialogue, connection_words: Sequence[str] = (),
                   speaker_width: int = 1) -> AssembledInput:
    if speaker_width < 1:
        raise ValueError("speaker_width must be >= 1")
    if not d.utterances:
        raise EmptyDialogue("empty dialogue")

    tokens: List[Token] = []
    rows: List[np.ndarray] = []
    seps = set()
    regions = []
    zero = np.zeros(speaker_width)

    for word in connection_words:
        for t in tokenize(word):
            tokens.append(Token(t.text, t.granularity, CONNECTION_UTTERANCE, len(tokens), 0))
            rows.append(zero)
    n_conn = len(tokens)
    if n_conn:
        regions.append((CONNECTION_UTTERANCE, 0, n_conn))

    for i, utt in enumerate(d.utterances):
        if i > 0:
            seps.add(len(tokens))
            tokens.append(separator_token(i - 1, len(d.utterances[i - 1].tokens)))
            rows.append(zero)
        start = len(tokens)
        ind = speaker_indicator(utt.speaker, speaker_width)
        for t in utt.tokens:
            tokens.append(t)
            rows.append(ind)
        regions.append((i, start, len(tokens)))

    track = np.vstack(rows) if rows else np.zeros((0, speaker_width))
    return AssembledInput(tuple(tokens), track, frozenset(seps), n_conn, tuple(regions))


def _split_speaker(field_text: str) -> Tuple[Optional[int], str]:
    for prefix, spk in _SPEAKER_PREFIXES.items():
        if field_text.startswith(prefix):
            return spk, field_text[len(prefix):].strip()
    return None, field_text


def parse_dataset_line(line: str) -> Dialogue:
    """Parse ``u_1 TAB ... TAB u_n TAB reference``.

    Speakers alternate from speaker 0 unless every utterance field carries
    an ``A:``/``B:`` prefix, in which case the prefixes are used.
    """
    line = unicodedata.normalize("NFC", line.rstrip("\r\n"))
    fields = line.split("\t")
    if len(fields) < 2:
        raise MalformedLine(f"expected >= 2 tab-separated fields, got {len(fields)}")
    for i, f in enumerate(fields):
        if not f.strip():
            raise EmptyField(f"field {i} is empty")

    *history, reference = fields
    split = [_split_speaker(f.strip()) for f in history]
    if all(spk is not None for spk, _ in split):
        speakers = [spk for spk, _ in split]
        texts = [text for _, text in split]
    else:
        speakers = [i % 2 for i in range(len(history))]
        texts = [f.strip() for f in history]
    return Dialogue.from_texts(texts, reference.strip(), speakers)


class CorpusStream:
    """Iterates dialogues of a dataset file in order.

    Malformed lines are skipped; after iteration ``skipped`` lists
    ``(line_number, reason)`` for each of them. Blank lines are ignored.
    """

    def __init__(self, path):
        self.path = Path(path)
        self.skipped: List[Tuple[int, str]] = []

    def __iter__(self) -> Iterator[Dialogue]:
        self.skipped = []
        try:
            fh = open(self.path, "r", encoding="utf-8", newline="\n")
        except OSError as exc:
            raise IoFailure(f"cannot open {self.path}: {exc}") from exc
        with fh:
            lineno = 0
            while True:
                try:
                    line = fh.readline()
                except UnicodeDecodeError as exc:
                    raise EncodingFailure(f"{self.path}: not valid UTF-8 near line {lineno + 1}") from exc
                except OSError as exc:
                    raise IoFailure(f"read error in {self.path}: {exc}") from exc
                if not line:
                    break
                lineno += 1
                if not line.strip():
                    continue
                try:
                    yield parse_dataset_line(line)
                except MalformedLine as exc:
                    log.warning("%s:%d skipped: %s", self.path, lineno, exc)
                    self.skipped.append((lineno, str(exc)))
        if self.skipped:
            log.info("%s: skipped %d malformed line(s)", self.path, len(self.skipped))


def load_corpus(path) -> CorpusStream:
    return CorpusStream(path)


def load_connection_words(path) -> List[str]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise EncodingFailure(f"{path}: not valid UTF-8") from exc
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    words = []
    for line in text.splitlines():
        line = unicodedata.normalize("NFC", line.strip())
        if line and not line.startswith("#"):
            words.append(line)
    return words


def render_utterance(utt: Utterance) -> str:
    return detokenize(utt.tokens)
