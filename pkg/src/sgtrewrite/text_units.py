"""Mixed-granularity tokenization: one token per CJK character, whole words
for Latin-script words and digit runs, one token per punctuation mark."""

from __future__ import annotations

import enum
import unicodedata
from dataclasses import dataclass
from typing import Iterable, List, Sequence

# (start, end) inclusive code point ranges
_CJK_RANGES = (
    (0x3400, 0x4DBF),    # Extension A
    (0x4E00, 0x9FFF),    # Unified Ideographs
    (0xF900, 0xFAFF),    # Compatibility Ideographs
    (0x20000, 0x2A6DF),  # Extension B
    (0x2A700, 0x2EBEF),  # Extensions C-F
    (0x2F800, 0x2FA1F),  # Compatibility Supplement
    (0x30000, 0x323AF),  # Extensions G-H
    (0x3040, 0x309F),    # Hiragana
    (0x30A0, 0x30FF),    # Katakana
    (0x31F0, 0x31FF),    # Katakana Phonetic Extensions
    (0x1100, 0x11FF),    # Hangul Jamo
    (0x3130, 0x318F),    # Hangul Compatibility Jamo
    (0xAC00, 0xD7AF),    # Hangul Syllables
)


class GranularityClass(enum.Enum):
    CJK_CHAR = "cjk"
    WORD = "word"
    NUMBER = "number"
    PUNCT = "punct"


@dataclass(frozen=True)
class Token:
    text: str
    granularity: GranularityClass
    utterance_index: int = 0
    position: int = 0
    speaker: int = 0

    @property
    def key(self) -> tuple:
        """Identity used for matching: text within a granularity class."""
        return (self.text, self.granularity)


def is_cjk(c: str) -> bool:
    cp = ord(c)
    return any(lo <= cp <= hi for lo, hi in _CJK_RANGES)


def classify_scalar(c: str) -> GranularityClass:
    """Classify one non-whitespace scalar value.

    Whitespace is not a class; callers treat it as a separator. Passing a
    whitespace scalar returns PUNCT.
    """
    if len(c) != 1:
        raise ValueError(f"expected a single scalar value, got {c!r}")
    if is_cjk(c):
        return GranularityClass.CJK_CHAR
    cat = unicodedata.category(c)
    if cat[0] == "L" or cat[0] == "M":
        return GranularityClass.WORD
    if cat == "Nd":
        return GranularityClass.NUMBER
    return GranularityClass.PUNCT


_RUN_CLASSES = (GranularityClass.WORD, GranularityClass.NUMBER)


def tokenize(text: str) -> List[Token]:
    tokens: List[Token] = []
    run: List[str] = []
    run_class = None

    def flush():
        nonlocal run_class
        if run:
            tokens.append(Token("".join(run), run_class, position=len(tokens)))
            run.clear()
        run_class = None

    for c in text:
        if c.isspace():
            flush()
            continue
        cls = classify_scalar(c)
        if cls in _RUN_CLASSES:
            if cls is not run_class:
                flush()
                run_class = cls
            run.append(c)
        else:
            flush()
            tokens.append(Token(c, cls, position=len(tokens)))
    flush()
    return tokens


def detokenize(tokens: Iterable[Token]) -> str:
    parts: List[str] = []
    prev = None
    for tok in tokens:
        if prev is not None and prev.granularity in _RUN_CLASSES and tok.granularity in _RUN_CLASSES:
            parts.append(" ")
        parts.append(tok.text)
        prev = tok
    return "".join(parts)


def normalize_text(text: str) -> str:
    """NFC plus whitespace normalization through a tokenize/detokenize pass."""
    return detokenize(tokenize(unicodedata.normalize("NFC", text)))


def token_texts(tokens: Sequence[Token]) -> List[str]:
    return [t.text for t in tokens]
