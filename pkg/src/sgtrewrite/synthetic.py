"""Synthetic dialogues whose references are concatenations of history
fragments, so they are always coverable by construction.

Every token appears at most once per dialogue. That keeps greedy matching
from claiming tokens a later fragment needs; adjacent fragments taken from
consecutive history positions may merge, so the labeler can report fewer
fragments than were drawn but never more.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from .corpus import Dialogue
from .text_units import detokenize, tokenize

_CJK_POOL = [chr(cp) for cp in range(0x4E00, 0x4E00 + 2000)]
_WORD_POOL = [
    "weather", "rain", "city", "winter", "summer", "often", "cloudy", "train", "ticket", "hotel",
    "book", "movie", "dinner", "price", "cheap", "north", "south", "coffee", "music", "game",
    "phone", "friend", "river", "market", "school", "garden", "window", "doctor", "flight", "museum",
]
_NUMBER_POOL = [str(n) for n in range(10, 100)]
_PUNCT_POOL = ["，", "。", "？", "！", ",", "?"]


@dataclass
class SyntheticDialogue:
    dialogue: Dialogue
    fragments: List[str]


def _draw_tokens(rng: np.random.Generator, n: int, used: set, latin_share: float) -> List[str]:
    out = []
    while len(out) < n:
        r = rng.random()
        if r < latin_share:
            pool = _WORD_POOL if rng.random() < 0.8 else _NUMBER_POOL
        elif r < 0.97:
            pool = _CJK_POOL
        else:
            pool = _PUNCT_POOL
        tok = pool[int(rng.integers(len(pool)))]
        if tok not in used:
            used.add(tok)
            out.append(tok)
    return out


def _render(texts: Sequence[str]) -> str:
    return detokenize([tokenize(t)[0] for t in texts])


def generate_dialogue(rng: np.random.Generator, max_fragments: int = 3, n_utterances=(2, 4),
                      utterance_len=(3, 10), latin_share: float = 0.15) -> SyntheticDialogue:
    n_utts = int(rng.integers(n_utterances[0], n_utterances[1] + 1))
    used: set = set()
    history = [_draw_tokens(rng, int(rng.integers(utterance_len[0], utterance_len[1] + 1)), used, latin_share)
               for _ in range(n_utts)]

    # non-overlapping fragments, each inside one utterance
    n_frag = int(rng.integers(1, max_fragments + 1))
    taken = [[False] * len(u) for u in history]
    fragments: List[List[str]] = []
    for _ in range(50 * n_frag):
        if len(fragments) == n_frag:
            break
        ui = int(rng.integers(n_utts))
        utt = history[ui]
        length = int(rng.integers(1, min(4, len(utt)) + 1))
        start = int(rng.integers(0, len(utt) - length + 1))
        if any(taken[ui][start:start + length]):
            continue
        for i in range(start, start + length):
            taken[ui][i] = True
        fragments.append(utt[start:start + length])

    reference = _render([t for frag in fragments for t in frag])
    d = Dialogue.from_texts([_render(u) for u in history], reference)
    return SyntheticDialogue(d, [_render(f) for f in fragments])


def generate_corpus(n: int, seed: int = 13, max_fragments: int = 3, **kwargs) -> List[SyntheticDialogue]:
    rng = np.random.default_rng(seed)
    return [generate_dialogue(rng, max_fragments, **kwargs) for _ in range(n)]


def write_corpus(path, dialogues: Sequence[Dialogue]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for d in dialogues:
            fh.write(d.to_line() + "\n")
