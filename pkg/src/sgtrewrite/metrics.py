"""Corpus evaluation: cumulative BLEU, ROUGE-n/L (F1), exact match, and
restoration precision/recall/F over n-grams that contain a context word
missing from the incomplete utterance.

All metrics tokenize with :mod:`sgtrewrite.text_units`, so Chinese text is
scored per character and English per word.
"""

from __future__ import annotations

import math
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple, Union

from .corpus import Dialogue
from .errors import LengthMismatch
from .text_units import Token, normalize_text, tokenize

TextLike = Union[str, Sequence[str]]

BLEU_ORDERS = (1, 2, 4)
ROUGE_ORDERS = (1, 2)
RESTORATION_ORDERS = (1, 2, 3)


def words(x: TextLike) -> List[str]:
    """Token texts of a string, or the sequence itself if already split."""
    if isinstance(x, str):
        return [t.text for t in tokenize(unicodedata.normalize("NFC", x))]
    return [t.text if isinstance(t, Token) else t for t in x]


def ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def _check_lengths(predictions, references) -> None:
    if len(predictions) != len(references):
        raise LengthMismatch(f"{len(predictions)} predictions for {len(references)} references")
    if not predictions:
        raise LengthMismatch("empty corpus")


def f_score(p: float, r: float) -> float:
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


def bleu_n(predictions: Sequence[TextLike], references: Sequence[TextLike], n: int = 4) -> float:
    """Corpus-level cumulative BLEU with uniform weights over orders 1..n,
    no smoothing."""
    _check_lengths(predictions, references)
    preds = [words(p) for p in predictions]
    refs = [words(r) for r in references]
    log_sum = 0.0
    for k in range(1, n + 1):
        matched = total = ref_total = 0
        for p, r in zip(preds, refs):
            pc, rc = ngrams(p, k), ngrams(r, k)
            matched += sum(min(c, rc[g]) for g, c in pc.items())
            total += sum(pc.values())
            ref_total += sum(rc.values())
        if total == 0:
            if ref_total == 0:
                continue  # neither side has order-k n-grams: agreement
            return 0.0
        if matched == 0:
            return 0.0
        log_sum += math.log(matched / total)
    pred_len = sum(len(p) for p in preds)
    ref_len = sum(len(r) for r in refs)
    if pred_len == 0:
        return 1.0 if ref_len == 0 else 0.0
    bp = math.exp(min(0.0, 1.0 - ref_len / pred_len))
    return bp * math.exp(log_sum / n)


def _overlap_f1(pc: Counter, rc: Counter) -> float:
    p_total, r_total = sum(pc.values()), sum(rc.values())
    if p_total == 0 and r_total == 0:
        return 1.0
    if p_total == 0 or r_total == 0:
        return 0.0
    overlap = sum(min(c, rc[g]) for g, c in pc.items())
    return f_score(overlap / p_total, overlap / r_total)


def rouge_n(predictions: Sequence[TextLike], references: Sequence[TextLike], n: int = 1) -> float:
    _check_lengths(predictions, references)
    scores = [_overlap_f1(ngrams(words(p), n), ngrams(words(r), n))
              for p, r in zip(predictions, references)]
    return sum(scores) / len(scores)


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0] * (len(b) + 1)
        for j, y in enumerate(b, 1):
            cur[j] = prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1])
        prev = cur
    return prev[-1]


def rouge_l(predictions: Sequence[TextLike], references: Sequence[TextLike]) -> float:
    _check_lengths(predictions, references)
    scores = []
    for p, r in zip(predictions, references):
        pw, rw = words(p), words(r)
        if not pw and not rw:
            scores.append(1.0)
        elif not pw or not rw:
            scores.append(0.0)
        else:
            lcs = lcs_length(pw, rw)
            scores.append(f_score(lcs / len(pw), lcs / len(rw)))
    return sum(scores) / len(scores)


def exact_match(predictions: Sequence[str], references: Sequence[str]) -> float:
    _check_lengths(predictions, references)
    hits = sum(normalize_text(p) == normalize_text(r) for p, r in zip(predictions, references))
    return hits / len(predictions)


def restored_word_set(context_utterances: Iterable[TextLike], current_utterance: TextLike,
                      reference: Optional[TextLike] = None) -> Set[str]:
    """Words of the context that the incomplete utterance does not contain.

    With ``reference`` given, the set is further restricted to words the
    reference uses.
    """
    context: Set[str] = set()
    for u in context_utterances:
        context.update(words(u))
    restored = context - set(words(current_utterance))
    if reference is not None:
        restored &= set(words(reference))
    return restored


@dataclass
class RestorationCounts:
    matched: int = 0
    predicted: int = 0
    gold: int = 0

    def __iadd__(self, other: "RestorationCounts"):
        self.matched += other.matched
        self.predicted += other.predicted
        self.gold += other.gold
        return self

    @property
    def precision(self) -> float:
        return self.matched / self.predicted if self.predicted else 0.0

    @property
    def recall(self) -> float:
        return self.matched / self.gold if self.gold else 0.0

    @property
    def f(self) -> float:
        return f_score(self.precision, self.recall)

    def prf(self) -> Tuple[float, float, float]:
        return self.precision, self.recall, self.f


def _restored_ngrams(tokens: Sequence[str], n: int, restored: Set[str]) -> Counter:
    return Counter({g: c for g, c in ngrams(tokens, n).items() if any(w in restored for w in g)})


def restoration_counts(prediction: TextLike, reference: TextLike, context: Iterable[TextLike],
                       current: TextLike, n: int) -> RestorationCounts:
    restored = restored_word_set(context, current)
    gp = _restored_ngrams(words(prediction), n, restored)
    gr = _restored_ngrams(words(reference), n, restored)
    matched = sum(min(c, gr[g]) for g, c in gp.items())
    return RestorationCounts(matched, sum(gp.values()), sum(gr.values()))


def restoration_prf(prediction: TextLike, reference: TextLike, context: Iterable[TextLike],
                    current: TextLike, n: int) -> Tuple[float, float, float]:
    return restoration_counts(prediction, reference, context, current, n).prf()


@dataclass
class MetricReport:
    bleu: Dict[int, float] = field(default_factory=dict)
    rouge: Dict[str, float] = field(default_factory=dict)
    em: float = 0.0
    restoration: Dict[int, Tuple[float, float, float]] = field(default_factory=dict)
    size: int = 0

    def as_dict(self) -> dict:
        return {
            "size": self.size,
            "bleu": {str(k): v for k, v in self.bleu.items()},
            "rouge": dict(self.rouge),
            "em": self.em,
            "restoration": {str(n): {"P": p, "R": r, "F": f}
                            for n, (p, r, f) in self.restoration.items()},
        }

    def columns(self) -> List[Tuple[str, float]]:
        cols = []
        for n, (p, r, f) in self.restoration.items():
            cols += [(f"P{n}", p), (f"R{n}", r), (f"F{n}", f)]
        cols += [(f"B{n}", v) for n, v in self.bleu.items()]
        cols += [(f"R{k}" if k != "L" else "RL", v) for k, v in self.rouge.items()]
        cols.append(("EM", self.em))
        return cols

    def format_table(self) -> str:
        cols = self.columns()
        head = " ".join(f"{name:>7}" for name, _ in cols)
        row = " ".join(f"{100 * v:7.2f}" for _, v in cols)
        return f"{head}\n{row}"


def evaluate_corpus(predictions: Sequence[str], dialogues: Sequence[Dialogue]) -> MetricReport:
    _check_lengths(predictions, dialogues)
    references = []
    for d in dialogues:
        if d.reference is None:
            raise ValueError("every dialogue needs a reference for evaluation")
        references.append(d.reference)
    report = MetricReport(size=len(predictions))
    pred_words = [words(p) for p in predictions]
    ref_words = [words(r) for r in references]
    for n in BLEU_ORDERS:
        report.bleu[n] = bleu_n(pred_words, ref_words, n)
    for n in ROUGE_ORDERS:
        report.rouge[str(n)] = rouge_n(pred_words, ref_words, n)
    report.rouge["L"] = rouge_l(pred_words, ref_words)
    report.em = exact_match(predictions, references)
    for n in RESTORATION_ORDERS:
        total = RestorationCounts()
        for p, r, d in zip(pred_words, ref_words, dialogues):
            total += restoration_counts(p, r, [u.raw_text for u in d.context], d.current.raw_text, n)
        report.restoration[n] = total.prf()
    return report
