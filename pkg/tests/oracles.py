"""Independent reference implementations used as test oracles.

Written as plain loops over the definitions, sharing no code with the
package paths they check.
"""

from __future__ import annotations

import math
import unicodedata
from itertools import product


# -- text units ---------------------------------------------------------------

def classify_by_table(c):
    """Per-scalar classifier driven by explicit code point tables."""
    cp = ord(c)
    cjk_blocks = [(0x3400, 0x4DBF), (0x4E00, 0x9FFF), (0xF900, 0xFAFF), (0x20000, 0x2A6DF),
                  (0x2A700, 0x2EBEF), (0x2F800, 0x2FA1F), (0x30000, 0x323AF), (0x3040, 0x309F),
                  (0x30A0, 0x30FF), (0x31F0, 0x31FF), (0x1100, 0x11FF), (0x3130, 0x318F),
                  (0xAC00, 0xD7AF)]
    for lo, hi in cjk_blocks:
        if lo <= cp <= hi:
            return "cjk"
    cat = unicodedata.category(c)
    if cat.startswith(("L", "M")):
        return "word"
    if cat == "Nd":
        return "number"
    return "punct"


def brute_tokenize(text):
    """Token texts by scanning scalars one at a time with lookahead merging."""
    out = []
    i = 0
    while i < len(text):
        c = text[i]
        if c.isspace():
            i += 1
            continue
        kind = classify_by_table(c)
        j = i + 1
        if kind in ("word", "number"):
            while j < len(text) and not text[j].isspace() and classify_by_table(text[j]) == kind:
                j += 1
        out.append((text[i:j], kind))
        i = j
    return out


# -- greedy fragment matching --------------------------------------------------

def brute_prefix_match(remainder, utterance, blocked=None):
    """Enumerate every (position, length) pair; keep the longest, then rightmost."""
    best = None
    n = len(utterance)
    for pos in range(n):
        for length in range(1, n - pos + 1):
            if length > len(remainder):
                break
            if blocked is not None and any(blocked[pos:pos + length]):
                continue
            if list(utterance[pos:pos + length]) == list(remainder[:length]):
                cand = (length, pos)
                if best is None or cand > best:
                    best = cand
    if best is None:
        return None
    return best[1], best[0]


def brute_greedy_spans(regions, reference, max_spans):
    """regions: list of (absolute_start, list_of_keys). Returns [(start, length)] or None."""
    total = max(start + len(keys) for start, keys in regions) if regions else 0
    claimed = [False] * total
    remainder = list(reference)
    spans = []
    while remainder:
        best = None
        for start, keys in regions:
            hit = brute_prefix_match(remainder, keys, claimed[start:start + len(keys)])
            if hit is None:
                continue
            cand = (hit[1], start + hit[0])
            if best is None or cand > best:
                best = cand
        if best is None or len(spans) >= max_spans:
            return None
        length, abs_start = best
        spans.append((abs_start, length))
        for i in range(abs_start, abs_start + length):
            claimed[i] = True
        remainder = remainder[length:]
    return spans


# -- losses --------------------------------------------------------------------

def scalar_weighted_ce(logits, targets, weights=None):
    total = 0.0
    for row, y in zip(logits, targets):
        mx = max(row)
        denom = sum(math.exp(v - mx) for v in row)
        nll = -((row[y] - mx) - math.log(denom))
        total += nll * (weights[y] if weights is not None else 1.0)
    return total / len(targets)


def scalar_argmax(row):
    best = 0
    for k in range(1, len(row)):
        if row[k] > row[best]:
            best = k
    return best


# -- metrics -------------------------------------------------------------------

def _grams(tokens, n):
    return [tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1)]


def scalar_bleu(preds, refs, n):
    logs = 0.0
    for k in range(1, n + 1):
        num = den = ref_den = 0
        for p, r in zip(preds, refs):
            pg, rg = _grams(p, k), _grams(r, k)
            used = []
            for g in pg:
                avail = rg.count(g) - used.count(g)
                if avail > 0:
                    num += 1
                    used.append(g)
            den += len(pg)
            ref_den += len(rg)
        if den == 0:
            if ref_den == 0:
                continue
            return 0.0
        if num == 0:
            return 0.0
        logs += math.log(num / den) / n
    c = sum(len(p) for p in preds)
    r = sum(len(x) for x in refs)
    bp = 1.0 if c > r else math.exp(1 - r / c)
    return bp * math.exp(logs)


def _f(p, r):
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


def scalar_rouge_n(preds, refs, n):
    scores = []
    for p, r in zip(preds, refs):
        pg, rg = _grams(p, n), _grams(r, n)
        if not pg and not rg:
            scores.append(1.0)
            continue
        if not pg or not rg:
            scores.append(0.0)
            continue
        pool = list(rg)
        hit = 0
        for g in pg:
            if g in pool:
                pool.remove(g)
                hit += 1
        scores.append(_f(hit / len(pg), hit / len(rg)))
    return sum(scores) / len(scores)


def brute_lcs(a, b):
    """Longest common subsequence by exhaustive subsequence search (short inputs)."""
    best = 0
    for mask in product([0, 1], repeat=len(a)):
        sub = [x for x, keep in zip(a, mask) if keep]
        if len(sub) <= best:
            continue
        it = iter(b)
        if all(any(x == y for y in it) for x in sub):
            best = len(sub)
    return best


def scalar_rouge_l(preds, refs):
    scores = []
    for p, r in zip(preds, refs):
        if not p and not r:
            scores.append(1.0)
            continue
        if not p or not r:
            scores.append(0.0)
            continue
        lcs = brute_lcs(p, r)
        scores.append(_f(lcs / len(p), lcs / len(r)))
    return sum(scores) / len(scores)


def scalar_restoration(preds, refs, contexts, currents, n):
    num = pd = rd = 0
    for p, r, ctx, cur in zip(preds, refs, contexts, currents):
        restored = {w for u in ctx for w in u if w not in cur}
        pg = [g for g in _grams(p, n) if any(w in restored for w in g)]
        rg = [g for g in _grams(r, n) if any(w in restored for w in g)]
        pool = list(rg)
        for g in pg:
            if g in pool:
                pool.remove(g)
                num += 1
        pd += len(pg)
        rd += len(rg)
    prec = num / pd if pd else 0.0
    rec = num / rd if rd else 0.0
    return prec, rec, _f(prec, rec)
