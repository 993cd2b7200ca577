import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from oracles import scalar_bleu, scalar_restoration, scalar_rouge_l, scalar_rouge_n
from sgtrewrite.corpus import parse_dataset_line
from sgtrewrite.errors import LengthMismatch
from sgtrewrite.metrics import (
    bleu_n,
    evaluate_corpus,
    exact_match,
    lcs_length,
    restoration_prf,
    restored_word_set,
    rouge_l,
    rouge_n,
    words,
)

U1, U2, U3 = "深圳最近天气怎么样？", "最近经常阴天下雨。", "冬天就是这样的。"
REF = "深圳冬天就是经常阴天下雨"
DROPPED = "冬天就是经常阴天下雨"


def test_bleu_identity_and_disjoint():
    assert bleu_n([REF], [REF], 4) == 1.0
    assert bleu_n(["你好"], ["再见"], 1) == 0.0


def test_bleu_brevity_penalty_case():
    assert len(words(DROPPED)) == 10 and len(words(REF)) == 12
    assert bleu_n([DROPPED], [REF], 1) == pytest.approx(math.exp(1 - 12 / 10), abs=1e-12)
    assert bleu_n([DROPPED], [REF], 1) == pytest.approx(0.8187, abs=1e-4)


def test_bleu_clipping():
    assert bleu_n(["the the the"], ["the cat"], 1) == pytest.approx(1 / 3)


def test_bleu_length_mismatch():
    with pytest.raises(LengthMismatch):
        bleu_n(["a"], ["a", "b"], 1)
    with pytest.raises(LengthMismatch):
        bleu_n([], [], 1)


def test_rouge_examples():
    assert rouge_n(["a b"], ["b a"], 1) == 1.0
    assert rouge_l(["a b"], ["b a"]) == pytest.approx(0.5)
    assert rouge_n([REF], [REF], 2) == 1.0
    assert rouge_l([REF], [REF]) == 1.0
    assert rouge_n(["你好"], ["再见"], 1) == 0.0
    assert rouge_l(["你好"], ["再见"]) == 0.0


def test_exact_match():
    assert exact_match(["a", "b"], ["a", "b"]) == 1.0
    assert exact_match(["a", "b"], ["c", "d"]) == 0.0
    assert exact_match(["a", "b", "c", "d"], ["a", "x", "y", "z"]) == 0.25
    # NFC and whitespace-normalized comparison
    assert exact_match(["café ok"], ["café  ok"]) == 1.0


def test_restored_word_set_weather():
    restored = restored_word_set([U1, U2], U3)
    assert restored == set("深圳最近气怎么？经常阴下雨")
    assert restored_word_set([U1, U2], U3, REF) == set("深圳经常阴下雨")
    assert restored_word_set([U3], U3) == set()
    assert restored_word_set([], U3) == set()


def test_restoration_dropped_shenzhen():
    p, r, f = restoration_prf(DROPPED, REF, [U1, U2], U3, 1)
    assert p == 1.0
    assert r == pytest.approx(5 / 7, abs=1e-12)
    assert f == pytest.approx(2 * (5 / 7) / (1 + 5 / 7), abs=1e-12)
    assert f == pytest.approx(0.8333, abs=1e-4)


def test_restoration_identity_and_none():
    assert restoration_prf(REF, REF, [U1, U2], U3, 1) == (1.0, 1.0, 1.0)
    assert restoration_prf("冬天就是", REF, [U1, U2], U3, 1) == (0.0, 0.0, 0.0)


def toy_corpus():
    lines = [
        f"{U1}\t{U2}\t{U3}\t{REF}",
        "北京今天冷吗\t很冷\t要穿多少\t北京今天要穿多少",
        "你喜欢什么电影\t科幻片\t为什么\t为什么喜欢科幻片",
        "book a table for two\tat what time\tseven\tbook a table for two at seven",
        "明天去上海吗\t去\t几点的火车\t明天去上海几点的火车",
    ]
    return [parse_dataset_line(x) for x in lines]


TOY_PREDICTIONS = [DROPPED, "北京今天要穿多少", "为什么喜欢科幻", "book a table at seven", "几点的火车"]


def test_identity_corpus_scores_one():
    corpus = toy_corpus()
    report = evaluate_corpus([d.reference for d in corpus], corpus)
    values = [v for _, v in report.columns()]
    assert all(v == 1.0 for v in values)


def test_toy_corpus_matches_scalar_oracles():
    corpus = toy_corpus()
    report = evaluate_corpus(TOY_PREDICTIONS, corpus)
    preds = [words(p) for p in TOY_PREDICTIONS]
    refs = [words(d.reference) for d in corpus]
    ctx = [[words(u.raw_text) for u in d.context] for d in corpus]
    cur = [words(d.current.raw_text) for d in corpus]
    for n in (1, 2, 4):
        assert report.bleu[n] == pytest.approx(scalar_bleu(preds, refs, n), abs=1e-12)
    for n in (1, 2):
        assert report.rouge[str(n)] == pytest.approx(scalar_rouge_n(preds, refs, n), abs=1e-12)
    assert report.rouge["L"] == pytest.approx(scalar_rouge_l(preds, refs), abs=1e-12)
    for n in (1, 2, 3):
        assert report.restoration[n] == pytest.approx(scalar_restoration(preds, refs, ctx, cur, n), abs=1e-12)
    assert report.em == 0.2


def test_scores_in_unit_interval_and_f_is_harmonic():
    report = evaluate_corpus(TOY_PREDICTIONS, toy_corpus())
    for _, v in report.columns():
        assert 0.0 <= v <= 1.0
    for p, r, f in report.restoration.values():
        assert f == (0.0 if p == r == 0 else pytest.approx(2 * p * r / (p + r)))


def test_report_serialization():
    report = evaluate_corpus(TOY_PREDICTIONS, toy_corpus())
    d = report.as_dict()
    assert set(d["bleu"]) == {"1", "2", "4"}
    assert set(d["rouge"]) == {"1", "2", "L"}
    assert set(d["restoration"]) == {"1", "2", "3"}
    assert "EM" in report.format_table()


def test_evaluate_errors():
    with pytest.raises(LengthMismatch):
        evaluate_corpus([], [])
    with pytest.raises(LengthMismatch):
        evaluate_corpus(["a"], toy_corpus())


seq = st.lists(st.sampled_from("abcd"), max_size=10)


@settings(max_examples=200)
@given(seq, seq)
def test_lcs_matches_exhaustive(a, b):
    from oracles import brute_lcs
    assert lcs_length(a, b) == brute_lcs(a, b)


@settings(max_examples=200)
@given(st.lists(st.sampled_from("abcdef"), min_size=1, max_size=10),
       st.lists(st.sampled_from("abcdef"), min_size=1, max_size=10), st.data())
def test_deleting_an_ngram_never_raises_recall(ref, pred, data):
    # removing any single token removes exactly one unigram; removing the last
    # token removes exactly the final n-gram for every n, creating none
    context = [["a", "b", "c", "d"]]
    current = ["e"]
    i = data.draw(st.integers(0, len(pred) - 1))
    _, before, _ = restoration_prf(pred, ref, context, current, 1)
    _, after, _ = restoration_prf(pred[:i] + pred[i + 1:], ref, context, current, 1)
    assert after <= before
    for n in (2, 3):
        _, before, _ = restoration_prf(pred, ref, context, current, n)
        _, after, _ = restoration_prf(pred[:-1], ref, context, current, n)
        assert after <= before


def test_random_corpora_match_oracles():
    rng = random.Random(8)
    for _ in range(50):
        k = rng.randint(1, 4)
        preds = [[rng.choice("abcd") for _ in range(rng.randint(0, 8))] for _ in range(k)]
        refs = [[rng.choice("abcd") for _ in range(rng.randint(1, 8))] for _ in range(k)]
        for n in (1, 2, 4):
            assert bleu_n(preds, refs, n) == pytest.approx(scalar_bleu(preds, refs, n), abs=1e-12)
        assert rouge_n(preds, refs, 2) == pytest.approx(scalar_rouge_n(preds, refs, 2), abs=1e-12)
        assert rouge_l(preds, refs) == pytest.approx(scalar_rouge_l(preds, refs), abs=1e-12)
