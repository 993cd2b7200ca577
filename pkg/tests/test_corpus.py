import numpy as np
import pytest

from sgtrewrite.corpus import (
    CONNECTION_UTTERANCE,
    SEP_TEXT,
    Dialogue,
    assemble_input,
    load_connection_words,
    load_corpus,
    parse_dataset_line,
)
from sgtrewrite.errors import EmptyField, EncodingFailure, IoFailure, MalformedLine


def test_parse_weather(weather):
    assert [u.raw_text for u in weather.utterances] == ["深圳最近天气怎么样？", "最近经常阴天下雨。", "冬天就是这样的。"]
    assert weather.reference == "深圳冬天就是经常阴天下雨。"
    assert [u.speaker for u in weather.utterances] == [0, 1, 0]
    assert weather.current.raw_text == "冬天就是这样的。"


def test_parse_minimal():
    d = parse_dataset_line("hi\thi")
    assert [u.raw_text for u in d.utterances] == ["hi"]
    assert d.reference == "hi"


def test_parse_errors():
    with pytest.raises(MalformedLine):
        parse_dataset_line("only one field")
    with pytest.raises(EmptyField):
        parse_dataset_line("a\t\tb")
    with pytest.raises(EmptyField):
        parse_dataset_line("a\t  ")


def test_parse_speaker_prefixes():
    d = parse_dataset_line("B: hello\tB: again\tA: yes\tref")
    assert [u.speaker for u in d.utterances] == [1, 1, 0]
    assert [u.raw_text for u in d.utterances] == ["hello", "again", "yes"]
    # prefixes on only some fields fall back to alternation and keep the text
    d = parse_dataset_line("B: hello\tthere\tref")
    assert [u.speaker for u in d.utterances] == [0, 1]
    assert d.utterances[0].raw_text == "B: hello"


def test_parse_applies_nfc():
    d = parse_dataset_line("café\tcafé")
    assert d.reference == "café"


def test_utterance_tokens_carry_index_and_speaker(weather):
    u2 = weather.utterances[1]
    assert all(t.utterance_index == 1 and t.speaker == 1 for t in u2.tokens)
    assert [t.position for t in u2.tokens] == list(range(len(u2.tokens)))


def write(tmp_path, text, name="c.tsv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_load_corpus(tmp_path):
    p = write(tmp_path, "a\tb\tc\nd\te\n深\t圳\n")
    assert len(list(load_corpus(p))) == 3


def test_load_corpus_skips_malformed(tmp_path):
    p = write(tmp_path, "a\tb\nbroken\nc\td\ne\tf\n")
    stream = load_corpus(p)
    out = list(stream)
    assert len(out) == 3
    assert [n for n, _ in stream.skipped] == [2]


def test_load_corpus_empty(tmp_path):
    assert list(load_corpus(write(tmp_path, ""))) == []


def test_load_corpus_errors(tmp_path):
    with pytest.raises(IoFailure):
        list(load_corpus(tmp_path / "missing.tsv"))
    bad = tmp_path / "bad.tsv"
    bad.write_bytes(b"ok\tok\n\xff\xfe\tx\n")
    with pytest.raises(EncodingFailure):
        list(load_corpus(bad))


def test_connection_word_file(tmp_path):
    p = write(tmp_path, "# comment\n的\n\n和\n", "cw.txt")
    assert load_connection_words(p) == ["的", "和"]


def test_assemble_weather(weather):
    inp = assemble_input(weather)
    u = [u.tokens for u in weather.utterances]
    assert len(inp) == len(u[0]) + len(u[1]) + len(u[2]) + 2
    assert inp.separator_positions == {len(u[0]), len(u[0]) + 1 + len(u[1])}
    assert [inp.tokens[i].text for i in sorted(inp.separator_positions)] == [SEP_TEXT, SEP_TEXT]
    track = inp.speaker_track[:, 0]
    a, b = len(u[0]), len(u[0]) + 1 + len(u[1])
    assert np.all(track[:a] == 0)
    assert np.all(track[a + 1:b] == 1)
    assert np.all(track[b + 1:] == 0)
    assert track[a] == 0 and track[b] == 0


def test_assemble_single_utterance():
    d = Dialogue.from_texts(["你好吗"], "你好吗")
    inp = assemble_input(d)
    assert inp.texts == ["你", "好", "吗"]
    assert not inp.separator_positions


def test_assemble_connection_words(weather):
    inp = assemble_input(weather, ["的", "和"])
    assert inp.n_connection == 2
    assert inp.texts[:2] == ["的", "和"]
    assert all(t.utterance_index == CONNECTION_UTTERANCE for t in inp.tokens[:2])
    assert np.all(inp.speaker_track[:2] == 0)
    assert inp.regions[0] == (CONNECTION_UTTERANCE, 0, 2)
    # position bookkeeping maps every non-separator token back to its source
    seen = set()
    for i, tok in enumerate(inp.tokens):
        if i in inp.separator_positions:
            continue
        key = (tok.utterance_index, tok.position)
        assert key not in seen
        seen.add(key)
        if tok.utterance_index == CONNECTION_UTTERANCE:
            assert ["的", "和"][tok.position] == tok.text
        else:
            assert weather.utterances[tok.utterance_index].tokens[tok.position].text == tok.text
    n_source = sum(len(u.tokens) for u in weather.utterances) + 2
    assert len(seen) == n_source


def test_assemble_length_formula(weather):
    inp = assemble_input(weather, ["因为", "所以"])
    n = len(weather.utterances)
    assert len(inp) == 4 + sum(len(u.tokens) for u in weather.utterances) + (n - 1)


def test_assemble_is_deterministic(weather):
    a = assemble_input(weather, ["的"])
    b = assemble_input(weather, ["的"])
    assert a == b
    assert a.speaker_track.tobytes() == b.speaker_track.tobytes()


def test_speaker_width_one_hot(weather):
    inp = assemble_input(weather, speaker_width=2)
    assert inp.speaker_track.shape == (len(inp), 2)
    start, end = inp.utterance_range(1)
    assert np.all(inp.speaker_track[start:end] == [0.0, 1.0])
    with pytest.raises(ValueError):
        assemble_input(weather, speaker_width=0)
