import pytest
from hypothesis import given, strategies as st

from annotative.tok import (RENDER, MalformedInput, Structural, count_tokens, normalize,
                            render, structural_token, tokenize)

Q = Structural.QUOTE.value
C = Structural.COLON.value


def words(text):
    return [t.text for t in tokenize(text)]


def test_word_counts():
    assert count_tokens("To be or not to be, that is the") == 9
    assert tokenize("") == []
    sentence = "peanut butter on a jelly doughnut is better than a peanut butter sandwich"
    assert count_tokens(sentence) == 13


def test_structural_counts():
    assert count_tokens(Q + "batters" + Q + C) == 4
    assert count_tokens(Q + "Cake" + Q) == 3
    assert count_tokens("word") == 1


def test_punctuation_and_underscore_split():
    assert words("Devil's Food") == ["Devil", "s", "Food"]
    assert words("snake_case 0.55 x-ray") == ["snake", "case", "0", "55", "x", "ray"]


def test_offsets_and_case_preserved():
    toks = tokenize("Aeolian  harp")
    assert toks[0].text == "Aeolian" and (toks[0].start, toks[0].end) == (0, 7)
    assert toks[1].start == 9
    assert normalize(toks[0].text) == "aeolian"


def test_structural_tokens_are_distinct_and_stable():
    kinds = list(Structural)
    texts = {structural_token(k).text for k in kinds}
    assert len(texts) == len(kinds)
    assert structural_token(Structural.OBJECT_OPEN) == structural_token(Structural.OBJECT_OPEN)
    assert structural_token(Structural.QUOTE).text != structural_token(Structural.COLON).text
    assert all(structural_token(k).structural for k in kinds)


def test_structural_colon_differs_from_text_colon():
    toks = tokenize(Q + "a:b" + Q + C)
    assert [t.structural for t in toks] == [True, False, False, True, True]


def test_render_restores_json_characters():
    assert render(Q + "id" + Q + C) == '"id":'
    assert set(RENDER.values()) >= set('{}[]":,')


def test_invalid_utf8():
    with pytest.raises(MalformedInput):
        tokenize(b"ok \xff\xfe")
    assert words("café".encode("utf-8")) == ["café"]


@given(st.text())
def test_count_matches_tokenize(text):
    toks = tokenize(text)
    assert count_tokens(text) == len(toks)
    assert all(a.end <= b.start for a, b in zip(toks, toks[1:]))
