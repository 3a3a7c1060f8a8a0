import random

import pytest

from dialadapt.errors import CodecError, ReservedSymbolError
from dialadapt.textcodec import (
    BOUNDARY,
    CHUNK_SIZE,
    EncodedSequence,
    add_flag,
    chunk_sentence,
    decode,
    encode,
    strip_flag,
    truncate_to_source,
    words_from_tokens,
)

LETTERS = "abcdefghijklmnopqrstuvwxyzäö"


def random_word(rng, max_len=9):
    return "".join(rng.choice(LETTERS) for _ in range(rng.randint(1, max_len)))


def random_sentence(rng, min_words=1, max_words=12):
    return [random_word(rng) for _ in range(rng.randint(min_words, max_words))]


def test_encode_spells_words_with_boundaries():
    seq = encode(["minä", "kun", "näin"])
    assert seq.tokens == list("minä") + ["_"] + list("kun") + ["_"] + list("näin")
    assert seq.as_text() == "m i n ä _ k u n _ n ä i n"


def test_decode_inverts_encode():
    rng = random.Random(101)
    for _ in range(1000):
        words = random_sentence(rng)
        assert decode(encode(words)) == words


def test_single_and_two_word_sentences_round_trip():
    for words in (["yö"], ["a"], ["yö", "on"], ["?"],):
        assert decode(encode(words)) == words


def test_encode_rejects_bad_input():
    with pytest.raises(CodecError):
        encode([])
    with pytest.raises(CodecError):
        encode([""])
    with pytest.raises(CodecError):
        encode(["has space"])
    with pytest.raises(ReservedSymbolError):
        encode(["under_score"])


def test_decode_is_strict():
    with pytest.raises(CodecError):
        decode(EncodedSequence([BOUNDARY, "a"]))
    with pytest.raises(CodecError):
        decode(EncodedSequence(["a", BOUNDARY]))
    with pytest.raises(CodecError):
        decode(EncodedSequence(["a", BOUNDARY, BOUNDARY, "b"]))
    with pytest.raises(CodecError):
        decode(EncodedSequence(["ab"]))
    with pytest.raises(CodecError):
        decode(add_flag(encode(["talo"]), "north"))


def test_words_from_tokens_is_lenient():
    assert words_from_tokens(["a", "b", "_", "c"]) == ["ab", "c"]
    assert words_from_tokens(["_", "a", "_", "_", "b", "_"]) == ["a", "b"]
    assert words_from_tokens([]) == []
    assert words_from_tokens(["<unk>", "_", "a"]) == ["<unk>", "a"]


def test_flag_handling():
    seq = add_flag(encode(["kun", "näin"]), "southeast")
    assert seq.tokens[0] == "southeast"
    assert seq.has_flag()
    assert strip_flag(seq).tokens == encode(["kun", "näin"]).tokens
    with pytest.raises(CodecError):
        add_flag(seq, "southeast")
    with pytest.raises(ReservedSymbolError):
        add_flag(encode(["a"]), "x")


def test_chunking_splits_into_threes():
    chunks = chunk_sentence(["a", "b", "c", "d", "e", "f", "g"])
    assert [c.words for c in chunks] == [["a", "b", "c"], ["d", "e", "f"], ["g"]]
    assert [c.chunk_index for c in chunks] == [0, 1, 2]
    assert CHUNK_SIZE == 3


def test_chunk_concatenation_identity():
    rng = random.Random(73)
    for _ in range(1000):
        words = random_sentence(rng, max_words=14)
        chunks = chunk_sentence(words)
        assert all(len(c.words) <= CHUNK_SIZE for c in chunks)
        rebuilt = [w for c in chunks for w in c.words]
        assert rebuilt == words


def test_truncate_to_source():
    assert truncate_to_source(["a", "b", "c", "d"], 3) == ["a", "b", "c"]
    assert truncate_to_source(["a", "b"], 3) == ["a", "b"]
    assert truncate_to_source(["a"], 1) == ["a"]
    with pytest.raises(CodecError):
        truncate_to_source(["a"], 0)
