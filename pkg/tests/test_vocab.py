import pytest

from dialadapt.corpus import ParallelExample
from dialadapt.errors import ReservedSymbolError, UnknownDialectError, VocabularyError
from dialadapt.textcodec import encode, add_flag
from dialadapt.vocab import (
    BOS_ID,
    BOUNDARY_ID,
    EOS_ID,
    PAD_ID,
    SPECIALS,
    UNK_ID,
    Vocabulary,
)


def test_reserved_ids_are_pinned():
    vocab = Vocabulary.build("ab", flags=["ek", "is"])
    assert (PAD_ID, BOS_ID, EOS_ID, UNK_ID, BOUNDARY_ID) == (0, 1, 2, 3, 4)
    assert vocab.symbols[:5] == SPECIALS
    assert vocab.id("<pad>") == 0 and vocab.id("_") == 4


def test_layout_is_specials_then_flags_then_sorted_chars():
    vocab = Vocabulary.build("ba", flags=["is", "ek"])
    assert vocab.symbols == SPECIALS + ("ek", "is", "a", "b")
    assert len(vocab) == 9


def test_character_order_follows_codepoints():
    vocab = Vocabulary.build("äaöz")
    chars = vocab.symbols[len(SPECIALS):]
    assert chars == ("a", "z", "ä", "ö")


def test_build_rejects_reserved_and_malformed_entries():
    with pytest.raises(ReservedSymbolError):
        Vocabulary.build("a_b")
    with pytest.raises(ReservedSymbolError):
        Vocabulary.build("a b")
    with pytest.raises(ReservedSymbolError):
        Vocabulary.build("ab", flags=["x"])
    with pytest.raises(ReservedSymbolError):
        Vocabulary.build("ab", flags=["<s>"])
    with pytest.raises(ReservedSymbolError):
        Vocabulary.build("ab", flags=["two words"])
    with pytest.raises(VocabularyError):
        Vocabulary.build(["ab"])


def test_from_corpus_collects_both_sides():
    examples = [ParallelExample("ek", ["abc"], ["xyz"])]
    vocab = Vocabulary.from_corpus(examples, flags=["ek"])
    for ch in "abcxyz":
        assert ch in vocab
    assert vocab.flags == ("ek",)


def test_ids_round_trip_and_unknowns():
    vocab = Vocabulary.build("abc", flags=["ek"])
    seq = add_flag(encode(["ab", "c"]), "ek")
    ids = vocab.ids(seq)
    assert ids[0] == vocab.flag_id("ek")
    assert vocab.tokens(ids) == list(seq)
    assert vocab.ids(["q"]) == [UNK_ID]
    with pytest.raises(VocabularyError):
        vocab.id("q")
    with pytest.raises(VocabularyError):
        vocab.symbol(len(vocab))


def test_flag_lookup_rejects_unknown_dialects():
    vocab = Vocabulary.build("abc", flags=["ek"])
    assert vocab.is_flag("ek") and not vocab.is_flag("a")
    with pytest.raises(UnknownDialectError):
        vocab.flag_id("is")


def test_dict_round_trip():
    vocab = Vocabulary.build("abäö", flags=["ek", "is"])
    clone = Vocabulary.from_dict(vocab.to_dict())
    assert clone == vocab
    assert clone.index == vocab.index


def test_table_must_start_with_specials():
    with pytest.raises(VocabularyError):
        Vocabulary(symbols=("a", "b"), flags=())
    with pytest.raises(VocabularyError):
        Vocabulary(symbols=SPECIALS + ("a", "a"), flags=())
