import random

import pytest

from dialadapt.corpus import (
    CleaningMap,
    ParallelExample,
    clean_text,
    load_corpus,
    load_dialect_manifest,
    save_corpus,
    split_sizes,
    stratified_split,
)
from dialadapt.errors import CleaningMapError, MalformedRecordError, SplitError


def make_examples(n, dialect="murre"):
    return [
        ParallelExample(dialect, [f"sana{i}", "on"], [f"sana{i}", "o"])
        for i in range(n)
    ]


def test_parallel_example_validation():
    ParallelExample("ek", ["kaksi", "sanaa", "?"], ["kaks", "sanaa", "?"])
    with pytest.raises(MalformedRecordError):
        ParallelExample("", ["a"], ["b"])
    with pytest.raises(MalformedRecordError):
        ParallelExample("ek", ["a", "b"], ["c"])
    with pytest.raises(MalformedRecordError):
        ParallelExample("ek", [], [])
    with pytest.raises(MalformedRecordError):
        ParallelExample("ek", ["a_b"], ["ab"])
    with pytest.raises(MalformedRecordError):
        ParallelExample("e k", ["a"], ["a"])


def test_cleaning_map_applies_deletes_and_replacements():
    cmap = CleaningMap(delete_chars=frozenset("ˈ`"), replace_chars={"š": "s", "ž": "z"})
    assert clean_text("ˈšamaani ža`', text", cmap) == "samaani za', text"
    assert clean_text("plain", cmap) == "plain"


def test_cleaning_map_is_idempotent_by_construction():
    rng = random.Random(5)
    cmap = CleaningMap(delete_chars=frozenset("´`¤"), replace_chars={"á": "a", "é": "e", "ü": "y"})
    alphabet = "áéü´`¤abcxyz "
    for _ in range(200):
        text = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 30)))
        once = clean_text(text, cmap)
        assert clean_text(once, cmap) == once


def test_cleaning_map_rejects_bad_tables():
    with pytest.raises(CleaningMapError):
        CleaningMap(replace_chars={"a": "a"})
    with pytest.raises(CleaningMapError):
        CleaningMap(delete_chars=frozenset("a"), replace_chars={"a": "b"})
    with pytest.raises(CleaningMapError):
        CleaningMap(replace_chars={"a": "b", "b": "c"})
    with pytest.raises(CleaningMapError):
        CleaningMap(delete_chars=frozenset("b"), replace_chars={"a": "b"})
    with pytest.raises(CleaningMapError):
        CleaningMap(delete_chars=frozenset(["ab"]))


def test_cleaning_map_from_file(tmp_path):
    path = tmp_path / "map.tsv"
    path.write_text(
        "# annotations\n"
        "š\ts\n"
        "ˈ\n"
        "U+0060\t'\n"
        "\n",
        encoding="utf-8",
    )
    cmap = CleaningMap.from_file(path)
    assert clean_text("ˈšá`", cmap) == "sá'"


def test_cleaning_map_file_errors(tmp_path):
    path = tmp_path / "map.tsv"
    path.write_text("abc\tx\n", encoding="utf-8")
    with pytest.raises(CleaningMapError):
        CleaningMap.from_file(path)
    path.write_text("U+ZZZZ\tx\n", encoding="utf-8")
    with pytest.raises(CleaningMapError):
        CleaningMap.from_file(path)


def test_load_corpus_round_trip(tmp_path):
    examples = [
        ParallelExample("ek", ["minä", "kun", "näin"], ["mie", "ko", "näin"]),
        ParallelExample("is", ["pieni", "?"], ["pien", "?"]),
    ]
    path = tmp_path / "corpus.tsv"
    save_corpus(examples, path)
    loaded = load_corpus(path)
    assert loaded == examples


def test_load_corpus_reports_line_numbers(tmp_path):
    path = tmp_path / "bad.tsv"
    path.write_text("ek\tyksi kaksi\tyks kaks\nek\tvain kaksi saraketta\n", encoding="utf-8")
    with pytest.raises(MalformedRecordError) as err:
        load_corpus(path)
    assert "line 2" in str(err.value)

    path.write_text("ek\tyksi kaksi\tyks\n", encoding="utf-8")
    with pytest.raises(MalformedRecordError) as err:
        load_corpus(path)
    assert "line 1" in str(err.value)


def test_load_corpus_skips_blank_lines_and_checks_manifest(tmp_path):
    path = tmp_path / "corpus.tsv"
    path.write_text("\nek\tyksi\tyks\n\nis\tkaksi\tkaks\n", encoding="utf-8")
    assert len(load_corpus(path)) == 2
    assert len(load_corpus(path, dialects={"ek", "is"})) == 2
    with pytest.raises(MalformedRecordError) as err:
        load_corpus(path, dialects={"ek"})
    assert "line 4" in str(err.value)


def test_dialect_manifest(tmp_path):
    path = tmp_path / "dialects.txt"
    path.write_text("# regions\nek\nis\n\n", encoding="utf-8")
    assert load_dialect_manifest(path) == ["ek", "is"]


def test_split_sizes_floor_rule():
    assert split_sizes(813) == (569, 121, 123)
    assert split_sizes(3) == (2, 0, 1)
    assert split_sizes(10) == (7, 1, 2)
    assert split_sizes(100) == (70, 15, 15)
    assert split_sizes(8026) == (5618, 1203, 1205)


def test_stratified_split_is_deterministic_and_proportional():
    examples = make_examples(200, "ek") + make_examples(50, "is")
    a = stratified_split(examples, seed=9)
    b = stratified_split(examples, seed=9)
    assert a.train == b.train and a.valid == b.valid and a.test == b.test

    c = stratified_split(examples, seed=10)
    assert c.train != a.train

    for part, expected in zip(a.parts.values(), ((140 + 35), (30 + 7), (30 + 8))):
        assert len(part) == expected
    by_dialect = lambda rows, d: [ex for ex in rows if ex.dialect_id == d]
    assert len(by_dialect(a.train, "ek")) == 140
    assert len(by_dialect(a.valid, "is")) == 7


def test_stratified_split_partitions_without_loss():
    examples = make_examples(31, "ek") + make_examples(17, "is") + make_examples(3, "kh")
    split = stratified_split(examples, seed=4)
    rebuilt = split.train + split.valid + split.test
    assert len(rebuilt) == len(examples)
    key = lambda ex: (ex.dialect_id, ex.source_words[0])
    assert sorted(map(key, rebuilt)) == sorted(map(key, examples))


def test_stratified_split_rejects_bad_input():
    with pytest.raises(SplitError):
        stratified_split(make_examples(2), seed=0)
    with pytest.raises(SplitError):
        stratified_split(make_examples(10), ratios=(0.5, 0.2, 0.2), seed=0)
    with pytest.raises(SplitError):
        stratified_split(make_examples(10), ratios=(1.2, -0.1, -0.1), seed=0)


def test_clean_text_strips_combining_marks_like_a_character_loop():
    # transcription annotations: combining acute/grave and a superscript h
    cmap = CleaningMap(
        delete_chars=frozenset({"́", "̀", "ʰ"}),
        replace_chars={"ᵉ": "e"},
    )
    rng = random.Random(29)
    stock = list("kalantie ") + ["́", "̀", "ʰ", "ᵉ"]
    for _ in range(200):
        text = "".join(rng.choice(stock) for _ in range(rng.randint(0, 30)))
        expected = []
        for ch in text:
            if ch in cmap.delete_chars:
                continue
            expected.append(cmap.replace_chars.get(ch, ch))
        assert clean_text(text, cmap) == "".join(expected)
    assert clean_text("kalán tieʰ", cmap) == "kalan tie"
    assert clean_text("vuodᵉ", cmap) == "vuode"
