import random
from functools import lru_cache

import pytest

from dialadapt.corpus import ParallelExample
from dialadapt.errors import EmptyReferenceError, EvalError
from dialadapt.evaluation import (
    REFERENCE_POEM_DISTANCES,
    WerCounts,
    WerReport,
    align_words,
    distance_from_standard,
    evaluate_model,
    evaluate_pairs,
    fit_to_source,
    wer,
    wer_counts,
)
from dialadapt.synth import SyntheticDialect, builtin_rule_packs, generate_corpus


def reference_edit_distance(ref, hyp):
    """Independent top-down memoized Levenshtein for cross-checking."""

    @lru_cache(maxsize=None)
    def go(i, j):
        if i == 0:
            return j
        if j == 0:
            return i
        return min(
            go(i - 1, j - 1) + (0 if ref[i - 1] == hyp[j - 1] else 1),
            go(i - 1, j) + 1,
            go(i, j - 1) + 1,
        )

    return go(len(ref), len(hyp))


def random_words(rng, n, alphabet=("tuli", "talo", "vesi", "kala", "?")):
    return [rng.choice(alphabet) for _ in range(n)]


def test_wer_is_zero_on_identity():
    assert wer(["mie", "ko", "näin"], ["mie", "ko", "näin"]) == 0.0


def test_wer_spot_value_two_thirds():
    counts = wer_counts(["a", "b", "c"], ["a", "x", "c", "d"])
    assert counts == WerCounts(substitutions=1, deletions=0, insertions=1, correct=2)
    assert counts.wer == pytest.approx(2 / 3)
    assert wer(["a", "b", "c"], ["a", "x", "c", "d"]) == pytest.approx(2 / 3)


def test_wer_can_exceed_one():
    assert wer(["a"], ["x", "y", "z"]) == 3.0


def test_wer_rejects_empty_reference():
    with pytest.raises(EmptyReferenceError):
        wer([], ["a"])
    with pytest.raises(EmptyReferenceError):
        WerCounts().wer


def test_alignment_cost_matches_reference_distance():
    rng = random.Random(42)
    for _ in range(400):
        ref = random_words(rng, rng.randint(0, 8))
        hyp = random_words(rng, rng.randint(0, 8))
        counts = wer_counts(ref, hyp)
        assert counts.edits == reference_edit_distance(tuple(ref), tuple(hyp))


def test_alignment_count_identities():
    rng = random.Random(43)
    for _ in range(400):
        ref = random_words(rng, rng.randint(0, 10))
        hyp = random_words(rng, rng.randint(0, 10))
        counts = wer_counts(ref, hyp)
        assert counts.n_ref == len(ref)
        assert counts.n_hyp == len(hyp)


def test_alignment_prefers_correct_over_substitution():
    # both alignments cost 1; the backtrace must keep the matching word
    counts = wer_counts(["a", "b"], ["b"])
    assert counts.correct == 1 and counts.deletions == 1 and counts.substitutions == 0


def test_alignment_ops_are_well_formed():
    ops = align_words(["a", "b", "c"], ["a", "x", "c", "d"])
    assert [op for op, _, _ in ops] == ["correct", "sub", "correct", "ins"]
    for op, ref_word, hyp_word in ops:
        if op == "del":
            assert hyp_word is None
        elif op == "ins":
            assert ref_word is None
        else:
            assert ref_word is not None and hyp_word is not None


def test_report_macro_micro_and_exclusions():
    report = evaluate_pairs(
        [["a", "b"], ["c"], []],
        [["a", "x"], ["c"], ["junk"]],
    )
    assert report.n_sentences == 2
    assert report.excluded_empty == 1
    assert report.macro_wer == pytest.approx((0.5 + 0.0) / 2)
    assert report.micro_wer == pytest.approx(1 / 3)
    assert "macro WER" in report.summary()


def test_report_requires_scored_sentences():
    with pytest.raises(EvalError):
        WerReport().macro_wer
    with pytest.raises(EvalError):
        evaluate_pairs([["a"]], [["a"], ["b"]])


def test_fit_to_source_truncates_and_pads():
    assert fit_to_source(["x", "y", "z", "w"], ["a", "b", "c"]) == ["x", "y", "z"]
    assert fit_to_source(["x"], ["a", "b", "c"]) == ["x", "b", "c"]
    assert fit_to_source([], ["a"]) == ["a"]


def test_evaluate_model_with_perfect_and_broken_adapters():
    packs = builtin_rule_packs()
    dialect = SyntheticDialect("north", packs["drop-final-n"] + packs["d-to-r"])
    examples = generate_corpus([dialect], 20, seed=8)

    perfect = evaluate_model(None, examples, adapt_fn=lambda ex: list(ex.target_words))
    assert perfect.macro_wer == 0.0

    broken = evaluate_model(None, examples, adapt_fn=lambda ex: ["hölynpöly"] * len(ex.target_words))
    assert broken.macro_wer > 0.9

    copying = evaluate_model(None, examples, adapt_fn=lambda ex: list(ex.source_words))
    reference = distance_from_standard(examples)
    assert copying.macro_wer == pytest.approx(reference.macro_wer)


def test_evaluate_model_hand_scored_mixture():
    examples = [ParallelExample("dd", ["yksi", "kaksi"], ["yks", "kaks"]) for _ in range(10)]
    # five perfect sentences, five with one of two words wrong
    hyps = iter([["yks", "kaks"]] * 5 + [["yksi", "kaks"]] * 5)
    report = evaluate_model(None, examples, adapt_fn=lambda ex: next(hyps))
    assert report.macro_wer == pytest.approx(0.25)
    assert report.pooled == WerCounts(substitutions=5, deletions=0, insertions=0, correct=15)


def test_empty_hypothesis_is_pure_deletion():
    counts = wer_counts(["a", "b"], [])
    assert counts == WerCounts(substitutions=0, deletions=2, insertions=0, correct=0)
    assert counts.wer == 1.0


def test_all_wrong_same_length_scores_one():
    assert wer(["a", "b", "c"], ["x", "y", "z"]) == 1.0


def test_macro_equals_micro_for_equal_length_references():
    rng = random.Random(51)
    refs = [random_words(rng, 4) for _ in range(30)]
    hyps = [random_words(rng, rng.randint(1, 6)) for _ in range(30)]
    report = evaluate_pairs(refs, hyps)
    # every sentence shares one denominator, so the two means coincide
    assert report.macro_wer == pytest.approx(report.micro_wer, rel=1e-12)


def test_distance_matches_a_direct_rule_application_count():
    # the rule hits exactly the words ending in n: 30% of this stock, diluted
    # a little by the untouched sentence-final punctuation word
    vocabulary = ["talon", "metsän", "kylän", "talo", "kirja", "metsä", "kylä",
                  "poika", "kala", "vesi"]
    dialect = SyntheticDialect("nn", builtin_rule_packs()["drop-final-n"])
    examples = generate_corpus([dialect], 400, seed=19, vocabulary=vocabulary)
    changed = sum(
        1 for ex in examples for s, t in zip(ex.source_words, ex.target_words) if s != t
    )
    total = sum(len(ex.target_words) for ex in examples)
    report = distance_from_standard(examples)
    assert report.micro_wer == pytest.approx(changed / total, rel=1e-12)
    assert 0.20 < report.micro_wer < 0.32


def test_distance_grows_with_each_added_rule():
    packs = builtin_rule_packs()
    nested = [
        packs["drop-final-n"],
        packs["drop-final-n"] + packs["d-to-r"],
        packs["drop-final-n"] + packs["d-to-r"] + packs["shorten-long-vowels"],
    ]
    distances = []
    for rules in nested:
        examples = generate_corpus([SyntheticDialect("xx", rules)], 200, seed=77)
        distances.append(distance_from_standard(examples).macro_wer)
    assert distances[0] < distances[1] < distances[2]


def test_reference_poem_distances_are_documented():
    assert REFERENCE_POEM_DISTANCES == {"EK": 34.38, "IS": 43.41, "PVS": 54.69}
