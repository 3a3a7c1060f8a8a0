"""Word error rate scoring and the sentence adaptation pipeline.

WER is (S + D + I) / (S + D + C) over a word-level alignment between the
reference and the hypothesis, computed with dynamic programming.  When
several alignments share the minimal cost, the backtrace prefers, in order:
correct match, substitution, deletion, insertion.  Words are compared
verbatim; punctuation tokens count as words.

The headline number of a report is the macro WER, the unweighted mean of
per-sentence rates; the pooled micro WER is kept alongside it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import EmptyReferenceError, EvalError
from .corpus import ParallelExample
from .model import Seq2SeqModel
from .textcodec import chunk_sentence, encode, add_flag, truncate_to_source, words_from_tokens

# Known WER percentages between a standard-language poem and careful manual
# renderings into three Finnish dialect regions of the Suomen kielen
# näytteitä samples; useful as a sanity scale for distance_from_standard.
REFERENCE_POEM_DISTANCES = {"EK": 34.38, "IS": 43.41, "PVS": 54.69}


@dataclass(frozen=True)
class WerCounts:
    """Alignment tallies; identities: S+D+C = |ref|, S+I+C = |hyp|."""

    substitutions: int = 0
    deletions: int = 0
    insertions: int = 0
    correct: int = 0

    def __add__(self, other: "WerCounts") -> "WerCounts":
        return WerCounts(
            self.substitutions + other.substitutions,
            self.deletions + other.deletions,
            self.insertions + other.insertions,
            self.correct + other.correct,
        )

    @property
    def n_ref(self) -> int:
        return self.substitutions + self.deletions + self.correct

    @property
    def n_hyp(self) -> int:
        return self.substitutions + self.insertions + self.correct

    @property
    def edits(self) -> int:
        return self.substitutions + self.deletions + self.insertions

    @property
    def wer(self) -> float:
        if self.n_ref == 0:
            raise EmptyReferenceError("WER is undefined against an empty reference")
        return self.edits / self.n_ref


def align_words(ref: list[str], hyp: list[str]) -> list[tuple[str, str | None, str | None]]:
    """Minimal-cost word alignment as (op, ref_word, hyp_word) triples.

    op is one of 'correct', 'sub', 'del', 'ins'; del rows carry no hyp word
    and ins rows no ref word.  Ties follow the documented preference order.
    """
    n, m = len(ref), len(hyp)
    dist = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        dist[i][0] = i
    for j in range(1, m + 1):
        dist[0][j] = j
    for i in range(1, n + 1):
        row = dist[i]
        prev = dist[i - 1]
        r = ref[i - 1]
        for j in range(1, m + 1):
            row[j] = min(
                prev[j - 1] + (0 if r == hyp[j - 1] else 1),
                prev[j] + 1,
                row[j - 1] + 1,
            )

    ops: list[tuple[str, str | None, str | None]] = []
    i, j = n, m
    while i > 0 or j > 0:
        here = dist[i][j]
        if i > 0 and j > 0 and ref[i - 1] == hyp[j - 1] and dist[i - 1][j - 1] == here:
            ops.append(("correct", ref[i - 1], hyp[j - 1]))
            i -= 1
            j -= 1
        elif i > 0 and j > 0 and ref[i - 1] != hyp[j - 1] and dist[i - 1][j - 1] + 1 == here:
            ops.append(("sub", ref[i - 1], hyp[j - 1]))
            i -= 1
            j -= 1
        elif i > 0 and dist[i - 1][j] + 1 == here:
            ops.append(("del", ref[i - 1], None))
            i -= 1
        else:
            ops.append(("ins", None, hyp[j - 1]))
            j -= 1
    ops.reverse()
    return ops


def wer_counts(ref: list[str], hyp: list[str]) -> WerCounts:
    tally = {"correct": 0, "sub": 0, "del": 0, "ins": 0}
    for op, _, _ in align_words(ref, hyp):
        tally[op] += 1
    return WerCounts(
        substitutions=tally["sub"],
        deletions=tally["del"],
        insertions=tally["ins"],
        correct=tally["correct"],
    )


def wer(ref: list[str], hyp: list[str]) -> float:
    """Word error rate of one sentence pair; may exceed 1.0."""
    if not ref:
        raise EmptyReferenceError("WER is undefined against an empty reference")
    return wer_counts(ref, hyp).wer


@dataclass
class WerReport:
    """Scores for a set of sentences, macro and micro."""

    sentences: list[WerCounts] = field(default_factory=list)
    excluded_empty: int = 0

    def add(self, ref: list[str], hyp: list[str]) -> None:
        if not ref:
            self.excluded_empty += 1
            return
        self.sentences.append(wer_counts(ref, hyp))

    @property
    def n_sentences(self) -> int:
        return len(self.sentences)

    @property
    def pooled(self) -> WerCounts:
        total = WerCounts()
        for counts in self.sentences:
            total = total + counts
        return total

    @property
    def macro_wer(self) -> float:
        if not self.sentences:
            raise EvalError("no scored sentences in the report")
        return sum(c.wer for c in self.sentences) / len(self.sentences)

    @property
    def micro_wer(self) -> float:
        if not self.sentences:
            raise EvalError("no scored sentences in the report")
        return self.pooled.wer

    def summary(self) -> str:
        pooled = self.pooled
        lines = [
            f"sentences: {self.n_sentences} (empty references excluded: {self.excluded_empty})",
            f"macro WER: {self.macro_wer:.4f} ({100.0 * self.macro_wer:.2f} per 100 words)",
            f"micro WER: {self.micro_wer:.4f} ({100.0 * self.micro_wer:.2f} per 100 words)",
            f"pooled counts: S={pooled.substitutions} D={pooled.deletions} "
            f"I={pooled.insertions} C={pooled.correct}",
        ]
        return "\n".join(lines)


def evaluate_pairs(refs: list[list[str]], hyps: list[list[str]]) -> WerReport:
    if len(refs) != len(hyps):
        raise EvalError(f"got {len(refs)} references but {len(hyps)} hypotheses")
    report = WerReport()
    for ref, hyp in zip(refs, hyps):
        report.add(ref, hyp)
    return report


def fit_to_source(predicted: list[str], source: list[str]) -> list[str]:
    """Force a prediction to the source word count.

    Over-generation is cut off; under-generation is padded by copying the
    untranslated source words at the missing positions.
    """
    fitted = truncate_to_source(predicted, len(source))
    if len(fitted) < len(source):
        fitted = fitted + source[len(fitted) :]
    return fitted


def adapt_sentence(
    model: Seq2SeqModel,
    words: list[str],
    dialect: str | None = None,
    beam_size: int = 1,
) -> list[str]:
    """Adapt one standard-language sentence; output has the same word count.

    Flagged models need `dialect`; plain models reject one that contradicts
    their own specialization.
    """
    if model.meta.mode == "flagged":
        if dialect is None:
            raise EvalError("a flagged model needs a dialect to adapt towards")
        model.vocab.flag_id(dialect)
    elif dialect is not None and model.meta.dialect not in (None, dialect):
        raise EvalError(
            f"model is specialized for {model.meta.dialect!r}, cannot adapt towards {dialect!r}"
        )
    out: list[str] = []
    for chunk in chunk_sentence(words):
        seq = encode(chunk.words)
        if model.meta.mode == "flagged":
            seq = add_flag(seq, dialect)
        predicted_tokens = model.predict_tokens(list(seq), beam_size=beam_size)
        predicted_words = words_from_tokens(predicted_tokens)
        out.extend(fit_to_source(predicted_words, chunk.words))
    return out


def evaluate_model(
    model: Seq2SeqModel,
    examples: list[ParallelExample],
    beam_size: int = 1,
    adapt_fn=None,
) -> WerReport:
    """Score a model on sentence pairs; `adapt_fn` can stand in for it.

    `adapt_fn` takes a ParallelExample and returns hypothesis words, which
    keeps the scoring path testable against known-perfect and known-broken
    adapters.
    """
    if not examples:
        raise EvalError("no examples to evaluate on")
    report = WerReport()
    for ex in examples:
        if adapt_fn is not None:
            hyp = adapt_fn(ex)
        else:
            dialect = ex.dialect_id if model.meta.mode == "flagged" else None
            hyp = adapt_sentence(model, ex.source_words, dialect=dialect, beam_size=beam_size)
        report.add(ex.target_words, hyp)
    return report


def distance_from_standard(examples: list[ParallelExample]) -> WerReport:
    """How far the dialect side sits from the standard side, as WER.

    The dialect rendering is the reference and the standard text the
    hypothesis: the rate is the editing effort to reach the dialect.
    """
    report = WerReport()
    for ex in examples:
        report.add(ex.target_words, ex.source_words)
    return report


def group_by_dialect(examples: list[ParallelExample]) -> dict[str, list[ParallelExample]]:
    groups: dict[str, list[ParallelExample]] = {}
    for ex in examples:
        groups.setdefault(ex.dialect_id, []).append(ex)
    return {dialect: groups[dialect] for dialect in sorted(groups)}


def wer_matrix(
    models: dict[str, Seq2SeqModel],
    examples: list[ParallelExample],
    beam_size: int = 1,
) -> dict[str, dict[str, float]]:
    """Macro WER of every model on every dialect's sentences."""
    groups = group_by_dialect(examples)
    if not groups:
        raise EvalError("no examples to evaluate on")
    matrix: dict[str, dict[str, float]] = {}
    for name, model in models.items():
        row = {}
        for dialect, group in groups.items():
            row[dialect] = evaluate_model(model, group, beam_size=beam_size).macro_wer
        matrix[name] = row
    return matrix
