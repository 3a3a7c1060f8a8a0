"""Synthetic dialects built from ordered character rewrite rules.

A rule rewrites a literal substring inside a word, optionally restricted by
left and right contexts.  Contexts are sequences of literal characters,
character classes like [ae] and the word-boundary anchor '#'.  Rules in a
set apply in order; each rule makes a single left-to-right pass and checks
its contexts against the word as it was before that rule, so a rule never
feeds itself.

The text format, one rule per line:

    n / _ #  -> m        // word-final n becomes m
    d        -> r        // every d becomes r
    aa       -> ua       // long a diphthongizes
    t / [aeiouyäö] _ #  -> ∅   // final t after a vowel is dropped

'∅' (or nothing) on the right-hand side means deletion.  '//' starts a
comment.  Whitespace inside patterns is ignored.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import ParallelExample
from .errors import IndistinguishableDialectsError, RuleError

ARROW_FORMS = ("->", "→")
EMPTY_MARK = "∅"
END_PUNCTUATION = (".", "?", "!")

_ANCHOR = object()


def _parse_pattern(text: str, side: str) -> tuple:
    """Compile a context string into a tuple of character sets and anchors."""
    elems: list = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "#":
            elems.append(_ANCHOR)
            i += 1
        elif ch == "[":
            end = text.find("]", i)
            if end < 0:
                raise RuleError(f"unterminated character class in {text!r}")
            chars = text[i + 1 : end]
            if not chars:
                raise RuleError(f"empty character class in {text!r}")
            if "#" in chars or "[" in chars:
                raise RuleError(f"reserved symbol inside character class in {text!r}")
            elems.append(frozenset(chars))
            i = end + 1
        elif ch == "]":
            raise RuleError(f"unmatched ']' in {text!r}")
        else:
            elems.append(frozenset(ch))
            i += 1
    for pos, elem in enumerate(elems):
        if elem is _ANCHOR:
            edge = 0 if side == "left" else len(elems) - 1
            if pos != edge:
                raise RuleError(f"'#' must sit at the outer edge of the {side} context: {text!r}")
    return tuple(elems)


def _check_literal(text: str, role: str) -> str:
    if role == "target" and not text:
        raise RuleError("empty rule target")
    for ch in text:
        if ch in "#[]_" or ch.isspace():
            raise RuleError(f"{role} {text!r} contains reserved symbol {ch!r}")
    return text


@dataclass(frozen=True)
class RewriteRule:
    """One ordered rewrite step: target -> replacement / left _ right."""

    target: str
    replacement: str
    left: str = ""
    right: str = ""

    def __post_init__(self):
        _check_literal(self.target, "target")
        if self.replacement:
            _check_literal(self.replacement, "replacement")
        object.__setattr__(self, "_left", _parse_pattern(self.left, "left"))
        object.__setattr__(self, "_right", _parse_pattern(self.right, "right"))

    def _matches_left(self, word: str, i: int) -> bool:
        j = i
        for elem in reversed(self._left):
            if elem is _ANCHOR:
                return j == 0
            if j == 0 or word[j - 1] not in elem:
                return False
            j -= 1
        return True

    def _matches_right(self, word: str, i: int) -> bool:
        j = i
        for elem in self._right:
            if elem is _ANCHOR:
                return j == len(word)
            if j == len(word) or word[j] not in elem:
                return False
            j += 1
        return True

    def apply(self, word: str) -> str:
        """Rewrite every non-overlapping match in one left-to-right pass."""
        out: list[str] = []
        i = 0
        while i < len(word):
            if (
                word.startswith(self.target, i)
                and self._matches_left(word, i)
                and self._matches_right(word, i + len(self.target))
            ):
                out.append(self.replacement)
                i += len(self.target)
            else:
                out.append(word[i])
                i += 1
        return "".join(out)

    def as_text(self) -> str:
        rhs = self.replacement if self.replacement else EMPTY_MARK
        if self.left or self.right:
            return f"{self.target} / {self.left} _ {self.right} -> {rhs}"
        return f"{self.target} -> {rhs}"


def parse_rule(line: str) -> RewriteRule:
    text = line.split("//", 1)[0].strip()
    arrow_at = -1
    arrow = ""
    for form in ARROW_FORMS:
        pos = text.find(form)
        if pos >= 0 and (arrow_at < 0 or pos < arrow_at):
            arrow_at, arrow = pos, form
    if arrow_at < 0:
        raise RuleError(f"missing '->' in rule {line!r}")
    lhs, rhs = text[:arrow_at], text[arrow_at + len(arrow) :]
    replacement = rhs.strip()
    if replacement == EMPTY_MARK:
        replacement = ""
    if "/" in lhs:
        target_part, context_part = lhs.split("/", 1)
        context = "".join(context_part.split())
        if context.count("_") != 1:
            raise RuleError(f"context must contain exactly one '_': {line!r}")
        left, right = context.split("_")
    else:
        target_part, left, right = lhs, "", ""
    return RewriteRule(
        target="".join(target_part.split()),
        replacement=replacement,
        left=left,
        right=right,
    )


def parse_rules(text: str) -> list[RewriteRule]:
    rules: list[RewriteRule] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.split("//", 1)[0].strip()
        if not stripped:
            continue
        try:
            rules.append(parse_rule(stripped))
        except RuleError as err:
            raise RuleError(f"line {lineno}: {err}") from None
    return rules


def load_rules(path: str | Path) -> list[RewriteRule]:
    return parse_rules(Path(path).read_text(encoding="utf-8"))


def rules_to_text(rules: list[RewriteRule]) -> str:
    return "".join(rule.as_text() + "\n" for rule in rules)


def apply_rules(word: str, rules) -> str:
    """Run an ordered rule sequence over one word, each rule a full pass."""
    for rule in rules:
        word = rule.apply(word)
    return word


@dataclass(frozen=True)
class SyntheticDialect:
    """A named dialect defined entirely by its rewrite rules."""

    dialect_id: str
    rules: tuple[RewriteRule, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "rules", tuple(self.rules))
        if len(self.dialect_id) < 2 or any(ch.isspace() for ch in self.dialect_id):
            raise RuleError(f"bad dialect id {self.dialect_id!r}")

    def word(self, word: str) -> str:
        return apply_rules(word, self.rules)

    def words(self, words: list[str]) -> list[str]:
        out = [self.word(w) for w in words]
        for before, after in zip(words, out):
            if not after:
                raise RuleError(f"rules erase the word {before!r} entirely")
        return out


def _pack(*lines: str) -> tuple[RewriteRule, ...]:
    return tuple(parse_rule(line) for line in lines)


def builtin_rule_packs() -> dict[str, tuple[RewriteRule, ...]]:
    """Small reusable phenomena for composing synthetic dialects."""
    vowels = "aeiouyäö"
    return {
        "drop-final-n": _pack("n / _ # -> ∅"),
        "final-n-to-m": _pack("n / _ # -> m"),
        "final-n-to-r": _pack("n / _ # -> r"),
        "d-to-r": _pack("d -> r"),
        "d-to-t": _pack("d -> t"),
        "d-to-j": _pack("d -> j"),
        "shorten-long-vowels": _pack(*(f"{v}{v} -> {v}" for v in vowels)),
        "diphthongize-long-vowels": _pack(
            "aa -> ua", "ee -> ie", "oo -> uo", "ää -> iä", "öö -> yö"
        ),
    }


def contrastive_dialects() -> list[SyntheticDialect]:
    """Three dialects whose rules conflict on the same contexts.

    Word-final n, the letter d and long vowels each resolve differently in
    every dialect, so no single unflagged mapping can satisfy all three.
    """
    packs = builtin_rule_packs()
    return [
        SyntheticDialect("north", packs["drop-final-n"] + packs["d-to-r"]),
        SyntheticDialect("east", packs["final-n-to-m"] + packs["d-to-t"] + packs["shorten-long-vowels"]),
        SyntheticDialect("south", packs["final-n-to-r"] + packs["d-to-j"] + packs["diphthongize-long-vowels"]),
    ]


def default_vocabulary() -> list[str]:
    """Invented Finnish-flavored words covering every built-in phenomenon.

    Groups: word-final n only, letter d only, long vowel only, several
    combined, and words no built-in rule touches.
    """
    final_n = [
        "talon", "metsän", "kylän", "pojan", "kalan", "sillan", "karhun",
        "linnun", "ikkunan", "veljen", "siskon", "laulun", "rannan", "kesän",
        "talven", "marjan", "sienen", "koiran", "kissan", "hevosen",
    ]
    with_d = [
        "sade", "side", "lähde", "vuode", "madot", "sadut", "padot", "kadut",
        "pidot", "tädit", "radot", "kude", "sodat", "ladot", "vedet", "kedot",
    ]
    long_vowel = [
        "maata", "saari", "teetä", "koossa", "määrä", "vapaat", "aamulla",
        "veneet", "saaret", "yöpuu", "suklaat", "kuoroo", "peeli", "hööki",
    ]
    combined = [
        "saaren", "maiden", "veden", "tiedon", "viedään", "syödään",
        "kaadut", "hiedat", "doomi", "naadin",
    ]
    plain = [
        "talo", "kirja", "metsä", "kylä", "poika", "kala", "silta", "karhu",
        "lintu", "ikkuna", "veli", "sisko", "laulu", "ranta", "kesä", "talvi",
        "marja", "sieni", "koira", "kissa", "tuli", "vesi", "lumi", "järvi",
        "mäki", "polku", "ovi", "katu", "tie", "yö", "suo", "salo", "vuori",
        "meri", "joki", "pelto", "niitty", "aita", "portti", "piha",
    ]
    return final_n + with_d + long_vowel + combined + plain


def distinguishable(a: SyntheticDialect, b: SyntheticDialect, vocabulary: list[str]) -> bool:
    return any(a.word(w) != b.word(w) for w in vocabulary)


def generate_corpus(
    dialects: list[SyntheticDialect],
    n_sentences: int,
    seed: int = 0,
    vocabulary: list[str] | None = None,
    length_range: tuple[int, int] = (3, 9),
) -> list[ParallelExample]:
    """Sample standard sentences and dialectize them, round-robin per dialect.

    Every sentence ends with a punctuation word, which counts as a word like
    any other.  Dialect pairs that agree on the whole vocabulary are rejected
    up front; such a corpus could never justify a dialect flag.
    """
    if not dialects:
        raise RuleError("no dialects given")
    if n_sentences < 1:
        raise RuleError(f"n_sentences must be positive, got {n_sentences}")
    vocabulary = list(vocabulary) if vocabulary is not None else default_vocabulary()
    if not vocabulary:
        raise RuleError("empty vocabulary")
    seen: dict[str, SyntheticDialect] = {}
    for dialect in dialects:
        if dialect.dialect_id in seen:
            raise RuleError(f"duplicate dialect id {dialect.dialect_id!r}")
        seen[dialect.dialect_id] = dialect
    for i, a in enumerate(dialects):
        for b in dialects[i + 1 :]:
            if not distinguishable(a, b, vocabulary):
                raise IndistinguishableDialectsError(
                    f"dialects {a.dialect_id!r} and {b.dialect_id!r} agree on every vocabulary word"
                )

    rng = random.Random(seed)
    lo, hi = length_range
    if lo < 1 or hi < lo:
        raise RuleError(f"bad length range {length_range!r}")
    examples: list[ParallelExample] = []
    for i in range(n_sentences):
        dialect = dialects[i % len(dialects)]
        words = rng.choices(vocabulary, k=rng.randint(lo, hi))
        words.append(rng.choice(END_PUNCTUATION))
        examples.append(ParallelExample(dialect.dialect_id, words, dialect.words(words)))
    return examples
