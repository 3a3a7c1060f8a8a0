"""Loading, cleaning and splitting of word-aligned parallel dialect corpora.

The on-disk corpus format is UTF-8 TSV, one sentence pair per line:

    dialect<TAB>standard sentence<TAB>dialect sentence

Both sentences are whitespace-tokenized and must contain the same number of
words; punctuation tokens count as words.  Transcription annotations that are
not part of normal writing (stress accents, superscripts, combining marks)
are stripped with a user-supplied CleaningMap before any other processing.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from pathlib import Path

from .errors import CleaningMapError, CorpusError, MalformedRecordError, SplitError
from .textcodec import BOUNDARY

DEFAULT_RATIOS = (0.70, 0.15, 0.15)


@dataclass
class ParallelExample:
    """One sentence pair: a dialect label and word-aligned token lists."""

    dialect_id: str
    source_words: list[str]
    target_words: list[str]

    def __post_init__(self):
        if not self.dialect_id:
            raise MalformedRecordError("empty dialect id")
        if any(ch.isspace() for ch in self.dialect_id):
            raise MalformedRecordError(f"dialect id {self.dialect_id!r} contains whitespace")
        if len(self.source_words) != len(self.target_words):
            raise MalformedRecordError(
                f"alignment mismatch: {len(self.source_words)} source words vs "
                f"{len(self.target_words)} target words"
            )
        if not self.source_words:
            raise MalformedRecordError("empty sentence pair")
        for word in (*self.source_words, *self.target_words):
            if not word:
                raise MalformedRecordError("empty word")
            if BOUNDARY in word or any(ch.isspace() for ch in word):
                raise MalformedRecordError(f"word {word!r} contains a reserved symbol")


@dataclass(frozen=True)
class CleaningMap:
    """Characters to delete and annotated characters to replace.

    The two domains are disjoint, nothing maps to itself and no replacement
    value is itself mapped, so applying the map twice equals applying it once.
    """

    delete_chars: frozenset[str] = frozenset()
    replace_chars: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        for ch in self.delete_chars:
            if len(ch) != 1:
                raise CleaningMapError(f"delete entry {ch!r} is not a single character")
        for key, val in self.replace_chars.items():
            if len(key) != 1 or len(val) != 1:
                raise CleaningMapError(f"replace entry {key!r} -> {val!r} is not single characters")
            if key == val:
                raise CleaningMapError(f"character {key!r} maps to itself")
            if val.isspace():
                raise CleaningMapError(f"replacement {val!r} is whitespace")
        overlap = self.delete_chars & set(self.replace_chars)
        if overlap:
            raise CleaningMapError(f"characters both deleted and replaced: {sorted(overlap)!r}")
        for key, val in self.replace_chars.items():
            if val in self.delete_chars or val in self.replace_chars:
                raise CleaningMapError(
                    f"replacement {val!r} (for {key!r}) is itself mapped; cleaning would not be idempotent"
                )
        table = {ord(ch): None for ch in self.delete_chars}
        table.update({ord(k): v for k, v in self.replace_chars.items()})
        object.__setattr__(self, "_table", table)

    @classmethod
    def from_file(cls, path: str | Path) -> "CleaningMap":
        """Parse a two-column map file.

        Each line holds a character (or a U+XXXX codepoint) and, after a tab,
        its replacement; an empty second column means delete.  Lines starting
        with '#' are comments (map '#' itself via U+0023).
        """
        delete: set[str] = set()
        replace: dict[str, str] = {}
        for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) not in (1, 2):
                raise CleaningMapError(f"{path}: line {lineno}: expected 1 or 2 tab-separated columns")
            key = _parse_map_char(parts[0].strip(), path, lineno)
            val = parts[1].strip() if len(parts) == 2 else ""
            if not val:
                delete.add(key)
            else:
                replace[key] = _parse_map_char(val, path, lineno)
        return cls(delete_chars=frozenset(delete), replace_chars=replace)

    def apply(self, text: str) -> str:
        return text.translate(self._table)


def _parse_map_char(token: str, path, lineno: int) -> str:
    if token.upper().startswith("U+"):
        try:
            return chr(int(token[2:], 16))
        except ValueError:
            raise CleaningMapError(f"{path}: line {lineno}: bad codepoint {token!r}") from None
    if len(token) != 1:
        raise CleaningMapError(f"{path}: line {lineno}: {token!r} is not a single character")
    return token


def clean_text(text: str, cmap: CleaningMap) -> str:
    """Remove deleted characters and substitute annotated ones; total function."""
    return cmap.apply(text)


def load_corpus(
    path: str | Path,
    format: str = "tsv",
    dialects: set[str] | None = None,
) -> list[ParallelExample]:
    """Read a parallel corpus file, validating every record.

    A record that cannot be parsed or whose sides disagree in word count is
    rejected with its line number.  `dialects`, when given, restricts labels
    to a declared set (see `load_dialect_manifest`).
    """
    if format != "tsv":
        raise CorpusError(f"unknown corpus format {format!r}")
    path = Path(path)
    examples: list[ParallelExample] = []
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not raw.strip():
            continue
        parts = raw.split("\t")
        if len(parts) != 3:
            raise MalformedRecordError(f"expected 3 tab-separated fields, got {len(parts)}", line=lineno)
        dialect, source, target = (p.strip() for p in parts)
        source_words = source.split()
        target_words = target.split()
        try:
            example = ParallelExample(dialect, source_words, target_words)
        except MalformedRecordError as err:
            raise MalformedRecordError(str(err), line=lineno) from None
        if dialects is not None and example.dialect_id not in dialects:
            raise MalformedRecordError(f"undeclared dialect {example.dialect_id!r}", line=lineno)
        examples.append(example)
    return examples


def save_corpus(examples: list[ParallelExample], path: str | Path) -> None:
    lines = [
        f"{ex.dialect_id}\t{' '.join(ex.source_words)}\t{' '.join(ex.target_words)}"
        for ex in examples
    ]
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def load_dialect_manifest(path: str | Path) -> list[str]:
    """One dialect id per line; '#' comments and blank lines skipped."""
    ids: list[str] = []
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if line and not line.startswith("#"):
            ids.append(line)
    return ids


@dataclass
class CorpusSplit:
    """Disjoint train/valid/test partition of a corpus."""

    train: list[ParallelExample]
    valid: list[ParallelExample]
    test: list[ParallelExample]
    seed: int
    ratios: tuple[float, float, float]

    @property
    def parts(self) -> dict[str, list[ParallelExample]]:
        return {"train": self.train, "valid": self.valid, "test": self.test}


def split_sizes(n: int, ratios: tuple[float, float, float] = DEFAULT_RATIOS) -> tuple[int, int, int]:
    """Floor rule: floor for train and valid, remainder to test."""
    n_train = int(n * ratios[0])
    n_valid = int(n * ratios[1])
    return n_train, n_valid, n - n_train - n_valid


def stratified_split(
    examples: list[ParallelExample],
    ratios: tuple[float, float, float] = DEFAULT_RATIOS,
    seed: int = 0,
) -> CorpusSplit:
    """Shuffle and split each dialect separately so all splits stay proportional.

    Per dialect with n sentences the sizes are floor(r_train*n),
    floor(r_valid*n) and the remainder.  The shuffle is seeded per dialect,
    so the membership of every split is a pure function of (examples, seed).
    """
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise SplitError(f"ratios {ratios} do not sum to 1")
    if any(r < 0 for r in ratios):
        raise SplitError(f"negative ratio in {ratios}")
    by_dialect: dict[str, list[ParallelExample]] = {}
    for ex in examples:
        by_dialect.setdefault(ex.dialect_id, []).append(ex)
    for dialect, group in by_dialect.items():
        if len(group) < 3:
            raise SplitError(f"dialect {dialect!r} has only {len(group)} examples; need at least 3")

    split = CorpusSplit(train=[], valid=[], test=[], seed=seed, ratios=tuple(ratios))
    for dialect in sorted(by_dialect):
        group = list(by_dialect[dialect])
        random.Random(f"{seed}:{dialect}").shuffle(group)
        n_train, n_valid, _ = split_sizes(len(group), ratios)
        split.train.extend(group[:n_train])
        split.valid.extend(group[n_train : n_train + n_valid])
        split.test.extend(group[n_train + n_valid :])
    return split
