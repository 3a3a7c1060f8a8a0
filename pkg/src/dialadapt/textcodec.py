"""Conversions between word sequences and the character-level model representation.

Words are spelled out one character per token, with the reserved boundary
symbol "_" between adjacent words.  A multi-dialect source sequence may carry
one dialect flag, a single atomic token at position 0.  Sentences are fed to
the model in chunks of up to three words; model output is truncated back to
the source chunk's word count.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .errors import CodecError, ReservedSymbolError

logger = logging.getLogger(__name__)

BOUNDARY = "_"

# Default chunk width for training and inference.
CHUNK_SIZE = 3


@dataclass
class EncodedSequence:
    """A flat token sequence: single characters, boundaries, at most one flag.

    The constructor does not validate; `encode` and `add_flag` only produce
    well-formed sequences, while model output may be arbitrary and is
    interpreted leniently by `words_from_tokens`.
    """

    tokens: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)

    def has_flag(self) -> bool:
        return bool(self.tokens) and is_flag_token(self.tokens[0])

    def as_text(self) -> str:
        """Space-joined token string, the on-disk training data form."""
        return " ".join(self.tokens)


@dataclass
class Chunk:
    """Up to `CHUNK_SIZE` consecutive words of one sentence."""

    words: list[str]
    sentence_index: int = 0
    chunk_index: int = 0


def is_flag_token(token: str) -> bool:
    """Dialect flags are the only multi-character tokens in a sequence."""
    return len(token) > 1


def _check_word(word: str) -> None:
    if not word:
        raise CodecError("empty word")
    if BOUNDARY in word:
        raise ReservedSymbolError(f"word {word!r} contains reserved boundary {BOUNDARY!r}")
    if any(ch.isspace() for ch in word):
        raise ReservedSymbolError(f"word {word!r} contains whitespace")


def encode(words: list[str]) -> EncodedSequence:
    """Spell words out character by character with boundaries between them.

    ["minä", "kun", "näin"] becomes
    m i n ä _ k u n _ n ä i n  (one token per listed symbol).
    """
    if not words:
        raise CodecError("cannot encode an empty word list")
    tokens: list[str] = []
    for i, word in enumerate(words):
        _check_word(word)
        if i:
            tokens.append(BOUNDARY)
        tokens.extend(word)
    return EncodedSequence(tokens)


def decode(seq: EncodedSequence) -> list[str]:
    """Exact inverse of `encode`; rejects flags and malformed boundaries."""
    tokens = seq.tokens
    if not tokens:
        raise CodecError("cannot decode an empty sequence")
    if seq.has_flag():
        raise CodecError("sequence carries a dialect flag; strip it before decoding")
    if tokens[0] == BOUNDARY or tokens[-1] == BOUNDARY:
        raise CodecError("boundary symbol at sequence edge")
    words: list[str] = []
    current: list[str] = []
    for tok in tokens:
        if tok == BOUNDARY:
            if not current:
                raise CodecError("adjacent boundary symbols")
            words.append("".join(current))
            current = []
        else:
            if len(tok) != 1:
                raise CodecError(f"unexpected non-character token {tok!r}")
            current.append(tok)
    words.append("".join(current))
    return words


def words_from_tokens(tokens: list[str]) -> list[str]:
    """Lenient word extraction for raw model output.

    Boundaries split words, empty fragments are dropped, and any stray
    multi-character token (specials, flags) is kept verbatim as its own
    word so that garbage output still yields a scorable word list.
    """
    words: list[str] = []
    current: list[str] = []

    def flush():
        if current:
            words.append("".join(current))
            current.clear()

    for tok in tokens:
        if tok == BOUNDARY:
            flush()
        elif len(tok) == 1:
            current.append(tok)
        else:
            flush()
            words.append(tok)
    flush()
    return words


def add_flag(seq: EncodedSequence, dialect_id: str) -> EncodedSequence:
    """Prepend the dialect flag as one atomic token."""
    if seq.has_flag():
        raise CodecError("sequence already carries a dialect flag")
    if len(dialect_id) < 2:
        raise ReservedSymbolError(
            f"dialect id {dialect_id!r} too short to be a flag token; "
            "single characters would collide with the character vocabulary"
        )
    if any(ch.isspace() for ch in dialect_id):
        raise ReservedSymbolError(f"dialect id {dialect_id!r} contains whitespace")
    return EncodedSequence([dialect_id] + list(seq.tokens))


def strip_flag(seq: EncodedSequence) -> EncodedSequence:
    return EncodedSequence(seq.tokens[1:]) if seq.has_flag() else EncodedSequence(list(seq.tokens))


def chunk_sentence(words: list[str], size: int = CHUNK_SIZE, sentence_index: int = 0) -> list[Chunk]:
    """Split a sentence into consecutive non-overlapping chunks of `size` words.

    The last chunk may be shorter.  Concatenating the chunks' words in order
    reproduces the sentence.
    """
    if not words:
        raise CodecError("cannot chunk an empty sentence")
    if size < 1:
        raise CodecError(f"chunk size must be >= 1, got {size}")
    return [
        Chunk(words=list(words[i : i + size]), sentence_index=sentence_index, chunk_index=ci)
        for ci, i in enumerate(range(0, len(words), size))
    ]


def truncate_to_source(predicted_words: list[str], source_word_count: int) -> list[str]:
    """Keep only as many predicted words as the source chunk contained.

    Over-generation ("olev vanha a" for a two-word chunk) is cut; if the
    model under-generated, the shorter list is returned unchanged and the
    event is logged.
    """
    if source_word_count < 1:
        raise CodecError(f"source word count must be >= 1, got {source_word_count}")
    if len(predicted_words) < source_word_count:
        logger.debug(
            "under-generation: %d predicted words for a %d-word chunk (%r)",
            len(predicted_words),
            source_word_count,
            predicted_words,
        )
        return list(predicted_words)
    return list(predicted_words[:source_word_count])
