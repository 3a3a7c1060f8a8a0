"""Symbol vocabulary shared by encoder and decoder.

Symbols are single characters plus a handful of multi-character atoms: the
four bookkeeping tokens, the word boundary, and one flag token per dialect.
Ids are stable by construction: bookkeeping tokens first at fixed positions,
then flags sorted, then characters sorted by codepoint.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ReservedSymbolError, UnknownDialectError, VocabularyError
from .textcodec import BOUNDARY, EncodedSequence

PAD = "<pad>"
BOS = "<s>"
EOS = "</s>"
UNK = "<unk>"

PAD_ID = 0
BOS_ID = 1
EOS_ID = 2
UNK_ID = 3
BOUNDARY_ID = 4

SPECIALS = (PAD, BOS, EOS, UNK, BOUNDARY)


@dataclass(frozen=True)
class Vocabulary:
    """Immutable symbol table; equal tables assign equal ids."""

    symbols: tuple[str, ...]
    flags: tuple[str, ...] = ()
    index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if tuple(self.symbols[: len(SPECIALS)]) != SPECIALS:
            raise VocabularyError(f"symbol table must start with {SPECIALS!r}")
        index = {}
        for i, sym in enumerate(self.symbols):
            if sym in index:
                raise VocabularyError(f"duplicate symbol {sym!r}")
            index[sym] = i
        for flag in self.flags:
            if flag not in index:
                raise VocabularyError(f"flag {flag!r} missing from symbol table")
            if len(flag) < 2:
                raise ReservedSymbolError(f"dialect flag {flag!r} shorter than 2 characters")
        object.__setattr__(self, "index", index)

    @classmethod
    def build(cls, chars, flags=()) -> "Vocabulary":
        """Assemble the table from a character inventory and dialect flags."""
        flag_list = sorted(set(flags))
        for flag in flag_list:
            if len(flag) < 2:
                raise ReservedSymbolError(
                    f"dialect id {flag!r} is too short to act as a flag token; use 2+ characters"
                )
            if flag in SPECIALS:
                raise ReservedSymbolError(f"dialect id {flag!r} collides with a reserved token")
            if any(ch.isspace() for ch in flag):
                raise ReservedSymbolError(f"dialect id {flag!r} contains whitespace")
        char_list = sorted(set(chars))
        for ch in char_list:
            if len(ch) != 1:
                raise VocabularyError(f"character entry {ch!r} is not a single character")
            if ch == BOUNDARY:
                raise ReservedSymbolError(f"{BOUNDARY!r} is reserved for word boundaries")
            if ch.isspace():
                raise ReservedSymbolError(f"whitespace character {ch!r} cannot be a symbol")
        return cls(symbols=SPECIALS + tuple(flag_list) + tuple(char_list), flags=tuple(flag_list))

    @classmethod
    def from_corpus(cls, examples, flags=()) -> "Vocabulary":
        chars: set[str] = set()
        for ex in examples:
            for word in (*ex.source_words, *ex.target_words):
                chars.update(word)
        return cls.build(chars, flags)

    def __len__(self) -> int:
        return len(self.symbols)

    def __contains__(self, symbol: str) -> bool:
        return symbol in self.index

    def id(self, symbol: str) -> int:
        try:
            return self.index[symbol]
        except KeyError:
            raise VocabularyError(f"symbol {symbol!r} not in vocabulary") from None

    def symbol(self, symbol_id: int) -> str:
        if not 0 <= symbol_id < len(self.symbols):
            raise VocabularyError(f"symbol id {symbol_id} out of range 0..{len(self.symbols) - 1}")
        return self.symbols[symbol_id]

    def flag_id(self, dialect_id: str) -> int:
        if dialect_id not in self.flags:
            raise UnknownDialectError(
                f"dialect {dialect_id!r} has no flag in this vocabulary (known: {list(self.flags)})"
            )
        return self.index[dialect_id]

    def is_flag(self, symbol: str) -> bool:
        return symbol in self.flags

    def ids(self, tokens) -> list[int]:
        """Map tokens to ids, unknown symbols to the UNK id."""
        if isinstance(tokens, EncodedSequence):
            tokens = tokens.tokens
        return [self.index.get(tok, UNK_ID) for tok in tokens]

    def tokens(self, ids) -> list[str]:
        return [self.symbol(i) for i in ids]

    def to_dict(self) -> dict:
        return {"symbols": list(self.symbols), "flags": list(self.flags)}

    @classmethod
    def from_dict(cls, data: dict) -> "Vocabulary":
        return cls(symbols=tuple(data["symbols"]), flags=tuple(data["flags"]))
