"""Character alphabets and word-list corpora.

A :class:`Charset` fixes the index space shared by every component of the
pipeline: the alphabet characters in code-point order, an end-of-sequence
marker as the last predictable index, and a start-of-sequence marker that may
appear in contexts but is never predicted.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Union

SOS = "<s>"
EOS = "</s>"


class CorpusError(ValueError):
    """Raised for malformed corpora or out-of-alphabet symbols."""


@dataclass(frozen=True)
class Charset:
    """Ordered alphabet plus sequence-boundary markers.

    ``symbols`` are the plain characters.  Predictable indices run from 0 to
    K-1 where the first K-1 are the alphabet characters and index K-1 is
    ``EOS``.  ``SOS`` gets index K; it is valid in contexts only.
    """

    symbols: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.symbols:
            raise CorpusError("charset needs at least one symbol")
        if len(set(self.symbols)) != len(self.symbols):
            raise CorpusError("charset symbols must be unique")
        for s in self.symbols:
            if len(s) != 1:
                raise CorpusError(f"charset symbol {s!r} is not a single character")
            if s.isspace():
                raise CorpusError("whitespace characters cannot be alphabet symbols")
        lookup = {s: i for i, s in enumerate(self.symbols)}
        lookup[EOS] = len(self.symbols)
        lookup[SOS] = len(self.symbols) + 1
        object.__setattr__(self, "_lookup", lookup)

    @property
    def K(self) -> int:
        """Number of predictable symbols (alphabet plus EOS)."""
        return len(self.symbols) + 1

    @property
    def predictables(self) -> tuple[str, ...]:
        return self.symbols + (EOS,)

    @property
    def sos_index(self) -> int:
        return self.K

    @property
    def eos_index(self) -> int:
        return self.K - 1

    def index(self, symbol: str) -> int:
        try:
            return self._lookup[symbol]
        except KeyError:
            raise CorpusError(f"symbol {symbol!r} not in charset") from None

    def symbol(self, index: int) -> str:
        if 0 <= index < self.K - 1:
            return self.symbols[index]
        if index == self.K - 1:
            return EOS
        if index == self.K:
            return SOS
        raise CorpusError(f"symbol index {index} out of range")

    def __contains__(self, symbol: str) -> bool:
        return symbol in self._lookup

    def word_indices(self, word: str) -> list[int]:
        """Indices of a word's characters; raises on unknown characters."""
        return [self.index(c) for c in word]


@dataclass(frozen=True)
class Corpus:
    """A list of word samples, one word per line on disk."""

    words: tuple[str, ...]

    def __post_init__(self) -> None:
        for w in self.words:
            if not w:
                raise CorpusError("corpus words must be non-empty")
            if any(c.isspace() for c in w):
                raise CorpusError(f"word {w!r} contains whitespace")
            if SOS in w or EOS in w:
                raise CorpusError(f"word {w!r} contains a reserved boundary marker")

    def __len__(self) -> int:
        return len(self.words)

    @property
    def token_count(self) -> int:
        """Total predictable tokens: every character plus one EOS per word."""
        return sum(len(w) + 1 for w in self.words)

    def subset(self, indices: Iterable[int]) -> "Corpus":
        return Corpus(tuple(self.words[i] for i in indices))

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "Corpus":
        text = Path(path).read_text(encoding="utf-8")
        words = tuple(line for line in text.split("\n") if line != "")
        return cls(words)

    def to_file(self, path: Union[str, Path]) -> None:
        Path(path).write_text("".join(w + "\n" for w in self.words), encoding="utf-8")


def build_charset(corpus: Corpus) -> Charset:
    """Collect the distinct characters of a corpus, sorted by code point."""
    if not corpus.words:
        raise CorpusError("cannot build a charset from an empty corpus")
    chars = sorted({c for w in corpus.words for c in w})
    return Charset(tuple(chars))
