"""Back-off n-gram model: log10 probabilities with back-off weights.

The model stores, per order m, a table mapping m-symbol sequences to a log10
probability and an optional log10 back-off weight (absent at the highest
order and for sequences that never act as a context).  Queries follow the
standard back-off recursion: return the stored probability when the full
(context, symbol) sequence is present, otherwise add the context's back-off
weight (0 when absent) and retry with the oldest context symbol dropped.
"""

from __future__ import annotations

import math
import threading
from typing import Iterable, Optional, Sequence

import numpy as np

from .charset import EOS, SOS, Charset, Corpus, CorpusError

Gram = tuple[str, ...]
Entry = tuple[float, Optional[float]]  # (logp, bow), both log10


class ScoreError(ValueError):
    """Raised for queries outside the model's symbol space."""


class NgramModel:
    """Immutable back-off model over a fixed charset.

    ``tables[m]`` maps m-grams to ``(logp, bow)`` entries.  Construction is
    single-threaded; a built model may be queried from many threads (the
    distribution-vector cache is lock-protected).
    """

    def __init__(self, order: int, charset: Charset, tables: Sequence[dict[Gram, Entry]]):
        if order < 1:
            raise ValueError("order must be >= 1")
        if len(tables) != order + 1:
            raise ValueError("tables must have one dict per order 1..n (index 0 unused)")
        self.order = order
        self.charset = charset
        self.tables: tuple[dict[Gram, Entry], ...] = tuple(tables)
        self._dist_cache: dict[Gram, np.ndarray] = {}
        self._cache_lock = threading.Lock()
        self.cache_hits = 0

    def _truncate(self, context: Iterable[str]) -> Gram:
        ctx = tuple(context)
        if self.order == 1:
            return ()
        return ctx[-(self.order - 1) :]

    def score(self, context: Iterable[str], symbol: str) -> float:
        """log10 probability of ``symbol`` following ``context``.

        Contexts longer than n-1 symbols are truncated to the most recent
        n-1.  SOS is never a valid prediction target.
        """
        if symbol == SOS:
            raise ScoreError("the start-of-sequence marker is never predicted")
        if symbol not in self.charset:
            raise ScoreError(f"symbol {symbol!r} not in model charset")
        ctx = self._truncate(context)
        for s in ctx:
            if s not in self.charset:
                raise ScoreError(f"context symbol {s!r} not in model charset")
        return self._score(ctx, symbol)

    def _score(self, ctx: Gram, symbol: str) -> float:
        gram = ctx + (symbol,)
        entry = self.tables[len(gram)].get(gram)
        if entry is not None:
            return entry[0]
        if not ctx:
            raise ScoreError(f"symbol {symbol!r} has no stored probability")
        ctx_entry = self.tables[len(ctx)].get(ctx)
        bow = ctx_entry[1] if ctx_entry is not None and ctx_entry[1] is not None else 0.0
        return bow + self._score(ctx[1:], symbol)

    def dist_vector(self, context: Iterable[str]) -> np.ndarray:
        """Probability distribution over all predictable symbols.

        Entry k is ``10**score(context, symbol_k)`` in charset index order
        (alphabet characters then EOS).  Results are cached per truncated
        context and returned as read-only arrays.
        """
        ctx = self._truncate(context)
        with self._cache_lock:
            cached = self._dist_cache.get(ctx)
            if cached is not None:
                self.cache_hits += 1
                return cached
        for s in ctx:
            if s not in self.charset:
                raise ScoreError(f"context symbol {s!r} not in model charset")
        vec = np.array(
            [10.0 ** self._score(ctx, w) for w in self.charset.predictables],
            dtype=np.float64,
        )
        vec.setflags(write=False)
        with self._cache_lock:
            return self._dist_cache.setdefault(ctx, vec)

    def perplexity(self, corpus: Corpus) -> float:
        """Per-token perplexity of the padded corpus, base 10.

        Every character and one EOS per word is scored against its preceding
        context; the result is ``10 ** (-mean log10 probability)``.
        """
        if not corpus.words:
            raise CorpusError("cannot compute perplexity of an empty corpus")
        total = 0.0
        count = 0
        for word in corpus.words:
            for c in word:
                if c not in self.charset:
                    raise CorpusError(f"symbol {c!r} of word {word!r} not in model charset")
            padded = (SOS,) + tuple(word) + (EOS,)
            for pos in range(1, len(padded)):
                ctx = self._truncate(padded[:pos])
                total += self._score(ctx, padded[pos])
                count += 1
        assert count == corpus.token_count
        return 10.0 ** (-total / count)

    def __getstate__(self) -> dict:
        # The cache and its lock are rebuilt empty after unpickling.
        return {"order": self.order, "charset": self.charset, "tables": self.tables}

    def __setstate__(self, state: dict) -> None:
        self.__init__(state["order"], state["charset"], state["tables"])

    def seen_contexts(self) -> list[Gram]:
        """All stored sequences that carry a back-off weight (plus the empty
        context), i.e. every context reachable from the training corpus."""
        out: list[Gram] = [()]
        for m in range(1, self.order):
            out.extend(g for g, e in self.tables[m].items() if e[1] is not None)
        return out


def uniform_model(charset: Charset) -> NgramModel:
    """Order-1 model assigning probability 1/K to every predictable symbol."""
    logp = math.log10(1.0 / charset.K)
    table = {(w,): (logp, None) for w in charset.predictables}
    return NgramModel(1, charset, [dict(), table])
