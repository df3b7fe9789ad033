"""Raw n-gram occurrence counting over boundary-padded words.

Each word contributes the padded sequence ``SOS w1 .. wL EOS``.  An m-gram is
counted whenever its last symbol is a predicted token (any position after the
single SOS), so unigram counts cover exactly the predictable tokens while
higher orders may begin at SOS.  Contexts never cross word boundaries.
"""

from __future__ import annotations

from .charset import EOS, SOS, Corpus

Gram = tuple[str, ...]


class CountTable:
    """Per-order occurrence counts plus per-context successor sets.

    ``grams[m]`` maps each m-symbol sequence to its count.  ``successors[m]``
    maps each length-m context to the set of symbols observed after it.
    """

    def __init__(self, order: int):
        if order < 1:
            raise ValueError(f"n-gram order must be >= 1, got {order}")
        self.order = order
        self.grams: list[dict[Gram, int]] = [dict() for _ in range(order + 1)]
        self.successors: list[dict[Gram, set[str]]] = [dict() for _ in range(order)]

    def add(self, gram: Gram) -> None:
        m = len(gram)
        table = self.grams[m]
        table[gram] = table.get(gram, 0) + 1
        ctx, w = gram[:-1], gram[-1]
        self.successors[len(ctx)].setdefault(ctx, set()).add(w)

    def context_total(self, ctx: Gram) -> int:
        """Summed count of all continuations of ``ctx``."""
        m = len(ctx) + 1
        return sum(self.grams[m][ctx + (w,)] for w in self.successors[len(ctx)][ctx])

    def contexts(self, length: int) -> list[Gram]:
        return list(self.successors[length].keys())


def count_ngrams(corpus: Corpus, n: int) -> CountTable:
    """Count all m-grams, m = 1..n, over the padded words of ``corpus``."""
    table = CountTable(n)
    for word in corpus.words:
        padded = (SOS,) + tuple(word) + (EOS,)
        for end in range(1, len(padded)):
            for m in range(1, n + 1):
                start = end - m + 1
                if start < 0:
                    break
                table.add(padded[start : end + 1])
    return table
