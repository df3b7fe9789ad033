"""Interpolated Witten-Bell estimation in back-off form.

The conditional probability of symbol w after context h is estimated
recursively:

    P(w|h) = (c(hw) + N(h) * P(w|h'))  /  (c(h.) + N(h))

where c(hw) is the occurrence count, c(h.) the context total, N(h) the number
of distinct successors of h, and h' drops the oldest context symbol.  The
recursion bottoms out at unigrams interpolated with the uniform distribution
1/K, so every predictable symbol keeps nonzero probability.

Stored in back-off form the model is identical to the interpolated one: each
seen m-gram stores log10 P(w|h), and each context stores the back-off weight
log10( N(h) / (c(h.) + N(h)) ), which is exactly the interpolation weight an
unseen continuation would receive.
"""

from __future__ import annotations

import math

from .charset import SOS, Charset, CorpusError
from .counting import CountTable, Gram
from .ngram import Entry, NgramModel

# Dummy log10 probability for the start marker's unigram slot; it is never a
# valid prediction, the entry only carries the context's back-off weight.
SOS_LOGP = -99.0


def estimate_wb(counts: CountTable, charset: Charset) -> NgramModel:
    """Estimate a back-off model from counts using Witten-Bell interpolation.

    The charset may be wider than the counted corpus; unseen alphabet symbols
    receive their uniform-interpolation share at the unigram level.
    """
    n = counts.order
    for gram in counts.grams[1]:
        sym = gram[0]
        if sym != SOS and sym not in charset:
            raise CorpusError(f"counted symbol {sym!r} not in charset")

    # Linear-space interpolated probabilities, order by order.
    probs: list[dict[Gram, float]] = [dict() for _ in range(n + 1)]
    uni = counts.grams[1]
    total = sum(uni.values())
    if total == 0:
        raise CorpusError("cannot estimate a model from empty counts")
    n1p_root = len(uni)
    k = charset.K
    for w in charset.predictables:
        c = uni.get((w,), 0)
        probs[1][(w,)] = (c + n1p_root * (1.0 / k)) / (total + n1p_root)

    for m in range(2, n + 1):
        for ctx in counts.contexts(m - 1):
            succ = counts.successors[m - 1][ctx]
            ctotal = counts.context_total(ctx)
            n1p = len(succ)
            for w in succ:
                c = counts.grams[m][ctx + (w,)]
                lower = probs[m - 1][ctx[1:] + (w,)]
                probs[m][ctx + (w,)] = (c + n1p * lower) / (ctotal + n1p)

    # Back-off weights for every context that has higher-order extensions.
    bows: list[dict[Gram, float]] = [dict() for _ in range(n)]
    for m in range(1, n):
        for ctx in counts.contexts(m):
            succ = counts.successors[m][ctx]
            ctotal = counts.context_total(ctx)
            bows[m][ctx] = math.log10(len(succ) / (ctotal + len(succ)))

    tables: list[dict[Gram, Entry]] = [dict() for _ in range(n + 1)]
    for m in range(1, n + 1):
        for gram, p in probs[m].items():
            bow = bows[m].get(gram) if m < n else None
            tables[m][gram] = (math.log10(p), bow)
        if m < n:
            # Contexts without a probability of their own: only the bare SOS.
            for ctx, bow in bows[m].items():
                if ctx not in probs[m]:
                    tables[m][ctx] = (SOS_LOGP, bow)
    return NgramModel(n, charset, tables)
