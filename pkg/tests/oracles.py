"""Independent reference implementations used only by tests.

These deliberately share no code with the package: counting is redone with
plain dictionaries, probabilities come from the direct recursive
interpolation formula in linear space (no serialized form, no back-off
tables), clustering quality is checked against exhaustive enumeration, and
edit distance against the naive recursion.
"""

from __future__ import annotations

import itertools
import math
from typing import Sequence

import numpy as np

SOS = "<s>"
EOS = "</s>"


class WbOracle:
    """Direct recursive interpolated Witten-Bell over a word list."""

    def __init__(self, words: Sequence[str], n: int, symbols: Sequence[str]):
        self.n = n
        self.symbols = list(symbols)
        self.k = len(symbols) + 1  # predictables: symbols + EOS
        self.counts: dict[tuple[str, ...], int] = {}
        for word in words:
            padded = [SOS] + list(word) + [EOS]
            for end in range(1, len(padded)):
                for m in range(1, n + 1):
                    start = end - m + 1
                    if start < 0:
                        break
                    gram = tuple(padded[start : end + 1])
                    self.counts[gram] = self.counts.get(gram, 0) + 1

    def _successors(self, ctx: tuple[str, ...]) -> list[str]:
        m = len(ctx) + 1
        return [
            g[-1] for g in self.counts if len(g) == m and g[:-1] == ctx
        ]

    def prob(self, context: Sequence[str], symbol: str) -> float:
        ctx = tuple(context)
        if self.n == 1:
            ctx = ()
        else:
            ctx = ctx[-(self.n - 1) :]
        return self._prob(ctx, symbol)

    def _prob(self, ctx: tuple[str, ...], symbol: str) -> float:
        if not ctx:
            total = sum(c for g, c in self.counts.items() if len(g) == 1)
            distinct = sum(1 for g in self.counts if len(g) == 1)
            c = self.counts.get((symbol,), 0)
            return (c + distinct * (1.0 / self.k)) / (total + distinct)
        succ = self._successors(ctx)
        if not succ:
            return self._prob(ctx[1:], symbol)
        total = sum(self.counts[ctx + (w,)] for w in succ)
        c = self.counts.get(ctx + (symbol,), 0)
        lower = self._prob(ctx[1:], symbol)
        return (c + len(succ) * lower) / (total + len(succ))

    def log10_prob(self, context: Sequence[str], symbol: str) -> float:
        return math.log10(self.prob(context, symbol))

    def perplexity(self, words: Sequence[str]) -> float:
        total = 0.0
        count = 0
        for word in words:
            padded = [SOS] + list(word) + [EOS]
            for pos in range(1, len(padded)):
                total += self.log10_prob(padded[:pos], padded[pos])
                count += 1
        return 10.0 ** (-total / count)

    def contexts(self) -> list[tuple[str, ...]]:
        """Every context observed in the corpus, all lengths < n, plus ()."""
        out = {()}
        for g in self.counts:
            if len(g) < self.n:
                out.add(g)
        return sorted(out, key=lambda c: (len(c), c))


def recursive_edit_distance(a: str, b: str) -> int:
    if not a:
        return len(b)
    if not b:
        return len(a)
    same = recursive_edit_distance(a[1:], b[1:])
    if a[0] == b[0]:
        return same
    return 1 + min(
        same,
        recursive_edit_distance(a[1:], b),
        recursive_edit_distance(a, b[1:]),
    )


def best_two_partition_sse(points: np.ndarray) -> float:
    """Exhaustive optimum of 2-way clustering SSE (both parts non-empty)."""
    n = len(points)
    best = math.inf
    for bits in range(1, 2 ** (n - 1)):
        mask = np.array([(bits >> i) & 1 for i in range(n)], dtype=bool)
        mask[n - 1] = False  # fix the last point in part 0: halves the search
        if not mask.any():
            continue
        sse = 0.0
        for part in (points[mask], points[~mask]):
            centroid = part.mean(axis=0)
            sse += float(np.sum((part - centroid) ** 2))
        best = min(best, sse)
    return best


def partition_sse(points: np.ndarray, assign: np.ndarray) -> float:
    sse = 0.0
    for c in (0, 1):
        part = points[assign == c]
        if len(part):
            centroid = part.mean(axis=0)
            sse += float(np.sum((part - centroid) ** 2))
    return sse


def central_difference(f, arrays: dict[str, np.ndarray], h: float = 1e-6) -> dict[str, np.ndarray]:
    """Central finite-difference gradient of scalar f over every array entry."""
    grads = {}
    for name, arr in arrays.items():
        g = np.zeros_like(arr)
        flat = arr.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = f()
            flat[i] = orig - h
            down = f()
            flat[i] = orig
            gflat[i] = (up - down) / (2 * h)
        grads[name] = g
    return grads
