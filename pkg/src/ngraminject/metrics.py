"""Character error rate via Levenshtein edit distance."""

from __future__ import annotations


def levenshtein(a: str, b: str) -> int:
    """Unit-cost edit distance between two strings (iterative DP)."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def cer(reference: str, hypothesis: str) -> float:
    """Edit distance divided by reference length."""
    if not reference:
        raise ValueError("reference string must be non-empty")
    return levenshtein(reference, hypothesis) / len(reference)


def corpus_cer(references: list[str], hypotheses: list[str]) -> float:
    """Pooled error rate: total edit distance over total reference length."""
    if len(references) != len(hypotheses):
        raise ValueError("reference/hypothesis count mismatch")
    if not references or any(not r for r in references):
        raise ValueError("references must be non-empty")
    dist = sum(levenshtein(r, h) for r, h in zip(references, hypotheses))
    return dist / sum(len(r) for r in references)
