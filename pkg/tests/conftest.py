import numpy as np
import pytest

from ngraminject.charset import Corpus, build_charset


@pytest.fixture
def ab_corpus():
    return Corpus(("ab",))


@pytest.fixture
def ab_charset(ab_corpus):
    return build_charset(ab_corpus)


def random_corpus(rng: np.random.Generator, max_chars: int = 200, max_symbols: int = 9) -> Corpus:
    """Small random corpus over a random alphabet subset (for oracle tests)."""
    n_symbols = int(rng.integers(2, max_symbols + 1))
    alphabet = [chr(ord("a") + i) for i in range(n_symbols)]
    words = []
    budget = int(rng.integers(20, max_chars + 1))
    used = 0
    while used < budget:
        length = int(rng.integers(1, 9))
        word = "".join(alphabet[rng.integers(n_symbols)] for _ in range(length))
        words.append(word)
        used += length + 1
    return Corpus(tuple(words))
