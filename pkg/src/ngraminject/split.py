"""Perplexity-controlled source/target splits of a word corpus.

Both strategies operate on word *types* first so the source and target pools
can be kept type-disjoint, then distribute each pool's samples over the five
experiment roles: source train/val/test and target lm-estimation ("ng") /
test.  The lexicon strategy moves randomly chosen types into the target pool
until it holds the requested share of samples; the k-means strategy clusters
types by their boolean 2-gram presence vectors and uses the smaller cluster
(by sample mass) as the target pool.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .charset import Corpus, CorpusError, build_charset
from .counting import count_ngrams
from .ngram import NgramModel
from .wittenbell import estimate_wb

DEFAULT_RATIOS = (0.70, 0.075, 0.075, 0.075, 0.075)
PART_NAMES = ("source_train", "source_val", "source_test", "target_ng", "target_test")


class SplitError(ValueError):
    """Raised when a corpus cannot be split as requested."""


@dataclass(frozen=True)
class SplitManifest:
    """Index lists of the five experiment roles, over one corpus."""

    strategy: str
    seed: int
    ratios: tuple[float, float, float, float, float]
    source_train: tuple[int, ...]
    source_val: tuple[int, ...]
    source_test: tuple[int, ...]
    target_ng: tuple[int, ...]
    target_test: tuple[int, ...]

    def part(self, name: str) -> tuple[int, ...]:
        if name not in PART_NAMES:
            raise KeyError(f"unknown part {name!r}")
        return getattr(self, name)

    def parts(self) -> dict[str, tuple[int, ...]]:
        return {name: getattr(self, name) for name in PART_NAMES}

    def subset(self, corpus: Corpus, name: str) -> Corpus:
        return corpus.subset(self.part(name))

    def validate(self, corpus: Corpus) -> None:
        """Check that the five lists partition the corpus sample indices."""
        seen: list[int] = []
        for name in PART_NAMES:
            seen.extend(self.part(name))
        if sorted(seen) != list(range(len(corpus.words))):
            raise SplitError("manifest parts do not partition the corpus")

    def to_json(self) -> str:
        doc = {
            "strategy": self.strategy,
            "seed": self.seed,
            "ratios": list(self.ratios),
        }
        for name in PART_NAMES:
            doc[name] = list(self.part(name))
        return json.dumps(doc, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "SplitManifest":
        doc = json.loads(text)
        return cls(
            strategy=doc["strategy"],
            seed=int(doc["seed"]),
            ratios=tuple(float(r) for r in doc["ratios"]),
            **{name: tuple(int(i) for i in doc[name]) for name in PART_NAMES},
        )

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "SplitManifest":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def largest_remainder(total: int, weights: Sequence[float]) -> list[int]:
    """Split ``total`` into integer parts proportional to ``weights``.

    Floors the exact quotas, then hands the remaining units to the largest
    fractional remainders (earlier parts win ties).
    """
    wsum = float(sum(weights))
    if wsum <= 0:
        raise SplitError("weights must have positive sum")
    quotas = [total * w / wsum for w in weights]
    sizes = [math.floor(q) for q in quotas]
    remainders = sorted(
        range(len(weights)), key=lambda i: (-(quotas[i] - sizes[i]), i)
    )
    for i in remainders[: total - sum(sizes)]:
        sizes[i] += 1
    return sizes


def _check_ratios(ratios: Sequence[float]) -> tuple[float, ...]:
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 5 or any(r < 0 for r in ratios):
        raise SplitError("ratios must be five nonnegative reals")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise SplitError(f"ratios must sum to 1, got {sum(ratios)}")
    return ratios


def _samples_by_type(corpus: Corpus) -> dict[str, list[int]]:
    by_type: dict[str, list[int]] = {}
    for i, w in enumerate(corpus.words):
        by_type.setdefault(w, []).append(i)
    return by_type


def _cut_pools(
    source_pool: list[int],
    target_pool: list[int],
    ratios: tuple[float, ...],
    strategy: str,
    seed: int,
    rng: np.random.Generator,
) -> SplitManifest:
    source_pool = [source_pool[i] for i in rng.permutation(len(source_pool))]
    target_pool = [target_pool[i] for i in rng.permutation(len(target_pool))]
    s_sizes = largest_remainder(len(source_pool), ratios[:3])
    t_sizes = largest_remainder(len(target_pool), ratios[3:])
    cuts = []
    at = 0
    for size in s_sizes:
        cuts.append(tuple(sorted(source_pool[at : at + size])))
        at += size
    at = 0
    for size in t_sizes:
        cuts.append(tuple(sorted(target_pool[at : at + size])))
        at += size
    if any(len(c) == 0 for c in cuts):
        raise SplitError("corpus too small: a split part would be empty")
    return SplitManifest(strategy, seed, ratios, *cuts)


def lexicon_split(
    corpus: Corpus, seed: int, ratios: Sequence[float] = DEFAULT_RATIOS
) -> SplitManifest:
    """Split so that source and target use disjoint word-type lexicons.

    Types are shuffled and moved into the target pool until it first holds at
    least the combined target ratio of all samples; the remaining types form
    the source pool.
    """
    ratios = _check_ratios(ratios)
    by_type = _samples_by_type(corpus)
    types = sorted(by_type)
    if len(types) < 2:
        raise SplitError("need at least two distinct word types to split")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(types))
    goal = (ratios[3] + ratios[4]) * len(corpus.words)
    target_types: list[str] = []
    mass = 0
    for idx in order:
        if mass >= goal:
            break
        target_types.append(types[idx])
        mass += len(by_type[types[idx]])
    target_set = set(target_types)
    if len(target_set) == len(types):
        raise SplitError("corpus too small: target pool swallowed every type")
    source_pool = [i for t in types if t not in target_set for i in by_type[t]]
    target_pool = [i for t in types if t in target_set for i in by_type[t]]
    return _cut_pools(source_pool, target_pool, ratios, "lexicon", seed, rng)


@dataclass(frozen=True)
class TwoGramEmbedding:
    """Boolean presence vectors of within-word character 2-grams."""

    words: tuple[str, ...]
    index: tuple[str, ...]
    vectors: np.ndarray  # shape (len(words), len(index)), dtype bool


def twogram_embed(lexicon: Sequence[str]) -> TwoGramEmbedding:
    """Embed each word as a boolean vector over the corpus's distinct 2-grams.

    No boundary markers are used, so single-character words map to the zero
    vector.
    """
    if not lexicon:
        raise SplitError("lexicon must be non-empty")
    grams = sorted({w[i : i + 2] for w in lexicon for i in range(len(w) - 1)})
    pos = {g: j for j, g in enumerate(grams)}
    vectors = np.zeros((len(lexicon), len(grams)), dtype=bool)
    for i, w in enumerate(lexicon):
        for j in range(len(w) - 1):
            vectors[i, pos[w[j : j + 2]]] = True
    return TwoGramEmbedding(tuple(lexicon), tuple(grams), vectors)


def kmeans2(
    vectors: np.ndarray,
    seed: Union[int, np.random.Generator],
    max_iters: int = 100,
    restarts: Optional[int] = None,
) -> np.ndarray:
    """Two-cluster Lloyd's algorithm with D^2-weighted seeding.

    Runs several independently seeded attempts and keeps the assignment with
    the lowest within-cluster sum of squared distances; restarts are so cheap
    on small inputs that the exhaustive optimum is reliably reached there.
    Ties in nearest-centroid assignment go to the lower cluster id, and an
    emptied cluster is repaired by stealing the point farthest from its
    current centroid.
    """
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2 or len(x) < 2:
        raise SplitError("need at least two vectors to cluster")
    if np.all(x == x[0]):
        raise SplitError("all vectors identical: no meaningful 2-clustering")
    if restarts is None:
        restarts = 150 if len(x) <= 16 else 10
    rng = np.random.default_rng(seed)
    best_sse = np.inf
    best: np.ndarray | None = None
    for _ in range(max(1, restarts)):
        assign, sse = _lloyd_once(x, rng, max_iters)
        if sse < best_sse - 1e-12:
            best_sse, best = sse, assign
    assert best is not None
    return best


def _lloyd_once(
    x: np.ndarray, rng: np.random.Generator, max_iters: int
) -> tuple[np.ndarray, float]:
    first = int(rng.integers(len(x)))
    d2 = np.sum((x - x[first]) ** 2, axis=1)
    second = int(rng.choice(len(x), p=d2 / d2.sum()))
    centroids = np.stack([x[first], x[second]])
    assign: np.ndarray | None = None
    for _ in range(max_iters):
        dists = np.stack([np.sum((x - c) ** 2, axis=1) for c in centroids])
        new_assign = np.argmin(dists, axis=0)  # ties -> lower cluster id
        for cluster in (0, 1):
            if not np.any(new_assign == cluster):
                own = dists[new_assign, np.arange(len(x))]
                new_assign[int(np.argmax(own))] = cluster
        if assign is not None and np.array_equal(new_assign, assign):
            break
        assign = new_assign
        centroids = np.stack([x[assign == c].mean(axis=0) for c in (0, 1)])
    assert assign is not None
    dists = np.stack([np.sum((x - c) ** 2, axis=1) for c in centroids])
    sse = float(dists[assign, np.arange(len(x))].sum())
    return assign, sse


def kmeans_split(
    corpus: Corpus, seed: int, ratios: Sequence[float] = DEFAULT_RATIOS
) -> SplitManifest:
    """Split by 2-means clustering of the word types' 2-gram vectors.

    The cluster holding the larger sample mass becomes the source pool (ties
    go to cluster 0); both pools are then cut exactly as in the lexicon
    strategy.
    """
    ratios = _check_ratios(ratios)
    by_type = _samples_by_type(corpus)
    types = sorted(by_type)
    if len(types) < 2:
        raise SplitError("need at least two distinct word types to split")
    rng = np.random.default_rng(seed)
    emb = twogram_embed(types)
    assign = kmeans2(emb.vectors.astype(np.float64), rng)
    masses = [
        sum(len(by_type[t]) for t, a in zip(types, assign) if a == c) for c in (0, 1)
    ]
    source_cluster = 0 if masses[0] >= masses[1] else 1
    source_pool = [
        i for t, a in zip(types, assign) if a == source_cluster for i in by_type[t]
    ]
    target_pool = [
        i for t, a in zip(types, assign) if a != source_cluster for i in by_type[t]
    ]
    return _cut_pools(source_pool, target_pool, ratios, "kmeans", seed, rng)


@dataclass(frozen=True)
class AuditReport:
    """Cross-subset perplexities of n-grams fitted on the split's text pools."""

    order: int
    sizes: dict[str, int]
    ppl_source_dev_on_source_test: float
    ppl_source_dev_on_target_test: float
    ppl_target_ng_on_target_test: float

    def to_dict(self) -> dict:
        return {
            "order": self.order,
            "sizes": dict(self.sizes),
            "ppl": {
                "source_dev_on_source_test": self.ppl_source_dev_on_source_test,
                "source_dev_on_target_test": self.ppl_source_dev_on_target_test,
                "target_ng_on_target_test": self.ppl_target_ng_on_target_test,
            },
        }

    def render(self) -> str:
        lines = [
            f"{'part':<14}{'size':>8}",
            *(f"{name:<14}{size:>8}" for name, size in self.sizes.items()),
            "",
            f"{'lm corpus':<14}{'eval corpus':<14}{'ppl':>10}",
            f"{'source dev':<14}{'source test':<14}{self.ppl_source_dev_on_source_test:>10.3f}",
            f"{'source dev':<14}{'target test':<14}{self.ppl_source_dev_on_target_test:>10.3f}",
            f"{'target ng':<14}{'target test':<14}{self.ppl_target_ng_on_target_test:>10.3f}",
        ]
        return "\n".join(lines)


def fit_subset_model(corpus: Corpus, indices: Sequence[int], n: int) -> NgramModel:
    """Estimate an order-n model on a subset, with the full corpus charset."""
    charset = build_charset(corpus)
    return estimate_wb(count_ngrams(corpus.subset(indices), n), charset)


def audit(manifest: SplitManifest, corpus: Corpus, n: int) -> AuditReport:
    """Fit n-grams on source dev (train+val) and on target ng, and report the
    three cross-perplexities that quantify the split's language shift."""
    manifest.validate(corpus)
    dev_indices = list(manifest.source_train) + list(manifest.source_val)
    source_dev_lm = fit_subset_model(corpus, dev_indices, n)
    target_ng_lm = fit_subset_model(corpus, manifest.target_ng, n)
    source_test = manifest.subset(corpus, "source_test")
    target_test = manifest.subset(corpus, "target_test")
    return AuditReport(
        order=n,
        sizes={name: len(part) for name, part in manifest.parts().items()},
        ppl_source_dev_on_source_test=source_dev_lm.perplexity(source_test),
        ppl_source_dev_on_target_test=source_dev_lm.perplexity(target_test),
        ppl_target_ng_on_target_test=target_ng_lm.perplexity(target_test),
    )
