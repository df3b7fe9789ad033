"""Synthetic recognition task: noisy per-character feature frames.

Every alphabet character gets a fixed random prototype vector; a word sample
is the sequence of its characters' prototypes plus i.i.d. Gaussian noise.
Configured confusion pairs place two prototypes within a fraction of the
noise radius of each other, making them visually near-indistinguishable so
that resolving them requires language context.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .charset import Charset, CorpusError

Sample = tuple[np.ndarray, str]


@dataclass(frozen=True)
class SynthConfig:
    """Feature-generation settings for one charset."""

    charset: Charset
    proto_dim: int = 16
    frames_per_char: int = 1
    noise_sigma: float = 0.3
    confusion_pairs: tuple[tuple[str, str], ...] = ()

    def __post_init__(self) -> None:
        if self.proto_dim < 2:
            raise ValueError("proto_dim must be >= 2")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.frames_per_char < 1:
            raise ValueError("frames_per_char must be >= 1")
        for a, b in self.confusion_pairs:
            if a not in self.charset or b not in self.charset:
                raise CorpusError(f"confusion pair ({a!r},{b!r}) outside charset")


def default_confusion_pairs(charset: Charset, count: int = 2) -> tuple[tuple[str, str], ...]:
    """Pair up the first 2*count alphabet characters."""
    syms = charset.symbols
    if len(syms) < 2 * count:
        raise ValueError("charset too small for the requested confusion pairs")
    return tuple((syms[2 * i], syms[2 * i + 1]) for i in range(count))


def make_prototypes(cfg: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    """Draw one prototype per alphabet character; confusion partners sit at
    Euclidean distance 0.5 * noise_sigma from their mates."""
    protos = rng.normal(0.0, 1.0, (len(cfg.charset.symbols), cfg.proto_dim))
    delta = 0.5 * cfg.noise_sigma
    for a, b in cfg.confusion_pairs:
        direction = rng.normal(0.0, 1.0, cfg.proto_dim)
        direction /= np.linalg.norm(direction)
        protos[cfg.charset.index(b)] = protos[cfg.charset.index(a)] + delta * direction
    return protos


def synth_generate(
    cfg: SynthConfig, words: Sequence[str], seed: int
) -> tuple[list[Sample], np.ndarray]:
    """Deterministic dataset of (frames, word) pairs plus the prototypes.

    Frames have shape (len(word) * frames_per_char, proto_dim).
    """
    if not words:
        raise ValueError("need at least one word")
    rng = np.random.default_rng(seed)
    protos = make_prototypes(cfg, rng)
    samples: list[Sample] = []
    for word in words:
        idx = []
        for c in word:
            if c not in cfg.charset or cfg.charset.index(c) >= len(cfg.charset.symbols):
                raise CorpusError(f"word {word!r} uses out-of-charset symbol {c!r}")
            idx.extend([cfg.charset.index(c)] * cfg.frames_per_char)
        clean = protos[idx]
        noisy = clean + rng.normal(0.0, cfg.noise_sigma, clean.shape)
        samples.append((noisy, word))
    return samples, protos


def nearest_prototype_decode(frames: np.ndarray, protos: np.ndarray, cfg: SynthConfig) -> str:
    """Baseline visual-only reader: nearest prototype per frame group."""
    chars = []
    for i in range(0, len(frames), cfg.frames_per_char):
        group = frames[i : i + cfg.frames_per_char].mean(axis=0)
        d2 = np.sum((protos - group) ** 2, axis=1)
        chars.append(cfg.charset.symbols[int(np.argmin(d2))])
    return "".join(chars)


def save_dataset(samples: Sequence[Sample], directory: Union[str, Path]) -> None:
    """Cache a dataset as one stacked feature array plus a text index."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    stacked = np.concatenate([f for f, _ in samples]) if samples else np.zeros((0, 0))
    np.save(directory / "features.npy", stacked)
    lines = []
    at = 0
    for frames, word in samples:
        lines.append(f"{word}\t{at}\t{len(frames)}")
        at += len(frames)
    (directory / "index.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_dataset(directory: Union[str, Path]) -> list[Sample]:
    directory = Path(directory)
    stacked = np.load(directory / "features.npy")
    samples: list[Sample] = []
    for line in (directory / "index.txt").read_text(encoding="utf-8").splitlines():
        word, at, length = line.split("\t")
        samples.append((stacked[int(at) : int(at) + int(length)], word))
    return samples
