"""Teacher-forced training of the decoder, with and without n-gram input.

Each batch item is a pair of (feature frames, target word).  The decoder is
fed the ground-truth previous symbols, except that with a configurable
probability each previous character is independently swapped for a random
alphabet character before *both* the embedding lookup and the n-gram context
assembly, so the network also trains on the distribution vectors that wrong
prefixes would produce at decode time.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from . import autodiff as ad
from .charset import EOS, SOS, Charset
from .decoder import (
    DecoderConfig,
    as_tensors,
    collect_grads,
    decoder_forward,
    encode_frames,
    frame_mask,
    init_params,
    positional_encoding,
    sequence_loss,
)
from .inject import NoiseConfig, ProjectionParams, assemble_sngi, build_decoder_input
from .ngram import NgramModel
from .optim import AdamState, adam_init, adam_step

Sample = tuple[np.ndarray, str]  # (frames: (L*f, proto_dim), word)


@dataclass(frozen=True)
class TrainConfig:
    """Optimization settings for one training run."""

    steps: int = 800
    batch_size: int = 64
    lr: float = 1.2e-3
    warmup_steps: int = 60
    tfe_prob: float = 0.1
    noise: NoiseConfig = NoiseConfig()
    log_every: int = 0  # 0 disables progress printing


def word_ids(word: str, charset: Charset) -> tuple[np.ndarray, np.ndarray]:
    """Previous-symbol ids (start marker first) and target ids (EOS last)."""
    targets = np.array(charset.word_indices(word) + [charset.eos_index], dtype=np.int64)
    prev = np.concatenate(([charset.sos_index], targets[:-1]))
    return prev, targets


def tfe_corrupt(
    prev: np.ndarray, charset: Charset, tfe_prob: float, rng: np.random.Generator
) -> np.ndarray:
    """Swap each previous *character* (never the start marker) for a uniform
    random alphabet character with probability ``tfe_prob``."""
    if tfe_prob <= 0.0 or len(prev) <= 1:
        return prev
    out = prev.copy()
    hits = rng.random(len(prev) - 1) < tfe_prob
    if hits.any():
        out[1:][hits] = rng.integers(0, charset.K - 1, int(hits.sum()))
    return out


def _ids_to_symbols(ids: np.ndarray, charset: Charset) -> list[str]:
    return [charset.symbol(int(i)) for i in ids]


def build_batch(
    batch: Sequence[Sample],
    charset: Charset,
    tfe_prob: float,
    noise_cfg: NoiseConfig,
    ngram_model: Optional[NgramModel],
    rng: np.random.Generator,
    train_mode: bool = True,
) -> dict:
    """Pad a batch to a common length and assemble all decoder-side arrays.

    Padded target positions carry zero loss weight; padded previous-symbol
    slots reuse the start-marker embedding and a uniform distribution row so
    every array stays well-formed.
    """
    if not batch:
        raise ValueError("empty batch")
    prevs, targets = [], []
    for _, word in batch:
        p, t = word_ids(word, charset)
        prevs.append(tfe_corrupt(p, charset, tfe_prob, rng))
        targets.append(t)
    t_max = max(len(t) for t in targets)
    m_max = max(len(f) for f, _ in batch)
    b = len(batch)
    k = charset.K
    prev_ids = np.full((b, t_max), charset.sos_index, dtype=np.int64)
    target_ids = np.zeros((b, t_max), dtype=np.int64)
    loss_mask = np.zeros((b, t_max))
    frames = np.zeros((b, m_max, batch[0][0].shape[1]))
    frame_lengths = np.zeros(b, dtype=np.int64)
    s_matrix = np.full((b, t_max, k), 1.0 / k)
    for i, ((feat, _), p, t) in enumerate(zip(batch, prevs, targets)):
        n_t = len(t)
        prev_ids[i, :n_t] = p
        target_ids[i, :n_t] = t
        loss_mask[i, :n_t] = 1.0
        frames[i, : len(feat)] = feat
        frame_lengths[i] = len(feat)
        if ngram_model is not None:
            symbols = _ids_to_symbols(p, charset)
            s_matrix[i, :n_t] = assemble_sngi(
                ngram_model, symbols, noise_cfg, rng, train_mode=train_mode
            )
    return {
        "prev_ids": prev_ids,
        "target_ids": target_ids,
        "loss_mask": loss_mask,
        "frames": frames,
        "frame_lengths": frame_lengths,
        "s_matrix": s_matrix if ngram_model is not None else None,
    }


def batch_forward(
    arrays: dict,
    tensors: dict,
    config: DecoderConfig,
    dropout_rng: Optional[np.random.Generator] = None,
):
    """Shared forward pass from padded arrays to logits."""
    t_max = arrays["prev_ids"].shape[1]
    pos = positional_encoding(t_max, config.d)
    if arrays["s_matrix"] is not None:
        x = build_decoder_input(
            arrays["s_matrix"],
            ProjectionParams.from_dict(tensors),
            arrays["prev_ids"],
            tensors["embed"],
            pos,
        )
    else:
        x = ad.add(ad.take_rows(tensors["embed"], arrays["prev_ids"]), pos)
    enc = encode_frames(arrays["frames"], tensors, config)
    enc_mask = frame_mask(arrays["frame_lengths"], arrays["frames"].shape[1])
    return decoder_forward(x, enc, tensors, config, enc_mask, dropout_rng)


def train_step(
    batch: Sequence[Sample],
    params: dict[str, np.ndarray],
    opt_state: AdamState,
    tfe_prob: float,
    noise_cfg: NoiseConfig,
    ngram_model: Optional[NgramModel],
    rng: np.random.Generator,
    *,
    config: DecoderConfig,
    charset: Charset,
    lr: Optional[float] = None,
) -> tuple[float, dict[str, np.ndarray], AdamState]:
    """One optimization step; returns (loss, new params, new optimizer state).

    ``ngram_model=None`` trains the plain decoder (no distribution input).
    """
    arrays = build_batch(batch, charset, tfe_prob, noise_cfg, ngram_model, rng)
    tensors = as_tensors(params)
    dropout_rng = rng if config.dropout > 0 else None
    logits = batch_forward(arrays, tensors, config, dropout_rng)
    loss = sequence_loss(logits, arrays["target_ids"], arrays["loss_mask"])
    loss.backward()
    new_params, new_state = adam_step(params, collect_grads(tensors), opt_state, lr=lr)
    return float(loss.value), new_params, new_state


@dataclass
class FitResult:
    params: dict[str, np.ndarray]
    losses: list[float]
    length_cap: int


def fit(
    dataset: Sequence[Sample],
    charset: Charset,
    config: DecoderConfig,
    train_cfg: TrainConfig,
    ngram_model: Optional[NgramModel],
    seed: int,
) -> FitResult:
    """Train from scratch on ``dataset`` for a fixed number of steps."""
    if not dataset:
        raise ValueError("empty training dataset")
    rng = np.random.default_rng(seed)
    params = init_params(config, rng)
    state = adam_init(params, lr=train_cfg.lr)
    order = rng.permutation(len(dataset))
    cursor = 0
    losses = []
    for step in range(train_cfg.steps):
        if cursor + train_cfg.batch_size > len(order):
            order = rng.permutation(len(dataset))
            cursor = 0
        batch = [dataset[i] for i in order[cursor : cursor + train_cfg.batch_size]]
        cursor += train_cfg.batch_size
        warm = min(1.0, (step + 1) / max(1, train_cfg.warmup_steps))
        loss, params, state = train_step(
            batch, params, state, train_cfg.tfe_prob, train_cfg.noise,
            ngram_model, rng, config=config, charset=charset, lr=train_cfg.lr * warm,
        )
        losses.append(loss)
        if train_cfg.log_every and (step + 1) % train_cfg.log_every == 0:
            recent = np.mean(losses[-train_cfg.log_every :])
            print(f"step {step + 1:>5}  loss {recent:.4f}")
    cap = 2 * max(len(w) for _, w in dataset) + 2
    return FitResult(params=params, losses=losses, length_cap=cap)


def teacher_forced_loss(
    dataset: Sequence[Sample],
    params: dict[str, np.ndarray],
    config: DecoderConfig,
    charset: Charset,
    ngram_model: Optional[NgramModel] = None,
) -> float:
    """Clean (no corruption, no noise) mean cross-entropy on a dataset."""
    arrays = build_batch(
        dataset, charset, 0.0, NoiseConfig(tau=0.0), ngram_model,
        np.random.default_rng(0), train_mode=False,
    )
    tensors = {k: ad.Tensor(v) for k, v in params.items()}
    logits = batch_forward(arrays, tensors, config)
    loss = sequence_loss(logits, arrays["target_ids"], arrays["loss_mask"])
    return float(loss.value)
