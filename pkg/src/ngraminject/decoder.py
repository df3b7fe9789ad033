"""Autoregressive transformer decoder over a character alphabet.

The decoder is the classic post-norm stack: masked multi-head self-attention,
cross-attention over encoder feature frames, and a ReLU feed-forward block,
each followed by add-and-normalize, topped by a linear output head over the
predictable symbols.  Everything runs on the autodiff tape in float64, so the
same forward code serves training, decoding and gradient checks.

Encoder frames enter through a single learned linear map plus positional
encoding; the heavy lifting of feature extraction is assumed to have happened
upstream (here: synthetic per-character feature frames).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

MASK_VALUE = -1e30  # additive attention mask; underflows to exactly 0 after softmax


@dataclass(frozen=True)
class DecoderConfig:
    """Decoder shape: internal width, heads, layers, feed-forward width."""

    charset_size: int
    d: int = 256
    heads: int = 8
    layers: int = 2
    ffn_dim: Optional[int] = None
    dropout: float = 0.1
    proto_dim: int = 16

    def __post_init__(self) -> None:
        if self.d % self.heads != 0:
            raise ValueError(f"width {self.d} not divisible by {self.heads} heads")
        if min(self.charset_size, self.d, self.heads, self.layers) < 1:
            raise ValueError("all decoder dimensions must be >= 1")
        if self.ffn_dim is None:
            object.__setattr__(self, "ffn_dim", 4 * self.d)

    @property
    def head_dim(self) -> int:
        return self.d // self.heads


def desk_config(charset_size: int, proto_dim: int = 16) -> DecoderConfig:
    """Small profile that trains in seconds on a CPU."""
    return DecoderConfig(
        charset_size=charset_size, d=64, heads=4, layers=2, ffn_dim=256,
        dropout=0.0, proto_dim=proto_dim,
    )


def positional_encoding(t: int, d: int) -> np.ndarray:
    """Sinusoidal position features: sin on even columns, cos on odd ones."""
    if d % 2 != 0:
        raise ValueError(f"positional encoding needs an even width, got {d}")
    if t < 1:
        raise ValueError("need at least one position")
    pos = np.arange(t, dtype=np.float64)[:, None]
    idx = np.arange(0, d, 2, dtype=np.float64)[None, :]
    angles = pos / np.power(10000.0, idx / d)
    pe = np.zeros((t, d))
    pe[:, 0::2] = np.sin(angles)
    pe[:, 1::2] = np.cos(angles)
    return pe


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int, scale: float = 1.0):
    bound = scale * math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, (fan_in, fan_out))


def init_params(config: DecoderConfig, rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Fresh parameter arrays: scaled-uniform weights, zero biases/offsets,
    unit gains.  The output head starts at a tenth of the usual scale so the
    first predictions are near uniform."""
    d, k = config.d, config.charset_size
    p: dict[str, np.ndarray] = {}
    p["embed"] = _glorot(rng, k + 1, d)  # +1: start-marker row
    p["enc_w"] = _glorot(rng, config.proto_dim, d)
    p["enc_b"] = np.zeros(d)
    p["proj_w"] = _glorot(rng, k, d)
    p["proj_b"] = np.zeros(d)
    p["proj_g"] = np.ones(d)
    p["proj_o"] = np.zeros(d)
    for i in range(config.layers):
        for block in ("self", "cross"):
            for mat in ("q", "k", "v", "o"):
                p[f"l{i}_{block}_w{mat}"] = _glorot(rng, d, d)
                p[f"l{i}_{block}_b{mat}"] = np.zeros(d)
        p[f"l{i}_ffn_w1"] = _glorot(rng, d, config.ffn_dim)
        p[f"l{i}_ffn_b1"] = np.zeros(config.ffn_dim)
        p[f"l{i}_ffn_w2"] = _glorot(rng, config.ffn_dim, d)
        p[f"l{i}_ffn_b2"] = np.zeros(d)
        for ln in ("ln1", "ln2", "ln3"):
            p[f"l{i}_{ln}_g"] = np.ones(d)
            p[f"l{i}_{ln}_o"] = np.zeros(d)
    p["head_w"] = _glorot(rng, d, k, scale=0.1)
    p["head_b"] = np.zeros(k)
    return p


def as_tensors(params: dict[str, np.ndarray]) -> dict[str, Tensor]:
    return {name: Tensor(v, requires_grad=True) for name, v in params.items()}


def collect_grads(tensors: dict[str, Tensor]) -> dict[str, np.ndarray]:
    return {
        name: (t.grad if t.grad is not None else np.zeros_like(t.value))
        for name, t in tensors.items()
    }


def causal_mask(t: int) -> np.ndarray:
    mask = np.zeros((t, t))
    mask[np.triu_indices(t, k=1)] = MASK_VALUE
    return mask


def frame_mask(lengths: np.ndarray, m: int) -> np.ndarray:
    """Additive mask hiding padded encoder frames, shape (B, 1, 1, m)."""
    mask = np.where(np.arange(m)[None, :] < np.asarray(lengths)[:, None], 0.0, MASK_VALUE)
    return mask[:, None, None, :]


def encode_frames(frames, params: dict[str, Tensor], config: DecoderConfig) -> Tensor:
    """Map raw feature frames (..., m, proto_dim) into decoder width and add
    positional encoding."""
    frames = ad.as_tensor(frames)
    m = frames.shape[-2]
    return ad.add(ad.linear(frames, params["enc_w"], params["enc_b"]),
                  positional_encoding(m, config.d))


def _split_heads(x: Tensor, heads: int) -> Tensor:
    *lead, t, d = x.shape
    x = ad.reshape(x, (*lead, t, heads, d // heads))
    return ad.swapaxes(x, -2, -3)  # (..., heads, t, head_dim)


def _merge_heads(x: Tensor) -> Tensor:
    *lead, h, t, hd = x.shape
    return ad.reshape(ad.swapaxes(x, -2, -3), (*lead, t, h * hd))


def _attention(
    q_in: Tensor,
    kv_in: Tensor,
    params: dict[str, Tensor],
    prefix: str,
    heads: int,
    mask: Optional[np.ndarray],
    dropout: float = 0.0,
    rng: Optional[np.random.Generator] = None,
) -> Tensor:
    q = _split_heads(ad.linear(q_in, params[f"{prefix}_wq"], params[f"{prefix}_bq"]), heads)
    k = _split_heads(ad.linear(kv_in, params[f"{prefix}_wk"], params[f"{prefix}_bk"]), heads)
    v = _split_heads(ad.linear(kv_in, params[f"{prefix}_wv"], params[f"{prefix}_bv"]), heads)
    scores = ad.mul(ad.matmul(q, ad.swapaxes(k, -1, -2)), 1.0 / math.sqrt(q.shape[-1]))
    if mask is not None:
        scores = ad.add(scores, mask)
    weights = ad.softmax(scores, axis=-1)
    weights = _maybe_dropout(weights, dropout, rng)
    ctx = _merge_heads(ad.matmul(weights, v))
    return ad.linear(ctx, params[f"{prefix}_wo"], params[f"{prefix}_bo"])


def _maybe_dropout(x: Tensor, p: float, rng: Optional[np.random.Generator]) -> Tensor:
    if p <= 0.0 or rng is None:
        return x
    keep = (rng.random(x.shape) >= p) / (1.0 - p)
    return ad.mul(x, keep)


def decoder_forward(
    x: Tensor,
    enc: Tensor,
    params: dict[str, Tensor],
    config: DecoderConfig,
    enc_mask: Optional[np.ndarray] = None,
    dropout_rng: Optional[np.random.Generator] = None,
) -> Tensor:
    """Run the decoder stack on inputs ``x`` (..., t, d) with encoder memory
    ``enc`` (..., m, d); returns next-symbol logits (..., t, K).

    Self-attention is causally masked, so logits at step t depend only on
    input rows up to t.  ``enc_mask`` hides padded encoder frames;
    ``dropout_rng`` enables dropout (training only).
    """
    t = x.shape[-2]
    p = config.dropout
    self_mask = causal_mask(t)
    for i in range(config.layers):
        attn = _attention(x, x, params, f"l{i}_self", config.heads, self_mask, p, dropout_rng)
        x = ad.layer_norm(ad.add(x, attn), params[f"l{i}_ln1_g"], params[f"l{i}_ln1_o"])
        cross = _attention(x, enc, params, f"l{i}_cross", config.heads, enc_mask, p, dropout_rng)
        x = ad.layer_norm(ad.add(x, cross), params[f"l{i}_ln2_g"], params[f"l{i}_ln2_o"])
        hidden = ad.relu(ad.linear(x, params[f"l{i}_ffn_w1"], params[f"l{i}_ffn_b1"]))
        hidden = _maybe_dropout(hidden, p, dropout_rng)
        ffn = ad.linear(hidden, params[f"l{i}_ffn_w2"], params[f"l{i}_ffn_b2"])
        x = ad.layer_norm(ad.add(x, ffn), params[f"l{i}_ln3_g"], params[f"l{i}_ln3_o"])
    return ad.linear(x, params["head_w"], params["head_b"])


def sequence_loss(logits: Tensor, targets: np.ndarray, mask: np.ndarray) -> Tensor:
    """Mean cross-entropy (nats) over unmasked target positions."""
    lp = ad.log_softmax(logits, axis=-1)
    picked = ad.gather_last(lp, np.asarray(targets))
    masked = ad.mul(picked, mask)
    return ad.mul(ad.tsum(masked), -1.0 / mask.sum())
