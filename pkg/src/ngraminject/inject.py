"""Conditioning an autoregressive decoder on n-gram distribution vectors.

At every decoding step the language model's distribution over the next
character (given the current prefix) is fetched, optionally perturbed with
bounded uniform noise during training, projected into the decoder's internal
dimension, and summed with the character embeddings and positional encoding
to form the decoder input.  Because the decoder only ever sees the projected
distribution, the underlying n-gram model can be exchanged at decode time
without touching any learned parameter.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .autodiff import Tensor, add, as_tensor, layer_norm, linear, relu, take_rows
from .charset import SOS
from .ngram import NgramModel

# Components this far below the noise floor are clamped before renormalizing,
# which keeps every entry strictly positive without visibly moving the rest.
CLAMP_FLOOR = 1e-8


@dataclass(frozen=True)
class NoiseConfig:
    """Bounded white-noise settings: U(a, b) applied with probability tau."""

    a: float = -0.1
    b: float = 0.1
    tau: float = 0.2

    def __post_init__(self) -> None:
        if self.a > self.b:
            raise ValueError(f"noise bounds out of order: a={self.a} > b={self.b}")
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError(f"tau must be a probability, got {self.tau}")


def uniform_noise(cfg: NoiseConfig, size: int, rng: np.random.Generator) -> np.ndarray:
    """One white-noise draw: i.i.d. U(a, b) per component."""
    return rng.uniform(cfg.a, cfg.b, size)


def renormalize(v: np.ndarray) -> np.ndarray:
    """Clamp components below the floor up to it, then rescale to sum 1."""
    clamped = np.maximum(v, CLAMP_FLOOR)
    return clamped / clamped.sum()


def apply_noise(
    s: np.ndarray, cfg: NoiseConfig, rng: np.random.Generator
) -> np.ndarray:
    """With probability tau, perturb the distribution and renormalize.

    One Bernoulli draw decides for the whole vector; on the quiet branch the
    input is returned unchanged.
    """
    if rng.random() >= cfg.tau:
        return s
    return renormalize(s + uniform_noise(cfg, len(s), rng))


def assemble_sngi(
    model: NgramModel,
    prefix: Sequence[str],
    cfg: NoiseConfig,
    rng: Optional[np.random.Generator],
    train_mode: bool,
) -> np.ndarray:
    """Stack one distribution vector per decoding step of ``prefix``.

    Row t is the model's next-symbol distribution given the first t prefix
    symbols (the first row always conditions on the start marker alone).
    Noise is applied per row in train mode only; inference uses the clean
    vectors so a swapped-in model is passed through verbatim.
    """
    if not prefix or prefix[0] != SOS:
        raise ValueError("prefix must begin with the start-of-sequence marker")
    rows = []
    for t in range(1, len(prefix) + 1):
        vec = model.dist_vector(prefix[:t])
        if train_mode:
            if rng is None:
                raise ValueError("train-mode assembly needs a random generator")
            vec = apply_noise(vec, cfg, rng)
        rows.append(vec)
    return np.stack(rows)


@dataclass(frozen=True)
class ProjectionParams:
    """Feed-forward projection of distribution vectors into the decoder width."""

    w: np.ndarray  # (K, d)
    b: np.ndarray  # (d,)
    gain: np.ndarray  # (d,)
    offset: np.ndarray  # (d,)

    @classmethod
    def from_dict(cls, params: dict, prefix: str = "proj") -> "ProjectionParams":
        return cls(
            w=params[f"{prefix}_w"],
            b=params[f"{prefix}_b"],
            gain=params[f"{prefix}_g"],
            offset=params[f"{prefix}_o"],
        )


def project_f(S: Union[np.ndarray, Tensor], params: ProjectionParams) -> Tensor:
    """Project distribution rows: feed-forward, layer norm, then ReLU.

    Accepts plain arrays or tape tensors for every input, so the same code
    path serves inference and training (gradients flow through all four
    parameter arrays).
    """
    S = as_tensor(S)
    if S.shape[-1] != as_tensor(params.w).shape[0]:
        raise ValueError(
            f"distribution width {S.shape[-1]} does not match projection input "
            f"{as_tensor(params.w).shape[0]}"
        )
    return relu(layer_norm(linear(S, params.w, params.b), params.gain, params.offset))


def build_decoder_input(
    S: Union[np.ndarray, Tensor],
    params: ProjectionParams,
    prev_ids: np.ndarray,
    embed: Union[np.ndarray, Tensor],
    pos: np.ndarray,
) -> Tensor:
    """Sum the three decoder-input components for ``t`` steps.

    ``prev_ids`` are the indices of the previously emitted symbols (start
    marker first); ``pos`` must cover at least ``t`` rows.  The projected
    distribution matrix, the embedding rows and the positional rows are added
    elementwise.
    """
    prev_ids = np.asarray(prev_ids)
    t = prev_ids.shape[-1]
    S = as_tensor(S)
    if S.shape[-2] != t:
        raise ValueError(f"{S.shape[-2]} distribution rows for {t} previous symbols")
    if pos.shape[0] < t:
        raise ValueError("positional encoding shorter than the decoded prefix")
    return add(add(project_f(S, params), take_rows(as_tensor(embed), prev_ids)), pos[:t])
