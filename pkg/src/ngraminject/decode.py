"""Autoregressive decoding: greedy argmax and shallow-fusion beam search.

Checkpoints trained with n-gram input require a language model at decode
time (any model over the same charset; swapping it changes no parameter).
Beam search additionally fuses the language model into the per-symbol score,
``log p_nn + lambda * ln(10) * log10 p_lm``, prunes to the beam width by
cumulative score, and picks the final hypothesis by length-normalized score
among hypotheses whose end marker made it into the beam.  With a beam of one
and lambda zero this reduces to greedy decoding exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import autodiff as ad
from .charset import SOS, Charset
from .checkpoint import Checkpoint
from .decoder import decoder_forward, encode_frames, frame_mask, positional_encoding
from .inject import NoiseConfig, ProjectionParams, assemble_sngi, build_decoder_input
from .ngram import NgramModel

LN10 = math.log(10.0)
_CLEAN = NoiseConfig(tau=0.0)


class DecodeError(ValueError):
    """Raised for checkpoint/model mismatches at decode time."""


def _check_lm(ckpt: Checkpoint, lm: Optional[NgramModel], fused: bool = False) -> None:
    if ckpt.use_ngi and lm is None:
        raise DecodeError("checkpoint was trained with n-gram input: pass a model")
    if not ckpt.use_ngi and lm is not None and not fused:
        raise DecodeError("checkpoint was trained without n-gram input: no model allowed")
    if lm is not None and lm.charset.symbols != ckpt.charset.symbols:
        raise DecodeError("language model charset differs from checkpoint charset")


def _prefix_inputs(
    prefixes: np.ndarray,  # (H, t) previous-symbol ids, start marker first
    ckpt: Checkpoint,
    tensors: dict,
    lm: Optional[NgramModel],
) -> ad.Tensor:
    charset = ckpt.charset
    t = prefixes.shape[1]
    pos = positional_encoding(t, ckpt.config.d)
    if ckpt.use_ngi:
        assert lm is not None
        s = np.stack(
            [
                assemble_sngi(
                    lm, [charset.symbol(int(i)) for i in row], _CLEAN, None, train_mode=False
                )
                for row in prefixes
            ]
        )
        return build_decoder_input(
            s, ProjectionParams.from_dict(tensors), prefixes, tensors["embed"], pos
        )
    return ad.add(ad.take_rows(tensors["embed"], prefixes), pos)


def _last_logits(
    prefixes: np.ndarray, ckpt: Checkpoint, tensors: dict, enc, enc_mask, lm
) -> np.ndarray:
    x = _prefix_inputs(prefixes, ckpt, tensors, lm)
    logits = decoder_forward(x, enc, tensors, ckpt.config, enc_mask)
    return logits.value[:, -1, :]


def _log_softmax_rows(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def greedy_decode(
    ckpt: Checkpoint, feats: np.ndarray, lm: Optional[NgramModel] = None
) -> str:
    """Argmax decoding of one sample; stops at the end marker or length cap."""
    return greedy_decode_batch(ckpt, [feats], lm)[0]


def greedy_decode_batch(
    ckpt: Checkpoint, feats_list: Sequence[np.ndarray], lm: Optional[NgramModel] = None
) -> list[str]:
    """Lockstep greedy decoding of many samples."""
    _check_lm(ckpt, lm)
    charset = ckpt.charset
    tensors = {k: ad.Tensor(v) for k, v in ckpt.params.items()}
    b = len(feats_list)
    m_max = max(len(f) for f in feats_list)
    frames = np.zeros((b, m_max, feats_list[0].shape[1]))
    lengths = np.zeros(b, dtype=np.int64)
    for i, f in enumerate(feats_list):
        frames[i, : len(f)] = f
        lengths[i] = len(f)
    enc = encode_frames(frames, tensors, ckpt.config)
    enc_mask = frame_mask(lengths, m_max)
    prefixes = np.full((b, 1), charset.sos_index, dtype=np.int64)
    done = np.zeros(b, dtype=bool)
    outputs: list[list[int]] = [[] for _ in range(b)]
    for _ in range(ckpt.length_cap):
        logits = _last_logits(prefixes, ckpt, tensors, enc, enc_mask, lm)
        nxt = np.argmax(logits, axis=-1)
        for i in range(b):
            if done[i]:
                continue
            if nxt[i] == charset.eos_index:
                done[i] = True
            else:
                outputs[i].append(int(nxt[i]))
        if done.all():
            break
        # Finished rows keep extending with the start marker; their output is frozen.
        step = np.where(done, charset.sos_index, nxt)[:, None]
        prefixes = np.concatenate([prefixes, step], axis=1)
    return ["".join(charset.symbol(i) for i in out) for out in outputs]


@dataclass
class _Hyp:
    ids: tuple[int, ...]
    score: float


def beam_rescore(
    ckpt: Checkpoint,
    feats: np.ndarray,
    lm: NgramModel,
    beam_width: int = 150,
    lam: float = 0.5,
) -> str:
    """Beam search with language-model fusion on one sample.

    For checkpoints trained with n-gram input the same model also feeds the
    decoder input; for plain checkpoints it only contributes the fusion term.
    """
    if beam_width < 1:
        raise DecodeError("beam width must be >= 1")
    if lam < 0:
        raise DecodeError("fusion weight must be >= 0")
    _check_lm(ckpt, lm, fused=True)
    charset = ckpt.charset
    tensors = {k: ad.Tensor(v) for k, v in ckpt.params.items()}
    enc = encode_frames(feats[None, :, :], tensors, ckpt.config)
    enc_mask = frame_mask(np.array([len(feats)]), len(feats))
    live = [_Hyp(ids=(), score=0.0)]
    finished: list[tuple[float, int, tuple[int, ...]]] = []  # (score, length, ids)
    for _ in range(ckpt.length_cap):
        prefixes = np.array(
            [(charset.sos_index,) + h.ids for h in live], dtype=np.int64
        )
        nn_lp = _log_softmax_rows(_last_logits(prefixes, ckpt, tensors, enc, enc_mask, lm))
        fused = nn_lp
        if lam > 0:
            lm_lp = np.stack(
                [
                    np.log(lm.dist_vector([charset.symbol(int(i)) for i in row]))
                    for row in prefixes
                ]
            )
            fused = nn_lp + lam * lm_lp
        scores = np.array([h.score for h in live])[:, None] + fused
        flat = scores.ravel()
        keep = np.argsort(-flat, kind="stable")[:beam_width]
        next_live: list[_Hyp] = []
        for idx in keep:
            h, k = live[int(idx) // charset.K], int(idx) % charset.K
            if k == charset.eos_index:
                finished.append((flat[idx], len(h.ids) + 1, h.ids))
            else:
                next_live.append(_Hyp(ids=h.ids + (k,), score=float(flat[idx])))
        live = next_live
        if not live:
            break
    for h in live:  # hit the length cap without an end marker
        finished.append((h.score, max(1, len(h.ids)), h.ids))
    best = max(range(len(finished)), key=lambda i: finished[i][0] / finished[i][1])
    return "".join(charset.symbol(i) for i in finished[best][2])
