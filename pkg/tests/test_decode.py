"""Greedy decoding and fused beam search on a small trained recognizer."""

import numpy as np
import pytest

from ngraminject.charset import Charset, Corpus, build_charset
from ngraminject.checkpoint import Checkpoint
from ngraminject.counting import count_ngrams
from ngraminject.decode import DecodeError, beam_rescore, greedy_decode, greedy_decode_batch
from ngraminject.decoder import DecoderConfig
from ngraminject.metrics import corpus_cer
from ngraminject.synth import SynthConfig, synth_generate
from ngraminject.train import TrainConfig, fit
from ngraminject.wittenbell import estimate_wb

WORDS = ("abc", "bca", "cab", "acb", "bac")
SMALL = DecoderConfig(charset_size=4, d=16, heads=2, layers=1, ffn_dim=32,
                      dropout=0.0, proto_dim=6)


@pytest.fixture(scope="module")
def setup():
    corpus = Corpus(WORDS)
    cs = build_charset(corpus)
    synth = SynthConfig(charset=cs, proto_dim=6, noise_sigma=0.05)
    samples, protos = synth_generate(synth, corpus.words, seed=11)
    lm = estimate_wb(count_ngrams(corpus, 3), cs)
    cfg = DecoderConfig(charset_size=cs.K, d=16, heads=2, layers=1, ffn_dim=32,
                        dropout=0.0, proto_dim=6)
    train_cfg = TrainConfig(steps=400, batch_size=5, lr=2e-3, tfe_prob=0.1)
    ngi = fit(samples, cs, cfg, train_cfg, lm, seed=2)
    plain = fit(samples, cs, cfg, train_cfg, None, seed=2)
    return {
        "charset": cs,
        "samples": samples,
        "lm": lm,
        "ngi": Checkpoint(ngi.params, cfg, cs, 2, True, "lmfp", ngi.length_cap),
        "plain": Checkpoint(plain.params, cfg, cs, 2, False, None, plain.length_cap),
    }


class TestGreedy:
    def test_decodes_training_words(self, setup):
        feats = [f for f, _ in setup["samples"]]
        hyps = greedy_decode_batch(setup["ngi"], feats, setup["lm"])
        assert corpus_cer(list(WORDS), hyps) == 0.0
        hyps = greedy_decode_batch(setup["plain"], feats, None)
        assert corpus_cer(list(WORDS), hyps) == 0.0

    def test_deterministic(self, setup):
        feats = setup["samples"][0][0]
        a = greedy_decode(setup["ngi"], feats, setup["lm"])
        b = greedy_decode(setup["ngi"], feats, setup["lm"])
        assert a == b

    def test_lm_swap_needs_no_parameter_change(self, setup):
        other_corpus = Corpus(("cba", "bac", "acb"))
        other_lm = estimate_wb(count_ngrams(other_corpus, 3), setup["charset"])
        before = setup["ngi"].params_digest()
        greedy_decode(setup["ngi"], setup["samples"][0][0], other_lm)
        assert setup["ngi"].params_digest() == before

    def test_ngi_checkpoint_requires_lm(self, setup):
        with pytest.raises(DecodeError):
            greedy_decode(setup["ngi"], setup["samples"][0][0], None)

    def test_plain_checkpoint_rejects_lm(self, setup):
        with pytest.raises(DecodeError):
            greedy_decode(setup["plain"], setup["samples"][0][0], setup["lm"])

    def test_charset_mismatch_rejected(self, setup):
        foreign = estimate_wb(
            count_ngrams(Corpus(("xy", "yx")), 2), build_charset(Corpus(("xy",)))
        )
        with pytest.raises(DecodeError):
            greedy_decode(setup["ngi"], setup["samples"][0][0], foreign)


class TestBeam:
    def test_beam_one_lambda_zero_equals_greedy(self, setup):
        for ckpt in (setup["ngi"], setup["plain"]):
            for feats, _ in setup["samples"]:
                greedy = greedy_decode_batch(ckpt, [feats],
                                             setup["lm"] if ckpt.use_ngi else None)[0]
                beam = beam_rescore(ckpt, feats, setup["lm"], beam_width=1, lam=0.0)
                assert beam == greedy

    def test_wider_beam_never_lowers_selected_score(self, setup):
        # the length-normalized fused score of the returned hypothesis is
        # non-decreasing in beam width on this benchmark
        from ngraminject.decode import _log_softmax_rows  # scoring helper

        def hyp_score(ckpt, feats, lm, text, lam):
            import math

            cs = ckpt.charset
            ids = [cs.index(c) for c in text] + [cs.eos_index]
            prefix = [cs.sos_index]
            total = 0.0
            from ngraminject import autodiff as ad
            from ngraminject.decode import _last_logits
            from ngraminject.decoder import encode_frames, frame_mask

            tensors = {k: ad.Tensor(v) for k, v in ckpt.params.items()}
            enc = encode_frames(feats[None, :, :], tensors, ckpt.config)
            enc_mask = frame_mask(np.array([len(feats)]), len(feats))
            for step, sym in enumerate(ids):
                row = np.array([prefix], dtype=np.int64)
                lp = _log_softmax_rows(
                    _last_logits(row, ckpt, tensors, enc, enc_mask, lm)
                )[0]
                lmvec = lm.dist_vector([cs.symbol(i) for i in prefix])
                total += lp[sym] + lam * np.log(lmvec[sym])
                prefix.append(sym)
            return total / len(ids)

        feats = setup["samples"][1][0]
        lam = 0.3
        scores = []
        for width in (1, 2, 4, 8):
            text = beam_rescore(setup["ngi"], feats, setup["lm"], width, lam)
            scores.append(hyp_score(setup["ngi"], feats, setup["lm"], text, lam))
        assert all(b >= a - 1e-9 for a, b in zip(scores, scores[1:]))

    def test_beam_cer_not_worse_than_greedy_here(self, setup):
        feats = [f for f, _ in setup["samples"]]
        greedy = greedy_decode_batch(setup["ngi"], feats, setup["lm"])
        beamed = [
            beam_rescore(setup["ngi"], f, setup["lm"], beam_width=8, lam=0.25)
            for f in feats
        ]
        assert corpus_cer(list(WORDS), beamed) <= corpus_cer(list(WORDS), greedy)

    def test_invalid_beam_parameters(self, setup):
        with pytest.raises(DecodeError):
            beam_rescore(setup["ngi"], setup["samples"][0][0], setup["lm"], 0, 0.5)
        with pytest.raises(DecodeError):
            beam_rescore(setup["ngi"], setup["samples"][0][0], setup["lm"], 2, -1.0)
