"""Noise application, distribution-matrix assembly, and the input projection."""

import math

import numpy as np
import pytest

from ngraminject import autodiff as ad
from ngraminject.charset import EOS, SOS, Charset, Corpus, build_charset
from ngraminject.counting import count_ngrams
from ngraminject.inject import (
    CLAMP_FLOOR,
    NoiseConfig,
    ProjectionParams,
    apply_noise,
    assemble_sngi,
    build_decoder_input,
    project_f,
    uniform_noise,
)
from ngraminject.ngram import uniform_model
from ngraminject.wittenbell import estimate_wb

from oracles import WbOracle


def ab_model(n=2):
    corpus = Corpus(("ab",))
    return estimate_wb(count_ngrams(corpus, n), build_charset(corpus))


class TestNoiseConfig:
    def test_defaults(self):
        cfg = NoiseConfig()
        assert (cfg.a, cfg.b, cfg.tau) == (-0.1, 0.1, 0.2)

    def test_validation(self):
        with pytest.raises(ValueError):
            NoiseConfig(a=0.2, b=0.1)
        with pytest.raises(ValueError):
            NoiseConfig(tau=1.5)


class TestApplyNoise:
    def test_tau_zero_is_identity(self):
        rng = np.random.default_rng(0)
        s = np.array([0.3, 0.7])
        out = apply_noise(s, NoiseConfig(tau=0.0), rng)
        np.testing.assert_array_equal(out, s)

    def test_zero_bounds_identity_up_to_renormalization(self):
        rng = np.random.default_rng(0)
        s = np.array([0.25, 0.75])
        out = apply_noise(s, NoiseConfig(a=0.0, b=0.0, tau=1.0), rng)
        np.testing.assert_allclose(out, s, atol=1e-15)

    def test_forced_arithmetic(self):
        # epsilon (-0.1, +0.1) on [0.5, 0.5] stays a valid distribution
        out = (np.array([0.5, 0.5]) + np.array([-0.1, 0.1]))
        out = np.maximum(out, CLAMP_FLOOR)
        np.testing.assert_allclose(out / out.sum(), [0.4, 0.6], atol=1e-15)

    def test_clamp_then_renormalize(self):
        # pinned rule applied by hand: [0.05,0.95] + [-0.1,+0.1]
        v = np.array([0.05, 0.95]) + np.array([-0.1, 0.1])
        clamped = np.maximum(v, CLAMP_FLOOR)
        expected = clamped / clamped.sum()
        rng = np.random.default_rng(0)

        class FixedRng:
            def random(self):
                return 0.0  # always apply

            def uniform(self, a, b, size):
                return np.array([-0.1, 0.1])

        out = apply_noise(np.array([0.05, 0.95]), NoiseConfig(tau=1.0), FixedRng())
        np.testing.assert_allclose(out, expected, atol=1e-15)
        assert out[0] == pytest.approx(9.52381e-9, rel=1e-4)
        assert out.sum() == pytest.approx(1.0, abs=1e-15)

    def test_output_always_valid_distribution(self):
        rng = np.random.default_rng(42)
        cfg = NoiseConfig(tau=1.0)
        for _ in range(200):
            s = rng.dirichlet(np.ones(6))
            out = apply_noise(s, cfg, rng)
            assert out.min() > 0
            assert out.sum() == pytest.approx(1.0, abs=1e-6)

    def test_noise_mean_matches_midpoint(self):
        # mean perturbation before renormalization is (a+b)/2 per component
        rng = np.random.default_rng(7)
        cfg = NoiseConfig(a=-0.1, b=0.3, tau=1.0)
        draws = np.stack([uniform_noise(cfg, 4, rng) for _ in range(100_000)])
        se = (cfg.b - cfg.a) / math.sqrt(12 * len(draws))
        for k in range(4):
            assert abs(draws[:, k].mean() - 0.1) < 3 * se


class TestAssemble:
    def test_single_row_uniform(self):
        m = uniform_model(Charset(("a", "b")))
        s = assemble_sngi(m, [SOS], NoiseConfig(), None, train_mode=False)
        np.testing.assert_allclose(s, [[1 / 3, 1 / 3, 1 / 3]], atol=1e-15)

    def test_rows_follow_prefix_contexts(self):
        m = ab_model()
        s = assemble_sngi(m, [SOS, "a"], NoiseConfig(), None, train_mode=False)
        oracle = WbOracle(("ab",), 2, ("a", "b"))
        expected = [
            [oracle.prob([SOS], w) for w in ("a", "b", EOS)],
            [oracle.prob(["a"], w) for w in ("a", "b", EOS)],
        ]
        np.testing.assert_allclose(s, expected, atol=1e-12)

    def test_inference_mode_deterministic(self):
        m = ab_model()
        a = assemble_sngi(m, [SOS, "a", "b"], NoiseConfig(), None, train_mode=False)
        b = assemble_sngi(m, [SOS, "a", "b"], NoiseConfig(), None, train_mode=False)
        np.testing.assert_array_equal(a, b)

    def test_rows_stay_normalized_with_noise(self):
        m = ab_model()
        rng = np.random.default_rng(5)
        s = assemble_sngi(m, [SOS, "a", "b", "a"], NoiseConfig(tau=1.0), rng, True)
        np.testing.assert_allclose(s.sum(axis=1), 1.0, atol=1e-6)
        assert (s >= 0).all()

    def test_prefix_must_start_with_sos(self):
        with pytest.raises(ValueError):
            assemble_sngi(ab_model(), ["a"], NoiseConfig(), None, False)

    def test_out_of_charset_prefix_rejected(self):
        from ngraminject.ngram import ScoreError

        with pytest.raises(ScoreError):
            assemble_sngi(ab_model(), [SOS, "z"], NoiseConfig(), None, False)


def make_proj(rng, k, d):
    return ProjectionParams(
        w=rng.normal(size=(k, d)),
        b=rng.normal(size=(d,)),
        gain=rng.normal(size=(d,)) + 1.0,
        offset=rng.normal(size=(d,)),
    )


class TestProjection:
    def test_zero_params_give_zero_rows(self):
        k, d = 3, 6
        params = ProjectionParams(np.zeros((k, d)), np.zeros(d), np.ones(d), np.zeros(d))
        s = np.random.default_rng(0).dirichlet(np.ones(k), size=4)
        out = project_f(s, params)
        np.testing.assert_array_equal(out.value, np.zeros((4, d)))

    def test_shape(self):
        rng = np.random.default_rng(1)
        params = make_proj(rng, 5, 8)
        for t in (1, 3, 7):
            s = rng.dirichlet(np.ones(5), size=t)
            assert project_f(s, params).value.shape == (t, 8)

    def test_dimension_mismatch_rejected(self):
        rng = np.random.default_rng(2)
        params = make_proj(rng, 5, 8)
        with pytest.raises(ValueError):
            project_f(rng.dirichlet(np.ones(4), size=2), params)

    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(3)
        k, d, t = 4, 6, 3
        arrays = {
            "w": rng.normal(size=(k, d)),
            "b": rng.normal(size=(d,)),
            "g": rng.normal(size=(d,)) + 1.0,
            "o": rng.normal(size=(d,)),
        }
        s = rng.dirichlet(np.ones(k), size=t)
        coeff = rng.normal(size=(t, d))

        def loss_value(arr):
            params = ProjectionParams(arr["w"], arr["b"], arr["g"], arr["o"])
            return float(ad.tsum(ad.mul(project_f(s, params), coeff)).value)

        tensors = {name: ad.Tensor(v, requires_grad=True) for name, v in arrays.items()}
        out = ad.tsum(
            ad.mul(
                project_f(s, ProjectionParams(tensors["w"], tensors["b"],
                                              tensors["g"], tensors["o"])),
                coeff,
            )
        )
        out.backward()
        h = 1e-6
        for name, arr in arrays.items():
            flat = arr.reshape(-1)
            got = tensors[name].grad.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + h
                up = loss_value(arrays)
                flat[i] = orig - h
                down = loss_value(arrays)
                flat[i] = orig
                fd = (up - down) / (2 * h)
                assert got[i] == pytest.approx(fd, rel=1e-4, abs=1e-7), f"{name}[{i}]"


class TestBuildDecoderInput:
    def setup_method(self):
        self.rng = np.random.default_rng(4)
        self.k, self.d, self.t = 4, 6, 3
        self.embed = self.rng.normal(size=(self.k + 1, self.d))
        self.pos = self.rng.normal(size=(10, self.d))
        self.prev = np.array([self.k, 0, 2])  # start marker first
        self.s = self.rng.dirichlet(np.ones(self.k), size=self.t)

    def test_zero_projection_reduces_to_embedding_plus_position(self):
        zero = ProjectionParams(
            np.zeros((self.k, self.d)), np.zeros(self.d), np.ones(self.d), np.zeros(self.d)
        )
        out = build_decoder_input(self.s, zero, self.prev, self.embed, self.pos)
        np.testing.assert_allclose(
            out.value, self.embed[self.prev] + self.pos[: self.t], atol=1e-15
        )

    def test_components_add_linearly(self):
        params = make_proj(self.rng, self.k, self.d)
        full = build_decoder_input(self.s, params, self.prev, self.embed, self.pos)
        proj_only = build_decoder_input(
            self.s, params, self.prev, np.zeros_like(self.embed), np.zeros_like(self.pos)
        )
        np.testing.assert_allclose(
            full.value,
            proj_only.value + self.embed[self.prev] + self.pos[: self.t],
            atol=1e-12,
        )

    def test_single_step(self):
        params = make_proj(self.rng, self.k, self.d)
        out = build_decoder_input(
            self.s[:1], params, self.prev[:1], self.embed, self.pos
        )
        expected = project_f(self.s[:1], params).value + self.embed[self.k] + self.pos[0]
        np.testing.assert_allclose(out.value, expected, atol=1e-12)

    def test_length_mismatch_rejected(self):
        params = make_proj(self.rng, self.k, self.d)
        with pytest.raises(ValueError):
            build_decoder_input(
                np.vstack([self.s, self.s]), params, self.prev, self.embed, self.pos
            )
