"""Character n-gram language models with swappable decoder conditioning.

The package covers the full pipeline: Witten-Bell character n-grams with
bit-stable ARPA serialization, perplexity auditing, language-shift corpus
splits, noisy distribution-vector conditioning of an autoregressive
transformer decoder, training with prefix corruption, and greedy or fused
beam-search decoding where the n-gram model can be exchanged without
retraining.
"""

from .arpa import ArpaFormatError, fingerprint, read_arpa, write_arpa
from .charset import EOS, SOS, Charset, Corpus, CorpusError, build_charset
from .checkpoint import Checkpoint
from .counting import CountTable, count_ngrams
from .decode import beam_rescore, greedy_decode, greedy_decode_batch
from .decoder import DecoderConfig, desk_config, init_params, positional_encoding
from .experiment import (
    ExperimentConfig,
    ExperimentReport,
    make_benchmark_corpus,
    run_benchmark,
    run_experiment,
)
from .inject import (
    NoiseConfig,
    ProjectionParams,
    apply_noise,
    assemble_sngi,
    build_decoder_input,
    project_f,
)
from .metrics import cer, corpus_cer, levenshtein
from .ngram import NgramModel, ScoreError, uniform_model
from .split import (
    SplitManifest,
    audit,
    kmeans2,
    kmeans_split,
    lexicon_split,
    twogram_embed,
)
from .synth import SynthConfig, nearest_prototype_decode, synth_generate
from .train import TrainConfig, fit, train_step
from .wittenbell import estimate_wb

__version__ = "0.1.0"

__all__ = [
    "ArpaFormatError",
    "Charset",
    "Checkpoint",
    "Corpus",
    "CorpusError",
    "CountTable",
    "DecoderConfig",
    "EOS",
    "ExperimentConfig",
    "ExperimentReport",
    "NgramModel",
    "NoiseConfig",
    "ProjectionParams",
    "SOS",
    "ScoreError",
    "SplitManifest",
    "SynthConfig",
    "TrainConfig",
    "apply_noise",
    "assemble_sngi",
    "audit",
    "beam_rescore",
    "build_charset",
    "build_decoder_input",
    "cer",
    "corpus_cer",
    "count_ngrams",
    "desk_config",
    "estimate_wb",
    "fingerprint",
    "fit",
    "greedy_decode",
    "greedy_decode_batch",
    "init_params",
    "kmeans2",
    "kmeans_split",
    "levenshtein",
    "lexicon_split",
    "make_benchmark_corpus",
    "nearest_prototype_decode",
    "positional_encoding",
    "project_f",
    "read_arpa",
    "run_benchmark",
    "run_experiment",
    "synth_generate",
    "train_step",
    "twogram_embed",
    "uniform_model",
    "write_arpa",
]
