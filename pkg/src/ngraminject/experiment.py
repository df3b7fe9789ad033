"""End-to-end benchmark: train recognizers on a shifted split and compare.

One experiment trains (i) a plain decoder and (ii) a decoder conditioned on
the source n-gram (with training noise and prefix corruption), then scores
the grid {plain, conditioned+source-lm, conditioned+target-lm} on the source
and target test subsets, in greedy mode and optionally with fused beam
search.  Optional ablation cells retrain with order-2 models or without
prefix corruption.  All cell seeds derive from the experiment seed and the
cell tag, so results are independent of execution order and of --jobs.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .arpa import fingerprint
from .charset import Charset, Corpus, build_charset
from .checkpoint import Checkpoint
from .counting import count_ngrams
from .decode import beam_rescore, greedy_decode_batch
from .decoder import DecoderConfig, desk_config
from .inject import NoiseConfig
from .metrics import corpus_cer
from .ngram import NgramModel
from .split import SplitManifest, lexicon_split
from .synth import Sample, SynthConfig, synth_generate
from .train import FitResult, TrainConfig, fit
from .wittenbell import estimate_wb

DESK_ALPHABET = "abcdefghijklmnopqrst"
DESK_CONFUSION_PAIRS = (("a", "e"), ("i", "o"))


def derive_seed(seed: int, tag: str) -> int:
    """Stable per-cell seed: hash of the experiment seed and the cell tag."""
    digest = hashlib.sha256(f"{seed}:{tag}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def make_benchmark_corpus(
    seed: int,
    n_types: int = 115,
    samples_per_type: int = 5,
    min_len: int = 4,
    max_len: int = 8,
    alphabet: str = DESK_ALPHABET,
    confusables: str = "aeio",
    confusable_rate: float = 0.4,
) -> Corpus:
    """Random word types with a boosted share of visually confusable
    characters, each type repeated ``samples_per_type`` times."""
    rng = np.random.default_rng(derive_seed(seed, "corpus"))
    plain = [c for c in alphabet if c not in confusables]
    types: list[str] = []
    seen: set[str] = set()
    while len(types) < n_types:
        length = int(rng.integers(min_len, max_len + 1))
        # First character is always visually clean so the opening step never
        # depends on language context alone; ambiguity lives mid-word.
        chars = [plain[rng.integers(len(plain))]]
        chars += [
            (confusables[rng.integers(len(confusables))]
             if rng.random() < confusable_rate
             else plain[rng.integers(len(plain))])
            for _ in range(length - 1)
        ]
        word = "".join(chars)
        if word not in seen:
            seen.add(word)
            types.append(word)
    words = [t for t in types for _ in range(samples_per_type)]
    perm = rng.permutation(len(words))
    return Corpus(tuple(words[i] for i in perm))


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment's knobs, besides the data itself."""

    order: int = 5
    train: TrainConfig = field(default_factory=TrainConfig)
    beam_width: int = 150
    lambda_grid: tuple[float, ...] = (0.0, 0.25, 0.5, 1.0)
    tune_samples: int = 16
    ablations: bool = False
    beam: bool = False
    beam_models: tuple[str, ...] = ("baseline", "ngi")
    beam_subsets: tuple[str, ...] = ("source_test", "target_test")
    jobs: int = 1


def desk_experiment_config(ablations: bool = False, beam: bool = False) -> ExperimentConfig:
    return ExperimentConfig(ablations=ablations, beam=beam)


def desk_synth_config(charset: Charset) -> SynthConfig:
    pairs = tuple(
        (a, b) for a, b in DESK_CONFUSION_PAIRS if a in charset and b in charset
    )
    return SynthConfig(charset=charset, proto_dim=16, noise_sigma=0.3, confusion_pairs=pairs)


@dataclass(frozen=True)
class EvalCell:
    """One evaluated grid cell."""

    model: str
    subset: str
    mode: str
    lm: Optional[str]
    lm_fingerprint: Optional[str]
    cer: float
    n_samples: int

    @property
    def key(self) -> str:
        return f"{self.model}/{self.subset}/{self.mode}/{self.lm or 'none'}"


@dataclass
class ExperimentReport:
    """Everything one experiment produced, serializable to JSON."""

    seed: int
    sizes: dict[str, int]
    cells: dict[str, EvalCell]
    lm_fingerprints: dict[str, str]
    fusion_lambda: dict[str, float]
    config: dict

    def cer(self, model: str, subset: str, mode: str = "greedy", lm: Optional[str] = None) -> float:
        return self.cells[f"{model}/{subset}/{mode}/{lm or 'none'}"].cer

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "sizes": dict(self.sizes),
            "config": self.config,
            "fusion_lambda": dict(self.fusion_lambda),
            "lm_fingerprints": dict(self.lm_fingerprints),
            "cells": {
                key: {
                    "model": c.model,
                    "subset": c.subset,
                    "mode": c.mode,
                    "lm": c.lm,
                    "lm_fingerprint": c.lm_fingerprint,
                    "cer": c.cer,
                    "n_samples": c.n_samples,
                }
                for key, c in sorted(self.cells.items())
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    def render(self) -> str:
        """Plain-text table: models down, source/target test CER across."""
        rows: dict[tuple[str, str, Optional[str]], dict[str, float]] = {}
        for c in self.cells.values():
            rows.setdefault((c.model, c.mode, c.lm), {})[c.subset] = c.cer
        lines = [
            f"{'model':<14}{'mode':<8}{'lm':<12}{'source test':>12}{'target test':>12}"
        ]
        for (model, mode, lm), by_subset in sorted(rows.items()):
            src = by_subset.get("source_test")
            tgt = by_subset.get("target_test")
            lines.append(
                f"{model:<14}{mode:<8}{lm or '-':<12}"
                f"{'' if src is None else format(100 * src, '.2f'):>12}"
                f"{'' if tgt is None else format(100 * tgt, '.2f'):>12}"
            )
        return "\n".join(lines)


def _estimate(corpus: Corpus, indices: Sequence[int], order: int, charset: Charset) -> NgramModel:
    return estimate_wb(count_ngrams(corpus.subset(indices), order), charset)


def _train_cell_worker(spec: dict) -> tuple[str, FitResult]:
    """Rebuilds its inputs from plain data so cells can run in subprocesses."""
    corpus = Corpus(tuple(spec["words"]))
    charset = build_charset(corpus)
    synth_cfg = SynthConfig(
        charset=charset,
        proto_dim=spec["proto_dim"],
        frames_per_char=spec["frames_per_char"],
        noise_sigma=spec["noise_sigma"],
        confusion_pairs=tuple(tuple(p) for p in spec["confusion_pairs"]),
    )
    samples, _ = synth_generate(synth_cfg, corpus.words, spec["synth_seed"])
    dataset = [samples[i] for i in spec["train_indices"]]
    lm = None
    if spec["lm_indices"] is not None:
        lm = _estimate(corpus, spec["lm_indices"], spec["lm_order"], charset)
    config = desk_config(charset.K, proto_dim=spec["proto_dim"])
    train_cfg = TrainConfig(
        steps=spec["steps"],
        batch_size=spec["batch_size"],
        lr=spec["lr"],
        warmup_steps=spec["warmup_steps"],
        tfe_prob=spec["tfe_prob"],
        noise=NoiseConfig(*spec["noise"]),
    )
    result = fit(dataset, charset, config, train_cfg, lm, spec["cell_seed"])
    return spec["tag"], result


def run_experiment(
    corpus: Corpus,
    manifest: SplitManifest,
    exp_cfg: ExperimentConfig,
    seed: int,
    synth_cfg: Optional[SynthConfig] = None,
    log: bool = False,
) -> ExperimentReport:
    """Train every requested cell and evaluate the full grid."""
    manifest.validate(corpus)
    charset = build_charset(corpus)
    if synth_cfg is None:
        synth_cfg = desk_synth_config(charset)
    if synth_cfg.charset.symbols != charset.symbols:
        raise ValueError("synthesizer charset must match the corpus charset")
    synth_seed = derive_seed(seed, "synth")
    samples, _ = synth_generate(synth_cfg, corpus.words, synth_seed)

    dev_indices = list(manifest.source_train) + list(manifest.source_val)
    lms: dict[str, NgramModel] = {
        "source": _estimate(corpus, dev_indices, exp_cfg.order, charset),
        "target": _estimate(corpus, manifest.target_ng, exp_cfg.order, charset),
    }
    if exp_cfg.ablations:
        lms["source_n2"] = _estimate(corpus, dev_indices, 2, charset)
        lms["target_n2"] = _estimate(corpus, manifest.target_ng, 2, charset)
    prints = {name: fingerprint(lm) for name, lm in lms.items()}

    t = exp_cfg.train
    base_spec = {
        "words": list(corpus.words),
        "proto_dim": synth_cfg.proto_dim,
        "frames_per_char": synth_cfg.frames_per_char,
        "noise_sigma": synth_cfg.noise_sigma,
        "confusion_pairs": [list(p) for p in synth_cfg.confusion_pairs],
        "synth_seed": synth_seed,
        "train_indices": list(manifest.source_train),
        "steps": t.steps,
        "batch_size": t.batch_size,
        "lr": t.lr,
        "warmup_steps": t.warmup_steps,
        "noise": (t.noise.a, t.noise.b, t.noise.tau),
    }
    cells = {
        "baseline": {"lm_indices": None, "lm_order": exp_cfg.order, "tfe_prob": t.tfe_prob},
        "ngi": {"lm_indices": dev_indices, "lm_order": exp_cfg.order, "tfe_prob": t.tfe_prob},
    }
    if exp_cfg.ablations:
        cells["ngi_n2"] = {"lm_indices": dev_indices, "lm_order": 2, "tfe_prob": t.tfe_prob}
        cells["ngi_no_tfe"] = {"lm_indices": dev_indices, "lm_order": exp_cfg.order, "tfe_prob": 0.0}
    specs = [
        dict(base_spec, tag=tag, cell_seed=derive_seed(seed, f"train:{tag}"), **cell)
        for tag, cell in cells.items()
    ]

    results: dict[str, FitResult] = {}
    if exp_cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=exp_cfg.jobs) as pool:
            for tag, result in pool.map(_train_cell_worker, specs):
                results[tag] = result
    else:
        for spec in specs:
            if log:
                print(f"training cell {spec['tag']} ...")
            tag, result = _train_cell_worker(spec)
            results[tag] = result

    config = desk_config(charset.K, proto_dim=synth_cfg.proto_dim)
    lm_used = {"baseline": None, "ngi": "source", "ngi_n2": "source_n2", "ngi_no_tfe": "source"}
    ckpts = {
        tag: Checkpoint(
            params=res.params,
            config=config,
            charset=charset,
            seed=derive_seed(seed, f"train:{tag}"),
            use_ngi=lm_used[tag] is not None,
            lm_fingerprint=prints.get(lm_used[tag]) if lm_used[tag] else None,
            length_cap=res.length_cap,
        )
        for tag, res in results.items()
    }

    feats = {
        name: [samples[i][0] for i in part]
        for name, part in manifest.parts().items()
    }
    refs = {
        name: [samples[i][1] for i in part]
        for name, part in manifest.parts().items()
    }

    report_cells: dict[str, EvalCell] = {}

    def add_greedy(model: str, subset: str, lm_name: Optional[str]) -> None:
        lm = lms[lm_name] if lm_name else None
        hyps = greedy_decode_batch(ckpts[model], feats[subset], lm)
        cell = EvalCell(
            model=model, subset=subset, mode="greedy", lm=lm_name,
            lm_fingerprint=prints.get(lm_name) if lm_name else None,
            cer=corpus_cer(refs[subset], hyps), n_samples=len(refs[subset]),
        )
        report_cells[cell.key] = cell

    add_greedy("baseline", "source_test", None)
    add_greedy("baseline", "target_test", None)
    for subset in ("source_test", "target_test"):
        for lm_name in ("source", "target"):
            add_greedy("ngi", subset, lm_name)
    if exp_cfg.ablations:
        add_greedy("ngi_n2", "source_test", "source_n2")
        add_greedy("ngi_n2", "target_test", "target_n2")
        add_greedy("ngi_no_tfe", "source_test", "source")
        add_greedy("ngi_no_tfe", "target_test", "target")

    fusion_lambda: dict[str, float] = {}
    if exp_cfg.beam:
        tune_feats = feats["source_val"][: exp_cfg.tune_samples]
        tune_refs = refs["source_val"][: exp_cfg.tune_samples]

        def tune(model: str) -> float:
            best_lam, best_cer = exp_cfg.lambda_grid[0], np.inf
            for lam in exp_cfg.lambda_grid:
                hyps = [
                    beam_rescore(ckpts[model], f, lms["source"], exp_cfg.beam_width, lam)
                    for f in tune_feats
                ]
                c = corpus_cer(tune_refs, hyps)
                if c < best_cer - 1e-12:
                    best_lam, best_cer = lam, c
            return best_lam

        def add_beam(model: str, subset: str, lm_name: str) -> None:
            lam = fusion_lambda[model]
            hyps = [
                beam_rescore(ckpts[model], f, lms[lm_name], exp_cfg.beam_width, lam)
                for f in feats[subset]
            ]
            cell = EvalCell(
                model=model, subset=subset, mode="beam", lm=lm_name,
                lm_fingerprint=prints[lm_name],
                cer=corpus_cer(refs[subset], hyps), n_samples=len(refs[subset]),
            )
            report_cells[cell.key] = cell

        for model in exp_cfg.beam_models:
            fusion_lambda[model] = tune(model)
            if log:
                print(f"fusion lambda[{model}] = {fusion_lambda[model]}")
            for subset in exp_cfg.beam_subsets:
                add_beam(model, subset, "source" if subset == "source_test" else "target")

    return ExperimentReport(
        seed=seed,
        sizes={name: len(part) for name, part in manifest.parts().items()},
        cells=report_cells,
        lm_fingerprints=prints,
        fusion_lambda=fusion_lambda,
        config={
            "order": exp_cfg.order,
            "steps": t.steps,
            "batch_size": t.batch_size,
            "lr": t.lr,
            "tfe_prob": t.tfe_prob,
            "noise": [t.noise.a, t.noise.b, t.noise.tau],
            "beam_width": exp_cfg.beam_width,
            "lambda_grid": list(exp_cfg.lambda_grid),
            "decoder": {"d": config.d, "heads": config.heads, "layers": config.layers},
            "charset_size": charset.K,
        },
    )


def run_benchmark(
    seeds: Sequence[int],
    ablations: bool = False,
    beam: bool = False,
    jobs: int = 1,
    log: bool = False,
    config: Optional[ExperimentConfig] = None,
) -> list[ExperimentReport]:
    """Desk-scale benchmark: fresh corpus, lexicon split and experiment per seed."""
    reports = []
    for seed in seeds:
        corpus = make_benchmark_corpus(seed)
        manifest = lexicon_split(corpus, derive_seed(seed, "split"))
        cfg = config or ExperimentConfig(ablations=ablations, beam=beam, jobs=jobs)
        reports.append(run_experiment(corpus, manifest, cfg, seed, log=log))
    return reports
