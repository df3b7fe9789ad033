"""Command-line entry point exposing every pipeline stage.

Subcommands: estimate, ppl, split, audit, synth, train, eval, rescore,
experiment.  Every invocation is deterministic given its inputs and --seed
(``NGI_SEED`` in the environment is the fallback seed), writes only under the
--out location, and logs its fully resolved configuration next to the primary
output.  Exit codes: 0 success, 1 usage error, 2 data/input error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .arpa import ArpaFormatError, fingerprint, read_arpa, write_arpa
from .charset import Corpus, CorpusError, build_charset
from .checkpoint import Checkpoint, CheckpointError
from .counting import count_ngrams
from .decode import DecodeError, beam_rescore, greedy_decode_batch
from .decoder import desk_config
from .experiment import (
    ExperimentConfig,
    derive_seed,
    make_benchmark_corpus,
    run_experiment,
)
from .inject import NoiseConfig
from .metrics import corpus_cer
from .ngram import ScoreError
from .split import SplitError, SplitManifest, audit, kmeans_split, lexicon_split
from .synth import SynthConfig, default_confusion_pairs, save_dataset, synth_generate
from .train import TrainConfig, fit
from .wittenbell import estimate_wb

DATA_ERRORS = (
    CorpusError,
    ArpaFormatError,
    ScoreError,
    SplitError,
    CheckpointError,
    DecodeError,
    FileNotFoundError,
    ValueError,
)


def _default_seed() -> int:
    return int(os.environ.get("NGI_SEED", "0"))


def _log_config(out: Path, args: argparse.Namespace) -> None:
    """Record the resolved invocation next to the primary output."""
    resolved = {k: str(v) if isinstance(v, Path) else v for k, v in vars(args).items()}
    resolved.pop("func", None)
    target = out / "config.json" if out.is_dir() else out.with_name(out.name + ".config.json")
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(json.dumps(resolved, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _load_subset(args) -> tuple[Corpus, SplitManifest, list[int]]:
    corpus = Corpus.from_file(args.corpus)
    manifest = SplitManifest.load(args.manifest)
    manifest.validate(corpus)
    return corpus, manifest, list(manifest.part(args.subset))


def _synth_config(corpus: Corpus, args) -> SynthConfig:
    charset = build_charset(corpus)
    pairs = default_confusion_pairs(charset, args.confusion_pairs)
    return SynthConfig(
        charset=charset,
        proto_dim=args.proto_dim,
        noise_sigma=args.synth_sigma,
        confusion_pairs=pairs,
    )


def cmd_estimate(args) -> int:
    corpus = Corpus.from_file(args.corpus)
    model = estimate_wb(count_ngrams(corpus, args.order), build_charset(corpus))
    write_arpa(model, args.out)
    _log_config(args.out, args)
    print(f"wrote order-{args.order} model ({fingerprint(model)[:12]}) to {args.out}")
    return 0


def cmd_ppl(args) -> int:
    model = read_arpa(args.model)
    corpus = Corpus.from_file(args.corpus)
    print(f"{model.perplexity(corpus):.6f}")
    return 0


def cmd_split(args) -> int:
    corpus = Corpus.from_file(args.corpus)
    splitter = {"lexicon": lexicon_split, "kmeans": kmeans_split}[args.strategy]
    manifest = splitter(corpus, args.seed)
    manifest.save(args.out)
    _log_config(args.out, args)
    sizes = ", ".join(f"{k}={len(v)}" for k, v in manifest.parts().items())
    print(f"wrote {args.strategy} manifest to {args.out} ({sizes})")
    return 0


def cmd_audit(args) -> int:
    corpus = Corpus.from_file(args.corpus)
    manifest = SplitManifest.load(args.manifest)
    report = audit(manifest, corpus, args.order)
    print(report.render())
    if args.out:
        Path(args.out).write_text(
            json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        _log_config(Path(args.out), args)
    return 0


def cmd_synth(args) -> int:
    corpus = Corpus.from_file(args.corpus)
    cfg = _synth_config(corpus, args)
    samples, _ = synth_generate(cfg, corpus.words, args.seed)
    out = Path(args.out)
    save_dataset(samples, out)
    _log_config(out, args)
    print(f"wrote {len(samples)} samples to {out}")
    return 0


def cmd_train(args) -> int:
    corpus, manifest, indices = _load_subset_train(args)
    charset = build_charset(corpus)
    cfg = _synth_config(corpus, args)
    samples, _ = synth_generate(cfg, corpus.words, derive_seed(args.seed, "synth"))
    dataset = [samples[i] for i in indices]
    lm = None
    lm_print = None
    if args.ngi == "on":
        dev = list(manifest.source_train) + list(manifest.source_val)
        lm = estimate_wb(count_ngrams(corpus.subset(dev), args.order), charset)
        lm_print = fingerprint(lm)
    train_cfg = TrainConfig(
        steps=args.steps,
        batch_size=args.batch,
        lr=args.lr,
        tfe_prob=args.tfe,
        noise=NoiseConfig(args.noise_a, args.noise_b, args.noise_tau),
        log_every=args.log_every,
    )
    config = desk_config(charset.K, proto_dim=args.proto_dim)
    result = fit(dataset, charset, config, train_cfg, lm, derive_seed(args.seed, "train"))
    ckpt = Checkpoint(
        params=result.params, config=config, charset=charset, seed=args.seed,
        use_ngi=lm is not None, lm_fingerprint=lm_print, length_cap=result.length_cap,
    )
    ckpt.save(args.out)
    _log_config(Path(args.out), args)
    print(f"trained {args.steps} steps (final loss {result.losses[-1]:.4f}) -> {args.out}")
    return 0


def _load_subset_train(args) -> tuple[Corpus, SplitManifest, list[int]]:
    corpus = Corpus.from_file(args.corpus)
    manifest = SplitManifest.load(args.manifest)
    manifest.validate(corpus)
    return corpus, manifest, list(manifest.source_train)


def _eval_common(args, beam: bool) -> int:
    corpus, _, indices = _load_subset(args)
    ckpt = Checkpoint.load(args.ckpt)
    cfg = _synth_config(corpus, args)
    samples, _ = synth_generate(cfg, corpus.words, derive_seed(args.seed, "synth"))
    feats = [samples[i][0] for i in indices]
    refs = [samples[i][1] for i in indices]
    lm = read_arpa(args.lm) if args.lm else None
    if beam:
        if lm is None:
            raise DecodeError("rescoring requires --lm")
        hyps = [beam_rescore(ckpt, f, lm, args.beam, getattr(args, "lam")) for f in feats]
        mode = "beam"
    else:
        hyps = greedy_decode_batch(ckpt, feats, lm)
        mode = "greedy"
    value = corpus_cer(refs, hyps)
    print(f"{mode} cer on {args.subset} ({len(refs)} samples): {100 * value:.3f}%")
    if args.out:
        doc = {
            "cer": value,
            "mode": mode,
            "subset": args.subset,
            "n_samples": len(refs),
            "lm_fingerprint": fingerprint(lm) if lm else None,
        }
        Path(args.out).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", "utf-8")
        _log_config(Path(args.out), args)
    return 0


def cmd_eval(args) -> int:
    return _eval_common(args, beam=False)


def cmd_rescore(args) -> int:
    return _eval_common(args, beam=True)


def cmd_experiment(args) -> int:
    if args.preset != "desk":
        raise ValueError(f"unknown preset {args.preset!r}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    corpus = make_benchmark_corpus(args.seed)
    manifest = lexicon_split(corpus, derive_seed(args.seed, "split"))
    cfg = ExperimentConfig(ablations=args.ablations, beam=args.beam, jobs=args.jobs)
    report = run_experiment(corpus, manifest, cfg, args.seed, log=not args.quiet)
    report.save(out / "report.json")
    corpus.to_file(out / "corpus.txt")
    manifest.save(out / "manifest.json")
    (out / "report.txt").write_text(report.render() + "\n", encoding="utf-8")
    _log_config(out, args)
    print(report.render())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ngraminject",
        description="Character n-gram models, shifted splits, and n-gram-conditioned decoding.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_seed_out(p, out_required=True, out_help="primary output path"):
        p.add_argument("--seed", type=int, default=_default_seed(),
                       help="random seed (default: $NGI_SEED or 0)")
        p.add_argument("--out", type=Path, required=out_required, help=out_help)

    p = sub.add_parser("estimate", help="estimate an n-gram model, write ARPA")
    p.add_argument("corpus", type=Path)
    p.add_argument("--order", type=int, default=5)
    add_seed_out(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("ppl", help="perplexity of an ARPA model on a corpus")
    p.add_argument("model", type=Path)
    p.add_argument("corpus", type=Path)
    p.set_defaults(func=cmd_ppl)

    p = sub.add_parser("split", help="build a source/target split manifest")
    p.add_argument("corpus", type=Path)
    p.add_argument("--strategy", choices=("lexicon", "kmeans"), default="lexicon")
    add_seed_out(p)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("audit", help="cross-perplexity report for a manifest")
    p.add_argument("manifest", type=Path)
    p.add_argument("corpus", type=Path)
    p.add_argument("--order", type=int, default=5)
    add_seed_out(p, out_required=False, out_help="optional JSON report path")
    p.set_defaults(func=cmd_audit)

    def add_synth_flags(p):
        p.add_argument("--proto-dim", type=int, default=16, dest="proto_dim")
        p.add_argument("--synth-sigma", type=float, default=0.3, dest="synth_sigma")
        p.add_argument("--confusion-pairs", type=int, default=2, dest="confusion_pairs")

    p = sub.add_parser("synth", help="generate the synthetic feature dataset")
    p.add_argument("corpus", type=Path)
    add_synth_flags(p)
    add_seed_out(p, out_help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a recognizer on the source train subset")
    p.add_argument("--corpus", type=Path, required=True)
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--ngi", choices=("on", "off"), default="on",
                   help="condition the decoder on the source n-gram")
    p.add_argument("--order", type=int, default=5)
    p.add_argument("--tfe", type=float, default=0.1)
    p.add_argument("--noise-a", type=float, default=-0.1, dest="noise_a")
    p.add_argument("--noise-b", type=float, default=0.1, dest="noise_b")
    p.add_argument("--noise-tau", type=float, default=0.2, dest="noise_tau")
    p.add_argument("--steps", type=int, default=1200)
    p.add_argument("--batch", type=int, default=64)
    p.add_argument("--lr", type=float, default=3e-4)
    p.add_argument("--log-every", type=int, default=0, dest="log_every")
    add_synth_flags(p)
    add_seed_out(p, out_help="checkpoint path (.npz)")
    p.set_defaults(func=cmd_train)

    def add_eval_flags(p):
        p.add_argument("--ckpt", type=Path, required=True)
        p.add_argument("--corpus", type=Path, required=True)
        p.add_argument("--manifest", type=Path, required=True)
        p.add_argument("--subset", default="target_test",
                       choices=("source_train", "source_val", "source_test",
                                "target_ng", "target_test"))
        p.add_argument("--lm", type=Path, default=None, help="ARPA model")
        add_synth_flags(p)
        add_seed_out(p, out_required=False, out_help="optional JSON result path")

    p = sub.add_parser("eval", help="greedy-decode a subset and report CER")
    add_eval_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("rescore", help="fused beam search on a subset, report CER")
    add_eval_flags(p)
    p.add_argument("--beam", type=int, default=150)
    p.add_argument("--lambda", type=float, default=0.5, dest="lam")
    p.set_defaults(func=cmd_rescore)

    p = sub.add_parser("experiment", help="full benchmark grid")
    p.add_argument("--preset", default="desk")
    p.add_argument("--ablations", action="store_true")
    p.add_argument("--beam", action="store_true")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--quiet", action="store_true")
    add_seed_out(p, out_help="output directory")
    p.set_defaults(func=cmd_experiment)

    return parser


def run_cli(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exit_:
        return 0 if exit_.code in (0, None) else 1
    try:
        return args.func(args)
    except DATA_ERRORS as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run_cli())
