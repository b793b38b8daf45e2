"""Command-line pipeline: generate data, train, annotate, synthesize,
evaluate, and plot, with one JSON config and reproducible outputs.

Exit codes: 0 success, 1 validation problem (bad flags, config, or inputs),
2 runtime failure (I/O errors, corrupt files, diverged training). Every
mutating command writes a run manifest recording the command, the resolved
config hash, the seed, and the files it produced.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .annotator import (
    annotate,
    annotator_from_checkpoint,
    train_annotator,
)
from .checkpoint import (
    CheckpointError,
    describe_checkpoint,
    load_checkpoint,
    save_checkpoint,
)
from .config import ConfigError, PipelineConfig, load_config
from .corpus import (
    Corpus,
    build_corpus,
    load_corpus,
    majority_category,
    make_emotion_basis,
)
from .data import (
    EMOTIONS,
    NUM_EMOTIONS,
    AlignmentError,
    SpanError,
    Utterance,
    WordEmotionAnnotation,
    read_json,
    write_json,
)
from .metrics import (
    EmotionTrajectory,
    UtteranceEval,
    evaluate_corpus,
    one_hot_trajectory,
)
from .plots import plot_category_accuracy, plot_trajectory_overlay
from .tts import generate, train_tts, tts_from_checkpoint

COMMANDS = (
    "gen-data",
    "train-annotator",
    "annotate",
    "train-tts",
    "synthesize",
    "evaluate",
    "plot",
    "pipeline",
)

_MISSING = "<missing>"


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse variant that reports usage problems as exit status 1."""

    def error(self, message: str) -> None:  # type: ignore[override]
        raise _UsageError(message)


# ---------------------------------------------------------------------------
# small helpers
# ---------------------------------------------------------------------------


def _write_jsonl(path: Path, records: list[dict]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [json.dumps(record, sort_keys=True) for record in records]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def _write_run_manifest(
    directory: Path, command: str, config: PipelineConfig, produced: list[Path]
) -> Path:
    name = f"run_manifest_{command.replace('-', '_')}.json"
    manifest_path = directory / name
    relative = sorted(
        os.path.relpath(p.resolve(), directory.resolve()).replace(os.sep, "/")
        for p in produced
    )
    write_json(
        manifest_path,
        {
            "command": command,
            "config_hash": config.hash,
            "seed": config.seed,
            "produced_files": relative,
        },
    )
    return manifest_path


def _load_corpus(config: PipelineConfig) -> Corpus:
    return load_corpus(config.corpus_dir / "index.json")


def _utterance_seed(seed: int, utterance_id: str) -> int:
    digest = hashlib.sha256(f"{seed}:{utterance_id}".encode()).digest()
    return int.from_bytes(digest[:4], "big")


def _conditioning(utterance: Utterance, source: str):
    """Annotations handed to generate() under an annotation source."""
    if source == "none":
        return None
    if utterance.annotations is None:
        raise ValueError(f"utterance {utterance.utterance_id!r} has no annotations")
    if source == "global_only":
        label = utterance.global_label or majority_category(utterance.annotations)
        return [WordEmotionAnnotation(label, 1.0)] * len(utterance.words)
    return list(utterance.annotations)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _cmd_gen_data(config: PipelineConfig) -> list[Path]:
    basis = make_emotion_basis(
        NUM_EMOTIONS,
        config.basis_dim,
        seed=config.seed,
        noise_sigma=config.basis_noise_sigma,
    )
    index_path = build_corpus(config.corpus_spec, basis, config.corpus_dir)
    produced = [index_path]
    index = read_json(index_path)
    for rel in index["utterances"]:
        manifest = config.corpus_dir / rel
        produced.append(manifest)
        produced.append(manifest.parent / "alignment.jsonl")
        produced.append(manifest.parent / "features.json")
    produced.append(_write_run_manifest(config.corpus_dir, "gen-data", config, produced))
    return produced


def _cmd_train_annotator(config: PipelineConfig) -> list[Path]:
    corpus = _load_corpus(config)
    feature_dim = next(iter(corpus.utterances.values())).features.dim
    model_cfg = config.annotator_config(feature_dim)
    model, log = train_annotator(
        corpus, config.annotator_train, config.annotator_loss, model_cfg
    )
    checkpoint_path = save_checkpoint(
        config.checkpoint_dir / "annotator.json",
        kind="annotator",
        config={
            "model": model_cfg.to_dict(),
            "train": config.annotator_train.to_dict(),
            "loss": config.annotator_loss.to_dict(),
        },
        seed=config.seed,
        model=model,
    )
    log_path = _write_jsonl(config.checkpoint_dir / "annotator_train_log.jsonl", log)
    produced = [checkpoint_path, log_path]
    produced.append(
        _write_run_manifest(config.checkpoint_dir, "train-annotator", config, produced)
    )
    return produced


def _cmd_annotate(config: PipelineConfig) -> list[Path]:
    checkpoint = load_checkpoint(
        config.checkpoint_dir / "annotator.json", expect_kind="annotator"
    )
    model = annotator_from_checkpoint(checkpoint)
    corpus = _load_corpus(config)
    utterances = corpus.split_utterances(config.evaluate_split)
    results = {}
    n_correct = 0
    n_words = 0
    abs_error = 0.0
    have_gold = True
    for utterance in utterances:
        predictions = annotate(model, utterance)
        results[utterance.utterance_id] = {
            "words": [w.word for w in utterance.words],
            "annotations": [
                {"category": a.category, "intensity": a.intensity} for a in predictions
            ],
        }
        if utterance.annotations is None:
            have_gold = False
            continue
        for predicted, gold in zip(predictions, utterance.annotations):
            n_words += 1
            n_correct += int(predicted.category == gold.category)
            abs_error += abs(predicted.intensity - gold.intensity)
    payload: dict = {"split": config.evaluate_split, "utterances": results}
    if have_gold and n_words:
        payload["summary"] = {
            "word_accuracy": n_correct / n_words,
            "intensity_mae": abs_error / n_words,
            "n_words": n_words,
        }
    out_path = config.report_dir / "annotations.json"
    write_json(out_path, payload)
    produced = [out_path]
    produced.append(_write_run_manifest(config.report_dir, "annotate", config, produced))
    return produced


def _cmd_train_tts(config: PipelineConfig) -> list[Path]:
    corpus = _load_corpus(config)
    model_cfg = config.tts_config(len(corpus.text_vocab))
    model, log = train_tts(
        corpus,
        config.tts_train,
        config.tts_loss,
        model_cfg,
        annotation_source=config.annotation_source,
    )
    checkpoint_path = save_checkpoint(
        config.checkpoint_dir / "tts.json",
        kind="tts",
        config={
            "model": model_cfg.to_dict(),
            "train": config.tts_train.to_dict(),
            "loss": config.tts_loss.to_dict(),
            "annotation_source": config.annotation_source,
            "text_vocab": list(corpus.text_vocab),
        },
        seed=config.seed,
        model=model,
    )
    log_path = _write_jsonl(config.checkpoint_dir / "tts_train_log.jsonl", log)
    produced = [checkpoint_path, log_path]
    produced.append(
        _write_run_manifest(config.checkpoint_dir, "train-tts", config, produced)
    )
    return produced


def _cmd_synthesize(config: PipelineConfig) -> list[Path]:
    checkpoint = load_checkpoint(config.checkpoint_dir / "tts.json", expect_kind="tts")
    model = tts_from_checkpoint(checkpoint)
    corpus = _load_corpus(config)
    stored_vocab = checkpoint.config.get("text_vocab")
    if stored_vocab is not None and tuple(stored_vocab) != corpus.text_vocab:
        raise ValueError(
            "checkpoint text vocabulary does not match the corpus; "
            "regenerate or retrain before synthesizing"
        )
    source = checkpoint.config.get("annotation_source", "gold_word_level")
    out_dir = config.report_dir / "generated"
    produced = []
    ids = []
    for utterance in corpus.split_utterances(config.evaluate_split):
        token_ids = corpus.text_token_ids(utterance)
        annotations = _conditioning(utterance, source)
        seed = (
            _utterance_seed(config.seed, utterance.utterance_id)
            if config.generate_mode == "sampled"
            else None
        )
        result = generate(
            model,
            token_ids,
            annotations,
            max_len=config.generate_max_len,
            mode=config.generate_mode,
            seed=seed,
        )
        payload = result.to_dict()
        payload["utterance_id"] = utterance.utterance_id
        payload["text_tokens"] = token_ids
        path = out_dir / f"{utterance.utterance_id}.json"
        write_json(path, payload)
        produced.append(path)
        ids.append(utterance.utterance_id)
    index_path = out_dir / "index.json"
    write_json(
        index_path,
        {
            "split": config.evaluate_split,
            "mode": config.generate_mode,
            "annotation_source": source,
            "utterances": ids,
        },
    )
    produced.append(index_path)
    produced.append(_write_run_manifest(config.report_dir, "synthesize", config, produced))
    return produced


def _gold_eval(utterance: Utterance) -> UtteranceEval:
    if utterance.annotations is None:
        raise ValueError(f"utterance {utterance.utterance_id!r} has no annotations")
    codes = [a.code for a in utterance.annotations]
    step_codes = codes + [codes[-1]]
    return UtteranceEval(
        trajectory=one_hot_trajectory(step_codes, NUM_EMOTIONS),
        word_categories=tuple(a.category for a in utterance.annotations),
    )


def _generated_eval(payload: dict, n_words: int) -> UtteranceEval:
    posteriors = np.asarray(payload["posteriors"], dtype=np.float64)
    categories = []
    for word_index in range(n_words):
        if word_index < posteriors.shape[0]:
            categories.append(EMOTIONS[int(posteriors[word_index].argmax())])
        else:
            categories.append(_MISSING)
    return UtteranceEval(
        trajectory=EmotionTrajectory(posteriors, kind="posteriors"),
        word_categories=tuple(categories),
    )


def _cmd_evaluate(config: PipelineConfig) -> list[Path]:
    corpus = _load_corpus(config)
    generated_dir = config.report_dir / "generated"
    generated_index = read_json(generated_dir / "index.json")
    gold_map = {}
    generated_map = {}
    for utterance in corpus.split_utterances(config.evaluate_split):
        gold_map[utterance.utterance_id] = _gold_eval(utterance)
    for utterance_id in generated_index["utterances"]:
        payload = read_json(generated_dir / f"{utterance_id}.json")
        n_words = len(corpus.utterances[utterance_id].words)
        generated_map[utterance_id] = _generated_eval(payload, n_words)
    report = evaluate_corpus(generated_map, gold_map)
    report_path = config.report_dir / "report.json"
    write_json(
        report_path,
        {
            "split": config.evaluate_split,
            "mode": generated_index.get("mode"),
            "annotation_source": generated_index.get("annotation_source"),
            **report.to_dict(),
        },
    )
    csv_path = config.report_dir / "per_utterance.csv"
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    with csv_path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(
            ["utterance_id", "n_words", "words_correct", "dtw_cost", "emo_sim_percent"]
        )
        for row in report.per_utterance:
            writer.writerow(
                [
                    row["utterance_id"],
                    row["n_words"],
                    row["words_correct"],
                    repr(row["dtw_cost"]),
                    repr(row["emo_sim_percent"]),
                ]
            )
    produced = [report_path, csv_path]
    produced.append(_write_run_manifest(config.report_dir, "evaluate", config, produced))
    return produced


def _cmd_plot(config: PipelineConfig) -> list[Path]:
    corpus = _load_corpus(config)
    generated_dir = config.report_dir / "generated"
    report = read_json(config.report_dir / "report.json")
    plots_dir = config.report_dir / "plots"
    produced = []
    shown = corpus.split[config.evaluate_split][: config.plot_max_utterances]
    for utterance_id in shown:
        utterance = corpus.utterances[utterance_id]
        payload = read_json(generated_dir / f"{utterance_id}.json")
        posteriors = np.asarray(payload["posteriors"], dtype=np.float64)
        codes = [a.code for a in utterance.annotations or []]
        step_codes = codes + [codes[-1]] if codes else []
        produced.append(
            plot_trajectory_overlay(
                step_codes,
                posteriors,
                plots_dir / f"{utterance_id}.png",
                title=utterance_id,
            )
        )
    produced.append(
        plot_category_accuracy(
            report["per_category_accuracy"], plots_dir / "per_category_accuracy.png"
        )
    )
    produced.append(_write_run_manifest(config.report_dir, "plot", config, produced))
    return produced


def _cmd_pipeline(config: PipelineConfig) -> list[Path]:
    produced = []
    produced.extend(_cmd_gen_data(config))
    produced.extend(_cmd_train_annotator(config))
    produced.extend(_cmd_annotate(config))
    produced.extend(_cmd_train_tts(config))
    produced.extend(_cmd_synthesize(config))
    produced.extend(_cmd_evaluate(config))
    produced.extend(_cmd_plot(config))
    produced.append(_write_run_manifest(config.report_dir, "pipeline", config, produced))
    return produced


_HANDLERS = {
    "gen-data": _cmd_gen_data,
    "train-annotator": _cmd_train_annotator,
    "annotate": _cmd_annotate,
    "train-tts": _cmd_train_tts,
    "synthesize": _cmd_synthesize,
    "evaluate": _cmd_evaluate,
    "plot": _cmd_plot,
    "pipeline": _cmd_pipeline,
}


# ---------------------------------------------------------------------------
# argument parsing and dispatch
# ---------------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(
        prog="filmtts",
        description="Emotion-aware token synthesis pipeline",
    )
    parser.add_argument("--version", action="version", version=f"filmtts {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub = subparsers.add_parser(name, help=f"run the {name} stage")
        sub.add_argument("--config", help="path to a JSON config file")
        sub.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="PATH=VALUE",
            help="dotted-path config override, repeatable",
        )
        sub.add_argument("--seed", type=int, help="override the run seed")
    describe = subparsers.add_parser("describe", help="summarize a checkpoint file")
    describe.add_argument("checkpoint", help="path to a checkpoint JSON file")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return 1

    try:
        if args.command == "describe":
            checkpoint = load_checkpoint(args.checkpoint)
            print(describe_checkpoint(checkpoint))
            return 0
        config = load_config(args.config, args.overrides, args.seed)
        produced = _HANDLERS[args.command](config)
        print(f"{args.command}: wrote {len(produced)} files")
        return 0
    except json.JSONDecodeError as exc:
        print(f"error: invalid JSON: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, CheckpointError, AlignmentError, SpanError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
