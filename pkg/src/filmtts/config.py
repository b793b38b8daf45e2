"""Run configuration: one JSON file, dotted-path overrides, one seed.

A single top-level seed drives corpus generation, both training runs, and
sampled decoding; per-stage RNG streams are derived from it internally, so
rerunning any command with the same resolved config reproduces identical
bytes.
"""

from __future__ import annotations

import copy
import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .annotator import AnnotatorConfig, AnnotatorLossConfig
from .corpus import CorpusSpec
from .data import read_json
from .training import TrainConfig
from .tts import ANNOTATION_SOURCES, GenLossConfig, TtsConfig

CONFIG_ENV_VAR = "FILMTTS_CONFIG"


class ConfigError(ValueError):
    """Invalid configuration file, override, or value."""


def default_config() -> dict:
    """Built-in configuration: a small strong-transition pipeline that runs
    end to end in a couple of minutes on one CPU core."""
    return {
        "seed": 0,
        "paths": {
            "corpus_dir": "runs/corpus",
            "checkpoint_dir": "runs/checkpoints",
            "report_dir": "runs/report",
        },
        "corpus": {
            "n_utterances": 120,
            "words_per_utterance_range": [6, 10],
            "frames_per_word_range": [4, 10],
            "transition_kind": "strong",
            "text_vocab_size": 8,
            "speakers": ["spk_a", "spk_b"],
            "hop_s": 0.02,
        },
        "basis": {"dim": 16, "noise_sigma": 0.5},
        "annotator": {
            "model": {"hidden_dim": 64, "num_layers": 2, "num_heads": 4, "ff_dim": 128},
            "train": {"learning_rate": 2e-3, "batch_size": 4, "epochs": 6},
            "loss": {"lambda_cls": 1.0, "lambda_reg": 1.0},
        },
        "tts": {
            "model": {
                "embed_dim": 64,
                "emotion_dim": 32,
                "num_heads": 4,
                "ff_dim": 128,
                "decoder_layers": 1,
                "variant": "film",
            },
            "train": {"learning_rate": 2e-3, "batch_size": 4, "epochs": 20},
            "loss": {"epsilon": 0.1, "lambda_emo": 0.3},
            "annotation_source": "gold_word_level",
        },
        "generate": {"max_len": 64, "mode": "greedy"},
        "evaluate": {"split": "test"},
        "plot": {"max_utterances": 8},
    }


def _deep_merge(base: dict, overlay: dict, path: str = "") -> dict:
    merged = copy.deepcopy(base)
    for key, value in overlay.items():
        where = f"{path}.{key}" if path else key
        if key not in merged:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(merged[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{where!r} must be an object")
            merged[key] = _deep_merge(merged[key], value, where)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def apply_override(config: dict, assignment: str) -> None:
    """Apply one dotted-path override like tts.train.epochs=10 in place.

    Values parse as JSON when possible and fall back to bare strings, so
    both --set corpus.transition_kind=mild and --set seed=7 read naturally.
    """
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} must look like dotted.path=value")
    dotted, raw_value = assignment.split("=", 1)
    keys = [k for k in dotted.strip().split(".") if k]
    if not keys:
        raise ConfigError(f"override {assignment!r} has an empty path")
    try:
        value = json.loads(raw_value)
    except json.JSONDecodeError:
        value = raw_value
    node = config
    for step, key in enumerate(keys[:-1]):
        where = ".".join(keys[: step + 1])
        if key not in node or not isinstance(node[key], dict):
            raise ConfigError(f"unknown config section {where!r}")
        node = node[key]
    if keys[-1] not in node:
        raise ConfigError(f"unknown config key {dotted.strip()!r}")
    node[keys[-1]] = value


def config_hash(resolved: dict) -> str:
    canonical = json.dumps(resolved, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class PipelineConfig:
    """Typed view of one resolved run configuration."""

    seed: int
    corpus_dir: Path
    checkpoint_dir: Path
    report_dir: Path
    corpus_spec: CorpusSpec
    basis_dim: int
    basis_noise_sigma: float
    annotator_model: dict
    annotator_train: TrainConfig
    annotator_loss: AnnotatorLossConfig
    tts_model: dict
    tts_train: TrainConfig
    tts_loss: GenLossConfig
    annotation_source: str
    generate_max_len: int
    generate_mode: str
    evaluate_split: str
    plot_max_utterances: int
    resolved: dict

    def annotator_config(self, feature_dim: int) -> AnnotatorConfig:
        return AnnotatorConfig(feature_dim=feature_dim, **self.annotator_model)

    def tts_config(self, text_vocab_size: int) -> TtsConfig:
        return TtsConfig(text_vocab_size=text_vocab_size, **self.tts_model)

    @property
    def hash(self) -> str:
        return config_hash(self.resolved)


def _build(resolved: dict) -> PipelineConfig:
    try:
        seed = int(resolved["seed"])
        paths = resolved["paths"]
        corpus_spec = CorpusSpec.from_dict({**resolved["corpus"], "seed": seed})
        basis = resolved["basis"]
        basis_dim = int(basis["dim"])
        noise_sigma = float(basis["noise_sigma"])
        annotator_train = TrainConfig.from_dict(
            {**resolved["annotator"]["train"], "seed": seed}
        )
        annotator_loss = AnnotatorLossConfig.from_dict(resolved["annotator"]["loss"])
        tts_train = TrainConfig.from_dict({**resolved["tts"]["train"], "seed": seed})
        tts_loss = GenLossConfig.from_dict(resolved["tts"]["loss"])
        annotation_source = str(resolved["tts"]["annotation_source"])
        generate = resolved["generate"]
        max_len = int(generate["max_len"])
        mode = str(generate["mode"])
        evaluate_split = str(resolved["evaluate"]["split"])
        plot_max = int(resolved["plot"]["max_utterances"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc
    if annotation_source not in ANNOTATION_SOURCES:
        raise ConfigError(
            f"tts.annotation_source must be one of {ANNOTATION_SOURCES}, "
            f"got {annotation_source!r}"
        )
    if mode not in ("greedy", "sampled"):
        raise ConfigError(f"generate.mode must be greedy or sampled, got {mode!r}")
    if max_len < 1:
        raise ConfigError("generate.max_len must be >= 1")
    if basis_dim < 2:
        raise ConfigError("basis.dim must be >= 2")
    if plot_max < 0:
        raise ConfigError("plot.max_utterances must be >= 0")
    return PipelineConfig(
        seed=seed,
        corpus_dir=Path(paths["corpus_dir"]),
        checkpoint_dir=Path(paths["checkpoint_dir"]),
        report_dir=Path(paths["report_dir"]),
        corpus_spec=corpus_spec,
        basis_dim=basis_dim,
        basis_noise_sigma=noise_sigma,
        annotator_model=dict(resolved["annotator"]["model"]),
        annotator_train=annotator_train,
        annotator_loss=annotator_loss,
        tts_model=dict(resolved["tts"]["model"]),
        tts_train=tts_train,
        tts_loss=tts_loss,
        annotation_source=annotation_source,
        generate_max_len=max_len,
        generate_mode=mode,
        evaluate_split=evaluate_split,
        plot_max_utterances=plot_max,
        resolved=resolved,
    )


def load_config(
    config_path: str | Path | None,
    overrides: list[str] | None = None,
    seed: int | None = None,
) -> PipelineConfig:
    """Resolve defaults, an optional file, dotted overrides, and --seed.

    When no path is given, the FILMTTS_CONFIG environment variable names the
    file; with neither set, built-in defaults apply.
    """
    resolved = default_config()
    if config_path is None:
        env_path = os.environ.get(CONFIG_ENV_VAR)
        config_path = env_path if env_path else None
    if config_path is not None:
        file_obj = read_json(config_path)
        if not isinstance(file_obj, dict):
            raise ConfigError(f"{config_path}: config must hold a JSON object")
        resolved = _deep_merge(resolved, file_obj)
    for assignment in overrides or []:
        apply_override(resolved, assignment)
    if seed is not None:
        resolved["seed"] = int(seed)
    config = _build(resolved)
    try:
        config.annotator_config(feature_dim=config.basis_dim)
        config.tts_config(text_vocab_size=config.corpus_spec.text_vocab_size)
    except ValueError as exc:
        raise ConfigError(f"invalid model configuration: {exc}") from exc
    return config
