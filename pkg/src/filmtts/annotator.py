"""Word-level emotion annotation from frame-level features.

A small pre-norm transformer encodes the frame sequence, word spans are
masked-average-pooled, and two heads read out a 5-way category and a sigmoid
intensity per word. Training jointly optimizes cross-entropy and mean squared
error, weighted by lambda_cls and lambda_reg.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass
from collections.abc import Sequence

import numpy as np
import torch
from torch import nn

from .checkpoint import Checkpoint, load_params
from .corpus import Corpus
from .data import (
    EMOTIONS,
    NUM_EMOTIONS,
    EmotionFeatureSequence,
    Utterance,
    WordAlignment,
    WordEmotionAnnotation,
    frames_for_word,
)
from .layers import EncoderBlock, sinusoidal_positions
from .training import (
    TrainConfig,
    clip_gradients,
    epoch_batches,
    guard_finite,
    make_optimizer,
    shuffle_rng,
    single_thread,
)


@dataclass(frozen=True)
class AnnotatorConfig:
    """Architecture settings; defaults keep the model trainable in minutes."""

    feature_dim: int
    hidden_dim: int = 64
    num_layers: int = 2
    num_heads: int = 4
    ff_dim: int = 128
    num_classes: int = NUM_EMOTIONS

    def __post_init__(self) -> None:
        if self.feature_dim < 1:
            raise ValueError("feature_dim must be >= 1")
        if self.hidden_dim % self.num_heads != 0:
            raise ValueError("hidden_dim must be divisible by num_heads")
        if self.hidden_dim % 2 != 0:
            raise ValueError("hidden_dim must be even for position encodings")
        if self.num_layers < 1:
            raise ValueError("num_layers must be >= 1")
        if self.num_classes != NUM_EMOTIONS:
            raise ValueError(f"num_classes must be {NUM_EMOTIONS}")

    def to_dict(self) -> dict:
        return {
            "feature_dim": self.feature_dim,
            "hidden_dim": self.hidden_dim,
            "num_layers": self.num_layers,
            "num_heads": self.num_heads,
            "ff_dim": self.ff_dim,
            "num_classes": self.num_classes,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> AnnotatorConfig:
        known = {f: obj[f] for f in cls.__dataclass_fields__ if f in obj}
        return cls(**known)


@dataclass(frozen=True)
class AnnotatorLossConfig:
    lambda_cls: float = 1.0
    lambda_reg: float = 1.0

    def __post_init__(self) -> None:
        if self.lambda_cls < 0 or self.lambda_reg < 0:
            raise ValueError("loss weights must be non-negative")
        if self.lambda_cls + self.lambda_reg <= 0:
            raise ValueError("at least one loss weight must be positive")

    def to_dict(self) -> dict:
        return {"lambda_cls": self.lambda_cls, "lambda_reg": self.lambda_reg}

    @classmethod
    def from_dict(cls, obj: dict) -> AnnotatorLossConfig:
        known = {f: obj[f] for f in cls.__dataclass_fields__ if f in obj}
        return cls(**known)


class AnnotatorModel(nn.Module):
    """Frame encoder with per-word classification and regression heads."""

    def __init__(self, config: AnnotatorConfig):
        super().__init__()
        self.config = config
        self.input_proj = nn.Linear(config.feature_dim, config.hidden_dim)
        self.blocks = nn.ModuleList(
            EncoderBlock(config.hidden_dim, config.num_heads, config.ff_dim)
            for _ in range(config.num_layers)
        )
        self.final_norm = nn.LayerNorm(config.hidden_dim)
        self.cls_head = nn.Linear(config.hidden_dim, config.num_classes)
        self.reg_head = nn.Linear(config.hidden_dim, 1)
        self.double()

    def encode(self, frames: torch.Tensor) -> torch.Tensor:
        """Contextual frame states, (T, hidden_dim)."""
        x = self.input_proj(frames)
        x = x + sinusoidal_positions(x.shape[0], x.shape[1])
        for block in self.blocks:
            x = block(x)
        return self.final_norm(x)

    def forward(
        self, frames: torch.Tensor, spans: Sequence[tuple[int, int]]
    ) -> tuple[torch.Tensor, torch.Tensor]:
        """Per-word category logits (W, C) and intensities (W,) in (0, 1)."""
        encoded = self.encode(frames)
        pooled = torch.stack([encoded[lo:hi].mean(dim=0) for lo, hi in spans])
        logits = self.cls_head(pooled)
        intensity = torch.sigmoid(self.reg_head(pooled)).squeeze(-1)
        return logits, intensity

    def num_parameters(self) -> int:
        return sum(p.numel() for p in self.parameters())


def word_spans(
    seq: EmotionFeatureSequence, words: Sequence[WordAlignment]
) -> list[tuple[int, int]]:
    return [frames_for_word(w, seq.hop_s, seq.num_frames) for w in words]


def annotator_forward(
    model: AnnotatorModel,
    seq: EmotionFeatureSequence,
    words: Sequence[WordAlignment],
) -> tuple[torch.Tensor, torch.Tensor]:
    """Run the model on raw domain types; spans come from frames_for_word."""
    frames = torch.tensor(seq.frames, dtype=torch.float64)
    return model(frames, word_spans(seq, words))


@dataclass(frozen=True)
class AnnotatorLoss:
    """Total plus both components, all scalar tensors on the autograd tape."""

    total: torch.Tensor
    classification: torch.Tensor
    regression: torch.Tensor


def annotator_loss(
    logits: torch.Tensor,
    intensities: torch.Tensor,
    golds: Sequence[WordEmotionAnnotation],
    cfg: AnnotatorLossConfig,
) -> AnnotatorLoss:
    """lambda_cls * mean cross-entropy + lambda_reg * mean squared error."""
    if len(golds) != logits.shape[0] or len(golds) != intensities.shape[0]:
        raise ValueError(
            f"prediction/gold length mismatch: {logits.shape[0]} logits, "
            f"{intensities.shape[0]} intensities, {len(golds)} golds"
        )
    codes = torch.tensor([g.code for g in golds], dtype=torch.long)
    targets = torch.tensor([g.intensity for g in golds], dtype=torch.float64)
    classification = torch.nn.functional.cross_entropy(logits, codes)
    regression = torch.nn.functional.mse_loss(intensities, targets)
    total = cfg.lambda_cls * classification + cfg.lambda_reg * regression
    return AnnotatorLoss(total, classification, regression)


# ---------------------------------------------------------------------------
# training and inference
# ---------------------------------------------------------------------------


def _prepare(corpus: Corpus, split: str) -> list[tuple[torch.Tensor, list, list]]:
    items = []
    for utterance in corpus.split_utterances(split):
        if utterance.annotations is None:
            raise ValueError(
                f"utterance {utterance.utterance_id!r} has no gold annotations"
            )
        frames = torch.tensor(utterance.features.frames, dtype=torch.float64)
        spans = word_spans(utterance.features, utterance.words)
        items.append((frames, spans, list(utterance.annotations)))
    return items


def _evaluate(
    model: AnnotatorModel,
    items: list[tuple[torch.Tensor, list, list]],
    loss_cfg: AnnotatorLossConfig,
) -> dict:
    model.eval()
    all_logits, all_intensities, golds = [], [], []
    with torch.no_grad():
        for frames, spans, annotations in items:
            logits, intensity = model(frames, spans)
            all_logits.append(logits)
            all_intensities.append(intensity)
            golds.extend(annotations)
        logits = torch.cat(all_logits)
        intensities = torch.cat(all_intensities)
        loss = annotator_loss(logits, intensities, golds, loss_cfg)
        codes = np.array([g.code for g in golds])
        predicted = logits.numpy().argmax(axis=1)
        accuracy = float((predicted == codes).mean())
        mae = float(
            np.abs(intensities.numpy() - np.array([g.intensity for g in golds])).mean()
        )
    return {
        "loss": float(loss.total),
        "cls_loss": float(loss.classification),
        "reg_loss": float(loss.regression),
        "accuracy": accuracy,
        "intensity_mae": mae,
    }


def train_annotator(
    corpus: Corpus,
    cfg: TrainConfig,
    loss_cfg: AnnotatorLossConfig,
    model_cfg: AnnotatorConfig | None = None,
) -> tuple[AnnotatorModel, list[dict]]:
    """Train on the corpus train split; returns the best-dev model and a log.

    The log holds one record per epoch plus a pre-training record at epoch 0;
    the returned model carries the parameters of the epoch with the lowest
    dev total loss.
    """
    single_thread()
    train_items = _prepare(corpus, "train")
    dev_items = _prepare(corpus, "dev")
    if model_cfg is None:
        feature_dim = train_items[0][0].shape[1]
        model_cfg = AnnotatorConfig(feature_dim=feature_dim)
    torch.manual_seed(cfg.seed)
    model = AnnotatorModel(model_cfg)
    optimizer = make_optimizer(model, cfg)
    rng = shuffle_rng(cfg.seed)

    log: list[dict] = []
    dev = _evaluate(model, dev_items, loss_cfg)
    log.append({"epoch": 0, "train_loss": None, **{f"dev_{k}": v for k, v in dev.items()}})
    best_state = copy.deepcopy(model.state_dict())
    best_dev = dev["loss"]

    for epoch in range(1, cfg.epochs + 1):
        model.train()
        epoch_loss = 0.0
        n_batches = 0
        for batch_index, batch in enumerate(
            epoch_batches(len(train_items), cfg.batch_size, rng)
        ):
            optimizer.zero_grad()
            logits_parts, intensity_parts, golds = [], [], []
            for item_index in batch:
                frames, spans, annotations = train_items[item_index]
                logits, intensity = model(frames, spans)
                logits_parts.append(logits)
                intensity_parts.append(intensity)
                golds.extend(annotations)
            loss = annotator_loss(
                torch.cat(logits_parts), torch.cat(intensity_parts), golds, loss_cfg
            )
            guard_finite(loss.total, model, epoch, batch_index)
            loss.total.backward()
            clip_gradients(model, cfg)
            optimizer.step()
            epoch_loss += float(loss.total.detach())
            n_batches += 1
        dev = _evaluate(model, dev_items, loss_cfg)
        log.append(
            {
                "epoch": epoch,
                "train_loss": epoch_loss / n_batches,
                **{f"dev_{k}": v for k, v in dev.items()},
            }
        )
        if dev["loss"] < best_dev:
            best_dev = dev["loss"]
            best_state = copy.deepcopy(model.state_dict())

    model.load_state_dict(best_state)
    model.eval()
    return model, log


def annotate(model: AnnotatorModel, utterance: Utterance) -> list[WordEmotionAnnotation]:
    """Predicted per-word annotations; argmax ties go to the lowest code."""
    model.eval()
    with torch.no_grad():
        logits, intensity = annotator_forward(model, utterance.features, utterance.words)
    codes = logits.numpy().argmax(axis=1)
    values = intensity.numpy()
    return [
        WordEmotionAnnotation(EMOTIONS[int(code)], float(np.clip(value, 0.0, 1.0)))
        for code, value in zip(codes, values)
    ]


def annotator_from_checkpoint(checkpoint: Checkpoint) -> AnnotatorModel:
    config = AnnotatorConfig.from_dict(checkpoint.config["model"])
    model = AnnotatorModel(config)
    load_params(model, checkpoint.params)
    model.eval()
    return model
