"""Shared training plumbing: the optimizer config, seeded shuffling, and the
divergence guard both trainers use."""

from __future__ import annotations

import math
from collections.abc import Iterator
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

_SHUFFLE_STREAM = 0xB47C


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer and schedule settings. Defaults follow the reference recipe
    (Adam, batch size 4, 5 epochs)."""

    learning_rate: float = 1e-3
    batch_size: int = 4
    epochs: int = 5
    seed: int = 0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    clip_norm: float | None = 1.0

    def __post_init__(self) -> None:
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        for name in ("adam_beta1", "adam_beta2"):
            if not 0 <= getattr(self, name) < 1:
                raise ValueError(f"{name} must be in [0, 1)")
        if not self.adam_epsilon > 0:
            raise ValueError("adam_epsilon must be positive")
        if self.clip_norm is not None and not self.clip_norm > 0:
            raise ValueError("clip_norm must be positive or None")

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "seed": self.seed,
            "adam_beta1": self.adam_beta1,
            "adam_beta2": self.adam_beta2,
            "adam_epsilon": self.adam_epsilon,
            "clip_norm": self.clip_norm,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> TrainConfig:
        known = {f: obj[f] for f in cls.__dataclass_fields__ if f in obj}
        return cls(**known)


class TrainingDiverged(RuntimeError):
    """Raised when a training loss stops being finite."""

    def __init__(self, epoch: int, batch_index: int, param_norm: float):
        super().__init__(
            f"non-finite loss at epoch {epoch}, batch {batch_index} "
            f"(parameter norm {param_norm:.6g}); aborting"
        )
        self.epoch = epoch
        self.batch_index = batch_index
        self.param_norm = param_norm


def global_param_norm(model: nn.Module) -> float:
    total = 0.0
    for p in model.parameters():
        total += float((p.detach() ** 2).sum())
    return math.sqrt(total)


def guard_finite(loss: torch.Tensor, model: nn.Module, epoch: int, batch_index: int) -> None:
    if not torch.isfinite(loss):
        raise TrainingDiverged(epoch, batch_index, global_param_norm(model))


def make_optimizer(model: nn.Module, cfg: TrainConfig) -> torch.optim.Adam:
    return torch.optim.Adam(
        model.parameters(),
        lr=cfg.learning_rate,
        betas=(cfg.adam_beta1, cfg.adam_beta2),
        eps=cfg.adam_epsilon,
    )


def clip_gradients(model: nn.Module, cfg: TrainConfig) -> None:
    if cfg.clip_norm is not None:
        nn.utils.clip_grad_norm_(model.parameters(), cfg.clip_norm)


def epoch_batches(
    n_items: int, batch_size: int, rng: np.random.Generator
) -> Iterator[list[int]]:
    """Seeded shuffled minibatch index lists covering all items once."""
    order = rng.permutation(n_items)
    for start in range(0, n_items, batch_size):
        yield [int(i) for i in order[start : start + batch_size]]


def shuffle_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng([seed, _SHUFFLE_STREAM])


def single_thread() -> None:
    """Pin torch to one CPU thread so reruns are bit-identical regardless of
    the host's core count. Models here are small enough that this is free."""
    torch.set_num_threads(1)
