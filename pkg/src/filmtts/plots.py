"""Figure rendering for evaluation reports.

Uses the Agg backend so plots render identically on headless machines; every
figure is written to a file, nothing is shown interactively.
"""

from __future__ import annotations

from collections.abc import Sequence
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .data import EMOTIONS

_CATEGORY_COLORS = ("#c0392b", "#e67e22", "#2980b9", "#8e44ad", "#7f8c8d")


def plot_trajectory_overlay(
    gold_codes: Sequence[int],
    posteriors: np.ndarray,
    out_path: Path | str,
    title: str = "",
) -> Path:
    """Gold category steps against generated per-step posteriors.

    Top panel: one posterior curve per category. Bottom panel: gold category
    index as a step function with the generated argmax overlaid.
    """
    posteriors = np.asarray(posteriors, dtype=np.float64)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig, (top, bottom) = plt.subplots(
        2, 1, figsize=(7.0, 4.8), sharex=True, height_ratios=[2, 1]
    )
    steps = np.arange(posteriors.shape[0])
    for code, name in enumerate(EMOTIONS):
        top.plot(
            steps,
            posteriors[:, code],
            label=name,
            color=_CATEGORY_COLORS[code],
            linewidth=1.5,
        )
    top.set_ylabel("posterior")
    top.set_ylim(-0.05, 1.05)
    top.legend(loc="center right", fontsize=8)
    if title:
        top.set_title(title, fontsize=10)

    gold_steps = np.arange(len(gold_codes))
    bottom.step(gold_steps, list(gold_codes), where="post", label="gold", linewidth=2.0)
    predicted = posteriors.argmax(axis=1)
    bottom.step(steps, predicted, where="post", label="generated", linestyle="--")
    bottom.set_yticks(range(len(EMOTIONS)))
    bottom.set_yticklabels(EMOTIONS, fontsize=7)
    bottom.set_xlabel("decoder step")
    bottom.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path


def plot_category_accuracy(
    per_category_accuracy: dict[str, float], out_path: Path | str
) -> Path:
    """Bar chart of per-category word accuracy from a metric report."""
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    names = [name for name in EMOTIONS if name in per_category_accuracy]
    values = [per_category_accuracy[name] for name in names]
    colors = [_CATEGORY_COLORS[EMOTIONS.index(name)] for name in names]
    fig, ax = plt.subplots(figsize=(5.5, 3.2))
    ax.bar(names, values, color=colors)
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("word accuracy")
    for index, value in enumerate(values):
        ax.text(index, value + 0.02, f"{value:.2f}", ha="center", fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path
