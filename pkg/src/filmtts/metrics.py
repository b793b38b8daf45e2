"""Objective evaluation: trajectory DTW, mean-vector similarity, per-category
accuracy, and corpus-level report assembly."""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from .data import EMOTION_CODES

TRAJECTORY_KINDS = ("posteriors", "features")


@dataclass(frozen=True, eq=False)
class EmotionTrajectory:
    """Time-ordered emotion vectors: (length, width) finite float64 points.

    The kind field records what the vectors are (classifier posteriors or
    raw features); metric math is identical either way, but reports must say
    which space they were computed in.
    """

    points: np.ndarray
    kind: str = "posteriors"

    def __post_init__(self) -> None:
        points = np.asarray(self.points, dtype=np.float64)
        if points.ndim == 1:
            points = points[:, None]
        if points.ndim != 2 or points.shape[0] < 1 or points.shape[1] < 1:
            raise ValueError(f"points must be (length, width), got shape {points.shape}")
        if not np.all(np.isfinite(points)):
            raise ValueError("trajectory contains non-finite values")
        if self.kind not in TRAJECTORY_KINDS:
            raise ValueError(f"kind must be one of {TRAJECTORY_KINDS}, got {self.kind!r}")
        points = points.copy()
        points.setflags(write=False)
        object.__setattr__(self, "points", points)

    @property
    def length(self) -> int:
        return int(self.points.shape[0])

    @property
    def width(self) -> int:
        return int(self.points.shape[1])


def dtw(a: EmotionTrajectory, b: EmotionTrajectory) -> float:
    """Classic dynamic time warping cost between two trajectories.

    Euclidean point distance, step pattern {(1,0),(0,1),(1,1)}, no warping
    window, unnormalized accumulated cost.
    """
    if a.width != b.width:
        raise ValueError(f"dimension mismatch: {a.width} vs {b.width}")
    pa, pb = a.points, b.points
    diffs = pa[:, None, :] - pb[None, :, :]
    distance = np.sqrt((diffs**2).sum(axis=-1))
    n, m = distance.shape
    cost = np.full((n, m), np.inf)
    cost[0, 0] = distance[0, 0]
    for j in range(1, m):
        cost[0, j] = cost[0, j - 1] + distance[0, j]
    for i in range(1, n):
        cost[i, 0] = cost[i - 1, 0] + distance[i, 0]
        for j in range(1, m):
            best = min(cost[i - 1, j], cost[i, j - 1], cost[i - 1, j - 1])
            cost[i, j] = best + distance[i, j]
    return float(cost[n - 1, m - 1])


def emo_sim(a: EmotionTrajectory, b: EmotionTrajectory) -> float:
    """Cosine similarity of time-averaged vectors, in percent; unclamped."""
    if a.width != b.width:
        raise ValueError(f"dimension mismatch: {a.width} vs {b.width}")
    mean_a = a.points.mean(axis=0)
    mean_b = b.points.mean(axis=0)
    norm_a = float(np.linalg.norm(mean_a))
    norm_b = float(np.linalg.norm(mean_b))
    if norm_a == 0.0 or norm_b == 0.0:
        raise ValueError("similarity is undefined for a zero mean vector")
    return 100.0 * float(mean_a @ mean_b) / (norm_a * norm_b)


def per_emotion_accuracy(
    pred_categories: Sequence[str], gold_categories: Sequence[str]
) -> dict[str, float]:
    """Fraction correct per gold category; categories absent from the gold
    labels are omitted from the map."""
    if len(pred_categories) != len(gold_categories):
        raise ValueError(
            f"length mismatch: {len(pred_categories)} predictions vs "
            f"{len(gold_categories)} golds"
        )
    if not gold_categories:
        raise ValueError("inputs must be non-empty")
    totals: dict[str, int] = {}
    hits: dict[str, int] = {}
    for pred, gold in zip(pred_categories, gold_categories):
        if gold not in EMOTION_CODES:
            raise ValueError(f"unknown gold category {gold!r}")
        totals[gold] = totals.get(gold, 0) + 1
        hits[gold] = hits.get(gold, 0) + (1 if pred == gold else 0)
    return {name: hits[name] / totals[name] for name in sorted(totals)}


@dataclass(frozen=True)
class UtteranceEval:
    """One utterance's evaluation payload: its trajectory plus per-word
    predicted or gold category names."""

    trajectory: EmotionTrajectory
    word_categories: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "word_categories", tuple(self.word_categories))


@dataclass(frozen=True)
class MetricReport:
    emo_sim_percent: float
    dtw_cost: float
    per_category_accuracy: dict[str, float]
    counts: dict[str, int]
    trajectory_kind: str
    per_utterance: tuple[dict, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        for name, value in self.per_category_accuracy.items():
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"accuracy for {name!r} outside [0, 1]: {value}")
        object.__setattr__(self, "per_utterance", tuple(self.per_utterance))

    @property
    def overall_accuracy(self) -> float:
        total = sum(
            self.counts.get(f"words_{name}", 0) for name in self.per_category_accuracy
        )
        if total == 0:
            return 0.0
        correct = sum(
            self.per_category_accuracy[name] * self.counts.get(f"words_{name}", 0)
            for name in self.per_category_accuracy
        )
        return correct / total

    def to_dict(self) -> dict:
        return {
            "emo_sim_percent": self.emo_sim_percent,
            "dtw_cost": self.dtw_cost,
            "per_category_accuracy": dict(self.per_category_accuracy),
            "overall_accuracy": self.overall_accuracy,
            "counts": dict(self.counts),
            "trajectory_kind": self.trajectory_kind,
            "per_utterance": [dict(row) for row in self.per_utterance],
        }


def evaluate_corpus(
    generated: Mapping[str, UtteranceEval], gold: Mapping[str, UtteranceEval]
) -> MetricReport:
    """Macro-average dtw and emo_sim over utterances; accuracy pooled over
    words. The two id sets must match exactly."""
    missing_from_generated = sorted(set(gold) - set(generated))
    missing_from_gold = sorted(set(generated) - set(gold))
    if missing_from_generated or missing_from_gold:
        parts = []
        if missing_from_generated:
            parts.append(f"missing from generated: {missing_from_generated}")
        if missing_from_gold:
            parts.append(f"missing from gold: {missing_from_gold}")
        raise ValueError("utterance ids do not match; " + "; ".join(parts))
    if not gold:
        raise ValueError("nothing to evaluate")
    kinds = {gen.trajectory.kind for gen in generated.values()}
    kinds.update(ref.trajectory.kind for ref in gold.values())
    if len(kinds) != 1:
        raise ValueError(f"mixed trajectory kinds: {sorted(kinds)}")

    rows = []
    dtw_values, sim_values = [], []
    pred_words: list[str] = []
    gold_words: list[str] = []
    for utterance_id in sorted(gold):
        gen = generated[utterance_id]
        ref = gold[utterance_id]
        if len(gen.word_categories) != len(ref.word_categories):
            raise ValueError(
                f"{utterance_id}: {len(gen.word_categories)} predicted word "
                f"categories vs {len(ref.word_categories)} gold"
            )
        cost = dtw(gen.trajectory, ref.trajectory)
        similarity = emo_sim(gen.trajectory, ref.trajectory)
        dtw_values.append(cost)
        sim_values.append(similarity)
        correct = sum(
            1 for p, g in zip(gen.word_categories, ref.word_categories) if p == g
        )
        rows.append(
            {
                "utterance_id": utterance_id,
                "dtw_cost": cost,
                "emo_sim_percent": similarity,
                "n_words": len(ref.word_categories),
                "words_correct": correct,
            }
        )
        pred_words.extend(gen.word_categories)
        gold_words.extend(ref.word_categories)

    accuracy = per_emotion_accuracy(pred_words, gold_words)
    counts: dict[str, int] = {
        "utterances": len(rows),
        "words": len(gold_words),
    }
    for name in accuracy:
        counts[f"words_{name}"] = sum(1 for g in gold_words if g == name)
    return MetricReport(
        emo_sim_percent=float(np.mean(sim_values)),
        dtw_cost=float(np.mean(dtw_values)),
        per_category_accuracy=accuracy,
        counts=counts,
        trajectory_kind=kinds.pop(),
        per_utterance=tuple(rows),
    )


def one_hot_trajectory(codes: Sequence[int], num_classes: int) -> EmotionTrajectory:
    """Gold step labels as a one-hot posterior trajectory."""
    points = np.zeros((len(codes), num_classes), dtype=np.float64)
    for step, code in enumerate(codes):
        if not 0 <= code < num_classes:
            raise ValueError(f"code {code} outside [0, {num_classes})")
        points[step, code] = 1.0
    return EmotionTrajectory(points, kind="posteriors")


def switch_steps(codes: Sequence[int]) -> list[int]:
    """Indices where a step sequence changes value (first index of each run
    after the first)."""
    return [i for i in range(1, len(codes)) if codes[i] != codes[i - 1]]
