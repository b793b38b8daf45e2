"""Domain types for word-aligned emotion features, plus their file formats.

Alignments live on a fixed frame grid: a word spanning [start_s, end_s)
covers frames [floor(start_s / hop_s), ceil(end_s / hop_s)) clamped to the
sequence. Everything here is plain data and pure functions; nothing mutates
after construction.
"""

from __future__ import annotations

import json
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

EMOTIONS = ("Angry", "Happy", "Sad", "Surprise", "Neutral")
NEUTRAL = "Neutral"
EMOTION_CODES = {name: code for code, name in enumerate(EMOTIONS)}
NUM_EMOTIONS = len(EMOTIONS)

DEFAULT_HOP_S = 0.02

# Relative tolerance for snapping word boundaries onto the frame grid before
# floor/ceil. Decimal times rarely divide exactly in binary (0.06 / 0.02 is
# 2.999...96), and without the snap a boundary-aligned word lands one frame
# short of where it provably belongs.
_GRID_RTOL = 1e-9


class AlignmentError(ValueError):
    """Malformed alignment input. Carries the 1-based line number when known."""

    def __init__(self, message: str, line_number: int | None = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class SpanError(ValueError):
    """A word maps to an empty frame span."""


# ---------------------------------------------------------------------------
# types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WordAlignment:
    """One word's time span in seconds, half-open [start_s, end_s)."""

    word: str
    start_s: float
    end_s: float

    def __post_init__(self) -> None:
        if not isinstance(self.word, str) or not self.word:
            raise AlignmentError(f"word must be a non-empty string, got {self.word!r}")
        for name in ("start_s", "end_s"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise AlignmentError(f"word {self.word!r}: {name} must be a number")
            if not math.isfinite(value):
                raise AlignmentError(f"word {self.word!r}: {name} must be finite")
            object.__setattr__(self, name, float(value))
        if not 0.0 <= self.start_s < self.end_s:
            raise AlignmentError(
                f"word {self.word!r}: need 0 <= start_s < end_s, "
                f"got [{self.start_s}, {self.end_s})"
            )


@dataclass(frozen=True)
class WordEmotionAnnotation:
    """Categorical emotion plus a strength in [0, 1] for one word."""

    category: str
    intensity: float

    def __post_init__(self) -> None:
        if self.category not in EMOTION_CODES:
            raise ValueError(
                f"unknown category {self.category!r}; expected one of {EMOTIONS}"
            )
        intensity = self.intensity
        if isinstance(intensity, bool) or not isinstance(intensity, (int, float)):
            raise ValueError("intensity must be a number")
        if not (math.isfinite(intensity) and 0.0 <= intensity <= 1.0):
            raise ValueError(f"intensity must be in [0, 1], got {intensity!r}")
        object.__setattr__(self, "intensity", float(intensity))

    @property
    def code(self) -> int:
        return EMOTION_CODES[self.category]


@dataclass(frozen=True, eq=False)
class EmotionFeatureSequence:
    """Frame-level emotion features on a uniform grid: (T, D) float64, T >= 1.

    The frame array is copied and frozen at construction; invalid shapes,
    non-finite values, or a non-positive hop are rejected immediately.
    """

    hop_s: float
    frames: np.ndarray

    def __post_init__(self) -> None:
        if not (isinstance(self.hop_s, (int, float)) and math.isfinite(self.hop_s)
                and self.hop_s > 0):
            raise ValueError(f"hop_s must be a positive finite number, got {self.hop_s!r}")
        object.__setattr__(self, "hop_s", float(self.hop_s))
        frames = np.asarray(self.frames, dtype=np.float64)
        if frames.ndim != 2:
            raise ValueError(f"frames must be 2-dimensional, got shape {frames.shape}")
        if frames.shape[0] < 1 or frames.shape[1] < 1:
            raise ValueError(f"frames must be at least 1x1, got shape {frames.shape}")
        if not np.all(np.isfinite(frames)):
            raise ValueError("frames contain non-finite values")
        frames = frames.copy()
        frames.setflags(write=False)
        object.__setattr__(self, "frames", frames)

    @property
    def num_frames(self) -> int:
        return int(self.frames.shape[0])

    @property
    def dim(self) -> int:
        return int(self.frames.shape[1])


@dataclass(frozen=True)
class Utterance:
    """One utterance: word alignments over a feature sequence, with optional
    gold annotations, coupled speech tokens, and an utterance-level label.

    Construction only normalizes containers; cross-field consistency is the
    job of validate_utterance so that defective instances can be inspected.
    """

    utterance_id: str
    speaker_id: str
    words: tuple[WordAlignment, ...]
    features: EmotionFeatureSequence
    annotations: tuple[WordEmotionAnnotation, ...] | None = None
    speech_tokens: tuple[int, ...] | None = None
    global_label: str | None = None
    meta: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for name in ("utterance_id", "speaker_id"):
            if not isinstance(getattr(self, name), str) or not getattr(self, name):
                raise ValueError(f"{name} must be a non-empty string")
        object.__setattr__(self, "words", tuple(self.words))
        if self.annotations is not None:
            object.__setattr__(self, "annotations", tuple(self.annotations))
        if self.speech_tokens is not None:
            object.__setattr__(
                self, "speech_tokens", tuple(int(t) for t in self.speech_tokens)
            )
        object.__setattr__(self, "meta", dict(self.meta))


@dataclass(frozen=True)
class ValidationReport:
    """Complete list of invariant violations; empty means the utterance is ok."""

    violations: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def __str__(self) -> str:
        if self.ok:
            return "ok"
        return "\n".join(self.violations)


# ---------------------------------------------------------------------------
# alignment parsing and serialization
# ---------------------------------------------------------------------------


def _ordering_violations(words: Sequence[WordAlignment]) -> list[str]:
    """Violations of the sorted / non-overlapping invariant, naming offenders."""
    problems = []
    for prev, cur in zip(words, words[1:]):
        if cur.start_s < prev.start_s:
            problems.append(
                f"words {prev.word!r} and {cur.word!r} are out of order "
                f"({cur.start_s} < {prev.start_s})"
            )
        elif cur.start_s < prev.end_s:
            problems.append(
                f"words {prev.word!r} [{prev.start_s}, {prev.end_s}) and "
                f"{cur.word!r} [{cur.start_s}, {cur.end_s}) overlap"
            )
    return problems


def parse_alignment(document: str) -> list[WordAlignment]:
    """Parse a JSON-lines alignment document into sorted word alignments.

    Each non-empty line must be an object with keys word, start_s, end_s.
    Errors carry the offending line number; ordering violations name both
    words involved.
    """
    words: list[WordAlignment] = []
    for line_number, raw in enumerate(document.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise AlignmentError(f"invalid JSON ({exc.msg})", line_number) from None
        if not isinstance(obj, dict):
            raise AlignmentError(
                f"expected an object, got {type(obj).__name__}", line_number
            )
        missing = [key for key in ("word", "start_s", "end_s") if key not in obj]
        if missing:
            raise AlignmentError(f"missing keys: {', '.join(missing)}", line_number)
        try:
            words.append(WordAlignment(obj["word"], obj["start_s"], obj["end_s"]))
        except AlignmentError as exc:
            raise AlignmentError(str(exc), line_number) from None
    problems = _ordering_violations(words)
    if problems:
        raise AlignmentError("; ".join(problems))
    return words


def format_alignment(words: Iterable[WordAlignment]) -> str:
    """Serialize alignments back to the JSON-lines form parse_alignment reads."""
    lines = [
        json.dumps(
            {"word": w.word, "start_s": w.start_s, "end_s": w.end_s},
            sort_keys=True,
        )
        for w in words
    ]
    return "\n".join(lines) + ("\n" if lines else "")


# ---------------------------------------------------------------------------
# frame mapping and pooling
# ---------------------------------------------------------------------------


def _grid_index(time_s: float, hop_s: float) -> float:
    """time_s / hop_s, snapped to the nearest integer when within tolerance."""
    q = time_s / hop_s
    nearest = round(q)
    if abs(q - nearest) <= _GRID_RTOL * max(1.0, abs(q)):
        return float(nearest)
    return q


def frames_for_word(alignment: WordAlignment, hop_s: float, num_frames: int) -> tuple[int, int]:
    """Half-open frame span [lo, hi) covered by a word, clamped to the sequence.

    lo = floor(start_s / hop_s), hi = min(num_frames, ceil(end_s / hop_s)).
    Raises SpanError when the clamped span is empty.
    """
    if not hop_s > 0:
        raise ValueError(f"hop_s must be positive, got {hop_s!r}")
    if num_frames < 1:
        raise ValueError(f"num_frames must be >= 1, got {num_frames!r}")
    lo = int(math.floor(_grid_index(alignment.start_s, hop_s)))
    hi = min(num_frames, int(math.ceil(_grid_index(alignment.end_s, hop_s))))
    if hi <= lo:
        raise SpanError(
            f"word {alignment.word!r} [{alignment.start_s}, {alignment.end_s}) maps to "
            f"empty frame span [{lo}, {hi}) with hop_s={hop_s}, num_frames={num_frames}"
        )
    return lo, hi


def masked_average_pool(seq: EmotionFeatureSequence, span: tuple[int, int]) -> np.ndarray:
    """Mean of the frames in the half-open span; the span must be non-empty
    and inside the sequence."""
    lo, hi = span
    if not (0 <= lo < hi <= seq.num_frames):
        raise SpanError(
            f"span [{lo}, {hi}) is not a non-empty subrange of [0, {seq.num_frames})"
        )
    return seq.frames[lo:hi].mean(axis=0)


# ---------------------------------------------------------------------------
# utterance validation
# ---------------------------------------------------------------------------


def validate_utterance(
    utterance: Utterance, speech_vocab_size: int | None = None
) -> ValidationReport:
    """Check every cross-field invariant and return all violations at once.

    Covers word ordering and overlap, per-word frame coverage, annotation and
    token counts, and token range when the coupled vocabulary size is given.
    """
    u = utterance
    problems: list[str] = []
    problems.extend(_ordering_violations(u.words))
    if not u.words:
        problems.append("utterance has no words")
    for word in u.words:
        try:
            frames_for_word(word, u.features.hop_s, u.features.num_frames)
        except SpanError as exc:
            problems.append(str(exc))
    if u.annotations is not None and len(u.annotations) != len(u.words):
        problems.append(
            f"annotation count {len(u.annotations)} != word count {len(u.words)}"
        )
    if u.speech_tokens is not None:
        if len(u.speech_tokens) != len(u.words):
            problems.append(
                f"speech token count {len(u.speech_tokens)} != word count {len(u.words)}"
            )
        for position, token in enumerate(u.speech_tokens):
            if token < 0:
                problems.append(f"speech token at position {position} is negative ({token})")
            elif speech_vocab_size is not None and token >= speech_vocab_size:
                problems.append(
                    f"speech token at position {position} is {token}, "
                    f"outside [0, {speech_vocab_size})"
                )
    if u.global_label is not None and u.global_label not in EMOTION_CODES:
        problems.append(f"global label {u.global_label!r} is not a known category")
    return ValidationReport(tuple(problems))


# ---------------------------------------------------------------------------
# file IO
# ---------------------------------------------------------------------------


def write_json(path: Path | str, obj: object) -> None:
    """Canonical JSON writer: sorted keys, two-space indent, trailing newline.

    Identical inputs produce identical bytes, which the reproducibility
    contracts lean on heavily.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False)
    path.write_text(text + "\n", encoding="utf-8")


def read_json(path: Path | str) -> object:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def write_features(path: Path | str, seq: EmotionFeatureSequence) -> None:
    write_json(
        path,
        {"hop_s": seq.hop_s, "dim": seq.dim, "frames": seq.frames.tolist()},
    )


def read_features(path: Path | str) -> EmotionFeatureSequence:
    obj = read_json(path)
    if not isinstance(obj, dict):
        raise ValueError(f"{path}: feature file must hold an object")
    try:
        seq = EmotionFeatureSequence(obj["hop_s"], np.asarray(obj["frames"], dtype=np.float64))
    except KeyError as exc:
        raise ValueError(f"{path}: missing key {exc}") from None
    if int(obj.get("dim", seq.dim)) != seq.dim:
        raise ValueError(
            f"{path}: declared dim {obj['dim']} != frame width {seq.dim}"
        )
    return seq


def save_utterance(directory: Path | str, utterance: Utterance) -> Path:
    """Write alignment, features, and manifest under one directory.

    Returns the manifest path. Sibling file references inside the manifest
    are relative so corpora stay relocatable.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "alignment.jsonl").write_text(
        format_alignment(utterance.words), encoding="utf-8"
    )
    write_features(directory / "features.json", utterance.features)
    manifest = {
        "utterance_id": utterance.utterance_id,
        "speaker_id": utterance.speaker_id,
        "alignment_path": "alignment.jsonl",
        "feature_path": "features.json",
        "annotations": None
        if utterance.annotations is None
        else [{"category": a.category, "intensity": a.intensity} for a in utterance.annotations],
        "speech_tokens": None
        if utterance.speech_tokens is None
        else list(utterance.speech_tokens),
        "global_label": utterance.global_label,
        "meta": dict(utterance.meta),
    }
    manifest_path = directory / "manifest.json"
    write_json(manifest_path, manifest)
    return manifest_path


def load_utterance(manifest_path: Path | str) -> Utterance:
    """Load an utterance from its manifest, resolving sibling paths."""
    manifest_path = Path(manifest_path)
    obj = read_json(manifest_path)
    if not isinstance(obj, dict):
        raise ValueError(f"{manifest_path}: manifest must hold an object")
    base = manifest_path.parent
    words = parse_alignment(
        (base / obj["alignment_path"]).read_text(encoding="utf-8")
    )
    features = read_features(base / obj["feature_path"])
    annotations = obj.get("annotations")
    if annotations is not None:
        annotations = tuple(
            WordEmotionAnnotation(a["category"], a["intensity"]) for a in annotations
        )
    speech_tokens = obj.get("speech_tokens")
    if speech_tokens is not None:
        speech_tokens = tuple(int(t) for t in speech_tokens)
    return Utterance(
        utterance_id=obj["utterance_id"],
        speaker_id=obj["speaker_id"],
        words=tuple(words),
        features=features,
        annotations=annotations,
        speech_tokens=speech_tokens,
        global_label=obj.get("global_label"),
        meta=obj.get("meta") or {},
    )
