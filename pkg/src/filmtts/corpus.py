"""Deterministic synthetic corpora with known word-level emotion truth.

Each word carries a gold (category, intensity) pair; its frames are sampled
around neutral_mean + intensity * (class_mean - neutral_mean). Speech tokens
are coupled to both the text token and the word's category, so a generator
that ignores emotion provably cannot predict them.
"""

from __future__ import annotations

import hashlib
import os
from collections import Counter
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import (
    DEFAULT_HOP_S,
    EMOTION_CODES,
    EMOTIONS,
    NEUTRAL,
    NUM_EMOTIONS,
    EmotionFeatureSequence,
    Utterance,
    WordAlignment,
    WordEmotionAnnotation,
    load_utterance,
    read_json,
    save_utterance,
    write_json,
)

TRANSITION_KINDS = ("none", "mild", "strong", "random")

# Class means are spaced at this many noise standard deviations apart, twice
# the minimum the separability invariant demands, so nearest-prototype
# recovery keeps a wide margin even at intensity 0.5.
MEAN_SPACING_SIGMAS = 8.0
DEFAULT_NOISE_SIGMA = 0.5

SPLIT_NAMES = ("train", "dev", "test")

_UTTERANCE_STREAM = 0x5EED


# ---------------------------------------------------------------------------
# types
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class EmotionBasis:
    """Per-category mean directions in feature space plus the noise level.

    The minimum pairwise distance between class means must be at least four
    noise standard deviations; that gap is what makes gold labels recoverable
    from pooled features.
    """

    class_means: np.ndarray
    neutral_index: int
    noise_sigma: float

    def __post_init__(self) -> None:
        means = np.asarray(self.class_means, dtype=np.float64)
        if means.ndim != 2 or means.shape[0] != NUM_EMOTIONS:
            raise ValueError(
                f"class_means must be ({NUM_EMOTIONS}, D), got shape {means.shape}"
            )
        if not np.all(np.isfinite(means)):
            raise ValueError("class_means contain non-finite values")
        if not 0 <= self.neutral_index < NUM_EMOTIONS:
            raise ValueError(f"neutral_index out of range: {self.neutral_index}")
        if not (isinstance(self.noise_sigma, (int, float)) and self.noise_sigma >= 0):
            raise ValueError(f"noise_sigma must be non-negative, got {self.noise_sigma!r}")
        means = means.copy()
        means.setflags(write=False)
        object.__setattr__(self, "class_means", means)
        object.__setattr__(self, "noise_sigma", float(self.noise_sigma))
        gap = self.min_pairwise_distance()
        if gap < 4.0 * self.noise_sigma:
            raise ValueError(
                f"class means too close: min pairwise distance {gap:.6g} "
                f"< 4 * noise_sigma = {4.0 * self.noise_sigma:.6g}"
            )

    @property
    def dim(self) -> int:
        return int(self.class_means.shape[1])

    @property
    def neutral_mean(self) -> np.ndarray:
        return self.class_means[self.neutral_index]

    def min_pairwise_distance(self) -> float:
        means = self.class_means
        diffs = means[:, None, :] - means[None, :, :]
        dists = np.sqrt((diffs**2).sum(axis=-1))
        upper = dists[np.triu_indices(len(means), k=1)]
        return float(upper.min())

    def word_mean(self, category_code: int, intensity: float) -> np.ndarray:
        """Expected feature vector for a word with the given gold labels."""
        direction = self.class_means[category_code] - self.neutral_mean
        return self.neutral_mean + intensity * direction

    def to_dict(self) -> dict:
        return {
            "class_means": self.class_means.tolist(),
            "neutral_index": self.neutral_index,
            "noise_sigma": self.noise_sigma,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> EmotionBasis:
        return cls(
            np.asarray(obj["class_means"], dtype=np.float64),
            int(obj["neutral_index"]),
            float(obj["noise_sigma"]),
        )


@dataclass(frozen=True)
class CorpusSpec:
    """Everything that determines a generated corpus, bit for bit."""

    n_utterances: int
    words_per_utterance_range: tuple[int, int]
    frames_per_word_range: tuple[int, int]
    transition_kind: str
    seed: int
    text_vocab_size: int
    speakers: tuple[str, ...]
    hop_s: float = DEFAULT_HOP_S

    def __post_init__(self) -> None:
        if self.n_utterances < 1:
            raise ValueError("n_utterances must be >= 1")
        for name in ("words_per_utterance_range", "frames_per_word_range"):
            rng = tuple(int(v) for v in getattr(self, name))
            if len(rng) != 2 or rng[0] < 1 or rng[1] < rng[0]:
                raise ValueError(f"{name} must be [min, max] with 1 <= min <= max, got {rng}")
            object.__setattr__(self, name, rng)
        if self.transition_kind not in TRANSITION_KINDS:
            raise ValueError(
                f"transition_kind must be one of {TRANSITION_KINDS}, "
                f"got {self.transition_kind!r}"
            )
        if self.transition_kind == "strong" and self.words_per_utterance_range[0] < 2:
            raise ValueError("strong transitions need at least 2 words per utterance")
        if self.text_vocab_size < 2:
            raise ValueError("text_vocab_size must be >= 2")
        speakers = tuple(str(s) for s in self.speakers)
        if not speakers:
            raise ValueError("speakers must be non-empty")
        object.__setattr__(self, "speakers", speakers)
        if not self.hop_s > 0:
            raise ValueError("hop_s must be positive")

    def to_dict(self) -> dict:
        return {
            "n_utterances": self.n_utterances,
            "words_per_utterance_range": list(self.words_per_utterance_range),
            "frames_per_word_range": list(self.frames_per_word_range),
            "transition_kind": self.transition_kind,
            "seed": self.seed,
            "text_vocab_size": self.text_vocab_size,
            "speakers": list(self.speakers),
            "hop_s": self.hop_s,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> CorpusSpec:
        return cls(
            n_utterances=int(obj["n_utterances"]),
            words_per_utterance_range=tuple(obj["words_per_utterance_range"]),
            frames_per_word_range=tuple(obj["frames_per_word_range"]),
            transition_kind=str(obj["transition_kind"]),
            seed=int(obj["seed"]),
            text_vocab_size=int(obj["text_vocab_size"]),
            speakers=tuple(obj["speakers"]),
            hop_s=float(obj.get("hop_s", DEFAULT_HOP_S)),
        )


# ---------------------------------------------------------------------------
# basis and vocabulary
# ---------------------------------------------------------------------------


def make_emotion_basis(
    num_classes: int,
    dim: int,
    seed: int,
    noise_sigma: float = DEFAULT_NOISE_SIGMA,
) -> EmotionBasis:
    """Sample class means and rescale them until the separability invariant
    holds with margin. Deterministic given the seed."""
    if num_classes != NUM_EMOTIONS:
        raise ValueError(f"num_classes must be {NUM_EMOTIONS}, got {num_classes}")
    if dim < 2:
        raise ValueError(f"dim must be >= 2, got {dim}")
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be non-negative")
    rng = np.random.default_rng(seed)
    means = rng.standard_normal((num_classes, dim))
    for _ in range(64):
        diffs = means[:, None, :] - means[None, :, :]
        gap = np.sqrt((diffs**2).sum(axis=-1))[np.triu_indices(num_classes, k=1)].min()
        if gap > 0:
            break
        means = rng.standard_normal((num_classes, dim))
    else:
        raise RuntimeError("could not sample distinct class means")
    # Rescale so the closest pair sits MEAN_SPACING_SIGMAS noise units apart
    # (an absolute unit distance when the corpus is noiseless).
    target = MEAN_SPACING_SIGMAS * noise_sigma if noise_sigma > 0 else 1.0
    means = means * (target / gap)
    return EmotionBasis(means, EMOTION_CODES[NEUTRAL], noise_sigma)


def text_vocabulary(vocab_size: int) -> tuple[str, ...]:
    """Word strings for text-token ids 0..vocab_size-1."""
    width = max(2, len(str(vocab_size - 1)))
    return tuple(f"w{i:0{width}d}" for i in range(vocab_size))


def speech_vocab_size(text_vocab_size: int) -> int:
    """Size of the coupled speech-token space (EOS excluded)."""
    return text_vocab_size * NUM_EMOTIONS


def couple_speech_token(text_token: int, category_code: int) -> int:
    """The toy coupling rule: token * C + category code."""
    return text_token * NUM_EMOTIONS + category_code


def majority_category(annotations: Sequence[WordEmotionAnnotation]) -> str:
    """Most frequent category; ties resolved toward the lowest code."""
    counts = Counter(a.category for a in annotations)
    best = max(counts.items(), key=lambda item: (item[1], -EMOTION_CODES[item[0]]))
    return best[0]


# ---------------------------------------------------------------------------
# utterance synthesis
# ---------------------------------------------------------------------------

_NON_NEUTRAL = tuple(code for code, name in enumerate(EMOTIONS) if name != NEUTRAL)


def _word_emotions(
    kind: str, n_words: int, rng: np.random.Generator
) -> tuple[list[int], list[float]]:
    """Gold per-word category codes and intensities for one utterance."""
    if kind == "none":
        code = int(rng.integers(0, NUM_EMOTIONS))
        if code == EMOTION_CODES[NEUTRAL]:
            intensity = 0.0
        else:
            intensity = float(rng.uniform(0.0, 1.0))
        return [code] * n_words, [intensity] * n_words
    if kind == "mild":
        code = int(_NON_NEUTRAL[rng.integers(0, len(_NON_NEUTRAL))])
        ramp = np.linspace(0.2, 1.0, n_words)
        return [code] * n_words, [float(s) for s in ramp]
    if kind == "strong":
        pair = rng.choice(len(_NON_NEUTRAL), size=2, replace=False)
        first, second = (int(_NON_NEUTRAL[int(i)]) for i in pair)
        lo = max(1, round(n_words / 3))
        hi = min(n_words - 1, round(2 * n_words / 3))
        if hi < lo:
            lo, hi = 1, n_words - 1
        boundary = int(rng.integers(lo, hi + 1))
        codes = [first] * boundary + [second] * (n_words - boundary)
        return codes, [1.0] * n_words
    if kind == "random":
        codes = [int(c) for c in rng.integers(0, NUM_EMOTIONS, size=n_words)]
        intensities = []
        for code in codes:
            if code == EMOTION_CODES[NEUTRAL]:
                intensities.append(0.0)
            else:
                intensities.append(float(rng.uniform(0.25, 1.0)))
        return codes, intensities
    raise ValueError(f"unknown transition kind {kind!r}")


def synth_utterance(
    spec: CorpusSpec, basis: EmotionBasis, index: int, id_prefix: str = "utt"
) -> Utterance:
    """Generate one utterance. Pure function of (spec, basis, index)."""
    if index < 0:
        raise ValueError("index must be non-negative")
    rng = np.random.default_rng([spec.seed, _UTTERANCE_STREAM, index])
    w_lo, w_hi = spec.words_per_utterance_range
    n_words = int(rng.integers(w_lo, w_hi + 1))
    vocab = text_vocabulary(spec.text_vocab_size)
    text_ids = [int(t) for t in rng.integers(0, spec.text_vocab_size, size=n_words)]
    f_lo, f_hi = spec.frames_per_word_range
    frame_counts = [int(f) for f in rng.integers(f_lo, f_hi + 1, size=n_words)]
    speaker = spec.speakers[int(rng.integers(0, len(spec.speakers)))]
    codes, intensities = _word_emotions(spec.transition_kind, n_words, rng)

    words = []
    start_frame = 0
    for word_index, count in enumerate(frame_counts):
        end_frame = start_frame + count
        words.append(
            WordAlignment(
                vocab[text_ids[word_index]],
                start_frame * spec.hop_s,
                end_frame * spec.hop_s,
            )
        )
        start_frame = end_frame
    total_frames = start_frame

    rows = np.empty((total_frames, basis.dim), dtype=np.float64)
    cursor = 0
    for word_index, count in enumerate(frame_counts):
        mean = basis.word_mean(codes[word_index], intensities[word_index])
        rows[cursor : cursor + count] = mean
        cursor += count
    if basis.noise_sigma > 0:
        rows = rows + rng.normal(0.0, basis.noise_sigma, size=rows.shape)

    annotations = tuple(
        WordEmotionAnnotation(EMOTIONS[code], intensity)
        for code, intensity in zip(codes, intensities)
    )
    tokens = tuple(
        couple_speech_token(text_ids[i], codes[i]) for i in range(n_words)
    )
    return Utterance(
        utterance_id=f"{id_prefix}_{index:05d}",
        speaker_id=speaker,
        words=tuple(words),
        features=EmotionFeatureSequence(spec.hop_s, rows),
        annotations=annotations,
        speech_tokens=tokens,
        global_label=majority_category(annotations),
        meta={"transition_kind": spec.transition_kind},
    )


# ---------------------------------------------------------------------------
# splits and corpus packaging
# ---------------------------------------------------------------------------


def split_indices(n: int, seed: int) -> dict[str, list[int]]:
    """Exact 80/10/10 split of utterance indices, assigned by index hash.

    Dev and test each get max(1, round(n/10)) utterances so the 10-utterance
    example lands on 8/1/1 exactly; ordering comes from sha256 over
    "seed:index" which is stable across platforms.
    """
    n_dev = max(1, round(n * 0.1))
    n_test = max(1, round(n * 0.1))
    n_train = n - n_dev - n_test
    if n_train < 1:
        raise ValueError(f"need at least 3 utterances to split, got {n}")
    order = sorted(
        range(n),
        key=lambda i: hashlib.sha256(f"{seed}:{i}".encode()).hexdigest(),
    )
    return {
        "train": sorted(order[:n_train]),
        "dev": sorted(order[n_train : n_train + n_dev]),
        "test": sorted(order[n_train + n_dev :]),
    }


def build_corpus(
    spec: CorpusSpec, basis: EmotionBasis, out_dir: Path | str, id_prefix: str = "utt"
) -> Path:
    """Write every utterance plus the corpus index; returns the index path.

    Rebuilding with the same spec and basis produces identical bytes.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest_paths = []
    for index in range(spec.n_utterances):
        utterance = synth_utterance(spec, basis, index, id_prefix=id_prefix)
        manifest = save_utterance(out_dir / utterance.utterance_id, utterance)
        manifest_paths.append(manifest.relative_to(out_dir).as_posix())
    splits = split_indices(spec.n_utterances, spec.seed)
    split_ids = {
        name: [f"{id_prefix}_{i:05d}" for i in indices]
        for name, indices in splits.items()
    }
    index_path = out_dir / "index.json"
    write_json(
        index_path,
        {
            "spec": spec.to_dict(),
            "basis": basis.to_dict(),
            "text_vocab": list(text_vocabulary(spec.text_vocab_size)),
            "utterances": manifest_paths,
            "split": split_ids,
        },
    )
    return index_path


@dataclass
class Corpus:
    """A loaded corpus: utterances in memory plus the split and vocabulary."""

    index_path: Path
    spec_data: object
    basis_data: object
    text_vocab: tuple[str, ...]
    utterances: dict[str, Utterance]
    split: dict[str, tuple[str, ...]]

    @property
    def word_to_token(self) -> dict[str, int]:
        return {word: token for token, word in enumerate(self.text_vocab)}

    @property
    def speech_vocab_size(self) -> int:
        return speech_vocab_size(len(self.text_vocab))

    def split_utterances(self, name: str) -> list[Utterance]:
        if name not in self.split:
            raise KeyError(f"unknown split {name!r}; have {sorted(self.split)}")
        return [self.utterances[i] for i in self.split[name]]

    def text_token_ids(self, utterance: Utterance) -> list[int]:
        mapping = self.word_to_token
        return [mapping[w.word] for w in utterance.words]


def load_corpus(index_path: Path | str) -> Corpus:
    """Load a corpus index and every utterance it references."""
    index_path = Path(index_path)
    obj = read_json(index_path)
    if not isinstance(obj, dict):
        raise ValueError(f"{index_path}: corpus index must hold an object")
    base = index_path.parent
    utterances: dict[str, Utterance] = {}
    for rel in obj["utterances"]:
        utterance = load_utterance(base / rel)
        if utterance.utterance_id in utterances:
            raise ValueError(f"duplicate utterance id {utterance.utterance_id!r}")
        utterances[utterance.utterance_id] = utterance
    split = {name: tuple(ids) for name, ids in obj["split"].items()}
    known = set(utterances)
    for name, ids in split.items():
        missing = [i for i in ids if i not in known]
        if missing:
            raise ValueError(f"split {name!r} references unknown ids: {missing}")
    return Corpus(
        index_path=index_path,
        spec_data=obj.get("spec"),
        basis_data=obj.get("basis"),
        text_vocab=tuple(obj["text_vocab"]),
        utterances=utterances,
        split=split,
    )


def merge_corpora(index_paths: Sequence[Path | str], out_path: Path | str) -> Path:
    """Concatenate corpus indexes into one, keeping per-utterance metadata.

    The inputs must share a vocabulary and basis; utterance ids must not
    collide (use distinct id prefixes when building). Manifest references are
    rewritten relative to the merged index location.
    """
    if len(index_paths) < 2:
        raise ValueError("need at least two corpora to merge")
    out_path = Path(out_path)
    loaded = [(Path(p), read_json(Path(p))) for p in index_paths]
    first = loaded[0][1]
    for path, obj in loaded[1:]:
        if obj["text_vocab"] != first["text_vocab"]:
            raise ValueError(f"{path}: text vocabulary differs from {loaded[0][0]}")
        if obj["basis"] != first["basis"]:
            raise ValueError(f"{path}: emotion basis differs from {loaded[0][0]}")
    manifests: list[str] = []
    seen_ids: set[str] = set()
    split: dict[str, list[str]] = {name: [] for name in SPLIT_NAMES}
    for path, obj in loaded:
        for name in SPLIT_NAMES:
            ids = obj["split"].get(name, [])
            clash = seen_ids.intersection(ids)
            if clash:
                raise ValueError(f"{path}: duplicate utterance ids {sorted(clash)}")
            seen_ids.update(ids)
            split[name].extend(ids)
        for rel in obj["utterances"]:
            absolute = (path.parent / rel).resolve()
            manifests.append(
                os.path.relpath(absolute, out_path.parent.resolve()).replace(os.sep, "/")
            )
    write_json(
        out_path,
        {
            "spec": [obj["spec"] for _, obj in loaded],
            "basis": first["basis"],
            "text_vocab": first["text_vocab"],
            "utterances": manifests,
            "split": split,
        },
    )
    return out_path
