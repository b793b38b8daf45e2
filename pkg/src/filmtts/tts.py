"""Emotion-conditioned autoregressive speech-token generation.

Text states are modulated by a per-token affine transform (FiLM) whose
coefficients come from fused text and emotion features; a causal decoder
cross-attends to the modulated states and predicts the next speech token
plus a per-step emotion posterior. The gamma coefficients are parameterized
as one plus a zero-initialized projection, so modulation starts as an exact
identity and the unconditioned generator is untouched at initialization.
"""

from __future__ import annotations

import copy
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn

from .checkpoint import Checkpoint, load_params
from .corpus import Corpus, majority_category, speech_vocab_size
from .data import (
    EMOTION_CODES,
    NUM_EMOTIONS,
    Utterance,
    WordEmotionAnnotation,
)
from .layers import DecoderBlock, sinusoidal_positions
from .training import (
    TrainConfig,
    clip_gradients,
    epoch_batches,
    guard_finite,
    make_optimizer,
    shuffle_rng,
    single_thread,
)

MODULATION_VARIANTS = ("film", "addition", "none")
ANNOTATION_SOURCES = ("gold_word_level", "global_only", "none")

_SAMPLING_STREAM = 0x6E0


@dataclass(frozen=True)
class GenLossConfig:
    """Label smoothing for the token loss and the emotion-loss weight."""

    epsilon: float = 0.1
    lambda_emo: float = 0.3

    def __post_init__(self) -> None:
        if not 0 <= self.epsilon < 1:
            raise ValueError("epsilon must be in [0, 1)")
        if self.lambda_emo < 0:
            raise ValueError("lambda_emo must be non-negative")

    def to_dict(self) -> dict:
        return {"epsilon": self.epsilon, "lambda_emo": self.lambda_emo}

    @classmethod
    def from_dict(cls, obj: dict) -> GenLossConfig:
        known = {f: obj[f] for f in cls.__dataclass_fields__ if f in obj}
        return cls(**known)


@dataclass(frozen=True)
class TtsConfig:
    """Generator architecture. The speech-token space is coupled to the text
    vocabulary: V = text_vocab_size * C, with one reserved EOS code at V."""

    text_vocab_size: int
    embed_dim: int = 64
    emotion_dim: int = 32
    num_heads: int = 4
    ff_dim: int = 128
    decoder_layers: int = 1
    variant: str = "film"
    num_classes: int = NUM_EMOTIONS

    def __post_init__(self) -> None:
        if self.text_vocab_size < 2:
            raise ValueError("text_vocab_size must be >= 2")
        if self.embed_dim % self.num_heads != 0:
            raise ValueError("embed_dim must be divisible by num_heads")
        if self.embed_dim % 2 != 0:
            raise ValueError("embed_dim must be even for position encodings")
        if self.decoder_layers < 1:
            raise ValueError("decoder_layers must be >= 1")
        if self.variant not in MODULATION_VARIANTS:
            raise ValueError(
                f"variant must be one of {MODULATION_VARIANTS}, got {self.variant!r}"
            )
        if self.num_classes != NUM_EMOTIONS:
            raise ValueError(f"num_classes must be {NUM_EMOTIONS}")

    @property
    def speech_vocab_size(self) -> int:
        return speech_vocab_size(self.text_vocab_size)

    @property
    def eos_id(self) -> int:
        return self.speech_vocab_size

    @property
    def output_vocab_size(self) -> int:
        """Logit width of the speech head: all coupled tokens plus EOS."""
        return self.speech_vocab_size + 1

    @property
    def bos_id(self) -> int:
        return self.speech_vocab_size + 1

    @property
    def end_of_text_id(self) -> int:
        return self.text_vocab_size

    def to_dict(self) -> dict:
        return {
            "text_vocab_size": self.text_vocab_size,
            "embed_dim": self.embed_dim,
            "emotion_dim": self.emotion_dim,
            "num_heads": self.num_heads,
            "ff_dim": self.ff_dim,
            "decoder_layers": self.decoder_layers,
            "variant": self.variant,
            "num_classes": self.num_classes,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> TtsConfig:
        known = {f: obj[f] for f in cls.__dataclass_fields__ if f in obj}
        return cls(**known)


@dataclass
class TtsBatch:
    """Padded teacher-forcing targets: (B, L) token and emotion label arrays
    with true lengths; padded positions never reach a loss term."""

    targets: torch.Tensor
    emotion_labels: torch.Tensor
    lengths: torch.Tensor
    vocab_size: int
    num_classes: int = NUM_EMOTIONS

    def __post_init__(self) -> None:
        if self.targets.shape != self.emotion_labels.shape:
            raise ValueError("targets and emotion_labels must have the same shape")
        if self.targets.ndim != 2:
            raise ValueError("targets must be (B, L)")
        if self.lengths.shape != (self.targets.shape[0],):
            raise ValueError("lengths must be (B,)")
        if int(self.lengths.min()) < 0 or int(self.lengths.max()) > self.targets.shape[1]:
            raise ValueError("lengths must lie in [0, L]")
        mask = self.step_mask
        if mask.any():
            live_targets = self.targets[mask]
            if int(live_targets.min()) < 0 or int(live_targets.max()) >= self.vocab_size:
                raise ValueError(f"targets must lie in [0, {self.vocab_size})")
            live_labels = self.emotion_labels[mask]
            if int(live_labels.min()) < 0 or int(live_labels.max()) >= self.num_classes:
                raise ValueError(f"emotion labels must lie in [0, {self.num_classes})")

    @property
    def step_mask(self) -> torch.Tensor:
        """(B, L) bool, True on real (non-padded) steps."""
        length = self.targets.shape[1]
        return torch.arange(length).unsqueeze(0) < self.lengths.unsqueeze(1)

    @property
    def num_steps(self) -> int:
        return int(self.lengths.sum())


def pack_batch(
    target_seqs: Sequence[Sequence[int]],
    label_seqs: Sequence[Sequence[int]],
    vocab_size: int,
) -> TtsBatch:
    """Pad variable-length target/label sequences into one TtsBatch."""
    if len(target_seqs) != len(label_seqs):
        raise ValueError("need as many label sequences as target sequences")
    if not target_seqs:
        raise ValueError("batch must be non-empty")
    lengths = [len(seq) for seq in target_seqs]
    if lengths != [len(seq) for seq in label_seqs]:
        raise ValueError("per-sequence target and label lengths must match")
    width = max(lengths)
    targets = torch.zeros(len(target_seqs), width, dtype=torch.long)
    labels = torch.zeros(len(target_seqs), width, dtype=torch.long)
    for row, (seq, lab) in enumerate(zip(target_seqs, label_seqs)):
        targets[row, : len(seq)] = torch.tensor(seq, dtype=torch.long)
        labels[row, : len(lab)] = torch.tensor(lab, dtype=torch.long)
    return TtsBatch(
        targets=targets,
        emotion_labels=labels,
        lengths=torch.tensor(lengths, dtype=torch.long),
        vocab_size=vocab_size,
    )


# ---------------------------------------------------------------------------
# model
# ---------------------------------------------------------------------------


def apply_film(h: torch.Tensor, gamma: torch.Tensor, beta: torch.Tensor) -> torch.Tensor:
    """The affine modulation itself: gamma * h + beta, elementwise."""
    return gamma * h + beta


class TtsModel(nn.Module):
    """Text encoder, emotion encoder, modulation, and causal token decoder.

    The cross-attention memory is one state per text token plus a learned
    end-of-text marker, which makes the EOS step positionally predictable for
    variable-length inputs. The marker carries zero emotion features.
    """

    def __init__(self, config: TtsConfig):
        super().__init__()
        self.config = config
        dim, e_dim = config.embed_dim, config.emotion_dim
        self.text_embedding = nn.Embedding(config.text_vocab_size + 1, dim)
        self.category_embedding = nn.Embedding(config.num_classes, e_dim)
        self.intensity_direction = nn.Parameter(torch.randn(e_dim, dtype=torch.float64))
        if config.variant == "film":
            self.fuse = nn.Linear(dim + e_dim, dim)
            self.film_proj = nn.Linear(dim, 2 * dim)
            nn.init.zeros_(self.film_proj.weight)
            nn.init.zeros_(self.film_proj.bias)
        elif config.variant == "addition":
            self.add_proj = nn.Linear(e_dim, dim)
            nn.init.zeros_(self.add_proj.weight)
            nn.init.zeros_(self.add_proj.bias)
        self.token_embedding = nn.Embedding(config.speech_vocab_size + 2, dim)
        self.decoder_blocks = nn.ModuleList(
            DecoderBlock(dim, config.num_heads, config.ff_dim)
            for _ in range(config.decoder_layers)
        )
        self.decoder_norm = nn.LayerNorm(dim)
        self.speech_head = nn.Linear(dim, config.output_vocab_size)
        self.emotion_head = nn.Linear(dim, config.num_classes)
        self.double()

    # -- encoding ----------------------------------------------------------

    def encode_text(self, token_ids: torch.Tensor) -> torch.Tensor:
        """Embed word tokens, append the end-of-text marker, add positions."""
        if token_ids.ndim != 1:
            raise ValueError("token_ids must be 1-dimensional")
        if token_ids.numel() == 0:
            raise ValueError("need at least one text token")
        if int(token_ids.min()) < 0 or int(token_ids.max()) >= self.config.text_vocab_size:
            raise ValueError(
                f"text token ids must lie in [0, {self.config.text_vocab_size})"
            )
        marker = torch.tensor([self.config.end_of_text_id], dtype=torch.long)
        ids = torch.cat([token_ids.long(), marker])
        embedded = self.text_embedding(ids)
        return embedded + sinusoidal_positions(embedded.shape[0], embedded.shape[1])

    def emotion_features(
        self, categories: torch.Tensor, intensities: torch.Tensor
    ) -> torch.Tensor:
        """Per-token emotion vectors: category embedding plus scaled direction."""
        if categories.shape != intensities.shape or categories.ndim != 1:
            raise ValueError("categories and intensities must be matching 1-d tensors")
        return (
            self.category_embedding(categories.long())
            + intensities.unsqueeze(-1) * self.intensity_direction
        )

    def modulate(
        self,
        h_text: torch.Tensor,
        emotion: torch.Tensor,
        variant: str | None = None,
    ) -> torch.Tensor:
        """Apply the configured conditioning variant to the text states."""
        if variant is None:
            variant = self.config.variant
        if variant == "none":
            return h_text
        if h_text.shape[0] != emotion.shape[0]:
            raise ValueError(
                f"length mismatch: {h_text.shape[0]} text states vs "
                f"{emotion.shape[0]} emotion vectors"
            )
        if variant == "film":
            if not hasattr(self, "film_proj"):
                raise ValueError("model was not built with the film variant")
            fused = self.fuse(torch.cat([h_text, emotion], dim=-1))
            projected = self.film_proj(fused)
            gamma = 1.0 + projected[:, : self.config.embed_dim]
            beta = projected[:, self.config.embed_dim :]
            return apply_film(h_text, gamma, beta)
        if variant == "addition":
            if not hasattr(self, "add_proj"):
                raise ValueError("model was not built with the addition variant")
            return h_text + self.add_proj(emotion)
        raise ValueError(f"unknown variant {variant!r}")

    def build_memory(
        self,
        token_ids: torch.Tensor,
        categories: torch.Tensor,
        intensities: torch.Tensor,
    ) -> torch.Tensor:
        """Modulated text states including the (zero-emotion) end marker."""
        h_text = self.encode_text(token_ids)
        emotion = self.emotion_features(categories, intensities)
        zero_row = torch.zeros(1, self.config.emotion_dim, dtype=emotion.dtype)
        return self.modulate(h_text, torch.cat([emotion, zero_row]))

    # -- decoding ----------------------------------------------------------

    def decode(self, input_ids: torch.Tensor, memory: torch.Tensor) -> torch.Tensor:
        """Causal decoder states (L, embed_dim) over previous-token inputs."""
        x = self.token_embedding(input_ids.long())
        x = x + sinusoidal_positions(x.shape[0], x.shape[1])
        for block in self.decoder_blocks:
            x = block(x, memory)
        return self.decoder_norm(x)

    def forward(
        self,
        token_ids: torch.Tensor,
        categories: torch.Tensor,
        intensities: torch.Tensor,
        targets: torch.Tensor,
    ) -> tuple[torch.Tensor, torch.Tensor]:
        """Teacher-forced logits: speech (L, V+1) and emotion (L, C)."""
        memory = self.build_memory(token_ids, categories, intensities)
        bos = torch.tensor([self.config.bos_id], dtype=torch.long)
        inputs = torch.cat([bos, targets.long()[:-1]])
        states = self.decode(inputs, memory)
        return self.speech_head(states), self.emotion_head(states)

    def num_parameters(self) -> int:
        return sum(p.numel() for p in self.parameters())

    def clone_with_variant(self, variant: str) -> TtsModel:
        """A new model with a different conditioning variant; every parameter
        the two architectures share is copied over bitwise."""
        config = TtsConfig.from_dict({**self.config.to_dict(), "variant": variant})
        other = TtsModel(config)
        source = self.state_dict()
        merged = other.state_dict()
        for name in merged:
            if name in source:
                merged[name] = source[name].clone()
        other.load_state_dict(merged)
        return other


def encode_emotion(
    model: TtsModel,
    annotations: Sequence[WordEmotionAnnotation],
    word_of_token: Sequence[int],
) -> torch.Tensor:
    """Per-token emotion features for tokens mapped onto annotated words."""
    for position, word_index in enumerate(word_of_token):
        if not 0 <= word_index < len(annotations):
            raise ValueError(
                f"token {position} maps to word {word_index}, but only "
                f"{len(annotations)} words are annotated"
            )
    categories = torch.tensor(
        [annotations[i].code for i in word_of_token], dtype=torch.long
    )
    intensities = torch.tensor(
        [annotations[i].intensity for i in word_of_token], dtype=torch.float64
    )
    return model.emotion_features(categories, intensities)


def film(
    model: TtsModel,
    h_text: torch.Tensor,
    emotion: torch.Tensor,
    variant: str | None = None,
) -> torch.Tensor:
    """Module-level alias for the model's conditioning step."""
    return model.modulate(h_text, emotion, variant)


# ---------------------------------------------------------------------------
# losses
# ---------------------------------------------------------------------------


def tts_loss(logits: torch.Tensor, batch: TtsBatch, epsilon: float) -> torch.Tensor:
    """Label-smoothed next-token cross-entropy, averaged over real steps.

    The smoothed target puts 1 - epsilon on the gold token and spreads
    epsilon uniformly over the whole vocabulary, so the per-step loss is
    (1 - epsilon) * nll + epsilon * mean over classes of the negative
    log-probabilities.
    """
    if not 0 <= epsilon < 1:
        raise ValueError("epsilon must be in [0, 1)")
    if logits.shape[:2] != batch.targets.shape:
        raise ValueError(
            f"logits shape {tuple(logits.shape)} does not cover targets "
            f"{tuple(batch.targets.shape)}"
        )
    if logits.shape[2] != batch.vocab_size:
        raise ValueError(
            f"logit width {logits.shape[2]} != batch vocab size {batch.vocab_size}"
        )
    mask = batch.step_mask
    total_steps = batch.num_steps
    if total_steps == 0:
        raise ValueError("batch has no unpadded steps")
    log_probs = torch.log_softmax(logits, dim=-1)
    nll = -log_probs.gather(-1, batch.targets.unsqueeze(-1)).squeeze(-1)
    smooth = -log_probs.mean(dim=-1)
    per_step = (1.0 - epsilon) * nll + epsilon * smooth
    return (per_step * mask).sum() / total_steps


def emo_loss(step_logits: torch.Tensor, batch: TtsBatch) -> torch.Tensor:
    """Step-wise emotion cross-entropy, averaged over real steps."""
    if step_logits.shape[:2] != batch.emotion_labels.shape:
        raise ValueError(
            f"step logits shape {tuple(step_logits.shape)} does not cover labels "
            f"{tuple(batch.emotion_labels.shape)}"
        )
    if step_logits.shape[2] != batch.num_classes:
        raise ValueError(
            f"emotion logit width {step_logits.shape[2]} != {batch.num_classes}"
        )
    mask = batch.step_mask
    total_steps = batch.num_steps
    if total_steps == 0:
        raise ValueError("batch has no unpadded steps")
    log_probs = torch.log_softmax(step_logits, dim=-1)
    nll = -log_probs.gather(-1, batch.emotion_labels.unsqueeze(-1)).squeeze(-1)
    return (nll * mask).sum() / total_steps


def total_loss(
    l_tts: torch.Tensor, l_emo: torch.Tensor, cfg: GenLossConfig
) -> torch.Tensor:
    """Token loss plus lambda times the emotion loss."""
    return l_tts + cfg.lambda_emo * l_emo


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------


@dataclass
class _Example:
    token_ids: torch.Tensor
    categories: torch.Tensor
    intensities: torch.Tensor
    targets: list[int]
    emotion_labels: list[int]


def conditioning_labels(
    utterance: Utterance, annotation_source: str
) -> tuple[list[int], list[float]]:
    """Per-word (category code, intensity) pairs under an annotation source.

    gold_word_level passes the gold labels through; global_only collapses to
    the utterance's majority category at intensity 1.0; none zeroes the
    conditioning entirely (the model sees no emotion signal).
    """
    if annotation_source not in ANNOTATION_SOURCES:
        raise ValueError(
            f"annotation_source must be one of {ANNOTATION_SOURCES}, "
            f"got {annotation_source!r}"
        )
    annotations = utterance.annotations
    if annotations is None:
        raise ValueError(f"utterance {utterance.utterance_id!r} has no annotations")
    n = len(annotations)
    if annotation_source == "gold_word_level":
        return [a.code for a in annotations], [a.intensity for a in annotations]
    if annotation_source == "global_only":
        label = utterance.global_label or majority_category(annotations)
        return [EMOTION_CODES[label]] * n, [1.0] * n
    return [0] * n, [0.0] * n


def _prepare_examples(
    corpus: Corpus, split: str, config: TtsConfig, annotation_source: str
) -> list[_Example]:
    examples = []
    for utterance in corpus.split_utterances(split):
        if utterance.speech_tokens is None:
            raise ValueError(
                f"utterance {utterance.utterance_id!r} has no speech tokens"
            )
        if utterance.annotations is None:
            raise ValueError(
                f"utterance {utterance.utterance_id!r} has no annotations"
            )
        token_ids = torch.tensor(corpus.text_token_ids(utterance), dtype=torch.long)
        codes, intensities = conditioning_labels(utterance, annotation_source)
        gold_codes = [a.code for a in utterance.annotations]
        targets = list(utterance.speech_tokens) + [config.eos_id]
        labels = gold_codes + [gold_codes[-1]]
        examples.append(
            _Example(
                token_ids=token_ids,
                categories=torch.tensor(codes, dtype=torch.long),
                intensities=torch.tensor(intensities, dtype=torch.float64),
                targets=targets,
                emotion_labels=labels,
            )
        )
    return examples


def _batch_losses(
    model: TtsModel,
    examples: list[_Example],
    loss_cfg: GenLossConfig,
    use_emotion_loss: bool,
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor, int, int]:
    """Forward a list of examples; returns (total, tts, emo, correct, steps)."""
    width = max(len(e.targets) for e in examples)
    vocab = model.config.output_vocab_size
    speech_logits = torch.zeros(len(examples), width, vocab, dtype=torch.float64)
    emotion_logits = torch.zeros(
        len(examples), width, model.config.num_classes, dtype=torch.float64
    )
    for row, example in enumerate(examples):
        targets = torch.tensor(example.targets, dtype=torch.long)
        speech, emotion = model(
            example.token_ids, example.categories, example.intensities, targets
        )
        speech_logits[row, : speech.shape[0]] = speech
        emotion_logits[row, : emotion.shape[0]] = emotion
    batch = pack_batch(
        [e.targets for e in examples],
        [e.emotion_labels for e in examples],
        vocab_size=vocab,
    )
    l_tts = tts_loss(speech_logits, batch, loss_cfg.epsilon)
    if use_emotion_loss:
        l_emo = emo_loss(emotion_logits, batch)
    else:
        l_emo = torch.zeros((), dtype=torch.float64)
    total = total_loss(l_tts, l_emo, loss_cfg)
    mask = batch.step_mask
    predictions = speech_logits.detach().argmax(dim=-1)
    correct = int(((predictions == batch.targets) & mask).sum())
    return total, l_tts, l_emo, correct, batch.num_steps


def _evaluate_split(
    model: TtsModel, examples: list[_Example], loss_cfg: GenLossConfig, use_emo: bool
) -> dict:
    model.eval()
    with torch.no_grad():
        total, l_tts, l_emo, correct, steps = _batch_losses(
            model, examples, loss_cfg, use_emo
        )
    return {
        "loss": float(total),
        "tts_loss": float(l_tts),
        "emo_loss": float(l_emo),
        "token_accuracy": correct / steps,
    }


def train_tts(
    corpus: Corpus,
    cfg: TrainConfig,
    loss_cfg: GenLossConfig,
    model_cfg: TtsConfig | None = None,
    annotation_source: str = "gold_word_level",
) -> tuple[TtsModel, list[dict]]:
    """Teacher-forced training on the corpus train split.

    With annotation_source="none" the emotion supervision term is dropped
    (there are no word labels to supervise with) and conditioning is zeroed.
    Returns the best-dev model plus a per-epoch log with a pre-training
    record at epoch 0.
    """
    single_thread()
    if model_cfg is None:
        model_cfg = TtsConfig(text_vocab_size=len(corpus.text_vocab))
    if model_cfg.text_vocab_size != len(corpus.text_vocab):
        raise ValueError(
            f"model text_vocab_size {model_cfg.text_vocab_size} != corpus "
            f"vocabulary size {len(corpus.text_vocab)}"
        )
    use_emo = annotation_source != "none" and loss_cfg.lambda_emo > 0
    train_examples = _prepare_examples(corpus, "train", model_cfg, annotation_source)
    dev_examples = _prepare_examples(corpus, "dev", model_cfg, annotation_source)

    torch.manual_seed(cfg.seed)
    model = TtsModel(model_cfg)
    optimizer = make_optimizer(model, cfg)
    rng = shuffle_rng(cfg.seed)

    log: list[dict] = []
    dev = _evaluate_split(model, dev_examples, loss_cfg, use_emo)
    log.append({"epoch": 0, "train_loss": None, **{f"dev_{k}": v for k, v in dev.items()}})
    best_state = copy.deepcopy(model.state_dict())
    best_dev = dev["loss"]

    for epoch in range(1, cfg.epochs + 1):
        model.train()
        epoch_loss = 0.0
        n_batches = 0
        for batch_index, batch_ids in enumerate(
            epoch_batches(len(train_examples), cfg.batch_size, rng)
        ):
            optimizer.zero_grad()
            chosen = [train_examples[i] for i in batch_ids]
            total, _, _, _, _ = _batch_losses(model, chosen, loss_cfg, use_emo)
            guard_finite(total, model, epoch, batch_index)
            total.backward()
            clip_gradients(model, cfg)
            optimizer.step()
            epoch_loss += float(total.detach())
            n_batches += 1
        dev = _evaluate_split(model, dev_examples, loss_cfg, use_emo)
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


# ---------------------------------------------------------------------------
# generation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GenerationResult:
    """Tokens (EOS included when emitted) and per-step emotion posteriors."""

    tokens: tuple[int, ...]
    posteriors: np.ndarray
    mode: str
    seed: int | None = None

    def to_dict(self) -> dict:
        return {
            "tokens": list(self.tokens),
            "posteriors": self.posteriors.tolist(),
            "mode": self.mode,
            "seed": self.seed,
        }


def generate(
    model: TtsModel,
    token_ids: Sequence[int],
    annotations: Sequence[WordEmotionAnnotation] | None,
    max_len: int,
    mode: str = "greedy",
    seed: int | None = None,
) -> GenerationResult:
    """Autoregressive decoding; stops at EOS or after max_len tokens.

    Greedy mode is deterministic; sampled mode requires an explicit seed.
    Passing annotations=None runs the unconditioned path (zero emotion
    features), matching models trained with annotation_source="none".
    """
    if max_len < 1:
        raise ValueError(f"max_len must be >= 1, got {max_len}")
    if mode not in ("greedy", "sampled"):
        raise ValueError(f"mode must be greedy or sampled, got {mode!r}")
    if mode == "sampled" and seed is None:
        raise ValueError("sampled mode needs an explicit seed")
    ids = torch.tensor(list(token_ids), dtype=torch.long)
    if annotations is None:
        categories = torch.zeros(len(ids), dtype=torch.long)
        intensities = torch.zeros(len(ids), dtype=torch.float64)
    else:
        if len(annotations) != len(ids):
            raise ValueError(
                f"{len(ids)} tokens but {len(annotations)} annotations"
            )
        categories = torch.tensor([a.code for a in annotations], dtype=torch.long)
        intensities = torch.tensor(
            [a.intensity for a in annotations], dtype=torch.float64
        )
    rng = (
        np.random.default_rng([seed, _SAMPLING_STREAM]) if mode == "sampled" else None
    )
    model.eval()
    tokens: list[int] = []
    posteriors: list[np.ndarray] = []
    with torch.no_grad():
        memory = model.build_memory(ids, categories, intensities)
        inputs = [model.config.bos_id]
        for _ in range(max_len):
            states = model.decode(torch.tensor(inputs, dtype=torch.long), memory)
            speech_logits = model.speech_head(states[-1])
            emotion_posterior = torch.softmax(model.emotion_head(states[-1]), dim=-1)
            if mode == "greedy":
                token = int(np.argmax(speech_logits.numpy()))
            else:
                probs = torch.softmax(speech_logits, dim=-1).numpy()
                probs = probs / probs.sum()
                token = int(rng.choice(len(probs), p=probs))
            tokens.append(token)
            posteriors.append(emotion_posterior.numpy())
            if token == model.config.eos_id:
                break
            inputs.append(token)
    return GenerationResult(
        tokens=tuple(tokens),
        posteriors=np.stack(posteriors),
        mode=mode,
        seed=seed,
    )


def tts_from_checkpoint(checkpoint: Checkpoint) -> TtsModel:
    config = TtsConfig.from_dict(checkpoint.config["model"])
    model = TtsModel(config)
    load_params(model, checkpoint.params)
    model.eval()
    return model
