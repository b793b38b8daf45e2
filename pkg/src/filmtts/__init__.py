"""Emotion-aware token synthesis toolkit: synthetic corpora with word-level
emotion truth, a frame-to-word annotator, a FiLM-conditioned autoregressive
token generator, and trajectory metrics, all deterministic end to end."""

__version__ = "0.1.0"

from .annotator import (
    AnnotatorConfig,
    AnnotatorLossConfig,
    AnnotatorModel,
    annotate,
    annotator_forward,
    annotator_loss,
    train_annotator,
)
from .checkpoint import (
    Checkpoint,
    CheckpointError,
    load_checkpoint,
    save_checkpoint,
)
from .config import ConfigError, PipelineConfig, default_config, load_config
from .corpus import (
    Corpus,
    CorpusSpec,
    EmotionBasis,
    build_corpus,
    load_corpus,
    majority_category,
    make_emotion_basis,
    merge_corpora,
    synth_utterance,
)
from .data import (
    EMOTIONS,
    EMOTION_CODES,
    NEUTRAL,
    AlignmentError,
    EmotionFeatureSequence,
    SpanError,
    Utterance,
    ValidationReport,
    WordAlignment,
    WordEmotionAnnotation,
    frames_for_word,
    masked_average_pool,
    parse_alignment,
    validate_utterance,
)
from .metrics import (
    EmotionTrajectory,
    MetricReport,
    UtteranceEval,
    dtw,
    emo_sim,
    evaluate_corpus,
    per_emotion_accuracy,
)
from .training import TrainConfig, TrainingDiverged
from .tts import (
    GenerationResult,
    GenLossConfig,
    TtsConfig,
    TtsModel,
    emo_loss,
    film,
    generate,
    total_loss,
    train_tts,
    tts_loss,
)

__all__ = [
    "AnnotatorConfig",
    "AnnotatorLossConfig",
    "AnnotatorModel",
    "annotate",
    "annotator_forward",
    "annotator_loss",
    "train_annotator",
    "Checkpoint",
    "CheckpointError",
    "load_checkpoint",
    "save_checkpoint",
    "ConfigError",
    "PipelineConfig",
    "default_config",
    "load_config",
    "Corpus",
    "CorpusSpec",
    "EmotionBasis",
    "build_corpus",
    "load_corpus",
    "majority_category",
    "make_emotion_basis",
    "merge_corpora",
    "synth_utterance",
    "EMOTIONS",
    "EMOTION_CODES",
    "NEUTRAL",
    "AlignmentError",
    "EmotionFeatureSequence",
    "SpanError",
    "Utterance",
    "ValidationReport",
    "WordAlignment",
    "WordEmotionAnnotation",
    "frames_for_word",
    "masked_average_pool",
    "parse_alignment",
    "validate_utterance",
    "EmotionTrajectory",
    "MetricReport",
    "UtteranceEval",
    "dtw",
    "emo_sim",
    "evaluate_corpus",
    "per_emotion_accuracy",
    "TrainConfig",
    "TrainingDiverged",
    "GenerationResult",
    "GenLossConfig",
    "TtsConfig",
    "TtsModel",
    "emo_loss",
    "film",
    "generate",
    "total_loss",
    "train_tts",
    "tts_loss",
    "__version__",
]
