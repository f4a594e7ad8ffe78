"""Emotion-cause recognition and cause-focused pragmatic decoding."""

from .backend import (
    Condition,
    ConditionalModel,
    ContextEchoModel,
    NGramModel,
    Sampling,
    Utterance,
    Vocabulary,
    load_model,
    sample_token,
    save_model,
    tokenize,
    train_ngram,
)
from .distractor import SamplingConfig, SharedWorld, build_world, sample_distractor
from .evaluation import (
    EmoCauseExample,
    RecallReport,
    coverage,
    emotion_accuracy,
    perplexity,
    random_baseline,
    recall_at_k,
)
from .pragmatics import (
    DecodeResult,
    PragmaticSession,
    RsaConfig,
    commit_token,
    decode,
    init_session,
    pragmatic_step,
)
from .probs import Distribution, LOG_ZERO, log_sum_exp, normalize
from .recognition import (
    CauseScores,
    CauseSelection,
    EmotionCatalog,
    EmotionPosterior,
    analyze,
    cause_scores,
    contrast_set,
    recognize_emotion,
    top_k_causes,
)
from .synthetic import SynthExample, generate_benchmark, write_benchmark

__version__ = "0.1.0"

__all__ = [
    "CauseScores",
    "CauseSelection",
    "Condition",
    "ConditionalModel",
    "ContextEchoModel",
    "DecodeResult",
    "Distribution",
    "EmoCauseExample",
    "EmotionCatalog",
    "EmotionPosterior",
    "LOG_ZERO",
    "NGramModel",
    "PragmaticSession",
    "RecallReport",
    "RsaConfig",
    "Sampling",
    "SamplingConfig",
    "SharedWorld",
    "SynthExample",
    "Utterance",
    "Vocabulary",
    "analyze",
    "build_world",
    "cause_scores",
    "commit_token",
    "contrast_set",
    "coverage",
    "decode",
    "emotion_accuracy",
    "generate_benchmark",
    "init_session",
    "load_model",
    "log_sum_exp",
    "normalize",
    "perplexity",
    "pragmatic_step",
    "random_baseline",
    "recall_at_k",
    "recognize_emotion",
    "sample_distractor",
    "sample_token",
    "save_model",
    "tokenize",
    "top_k_causes",
    "train_ngram",
    "write_benchmark",
]
