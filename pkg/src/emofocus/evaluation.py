"""Metrics and baselines: cause recall@k, coverage, emotion accuracy,
perplexity, and the random cause baseline.

Recall counts position overlap, not surface overlap, because the same word
can be cause and non-cause at different positions.  All metrics are
deterministic given seeds and embarrassingly parallel over examples.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from typing import Sequence

from .backend import Condition, ConditionalModel, Utterance
from .errors import DataFormatError, LabelError, UsageError
from .recognition import CauseSelection, EmotionCatalog, recognize_emotion


@dataclass(frozen=True)
class EmoCauseExample:
    """One annotated utterance: emotion, word tokens, gold cause positions."""

    emotion: str
    tokens: tuple[str, ...]
    cause_indices: tuple[int, ...]

    def __post_init__(self):
        if not self.tokens:
            raise DataFormatError("example has no tokens")
        if list(self.cause_indices) != sorted(set(self.cause_indices)):
            raise DataFormatError("cause_indices must be sorted and distinct")
        if self.cause_indices and not (
            0 <= self.cause_indices[0] and self.cause_indices[-1] < len(self.tokens)
        ):
            raise DataFormatError("cause_indices out of range")


def read_emocause(path: str) -> list[EmoCauseExample]:
    """Read a JSON Lines file of {"emotion", "tokens", "cause_indices"}."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
                out.append(
                    EmoCauseExample(
                        emotion=doc["emotion"],
                        tokens=tuple(doc["tokens"]),
                        cause_indices=tuple(doc["cause_indices"]),
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise DataFormatError(f"{path}:{lineno}: {exc}") from exc
    if not out:
        raise DataFormatError(f"{path}: no examples found")
    return out


def read_labeled(path: str) -> list[EmoCauseExample]:
    """Read labeled utterances, with or without cause annotations.

    Accepts both the corpus schema ({"emotion", "text"}) and the cause
    annotation schema ({"emotion", "tokens", "cause_indices"}); texts are
    tokenized, missing annotations become empty.
    """
    from .backend import tokenize

    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
                tokens = (
                    tuple(doc["tokens"])
                    if "tokens" in doc
                    else tokenize(doc["text"])
                )
                out.append(
                    EmoCauseExample(
                        emotion=doc["emotion"],
                        tokens=tokens,
                        cause_indices=tuple(doc.get("cause_indices", ())),
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise DataFormatError(f"{path}:{lineno}: {exc}") from exc
    if not out:
        raise DataFormatError(f"{path}: no examples found")
    return out


def read_corpus(path: str) -> list[tuple[str, str]]:
    """Read a JSON Lines training corpus of {"emotion", "text"}."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
                out.append((doc["emotion"], doc["text"]))
            except (KeyError, TypeError, ValueError) as exc:
                raise DataFormatError(f"{path}:{lineno}: {exc}") from exc
    if not out:
        raise DataFormatError(f"{path}: no examples found")
    return out


@dataclass(frozen=True)
class RecallReport:
    per_k: dict[int, float]
    n_examples: int
    n_skipped: int

    def to_dict(self) -> dict:
        return {
            "recall": {str(k): v for k, v in sorted(self.per_k.items())},
            "n_examples": self.n_examples,
            "n_skipped": self.n_skipped,
        }


def recall_at_k(
    predictions: Sequence[Sequence[int]],
    gold: Sequence[EmoCauseExample],
    ks: Sequence[int] = (1, 3, 5),
) -> RecallReport:
    """Mean per-example |top-k predicted ∩ gold| / |gold|.

    Examples with empty gold are skipped and counted separately.
    """
    if len(predictions) != len(gold):
        raise UsageError(
            f"{len(predictions)} predictions for {len(gold)} gold examples"
        )
    sums = {k: 0.0 for k in ks}
    n = 0
    skipped = 0
    for ranked, example in zip(predictions, gold):
        if not example.cause_indices:
            skipped += 1
            continue
        n += 1
        gold_set = set(example.cause_indices)
        for k in ks:
            hits = len(set(ranked[:k]) & gold_set)
            sums[k] += hits / len(gold_set)
    if n == 0:
        raise UsageError("no examples with gold cause annotations")
    return RecallReport(
        per_k={k: sums[k] / n for k in ks}, n_examples=n, n_skipped=skipped
    )


def random_baseline(
    example: EmoCauseExample, k: int, seed: int
) -> list[int]:
    """Uniformly sampled distinct positions, deterministic given the seed."""
    if k < 1:
        raise UsageError(f"k must be >= 1, got {k}")
    t = len(example.tokens)
    return random.Random(seed).sample(range(t), min(k, t))


def expected_random_recall(n_tokens: int, k: int) -> float:
    """Closed-form expected recall@k of the uniform baseline.

    Sampling min(k, T) of T positions hits each gold position with
    probability min(k, T)/T, so E[|S ∩ G|]/|G| = min(k, T)/T regardless of
    the gold size.
    """
    return min(k, n_tokens) / n_tokens


def coverage(response: Utterance, causes: CauseSelection) -> int:
    """Distinct cause words (case-folded exact match) present in a response."""
    response_words = {w.lower() for w in response.words}
    return len({w.lower() for w in causes.words} & response_words)


def emotion_accuracy(
    model: ConditionalModel,
    catalog: EmotionCatalog,
    examples: Sequence[EmoCauseExample],
    ks: Sequence[int] = (1, 5),
) -> dict[int, float]:
    """Fraction of examples whose gold label is in the posterior top-k."""
    if not examples:
        raise UsageError("no examples to evaluate")
    known = set(catalog.labels)
    hits = {k: 0 for k in ks}
    for example in examples:
        if example.emotion not in known:
            raise LabelError(f"unknown gold label {example.emotion!r}")
        posterior = recognize_emotion(
            model, catalog, Utterance.from_words(example.tokens)
        )
        for k in ks:
            if example.emotion in posterior.sorted_labels[:k]:
                hits[k] += 1
    return {k: hits[k] / len(examples) for k in ks}


def perplexity(
    model: ConditionalModel,
    items: Sequence[tuple[Condition, Sequence[int]]],
) -> float:
    """exp(-(sum of sequence log-likelihood) / (token count incl. eos))."""
    if not items:
        raise UsageError("no sequences to evaluate")
    total_logprob = 0.0
    total_tokens = 0
    for condition, tokens in items:
        total_logprob += model.sequence_logprob(condition, tokens)
        total_tokens += len(tokens) + 1
    return math.exp(-total_logprob / total_tokens)
