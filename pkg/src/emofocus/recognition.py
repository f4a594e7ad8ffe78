"""Emotion recognition and emotion-cause-word scoring over a generative model.

Both operations need only sentence-level emotion supervision.  Recognition
is Bayes' rule over per-class sequence likelihoods; cause scoring asks, for
each word position, how strongly the recognized emotion is preferred over a
contrast set of unlikely emotions given the observed prefix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .backend import Condition, ConditionalModel, Utterance
from .errors import UsageError
from .probs import Distribution, LOG_ZERO, log_sum_exp, normalize, uniform

_PUNCT = set(".,!?;:'\"()[]-")


@dataclass(frozen=True)
class EmotionCatalog:
    """The finite emotion label set with its prior (uniform by default)."""

    labels: tuple[str, ...]
    prior: Distribution

    def __post_init__(self):
        if len(self.labels) < 2:
            raise UsageError("catalog needs at least two labels")
        if self.prior.outcomes != self.labels:
            raise UsageError("prior support must equal the catalog labels")

    @classmethod
    def with_uniform_prior(cls, labels: Sequence[str]) -> "EmotionCatalog":
        return cls(tuple(labels), uniform(tuple(labels)))

    @classmethod
    def from_model(cls, model: ConditionalModel) -> "EmotionCatalog":
        return cls.with_uniform_prior(model.vocabulary.labels)


@dataclass(frozen=True)
class EmotionPosterior:
    """Posterior over catalog labels for one utterance."""

    distribution: Distribution
    top_label: str
    sorted_labels: tuple[str, ...]

    def prob_of(self, label: str) -> float:
        return math.exp(self.distribution.logit_of(label))


@dataclass(frozen=True)
class PositionScore:
    """Cause evidence for one word position.

    ``terms`` carries the per-emotion conditional log-likelihoods that make
    up the contrast denominator; ``uninformative`` marks positions where
    every contrast emotion assigned zero mass.
    """

    word: str
    score: float
    terms: dict[str, float]
    uninformative: bool = False


@dataclass(frozen=True)
class CauseScores:
    utterance: Utterance
    top_label: str
    contrast_set: tuple[str, ...]
    per_position: tuple[PositionScore, ...]

    def scores(self) -> tuple[float, ...]:
        return tuple(p.score for p in self.per_position)


@dataclass(frozen=True)
class CauseSelection:
    """Top-k cause words, ordered by descending score then position."""

    positions: tuple[int, ...]
    words: tuple[str, ...]
    k: int


def recognize_emotion(
    model: ConditionalModel, catalog: EmotionCatalog, utterance: Utterance
) -> EmotionPosterior:
    """Posterior P(emotion | utterance) by Bayes' rule over class likelihoods.

    Each label's logit is the sequence log-likelihood under that label's
    conditioning prefix plus the log prior; ties sort by catalog order.
    """
    if len(utterance) == 0:
        raise UsageError("cannot recognize emotion of an empty utterance")
    vocab = model.vocabulary
    tokens = vocab.ids_of(utterance.words)
    logits = np.empty(len(catalog.labels))
    for i, label in enumerate(catalog.labels):
        cond = Condition(emotion_prefix=vocab.emotion_prefix([label]))
        logits[i] = model.sequence_logprob(cond, tokens)
    posterior = normalize(
        Distribution(catalog.labels, logits + catalog.prior.logits)
    )
    order = sorted(
        range(len(catalog.labels)), key=lambda i: (-posterior.logits[i], i)
    )
    sorted_labels = tuple(catalog.labels[i] for i in order)
    return EmotionPosterior(
        distribution=posterior,
        top_label=sorted_labels[0],
        sorted_labels=sorted_labels,
    )


def contrast_set(posterior: EmotionPosterior, m: int = 2) -> tuple[str, ...]:
    """The recognized label plus the ``m`` lowest-posterior labels.

    Returned as (top, low_1, ..., low_m) with the low labels in ascending
    posterior order; ties break by catalog order and the top label never
    appears in the low set.
    """
    labels = posterior.distribution.outcomes
    if len(labels) < m + 1:
        raise UsageError(f"catalog of {len(labels)} labels cannot support m={m}")
    top = posterior.top_label
    rest = [
        (float(posterior.distribution.logits[i]), i, lb)
        for i, lb in enumerate(labels)
        if lb != top
    ]
    rest.sort(key=lambda item: (item[0], item[1]))
    return (top,) + tuple(lb for _, _, lb in rest[:m])


def _sampled_prefixes(
    model: ConditionalModel,
    condition: Condition,
    length: int,
    n_samples: int,
    seed: int,
) -> list[tuple[int, ...]]:
    """Synthetic prefix sequences drawn from the class-conditional model."""
    import random as _random

    from .backend import Sampling, sample_with_rng

    rng = _random.Random(seed)
    strategy = Sampling(mode="temperature", temperature=1.0)
    out = []
    for _ in range(n_samples):
        prefix: list[int] = []
        for _ in range(length):
            dist = model.next_token_logprobs(condition, tuple(prefix))
            prefix.append(sample_with_rng(dist, strategy, rng))
        out.append(tuple(prefix))
    return out


def cause_scores(
    model: ConditionalModel,
    utterance: Utterance,
    top_label: str,
    contrast: Sequence[str],
    prefix_samples: int = 1,
    sample_seed: int = 0,
) -> CauseScores:
    """Per-position emotion likelihood of the recognized label.

    score_t = P(w_t | top, w_<t) * P(top) / sum_e P(w_t | e, w_<t) * P(e)
    with a uniform prior over the contrast set and the observed prefix as
    the single sample of w_<t.  Computed in log space.

    ``prefix_samples`` above one averages the score with additional
    synthetic prefixes drawn from the recognized label's conditional
    (deterministic given ``sample_seed``); the default of one sample uses
    only the observed prefix.
    """
    if top_label not in contrast:
        raise UsageError("the recognized label must be in the contrast set")
    if len(utterance) == 0:
        raise UsageError("cannot score an empty utterance")
    if prefix_samples < 1:
        raise UsageError("prefix_samples must be >= 1")
    vocab = model.vocabulary
    tokens = vocab.ids_of(utterance.words)
    conditions = {
        label: Condition(emotion_prefix=vocab.emotion_prefix([label]))
        for label in contrast
    }
    extra_prefixes = (
        _sampled_prefixes(
            model,
            conditions[top_label],
            len(tokens) - 1,
            prefix_samples - 1,
            sample_seed,
        )
        if prefix_samples > 1
        else []
    )
    positions = []
    for t, tok in enumerate(tokens):
        terms = {
            label: model.token_logprob(conditions[label], tokens[:t], tok)
            for label in contrast
        }
        values = list(terms.values())
        if all(v == LOG_ZERO for v in values):
            positions.append(
                PositionScore(
                    word=utterance.words[t],
                    score=1.0 / len(contrast),
                    terms=terms,
                    uninformative=True,
                )
            )
            continue
        # The uniform contrast prior cancels between numerator and denominator.
        scores = [math.exp(terms[top_label] - log_sum_exp(values))]
        for sampled in extra_prefixes:
            sample_terms = [
                model.token_logprob(conditions[label], sampled[:t], tok)
                for label in contrast
            ]
            top_term = model.token_logprob(
                conditions[top_label], sampled[:t], tok
            )
            if all(v == LOG_ZERO for v in sample_terms):
                scores.append(1.0 / len(contrast))
            else:
                scores.append(math.exp(top_term - log_sum_exp(sample_terms)))
        positions.append(
            PositionScore(
                word=utterance.words[t],
                score=sum(scores) / len(scores),
                terms=terms,
            )
        )
    return CauseScores(
        utterance=utterance,
        top_label=top_label,
        contrast_set=tuple(contrast),
        per_position=tuple(positions),
    )


def word_filter(
    stopwords: Sequence[str] = (), drop_punctuation: bool = False
) -> Callable[[str], bool]:
    """Predicate for top_k_causes: True keeps the word.  Off by default."""
    stop = {w.lower() for w in stopwords}

    def keep(word: str) -> bool:
        if drop_punctuation and all(ch in _PUNCT for ch in word):
            return False
        return word.lower() not in stop

    return keep


def top_k_causes(
    scores: CauseScores,
    k: int,
    exclusions: Callable[[str], bool] | None = None,
) -> CauseSelection:
    """Select the k highest-scoring positions whose words pass the filter.

    Ties break by ascending position; short utterances yield short
    selections.
    """
    if k < 1:
        raise UsageError(f"k must be >= 1, got {k}")
    eligible = [
        (-p.score, t)
        for t, p in enumerate(scores.per_position)
        if exclusions is None or exclusions(p.word)
    ]
    eligible.sort()
    chosen = eligible[:k]
    positions = tuple(t for _, t in chosen)
    return CauseSelection(
        positions=positions,
        words=tuple(scores.per_position[t].word for t in positions),
        k=k,
    )


def analyze(
    model: ConditionalModel,
    catalog: EmotionCatalog,
    text_or_utterance: str | Utterance,
    k: int = 5,
    contrast_size: int = 2,
    exclusions: Callable[[str], bool] | None = None,
) -> tuple[EmotionPosterior, CauseScores, CauseSelection]:
    """Convenience pipeline: recognize, score, and select cause words."""
    if isinstance(text_or_utterance, Utterance):
        utterance = text_or_utterance
    else:
        utterance = Utterance.from_text(text_or_utterance)
    posterior = recognize_emotion(model, catalog, utterance)
    contrast = contrast_set(posterior, m=contrast_size)
    scores = cause_scores(model, utterance, posterior.top_label, contrast)
    return posterior, scores, top_k_causes(scores, k, exclusions)
