"""Distractor construction: perturbed copies of the context for the listener.

A distractor keeps the original context verbatim except at the recognized
cause-word positions, where replacement words are sampled from the model
conditioned on the least likely emotions.  The listener can then only tell
the true context apart through those targeted words.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

import numpy as np

from .backend import (
    Condition,
    ConditionalModel,
    Sampling,
    Utterance,
    sample_with_rng,
)
from .errors import CannotReplaceError, UsageError
from .probs import LOG_ZERO
from .recognition import CauseSelection, EmotionPosterior


@dataclass(frozen=True)
class SamplingConfig:
    """How distractors are sampled.

    Defaults follow the operating point used throughout: nucleus sampling
    with p=0.9, three negative emotions, a world of three contexts.
    """

    strategy: Sampling = field(
        default_factory=lambda: Sampling(mode="top_p", p=0.9, temperature=1.0)
    )
    max_retries: int = 10
    n_negative_emotions: int = 3
    world_size: int = 3

    def __post_init__(self):
        if self.world_size < 1:
            raise UsageError("world_size must be >= 1")
        if self.n_negative_emotions < 1:
            raise UsageError("n_negative_emotions must be >= 1")
        if self.max_retries < 1:
            raise UsageError("max_retries must be >= 1")


@dataclass(frozen=True)
class Replacement:
    position: int
    original: str
    replacement: str


@dataclass(frozen=True)
class Distractor:
    utterance: Utterance
    replaced: tuple[Replacement, ...]
    source_emotions: tuple[str, ...]


@dataclass(frozen=True)
class SharedWorld:
    """Ordered contexts [original, distractor_1, ...] with bookkeeping."""

    contexts: tuple[Utterance, ...]
    replaced_positions: tuple[tuple[Replacement, ...], ...]
    source_emotions: tuple[tuple[str, ...], ...]

    @property
    def original(self) -> Utterance:
        return self.contexts[0]

    def duplicate_indices(self) -> tuple[int, ...]:
        """Distractor indices whose word sequence repeats an earlier one."""
        seen: dict[tuple[str, ...], int] = {self.contexts[0].words: 0}
        dups = []
        for i, ctx in enumerate(self.contexts[1:], start=1):
            if ctx.words in seen:
                dups.append(i)
            else:
                seen[ctx.words] = i
        return tuple(dups)


def negative_emotions(
    posterior: EmotionPosterior, n: int
) -> tuple[str, ...]:
    """The n lowest-posterior labels in ascending posterior order.

    The recognized label is never included; ties break by catalog order.
    """
    labels = posterior.distribution.outcomes
    if len(labels) < n + 1:
        raise UsageError(
            f"catalog of {len(labels)} labels cannot supply {n} negatives"
        )
    ranked = [
        (float(posterior.distribution.logits[i]), i, lb)
        for i, lb in enumerate(labels)
        if lb != posterior.top_label
    ]
    ranked.sort(key=lambda item: (item[0], item[1]))
    return tuple(lb for _, _, lb in ranked[:n])


def sample_distractor(
    model: ConditionalModel,
    utterance: Utterance,
    selection: CauseSelection,
    posterior: EmotionPosterior,
    cfg: SamplingConfig,
    seed: int,
) -> Distractor:
    """One distractor: cause positions resampled under negative emotions.

    The sampling prefix at each position is the partially built distractor,
    so the original cause words never leak into the conditioning.  A sampled
    replacement is rejected if it equals the original word, reuses an
    earlier attempt for the position, or is a reserved token; after
    ``max_retries`` the highest-mass admissible token is used.
    """
    vocab = model.vocabulary
    negatives = negative_emotions(posterior, cfg.n_negative_emotions)
    condition = Condition(emotion_prefix=vocab.emotion_prefix(negatives))
    selected = set(selection.positions)
    rng = random.Random(seed)

    words: list[str] = []
    prefix: list[int] = []
    replaced: list[Replacement] = []
    for t, original in enumerate(utterance.words):
        if t not in selected:
            words.append(original)
            prefix.append(vocab.id_of(original))
            continue
        dist = model.next_token_logprobs(condition, tuple(prefix))
        rejected = set(vocab.reserved_ids)
        original_lower = original.lower()
        choice: int | None = None
        for _ in range(cfg.max_retries):
            tok = sample_with_rng(dist, cfg.strategy, rng)
            if tok in rejected or vocab.token_of(tok) == original_lower:
                rejected.add(tok)
                continue
            choice = tok
            break
        if choice is None:
            masked = dist.logits.copy()
            for tok in rejected | {vocab.id_of(original_lower)}:
                masked[tok] = LOG_ZERO
            if not np.isfinite(masked).any():
                raise CannotReplaceError(
                    f"no admissible replacement for {original!r} at {t}"
                )
            choice = int(np.argmax(masked))
        replacement = vocab.token_of(choice)
        words.append(replacement)
        prefix.append(choice)
        replaced.append(Replacement(t, original, replacement))

    return Distractor(
        utterance=Utterance.from_words(words),
        replaced=tuple(replaced),
        source_emotions=negatives,
    )


def build_world(
    model: ConditionalModel,
    utterance: Utterance,
    selection: CauseSelection,
    posterior: EmotionPosterior,
    cfg: SamplingConfig,
    seed: int,
) -> SharedWorld:
    """The original context plus world_size - 1 independently seeded
    distractors (seed+1, seed+2, ...).  Distractors may coincide with each
    other but never with the original at a replaced position."""
    contexts = [utterance]
    replaced = [()]
    sources = [()]
    for i in range(1, cfg.world_size):
        d = sample_distractor(
            model, utterance, selection, posterior, cfg, seed + i
        )
        contexts.append(d.utterance)
        replaced.append(d.replaced)
        sources.append(d.source_emotions)
    return SharedWorld(
        contexts=tuple(contexts),
        replaced_positions=tuple(replaced),
        source_emotions=tuple(sources),
    )
