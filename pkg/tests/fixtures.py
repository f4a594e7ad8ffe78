"""Shared test fixtures: tiny vocabularies and table-driven models."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from emofocus.backend import Condition, ConditionalModel, Vocabulary
from emofocus.probs import Distribution


def make_vocab(
    labels: Sequence[str] = ("joy", "sad"), words: Sequence[str] = ()
) -> Vocabulary:
    return Vocabulary(labels, words)


class FunctionModel(ConditionalModel):
    """ConditionalModel backed by a probability function.

    ``fn(condition, prefix)`` returns a probability vector over the full
    vocabulary (it is normalized here, so tables may be unnormalized).
    """

    def __init__(self, vocab: Vocabulary, fn: Callable):
        self._vocab = vocab
        self._fn = fn

    @property
    def vocabulary(self) -> Vocabulary:
        return self._vocab

    def next_token_logprobs(self, condition: Condition, prefix) -> Distribution:
        probs = np.asarray(self._fn(condition, tuple(prefix)), dtype=np.float64)
        probs = probs / probs.sum()
        with np.errstate(divide="ignore"):
            logits = np.log(probs)
        return Distribution(self._vocab.outcomes, logits, normalized=True)


class TableModel(FunctionModel):
    """FunctionModel with explicit tables and a uniform fallback.

    ``tables`` maps (emotion_prefix, context_tokens, prefix) to a mapping
    of token id -> probability; unlisted tokens get zero.  Lookups fall
    back to a prefix-agnostic entry (prefix None), then to uniform.
    """

    def __init__(self, vocab: Vocabulary, tables: dict):
        self._tables = tables

        def fn(condition: Condition, prefix):
            key = (condition.emotion_prefix, condition.context_tokens, prefix)
            entry = self._tables.get(key)
            if entry is None:
                entry = self._tables.get(
                    (condition.emotion_prefix, condition.context_tokens, None)
                )
            if entry is None:
                return np.full(len(vocab), 1.0 / len(vocab))
            probs = np.zeros(len(vocab))
            for token, p in entry.items():
                probs[token] = p
            return probs

        super().__init__(vocab, fn)


def uniform_model(vocab: Vocabulary) -> FunctionModel:
    return FunctionModel(
        vocab, lambda condition, prefix: np.full(len(vocab), 1.0 / len(vocab))
    )


# A tiny hand-written corpus in which "sick" and "flu" are unmistakably
# sadness-specific, used by the cause-extraction golden tests.
FLU_CORPUS = [
    ("sad", "i was sick from the flu"),
    ("sad", "i was sick from the cold"),
    ("sad", "the flu made me sick again"),
    ("sad", "i stayed home sick with the flu"),
    ("sad", "the cold made me miserable"),
    ("joy", "i got a gift from a friend"),
    ("joy", "the party was a delight"),
    ("joy", "i loved the gift from the party"),
    ("joy", "a friend came by with cake"),
    ("angry", "the thief broke my car window"),
    ("angry", "i was furious about the scam"),
    ("angry", "the scam cost me my savings"),
    ("angry", "my car was hit by a vandal"),
]
