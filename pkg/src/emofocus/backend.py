"""Conditional sequence models: the shared backend for speaker and estimator.

The reference implementation is a class-conditional n-gram language model
with absolute-discount interpolation.  The conditioning class is the exact
emotion-prefix sequence; a class that never occurred in training (e.g. a
multi-emotion prefix) backs off to the class-agnostic aggregate model.
Any other model can stand in behind the :class:`ConditionalModel` interface.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
import re
import struct
import zlib
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    LabelError,
    ModelChecksumError,
    ModelFileError,
    ModelVersionError,
    TruncatedModelFileError,
    UsageError,
)
from .probs import Distribution, LOG_ZERO

BOS = "<bos>"
EOS = "<eos>"
UNK = "<unk>"

_TOKEN_RE = re.compile(r"\w+|[^\w\s]")

MODEL_MAGIC = b"PCM1"
MODEL_VERSION = 1


def tokenize(text: str) -> tuple[str, ...]:
    """Lowercased word tokens with punctuation split into separate tokens."""
    return tuple(_TOKEN_RE.findall(text.lower()))


@dataclass(frozen=True)
class Utterance:
    """A word-token sequence with its original surface preserved."""

    text: str
    words: tuple[str, ...]

    @classmethod
    def from_text(cls, text: str) -> "Utterance":
        return cls(text=text, words=tokenize(text))

    @classmethod
    def from_words(cls, words: Sequence[str]) -> "Utterance":
        return cls(text=" ".join(words), words=tuple(words))

    def __len__(self) -> int:
        return len(self.words)


def emotion_token(label: str) -> str:
    return f"<emo:{label}>"


class Vocabulary:
    """String<->id bijection with reserved ids and one token per emotion.

    Layout: bos, eos, unk, then one emotion token per catalog label (in
    catalog order), then regular word tokens.  ``folded`` tokens (corpus
    singletons) keep their roster entry but resolve to the unk id at
    lookup, so the unknown token carries their calibrated mass.
    """

    def __init__(
        self,
        labels: Sequence[str],
        words: Sequence[str],
        folded: Sequence[str] = (),
    ):
        self.labels = tuple(labels)
        self.tokens: list[str] = [BOS, EOS, UNK]
        self.tokens.extend(emotion_token(lb) for lb in self.labels)
        seen = set(self.tokens)
        for w in words:
            if w not in seen:
                seen.add(w)
                self.tokens.append(w)
        self._ids = {tok: i for i, tok in enumerate(self.tokens)}
        if len(self._ids) != len(self.tokens):
            raise UsageError("vocabulary contains duplicate tokens")
        self.folded = frozenset(folded)
        self.bos_id = 0
        self.eos_id = 1
        self.unk_id = 2
        self.emotion_ids = {
            lb: self._ids[emotion_token(lb)] for lb in self.labels
        }
        self.reserved_ids = frozenset(
            [self.bos_id, self.eos_id, self.unk_id]
            + list(self.emotion_ids.values())
        )
        # Shared support tuple so full-vocabulary distributions are cheap.
        self.outcomes = tuple(range(len(self.tokens)))

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._ids

    def id_of(self, token: str) -> int:
        """Map a token to its id; unknown and folded tokens map to unk."""
        if token in self.folded:
            return self.unk_id
        return self._ids.get(token, self.unk_id)

    def ids_of(self, words: Iterable[str]) -> tuple[int, ...]:
        return tuple(self.id_of(w) for w in words)

    def token_of(self, token_id: int) -> str:
        return self.tokens[token_id]

    def emotion_prefix(self, labels: Sequence[str]) -> tuple[int, ...]:
        unknown = [lb for lb in labels if lb not in self.emotion_ids]
        if unknown:
            raise LabelError(f"labels not in vocabulary: {unknown}")
        return tuple(self.emotion_ids[lb] for lb in labels)


@dataclass(frozen=True)
class Condition:
    """What a conditional model is conditioned on.

    ``emotion_prefix`` holds emotion-token ids (possibly empty, possibly
    several for distractor sampling); ``context_tokens`` holds ordinary
    token ids of the dialogue context.
    """

    emotion_prefix: tuple[int, ...] = ()
    context_tokens: tuple[int, ...] = ()


class ConditionalModel(ABC):
    """Interface shared by the base speaker and the emotion estimator."""

    @property
    @abstractmethod
    def vocabulary(self) -> Vocabulary: ...

    @abstractmethod
    def next_token_logprobs(
        self, condition: Condition, prefix: Sequence[int]
    ) -> Distribution:
        """Normalized next-token distribution over the full vocabulary."""

    def unigram_probs(self) -> dict[int, float] | None:
        """Corpus unigram probabilities when the model knows them.

        Consumers (the context-echo blend) use these to mask frequent
        function words out of the copy cache; None disables the mask.
        """
        return None

    def token_logprob(
        self, condition: Condition, prefix: Sequence[int], token: int
    ) -> float:
        return float(self.next_token_logprobs(condition, prefix).logits[token])

    def sequence_logprob(
        self, condition: Condition, tokens: Sequence[int]
    ) -> float:
        """Chain-rule log probability of ``tokens`` plus the eos transition."""
        if len(tokens) == 0:
            raise UsageError("sequence_logprob of an empty token sequence")
        eos = self.vocabulary.eos_id
        total = 0.0
        for t, tok in enumerate(list(tokens) + [eos]):
            total += self.token_logprob(condition, tokens[:t], tok)
        return total


class _EmptyLevels:
    """Level tables of a known-but-unseen class: empty at every order."""

    def __getitem__(self, k: int) -> dict:
        return {}


_EMPTY_LEVELS = _EmptyLevels()


class NGramModel(ConditionalModel):
    """Interpolated n-gram LM with absolute discounting, one table per class.

    For each class and history h of length k-1 (k = 1..order):

        P_k(w|h) = max(c(h,w) - d, 0)/c(h) + d*N1(h)/c(h) * P_{k-1}(w|h')

    where N1(h) counts distinct continuations of h and P_0 is uniform over
    the vocabulary.  Histories with zero count pass straight through to the
    next shorter history.
    """

    def __init__(
        self,
        order: int,
        discount: float,
        vocab: Vocabulary,
        tables: dict,
        trained_on: str,
    ):
        self.order = order
        self.discount = discount
        self._vocab = vocab
        # tables[class][k][history] = (token_counts, total, n_distinct)
        self.tables = tables
        self.trained_on = trained_on

    @property
    def vocabulary(self) -> Vocabulary:
        return self._vocab

    def _class_tables(self, condition: Condition) -> dict:
        # Unseen multi-emotion prefixes back off to the class-agnostic
        # aggregate stored under the empty class; an unseen single emotion
        # keeps its own (empty) class so that class likelihoods separate.
        cls = condition.emotion_prefix
        tables = self.tables.get(cls)
        if tables is not None:
            return tables
        if len(cls) > 1:
            return self.tables[()]
        return _EMPTY_LEVELS

    def _history(
        self, condition: Condition, prefix: Sequence[int]
    ) -> tuple[int, ...]:
        pad = (self._vocab.bos_id,) * (self.order - 1)
        stream = pad + condition.context_tokens + tuple(prefix)
        if self.order == 1:
            return ()
        return stream[-(self.order - 1):]

    def next_token_logprobs(
        self, condition: Condition, prefix: Sequence[int]
    ) -> Distribution:
        levels = self._class_tables(condition)
        hist = self._history(condition, prefix)
        v = len(self._vocab)
        probs = np.full(v, 1.0 / v)
        for k in range(1, self.order + 1):
            h = hist[len(hist) - (k - 1):] if k > 1 else ()
            entry = levels[k].get(h)
            if entry is None:
                continue
            counts, total, n_distinct = entry
            lam = self.discount * n_distinct / total
            probs = lam * probs
            for tok, c in counts.items():
                probs[tok] += max(c - self.discount, 0.0) / total
        return Distribution(
            self._vocab.outcomes, np.log(probs), normalized=True
        )

    def token_logprob(
        self, condition: Condition, prefix: Sequence[int], token: int
    ) -> float:
        levels = self._class_tables(condition)
        hist = self._history(condition, prefix)
        v = len(self._vocab)
        p = 1.0 / v
        for k in range(1, self.order + 1):
            h = hist[len(hist) - (k - 1):] if k > 1 else ()
            entry = levels[k].get(h)
            if entry is None:
                continue
            counts, total, n_distinct = entry
            lam = self.discount * n_distinct / total
            p = max(counts.get(token, 0) - self.discount, 0.0) / total + lam * p
        return math.log(p)

    def unigram_probs(self) -> dict[int, float] | None:
        entry = self.tables[()][1].get(())
        if entry is None:
            return None
        counts, total, _ = entry
        return {tok: c / total for tok, c in counts.items()}


def _count_stream(levels: dict, order: int, stream: Sequence[int], bos: int):
    full = (bos,) * (order - 1) + tuple(stream)
    for j in range(order - 1, len(full)):
        target = full[j]
        for k in range(1, order + 1):
            hist = full[j - k + 1 : j]
            table = levels[k]
            counts = table.get(hist)
            if counts is None:
                counts = table[hist] = {}
            counts[target] = counts.get(target, 0) + 1


def _finalize_tables(raw: dict) -> dict:
    out = {}
    for cls, levels in raw.items():
        out[cls] = {
            k: {
                h: (counts, sum(counts.values()), len(counts))
                for h, counts in table.items()
            }
            for k, table in levels.items()
        }
    return out


def corpus_fingerprint(corpus: Sequence[tuple[str, str]]) -> str:
    h = hashlib.sha256()
    for emotion, text in corpus:
        h.update(emotion.encode("utf-8"))
        h.update(b"\x00")
        h.update(text.encode("utf-8"))
        h.update(b"\n")
    return h.hexdigest()


def train_ngram(
    corpus: Sequence[tuple[str, str]],
    order: int = 3,
    discount: float = 0.75,
    labels: Sequence[str] | None = None,
) -> NGramModel:
    """Train the class-conditional n-gram on (emotion, text) examples.

    Every training token enters the vocabulary, but tokens seen exactly
    once in the whole corpus are counted as the unknown token, which gives
    unknown inputs calibrated mass at inference.  Each example is counted
    both under its emotion class and under the class-agnostic aggregate.
    """
    corpus = list(corpus)
    if not corpus:
        raise UsageError("training corpus is empty")
    if not 1 <= order <= 6:
        raise UsageError(f"order must be in [1, 6], got {order}")
    if not 0.0 < discount < 1.0:
        raise UsageError(f"discount must be in (0, 1), got {discount}")

    if labels is None:
        label_set = sorted({emotion for emotion, _ in corpus})
    else:
        label_set = list(labels)
        known = set(label_set)
        for lineno, (emotion, _) in enumerate(corpus, start=1):
            if emotion not in known:
                raise LabelError(
                    f"line {lineno}: unknown emotion label {emotion!r}"
                )

    tokenized = [(emotion, tokenize(text)) for emotion, text in corpus]
    freq: dict[str, int] = {}
    for _, words in tokenized:
        for w in words:
            freq[w] = freq.get(w, 0) + 1

    # Singletons stay in the roster but fold to unk, which gives the
    # unknown token calibrated mass instead of zero.
    vocab = Vocabulary(
        label_set,
        [w for _, ws in tokenized for w in ws],
        folded=[w for w, c in freq.items() if c == 1],
    )

    raw: dict[tuple[int, ...], dict] = {(): {k: {} for k in range(1, order + 1)}}
    for emotion, words in tokenized:
        cls = (vocab.emotion_ids[emotion],)
        if cls not in raw:
            raw[cls] = {k: {} for k in range(1, order + 1)}
        ids = vocab.ids_of(words) + (vocab.eos_id,)
        _count_stream(raw[cls], order, ids, vocab.bos_id)
        _count_stream(raw[()], order, ids, vocab.bos_id)

    return NGramModel(
        order=order,
        discount=discount,
        vocab=vocab,
        tables=_finalize_tables(raw),
        trained_on=corpus_fingerprint(corpus),
    )


class ContextEchoModel(ConditionalModel):
    """Blend of a base model with a copy distribution over context words.

    ``P(w) = (1 - weight) * P_base(w) + weight * count(w in ctx) / total``

    where the copy counts run over informative context words only:
    punctuation, reserved tokens, and words whose corpus unigram
    probability exceeds ``max_unigram`` are masked out.  A windowed n-gram
    forgets its context after order-1 steps; the copy term keeps the
    context's content words reachable at every step, standing in for a
    neural speaker's attention to its input.  Weight 0 is the unmodified
    base model.
    """

    def __init__(
        self,
        base: ConditionalModel,
        echo_weight: float,
        max_unigram: float = 0.005,
    ):
        if not 0.0 <= echo_weight < 1.0:
            raise UsageError(
                f"echo weight must be in [0, 1), got {echo_weight}"
            )
        self.base = base
        self.echo_weight = echo_weight
        self.max_unigram = max_unigram
        self._unigram = base.unigram_probs()

    @property
    def vocabulary(self) -> Vocabulary:
        return self.base.vocabulary

    def _informative(self, tok: int) -> bool:
        vocab = self.vocabulary
        if tok in vocab.reserved_ids:
            return False
        if not any(ch.isalnum() for ch in vocab.token_of(tok)):
            return False
        if self._unigram is not None:
            return self._unigram.get(tok, 0.0) <= self.max_unigram
        return True

    def _cache(self, condition: Condition) -> np.ndarray | None:
        ctx = condition.context_tokens
        if self.echo_weight == 0.0 or not ctx:
            return None
        counts: dict[int, int] = {}
        for tok in ctx:
            if self._informative(tok):
                counts[tok] = counts.get(tok, 0) + 1
        if not counts:
            return None
        total = sum(counts.values())
        cache = np.zeros(len(self.vocabulary))
        for tok, c in counts.items():
            cache[tok] = c / total
        return cache

    def next_token_logprobs(
        self, condition: Condition, prefix: Sequence[int]
    ) -> Distribution:
        base = self.base.next_token_logprobs(condition, prefix)
        cache = self._cache(condition)
        if cache is None:
            return base
        mixed = (1.0 - self.echo_weight) * np.exp(base.logits)
        mixed += self.echo_weight * cache
        with np.errstate(divide="ignore"):
            logits = np.log(mixed)
        return Distribution(base.outcomes, logits, normalized=True)

    def token_logprob(
        self, condition: Condition, prefix: Sequence[int], token: int
    ) -> float:
        base = self.base.token_logprob(condition, prefix, token)
        cache = self._cache(condition)
        if cache is None:
            return base
        p = (1.0 - self.echo_weight) * math.exp(base)
        p += self.echo_weight * float(cache[token])
        return math.log(p) if p > 0.0 else LOG_ZERO


@dataclass(frozen=True)
class Sampling:
    """Token sampling strategy: greedy, nucleus, or plain temperature."""

    mode: str = "greedy"
    p: float = 0.9
    temperature: float = 1.0

    def __post_init__(self):
        if self.mode not in ("greedy", "top_p", "temperature"):
            raise UsageError(f"unknown sampling mode {self.mode!r}")
        if not 0.0 < self.p <= 1.0:
            raise UsageError(f"top-p must be in (0, 1], got {self.p}")
        if not self.temperature > 0.0:
            raise UsageError(
                f"temperature must be positive, got {self.temperature}"
            )


def sample_with_rng(
    d: Distribution, sampling: Sampling, rng: random.Random
) -> int:
    """Draw an outcome index from a normalized distribution.

    Greedy returns the earliest argmax.  Nucleus sampling keeps the
    smallest mass->=p prefix of the descending-mass ordering (ties by id)
    and renormalizes.  Temperature divides logits by tau before sampling.
    """
    logits = d.logits
    if sampling.mode == "greedy":
        return int(np.argmax(logits))
    if sampling.temperature != 1.0:
        logits = logits / sampling.temperature
    probs = np.exp(logits - np.max(logits))
    probs = probs / probs.sum()
    order = np.lexsort((np.arange(len(probs)), -probs))
    if sampling.mode == "top_p":
        cum = np.cumsum(probs[order])
        # Tolerance keeps masses that reach p up to float error inside.
        cut = int(np.searchsorted(cum, sampling.p - 1e-12)) + 1
        order = order[:cut]
    pool = probs[order]
    pool = pool / pool.sum()
    u = rng.random()
    idx = int(np.searchsorted(np.cumsum(pool), u))
    idx = min(idx, len(order) - 1)
    return int(order[idx])


def sample_token(d: Distribution, sampling: Sampling, rng_seed: int) -> int:
    """Deterministic draw: same (distribution, strategy, seed) -> same token."""
    return sample_with_rng(d, sampling, random.Random(rng_seed))


def _encode_tables(tables: dict) -> list:
    out = []
    for cls in sorted(tables.keys()):
        levels = tables[cls]
        for k in sorted(levels.keys()):
            for hist in sorted(levels[k].keys()):
                counts = levels[k][hist][0]
                out.append(
                    [
                        list(cls),
                        k,
                        list(hist),
                        sorted([t, c] for t, c in counts.items()),
                    ]
                )
    return out


def _decode_tables(entries: list) -> dict:
    raw: dict = {}
    for cls_l, k, hist_l, pairs in entries:
        cls = tuple(cls_l)
        levels = raw.setdefault(cls, {})
        table = levels.setdefault(k, {})
        table[tuple(hist_l)] = {t: c for t, c in pairs}
    for cls, levels in raw.items():
        max_k = max(levels.keys())
        for k in range(1, max_k + 1):
            levels.setdefault(k, {})
    return _finalize_tables(raw)


def save_model(model: NGramModel, path: str) -> None:
    """Write a versioned binary container (magic, version, payload, CRC32)."""
    payload = json.dumps(
        {
            "order": model.order,
            "discount": model.discount,
            "labels": list(model.vocabulary.labels),
            "tokens": model.vocabulary.tokens,
            "folded": sorted(model.vocabulary.folded),
            "trained_on": model.trained_on,
            "tables": _encode_tables(model.tables),
        },
        sort_keys=True,
        separators=(",", ":"),
    ).encode("utf-8")
    head = MODEL_MAGIC + struct.pack("<I", MODEL_VERSION)
    head += struct.pack("<Q", len(payload))
    body = head + payload
    crc = zlib.crc32(body) & 0xFFFFFFFF
    with open(path, "wb") as fh:
        fh.write(body + struct.pack("<I", crc))


def load_model(path: str) -> NGramModel:
    """Load a model container, checking magic, version, length, and CRC."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 4:
        raise TruncatedModelFileError(f"{path}: file too short for magic")
    if blob[:4] != MODEL_MAGIC:
        raise ModelVersionError(f"{path}: bad magic bytes {blob[:4]!r}")
    if len(blob) < 16:
        raise TruncatedModelFileError(f"{path}: truncated header")
    (version,) = struct.unpack("<I", blob[4:8])
    if version != MODEL_VERSION:
        raise ModelVersionError(f"{path}: unsupported version {version}")
    (length,) = struct.unpack("<Q", blob[8:16])
    if len(blob) < 16 + length + 4:
        raise TruncatedModelFileError(f"{path}: truncated payload")
    payload = blob[16 : 16 + length]
    (crc,) = struct.unpack("<I", blob[16 + length : 20 + length])
    if zlib.crc32(blob[: 16 + length]) & 0xFFFFFFFF != crc:
        raise ModelChecksumError(f"{path}: checksum mismatch")
    doc = json.loads(payload.decode("utf-8"))
    labels = doc["labels"]
    tokens = doc["tokens"]
    n_reserved = 3 + len(labels)
    vocab = Vocabulary(labels, tokens[n_reserved:], folded=doc["folded"])
    if vocab.tokens != tokens:
        raise ModelFileError(f"{path}: vocabulary layout mismatch")
    return NGramModel(
        order=doc["order"],
        discount=doc["discount"],
        vocab=vocab,
        tables=_decode_tables(doc["tables"]),
        trained_on=doc["trained_on"],
    )
