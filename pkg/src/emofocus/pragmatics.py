"""Pragmatic decoding: listener posterior over the shared world and the
reweighted speaker.

Per step, for every candidate token u:

    listener(c | u)  ~  speaker(u | c)^beta * prior(c)        (over the world)
    output(u)        ~  listener(c_true | u)^alpha * speaker(u | c_true)

Committing a token replaces the prior with the listener posterior at that
token.  alpha = 0, a singleton world, or base mode all reduce the output to
the unmodified speaker distribution, and those identities hold exactly.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .backend import Condition, ConditionalModel, Utterance
from .errors import UsageError
from .probs import Distribution, normalize, uniform

# Structural zeros under one context must not freeze the listener prior at a
# hard 0/1, so speaker log-mass is floored here, inside the listener only.
LISTENER_FLOOR = math.log(1e-12)

MODES = ("focused", "plain", "base")


@dataclass(frozen=True)
class RsaConfig:
    alpha: float = 4.0
    beta: float = 0.9
    max_length: int = 40
    mode: str = "focused"

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and self.alpha >= 0.0):
            raise UsageError(f"alpha must be finite and >= 0, got {self.alpha}")
        if not (math.isfinite(self.beta) and self.beta >= 0.0):
            raise UsageError(f"beta must be finite and >= 0, got {self.beta}")
        if self.max_length < 1:
            raise UsageError("max_length must be >= 1")
        if self.mode not in MODES:
            raise UsageError(f"mode must be one of {MODES}, got {self.mode!r}")


@dataclass
class ListenerState:
    prior: Distribution
    step: int = 0


@dataclass(frozen=True)
class StepTrace:
    step: int
    token: str
    prior: tuple[float, ...]
    s0_logit: float
    l0_logit: float
    floored: bool

    def to_dict(self) -> dict:
        return {
            "step": self.step,
            "token": self.token,
            "prior": list(self.prior),
            "s0_logit": self.s0_logit,
            "l0_logit": self.l0_logit,
            "floored": self.floored,
        }


@dataclass
class PragmaticSession:
    """Single-owner decoding state over one shared world."""

    speaker: ConditionalModel
    contexts: tuple[Utterance, ...]
    config: RsaConfig
    listener: ListenerState
    emitted: list[int] = field(default_factory=list)
    seed: int = 0
    collapse_warnings: int = 0

    def __post_init__(self):
        vocab = self.speaker.vocabulary
        self.conditions = tuple(
            Condition(context_tokens=vocab.ids_of(ctx.words))
            for ctx in self.contexts
        )


def init_session(
    speaker: ConditionalModel,
    contexts: Sequence[Utterance],
    config: RsaConfig,
    seed: int = 0,
) -> PragmaticSession:
    """Fresh session: uniform listener prior, nothing emitted."""
    contexts = tuple(contexts)
    if not contexts:
        raise UsageError("the shared world must contain at least one context")
    return PragmaticSession(
        speaker=speaker,
        contexts=contexts,
        config=config,
        listener=ListenerState(prior=uniform(range(len(contexts)))),
        seed=seed,
    )


def _speaker_matrix(
    session: PragmaticSession,
) -> tuple[Distribution, np.ndarray]:
    """Speaker distribution for the true context and the per-context matrix."""
    prefix = tuple(session.emitted)
    rows = [
        session.speaker.next_token_logprobs(cond, prefix)
        for cond in session.conditions
    ]
    return rows[0], np.stack([r.logits for r in rows])


def _listener_log(
    session: PragmaticSession, s0: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Column-normalized listener log-posterior and the floor mask."""
    floored = s0 < LISTENER_FLOOR
    clipped = np.maximum(s0, LISTENER_FLOOR)
    joint = session.config.beta * clipped + session.listener.prior.logits[:, None]
    evidence = joint.max(axis=0)
    evidence = evidence + np.log(np.exp(joint - evidence).sum(axis=0))
    return joint - evidence, floored


def pragmatic_step(session: PragmaticSession) -> Distribution:
    """Next-token distribution of the pragmatic speaker (pure preview).

    Returns the base speaker's distribution untouched in base mode, with
    alpha = 0, or over a singleton world, so those identities are exact.
    """
    if len(session.emitted) >= session.config.max_length:
        raise UsageError("session already reached max_length")
    cfg = session.config
    if cfg.mode == "base" or cfg.alpha == 0.0 or len(session.contexts) == 1:
        return session.speaker.next_token_logprobs(
            session.conditions[0], tuple(session.emitted)
        )
    base, s0 = _speaker_matrix(session)
    listener_log, _ = _listener_log(session, s0)
    logits = cfg.alpha * listener_log[0] + base.logits
    return normalize(Distribution(base.outcomes, logits))


def _prior_update(
    session: PragmaticSession, token: int
) -> tuple[Distribution, float, float, bool]:
    """New prior after observing ``token`` plus trace ingredients.

    Returns (prior, s0_logit_true, l0_logit_true, floored_any).  When every
    context floors simultaneously the evidence is vacuous and the previous
    prior is kept, counted in ``collapse_warnings``.
    """
    prefix = tuple(session.emitted)
    s0 = np.array(
        [
            session.speaker.token_logprob(cond, prefix, token)
            for cond in session.conditions
        ]
    )
    prior = session.listener.prior
    if session.config.mode == "base":
        return prior, float(s0[0]), 0.0, False
    if session.config.beta == 0.0:
        return prior, float(s0[0]), float(prior.logits[0]), False
    floored = s0 < LISTENER_FLOOR
    if bool(floored.all()):
        session.collapse_warnings += 1
        return prior, float(s0[0]), float(prior.logits[0]), True
    clipped = np.maximum(s0, LISTENER_FLOOR)
    joint = session.config.beta * clipped + prior.logits
    new_prior = normalize(Distribution(prior.outcomes, joint))
    return new_prior, float(s0[0]), float(new_prior.logits[0]), bool(floored.any())


def commit_token(session: PragmaticSession, token: int) -> PragmaticSession:
    """Append ``token`` and update the listener prior from it."""
    if not 0 <= token < len(session.speaker.vocabulary):
        raise UsageError(f"token id {token} outside the vocabulary")
    new_prior, _, _, _ = _prior_update(session, token)
    session.listener.prior = new_prior
    session.emitted.append(token)
    session.listener.step = len(session.emitted)
    return session


@dataclass(frozen=True)
class DecodeResult:
    tokens: tuple[int, ...]
    words: tuple[str, ...]
    text: str
    trace: tuple[StepTrace, ...]


def decode(session: PragmaticSession) -> DecodeResult:
    """Greedy decode: argmax of pragmatic_step until eos or max_length."""
    vocab = session.speaker.vocabulary
    trace: list[StepTrace] = []
    while len(session.emitted) < session.config.max_length:
        dist = pragmatic_step(session)
        token = int(np.argmax(dist.logits))
        if token == vocab.eos_id:
            break
        prior_before = tuple(float(x) for x in session.listener.prior.probs())
        new_prior, s0_logit, l0_logit, floored = _prior_update(session, token)
        session.listener.prior = new_prior
        session.emitted.append(token)
        session.listener.step = len(session.emitted)
        trace.append(
            StepTrace(
                step=len(session.emitted) - 1,
                token=vocab.token_of(token),
                prior=prior_before,
                s0_logit=s0_logit,
                l0_logit=l0_logit,
                floored=floored,
            )
        )
    words = tuple(vocab.token_of(t) for t in session.emitted)
    return DecodeResult(
        tokens=tuple(session.emitted),
        words=words,
        text=" ".join(words),
        trace=tuple(trace),
    )


def sample_plain_contexts(
    utterance: Utterance,
    pool: Sequence[Utterance],
    world_size: int,
    seed: int,
) -> tuple[Utterance, ...]:
    """World for the plain baseline: whole different contexts from a pool."""
    candidates = [u for u in pool if u.words != utterance.words]
    needed = world_size - 1
    if needed <= 0:
        return (utterance,)
    if len(candidates) < needed:
        raise UsageError(
            f"pool of {len(candidates)} usable contexts cannot fill a "
            f"world of {world_size}"
        )
    rng = random.Random(seed)
    return (utterance, *rng.sample(candidates, needed))
