"""Host-side bridge: drive a child model process as a ConditionalModel.

The child is spawned from a shell-style command, handshaken, and then
queried one request at a time.  Any protocol violation (malformed reply,
wrong id, bad normalization, timeout, early exit) raises
BridgeProtocolError: the run fails rather than silently substituting a
different model.
"""

from __future__ import annotations

import math
import select
import shlex
import subprocess
from typing import Sequence

import numpy as np

from emofocus.backend import Condition, ConditionalModel, Vocabulary
from emofocus.probs import Distribution, log_sum_exp

from .protocol import (
    BridgeProtocolError,
    DEFAULT_TIMEOUT,
    NORMALIZATION_TOL,
    encode,
    decode_line,
)


def _vocabulary_from_hello(payload: dict) -> Vocabulary:
    tokens = payload.get("vocab")
    if not isinstance(tokens, list) or len(tokens) < 2:
        raise BridgeProtocolError("hello reply carries no usable vocab")
    emotion_map = payload.get("emotion_token_map") or {}
    labels = sorted(emotion_map, key=lambda lb: tokens.index(emotion_map[lb]))
    n_reserved = 3 + len(labels)
    vocab = Vocabulary(
        labels, tokens[n_reserved:], folded=payload.get("folded") or ()
    )
    if vocab.tokens != tokens:
        raise BridgeProtocolError(
            "hello vocab does not follow the reserved-token layout"
        )
    return vocab


class BridgeModel(ConditionalModel):
    """ConditionalModel proxied over the stdio bridge protocol."""

    def __init__(self, process, vocab, model_name, hello_payload, timeout):
        self._process = process
        self._vocab = vocab
        self.model_name = model_name
        self._hello = hello_payload
        self._timeout = timeout
        self._next_id = 1

    @classmethod
    def start(cls, command: str, timeout: float = DEFAULT_TIMEOUT) -> "BridgeModel":
        process = subprocess.Popen(
            shlex.split(command),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
        )
        hello = _exchange(process, {"id": 0, "op": "hello"}, timeout)
        vocab = _vocabulary_from_hello(hello)
        return cls(
            process,
            vocab,
            hello.get("model_name", "bridge"),
            hello,
            timeout,
        )

    @property
    def vocabulary(self) -> Vocabulary:
        return self._vocab

    def unigram_probs(self) -> dict[int, float] | None:
        pairs = self._hello.get("unigram") or []
        if not pairs:
            return None
        return {int(t): float(p) for t, p in pairs}

    def handshake(self) -> dict:
        """Re-issue hello; the reply must be idempotent."""
        reply = self._request({"op": "hello"})
        return reply

    def _request(self, message: dict) -> dict:
        message = {"id": self._next_id, **message}
        self._next_id += 1
        reply = _exchange(self._process, message, self._timeout)
        if reply.get("id") != message["id"]:
            raise BridgeProtocolError(
                f"reply id {reply.get('id')!r} does not match request "
                f"{message['id']}"
            )
        return reply

    def _wire_condition(self, condition: Condition) -> dict:
        vocab = self._vocab
        labels = []
        for token_id in condition.emotion_prefix:
            token = vocab.token_of(token_id)
            match = [lb for lb, i in vocab.emotion_ids.items() if i == token_id]
            if not match:
                raise BridgeProtocolError(
                    f"{token!r} is not an emotion token of the bridge model"
                )
            labels.append(match[0])
        context = " ".join(
            vocab.token_of(token_id) for token_id in condition.context_tokens
        )
        return {"emotion_labels": labels, "context": context}

    def next_token_logprobs(
        self, condition: Condition, prefix: Sequence[int]
    ) -> Distribution:
        reply = self._request(
            {
                "op": "logprobs",
                "condition": self._wire_condition(condition),
                "prefix": [int(t) for t in prefix],
            }
        )
        logprobs = reply.get("logprobs")
        if not isinstance(logprobs, list) or len(logprobs) != len(self._vocab):
            raise BridgeProtocolError(
                "logprobs reply length does not match the handshake vocabulary"
            )
        arr = np.asarray(logprobs, dtype=np.float64)
        total = log_sum_exp(arr)
        if not math.isfinite(total) or abs(total) > NORMALIZATION_TOL:
            raise BridgeProtocolError(
                f"logprobs reply is not normalized (log mass {total:.6f})"
            )
        return Distribution(self._vocab.outcomes, arr, normalized=True)

    def sequence_logprob(
        self, condition: Condition, tokens: Sequence[int]
    ) -> float:
        reply = self._request(
            {
                "op": "score",
                "condition": self._wire_condition(condition),
                "tokens": [int(t) for t in tokens],
            }
        )
        value = reply.get("logprob")
        if not isinstance(value, (int, float)):
            raise BridgeProtocolError("score reply carries no logprob")
        return float(value)

    def close(self) -> int:
        """Send shutdown and reap the child; returns its exit code."""
        if self._process.poll() is None:
            try:
                self._request({"op": "shutdown"})
            except BridgeProtocolError:
                self._process.kill()
        return self._process.wait(timeout=self._timeout)

    def __enter__(self) -> "BridgeModel":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


def _exchange(process, message: dict, timeout: float) -> dict:
    if process.poll() is not None:
        raise BridgeProtocolError(
            f"bridge child exited with status {process.returncode}"
        )
    try:
        process.stdin.write(encode(message))
        process.stdin.flush()
    except (BrokenPipeError, OSError) as exc:
        raise BridgeProtocolError(
            f"bridge child went away: {exc} "
            f"(exit status {process.poll()})"
        ) from exc
    ready, _, _ = select.select([process.stdout], [], [], timeout)
    if not ready:
        raise BridgeProtocolError(f"bridge reply timed out after {timeout}s")
    line = process.stdout.readline()
    if not line:
        try:
            status = process.wait(timeout=timeout)
        except subprocess.TimeoutExpired:
            status = None
        raise BridgeProtocolError(
            f"bridge child closed its output (exit status {status})"
        )
    reply = decode_line(line)
    if reply.get("ok") is not True:
        raise BridgeProtocolError(
            f"bridge request failed: {reply.get('error', 'no reply payload')}"
        )
    return reply
