"""Child-side server loop: answer logprobs/score requests for one model.

Wrap any emofocus ConditionalModel in an adapter and call :func:`serve` to
expose it on stdin/stdout.  The loop answers every request, replying with
a per-request error for invalid input, and exits cleanly on shutdown.
"""

from __future__ import annotations

import sys

from emofocus.backend import Condition, ConditionalModel

from .protocol import encode, error_reply, decode_line, ok_reply


class ModelAdapter:
    """Default adapter: serve an emofocus ConditionalModel as is."""

    def __init__(self, model: ConditionalModel, model_name: str = "adapter"):
        self.model = model
        self.model_name = model_name

    @property
    def vocabulary(self):
        return self.model.vocabulary

    def hello_payload(self) -> dict:
        vocab = self.vocabulary
        unigram = self.model.unigram_probs()
        return {
            "vocab": list(vocab.tokens),
            "model_name": self.model_name,
            "emotion_token_map": {
                label: vocab.token_of(vocab.emotion_ids[label])
                for label in vocab.labels
            },
            "folded": sorted(vocab.folded),
            "unigram": sorted(
                [t, p] for t, p in (unigram or {}).items()
            ),
        }

    def _condition(self, doc: dict) -> Condition:
        vocab = self.vocabulary
        raw = doc.get("condition") or {}
        labels = raw.get("emotion_labels") or []
        context = raw.get("context") or ""
        # The context string is a space-joined token sequence; the model
        # side owns the word-to-id mapping (including unknown folding).
        return Condition(
            emotion_prefix=vocab.emotion_prefix(labels),
            context_tokens=vocab.ids_of(context.split()),
        )

    def _check_ids(self, ids) -> None:
        size = len(self.vocabulary)
        for token in ids:
            if not isinstance(token, int) or not 0 <= token < size:
                raise ValueError(f"token id {token!r} outside the vocabulary")

    def logprobs(self, doc: dict) -> dict:
        condition = self._condition(doc)
        prefix = doc.get("prefix") or []
        self._check_ids(prefix)
        dist = self.model.next_token_logprobs(condition, tuple(prefix))
        return {"logprobs": [float(x) for x in dist.logits]}

    def score(self, doc: dict) -> dict:
        condition = self._condition(doc)
        tokens = doc.get("tokens") or []
        self._check_ids(tokens)
        if not tokens:
            raise ValueError("score needs a non-empty token list")
        return {
            "logprob": float(self.model.sequence_logprob(condition, tuple(tokens)))
        }


def serve(adapter: ModelAdapter, stdin=None, stdout=None) -> int:
    """Answer requests until shutdown or end of input.  Returns 0."""
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            doc = decode_line(line)
        except Exception as exc:
            stdout.write(encode(error_reply(None, str(exc))))
            stdout.flush()
            continue
        request_id = doc.get("id")
        op = doc.get("op")
        try:
            if op == "hello":
                reply = ok_reply(request_id, **adapter.hello_payload())
            elif op == "logprobs":
                reply = ok_reply(request_id, **adapter.logprobs(doc))
            elif op == "score":
                reply = ok_reply(request_id, **adapter.score(doc))
            elif op == "shutdown":
                stdout.write(encode(ok_reply(request_id)))
                stdout.flush()
                return 0
            else:
                reply = error_reply(request_id, f"unknown op {op!r}")
        except Exception as exc:
            reply = error_reply(request_id, str(exc))
        stdout.write(encode(reply))
        stdout.flush()
    return 0
