"""Wire protocol: newline-delimited JSON over a child's stdin/stdout.

One request per line, one reply per line, correlated by ``id``.  Requests
carry an ``op`` of hello, logprobs, score, or shutdown; conditions travel
as ``{"emotion_labels": [...], "context": "..."}`` where the context is a
space-joined token string, and prefixes travel as token-id lists.  Replies
are ``{"id": ..., "ok": true, ...}`` or ``{"id": ..., "ok": false,
"error": "..."}``.
"""

from __future__ import annotations

import json

from emofocus.errors import DataFormatError

OPS = ("hello", "logprobs", "score", "shutdown")

# A logprobs reply must sum to one within this tolerance (in log space).
NORMALIZATION_TOL = 1e-3

DEFAULT_TIMEOUT = 30.0


class BridgeProtocolError(DataFormatError):
    """The child violated the bridge protocol (or went away)."""


def encode(message: dict) -> str:
    return json.dumps(message, sort_keys=True) + "\n"


def decode_line(line: str) -> dict:
    try:
        doc = json.loads(line)
    except json.JSONDecodeError as exc:
        raise BridgeProtocolError(f"malformed protocol line: {line!r}") from exc
    if not isinstance(doc, dict):
        raise BridgeProtocolError(f"protocol line is not an object: {line!r}")
    return doc


def ok_reply(request_id, **payload) -> dict:
    return {"id": request_id, "ok": True, **payload}

def error_reply(request_id, message: str) -> dict:
    return {"id": request_id, "ok": False, "error": message}
