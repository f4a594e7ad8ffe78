"""Numerically safe log-space probability primitives.

All probability math in this package happens in natural-log space;
probabilities only materialize at API boundaries.  Zero probability is the
explicit sentinel ``LOG_ZERO`` (negative infinity), never a large negative
float, so structural zeros stay distinguishable from tiny smoothed mass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DegenerateDistributionError, UsageError

LOG_ZERO = float("-inf")

# Tolerances: normalization checks use 1e-9, equality comparisons 1e-12.
NORM_TOL = 1e-9
EQ_TOL = 1e-12

# Supports already checked for duplicates, keyed by id().  Models reuse one
# tuple per vocabulary, so this keeps validation off the per-call hot path.
_CHECKED_SUPPORTS: dict[int, tuple] = {}


def log_sum_exp(values: Sequence[float] | np.ndarray) -> float:
    """Return log(sum(exp(v))) computed with a max shift.

    Finite inputs never overflow; an all-LOG_ZERO input returns LOG_ZERO.
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise UsageError("log_sum_exp of an empty sequence")
    if np.isnan(arr).any():
        raise UsageError("log_sum_exp input contains NaN")
    m = float(np.max(arr))
    if m == LOG_ZERO:
        return LOG_ZERO
    return m + math.log(float(np.sum(np.exp(arr - m))))


@dataclass(frozen=True)
class Distribution:
    """Log-mass vector over an ordered support of outcome ids.

    ``logits`` holds raw log masses until :func:`normalize` is applied;
    ``normalized`` records that the values already sum to one, which makes
    normalization idempotent bit-for-bit.
    """

    outcomes: tuple
    logits: np.ndarray
    normalized: bool = field(default=False)

    def __post_init__(self):
        logits = np.asarray(self.logits, dtype=np.float64)
        object.__setattr__(self, "logits", logits)
        if len(self.outcomes) == 0:
            raise UsageError("distribution needs a non-empty support")
        if logits.shape != (len(self.outcomes),):
            raise UsageError("logits and support lengths differ")
        if np.isnan(logits).any():
            raise UsageError("distribution logits contain NaN")
        if np.isposinf(logits).any():
            raise UsageError("distribution logits must be finite or -inf")
        cached = _CHECKED_SUPPORTS.get(id(self.outcomes))
        if cached is not self.outcomes:
            if len(set(self.outcomes)) != len(self.outcomes):
                raise UsageError("distribution support contains duplicate ids")
            if len(_CHECKED_SUPPORTS) >= 4096:
                _CHECKED_SUPPORTS.clear()
            _CHECKED_SUPPORTS[id(self.outcomes)] = self.outcomes

    def __len__(self) -> int:
        return len(self.outcomes)

    def argmax(self) -> object:
        """Outcome with the highest mass; ties break to the earliest id."""
        return self.outcomes[int(np.argmax(self.logits))]

    def probs(self) -> np.ndarray:
        return np.exp(self.logits)

    def logit_of(self, outcome) -> float:
        return float(self.logits[self.outcomes.index(outcome)])


def normalize(d: Distribution) -> Distribution:
    """Shift logits so the masses sum to one.

    Idempotent: a distribution already marked normalized is returned as is,
    bit-for-bit.  Raises DegenerateDistributionError when every outcome has
    zero mass.
    """
    if d.normalized:
        return d
    total = log_sum_exp(d.logits)
    if total == LOG_ZERO:
        raise DegenerateDistributionError("all outcomes have zero mass")
    return Distribution(d.outcomes, d.logits - total, normalized=True)


def uniform(outcomes: Sequence) -> Distribution:
    """Normalized uniform distribution over ``outcomes``."""
    n = len(outcomes)
    if n == 0:
        raise UsageError("uniform distribution needs a non-empty support")
    return Distribution(
        tuple(outcomes), np.full(n, -math.log(n)), normalized=True
    )
