"""Paired two-sided randomization test for per-question scores of two systems."""

import logging
from typing import Optional, Sequence

import numpy as np

from config.settings import FISHER_EXACT_MAX_N, FISHER_ITERATIONS, SIGNIFICANCE_LEVEL

logger = logging.getLogger(__name__)

_TOLERANCE = 1e-12
_CHUNK = 10_000


def fisher_randomization(
    scores_a: Sequence[float],
    scores_b: Sequence[float],
    iterations: int = FISHER_ITERATIONS,
    seed: int = 0,
    exact: Optional[bool] = None,
) -> float:
    """p-value of the observed |mean(A - B)| under random per-question swaps.

    With ``exact`` unset, all 2^n swap patterns are enumerated when
    n <= FISHER_EXACT_MAX_N; otherwise ``iterations`` seeded random patterns are
    drawn and the identity assignment is counted once, giving
    (count + 1) / (iterations + 1).
    """
    a = np.asarray(scores_a, dtype=np.float64)
    b = np.asarray(scores_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"score vectors must have equal length, got {a.shape} and {b.shape}")
    n = a.size
    if n < 2:
        raise ValueError(f"need at least 2 paired scores, got {n}")
    diffs = a - b
    observed = abs(diffs.mean()) - _TOLERANCE
    if exact is None:
        exact = n <= FISHER_EXACT_MAX_N

    if exact:
        if n > 24:
            raise ValueError(f"exact enumeration over 2^{n} assignments is not supported")
        patterns = np.arange(2 ** n)[:, None] >> np.arange(n)[None, :] & 1
        signs = 1 - 2 * patterns
        count = int(np.sum(np.abs(signs @ diffs) / n >= observed))
        return count / 2 ** n

    if iterations < 1:
        raise ValueError(f"iterations must be positive, got {iterations}")
    rng = np.random.default_rng(seed)
    count = 0
    remaining = iterations
    while remaining:
        size = min(_CHUNK, remaining)
        signs = rng.choice(np.array([-1.0, 1.0]), size=(size, n))
        count += int(np.sum(np.abs(signs @ diffs) / n >= observed))
        remaining -= size
    return (count + 1) / (iterations + 1)


def is_significant(p_value: float, level: float = SIGNIFICANCE_LEVEL) -> bool:
    return p_value <= level


def describe(p_value: float, level: float = SIGNIFICANCE_LEVEL) -> str:
    verdict = "significant" if is_significant(p_value, level) else "not significant"
    return f"p = {p_value:.4g}, {verdict} at {level:g}"
