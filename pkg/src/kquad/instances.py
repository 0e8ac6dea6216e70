"""Test and benchmark matrix families."""

from __future__ import annotations

import numpy as np

from .matrix import IntegerMatrix

__all__ = ["CHSH_MATRIX", "WORKED_MATRIX", "generate_chsh_block", "generate_random"]

CHSH_MATRIX = IntegerMatrix.from_rows([[1, 1], [1, -1]])

# 4x4 instance with L = 26 used throughout the tests and docs.
WORKED_MATRIX = IntegerMatrix.from_rows(
    [
        [2, 3, 3, 0],
        [3, 2, -3, -3],
        [3, -3, 2, 3],
        [0, -3, 3, 2],
    ]
)


def generate_random(n: int, m: int, lo: int = -100, hi: int = 100, seed=None) -> IntegerMatrix:
    """I.i.d. uniform integers in ``[lo, hi]``; deterministic for a fixed seed."""
    if lo > hi:
        raise ValueError(f"empty range [{lo}, {hi}]")
    rng = np.random.default_rng(seed)
    return IntegerMatrix.from_rows(rng.integers(lo, hi, size=(n, m), endpoint=True))


def generate_chsh_block(n: int) -> IntegerMatrix:
    """Block-diagonal matrix of ``n/2`` CHSH blocks ``[[1, 1], [1, -1]]``.

    Every block contributes 2 independently, so L = n. The number of optimal
    sign patterns grows like ``2**(n/2)``, which defeats most pruning.
    """
    if n < 2 or n % 2:
        raise ValueError(f"n must be a positive even number, got {n}")
    out = np.zeros((n, n), dtype=np.int64)
    for t in range(0, n, 2):
        out[t : t + 2, t : t + 2] = [[1, 1], [1, -1]]
    return IntegerMatrix.from_rows(out)
