"""Small numeric helpers: compensated summation and row normalization."""

from __future__ import annotations

import numpy as np
from numpy.typing import NDArray

FloatArray = NDArray[np.float64]


def neumaier_sum(terms: FloatArray, axis: int = -1) -> FloatArray:
    """Sum `terms` along `axis` with Neumaier-compensated accumulation.

    Keeps a running error term so that long pairwise-interaction sums do not
    lose low-order bits; vectorized over all remaining axes.
    """
    t = np.moveaxis(np.asarray(terms, dtype=np.float64), axis, 0)
    total = np.zeros(t.shape[1:], dtype=np.float64)
    comp = np.zeros_like(total)
    for term in t:
        s = total + term
        swap = np.abs(total) >= np.abs(term)
        comp += np.where(swap, (total - s) + term, (term - s) + total)
        total = s
    return total + comp


def normalize_rows(v: FloatArray) -> FloatArray:
    """Return `v` with unit-length rows; rows of length 0 raise."""
    v = np.asarray(v, dtype=np.float64)
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(n == 0.0):
        raise ValueError("cannot normalize a zero vector")
    return v / n


def readonly(a: np.ndarray) -> np.ndarray:
    """Mark an array immutable (shared-read safety for concurrent evaluators)."""
    a.setflags(write=False)
    return a
