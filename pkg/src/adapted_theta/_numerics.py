"""Reductions whose rounding does not depend on array shape."""

import numpy as np


def ordered_sum(terms: np.ndarray) -> np.ndarray:
    """Left-to-right sum over the last axis.

    numpy's reductions switch between pairwise and BLAS kernels depending on
    layout, so the same point can round differently alone and inside a batch.
    """
    terms = np.asarray(terms, dtype=float)
    acc = terms[..., 0].copy()
    for k in range(1, terms.shape[-1]):
        acc += terms[..., k]
    return acc
