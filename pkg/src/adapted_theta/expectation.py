"""Gauss-Hermite rules and Gaussian conditional expectations."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ._numerics import ordered_sum
from numpy.polynomial.hermite import hermgauss

M_MAX = 64


@dataclass(frozen=True)
class HermiteRule:
    """Nodes and weights integrating ``p(x) * exp(-x**2)`` exactly for ``deg p <= 2m - 1``."""

    m: int
    nodes: np.ndarray
    weights: np.ndarray


@lru_cache(maxsize=None)
def gauss_hermite(m: int) -> HermiteRule:
    if not isinstance(m, (int, np.integer)) or not 1 <= m <= M_MAX:
        raise ValueError(f"number of Gauss-Hermite points must be in [1, {M_MAX}], got {m!r}")
    x, w = hermgauss(int(m))
    # exact symmetry; hermgauss is symmetric only to rounding
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    x.flags.writeable = False
    w.flags.writeable = False
    return HermiteRule(int(m), x, w)


def gaussian_points(x, variance: float, rule: HermiteRule) -> np.ndarray:
    """Quadrature abscissae ``x + sqrt(2 * variance) * a_i``, shape ``x.shape + (m,)``."""
    if not variance > 0:
        raise ValueError(f"variance must be positive, got {variance!r}")
    return np.asarray(x, dtype=float)[..., None] + math.sqrt(2.0 * variance) * rule.nodes


def expect_values(values: np.ndarray, rule: HermiteRule) -> np.ndarray:
    """Weighted sum over the last axis of ``values`` sampled at :func:`gaussian_points`."""
    return ordered_sum(np.asarray(values, dtype=float) * rule.weights) / math.sqrt(math.pi)


def conditional_expectation(g, x, variance: float, rule: HermiteRule):
    """``E[g(x + sqrt(variance) * Z)]`` for standard normal ``Z``.

    ``g`` must accept arrays. ``x`` may be a scalar or an array; the result
    has the same shape.
    """
    pts = gaussian_points(x, variance, rule)
    vals = np.asarray(g(pts), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise FloatingPointError("non-finite integrand value in conditional expectation")
    out = expect_values(vals, rule)
    return float(out) if np.ndim(out) == 0 else out
