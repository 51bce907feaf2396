"""Adapted theta weights for the one-step rule ``[theta*f(t_n) + (1-theta)*f(t_{n+1})]*h``.

Two forms are provided. :func:`adapted_theta_exact` takes derivative values of
the integrand at both ends of the subinterval; :func:`adapted_theta_sampled`
takes the forward samples ``f(t_{n+1}), ..., f(t_{n+q+1})`` and uses weights
derived from the derivatives of their Lagrange interpolant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np

Q_MIN = 1
Q_MAX = 8

__all__ = [
    "StencilWeights",
    "ThetaLimits",
    "ThetaDecision",
    "lagrange_derivative_weights",
    "theta_weights",
    "adapted_theta_sampled",
    "adapted_theta_exact",
    "classify",
]


def _check_q(q: int) -> None:
    if not isinstance(q, (int, np.integer)) or not Q_MIN <= q <= Q_MAX:
        raise ValueError(f"stencil order q must be an integer in [{Q_MIN}, {Q_MAX}], got {q!r}")


@dataclass(frozen=True)
class ThetaLimits:
    """Bounds used by the validity test: ``|theta| <= l_theta`` and ``1/|rho| <= l_rho``."""

    l_theta: float = 1.0
    l_rho: float = 1e8

    def __post_init__(self):
        for name in ("l_theta", "l_rho"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive and finite, got {v!r}")


@dataclass(frozen=True)
class ThetaDecision:
    theta: float
    valid: bool
    rho: float
    sigma: float


@dataclass(frozen=True)
class StencilWeights:
    """Lagrange derivative coefficients and the reduced weights ``r``, ``s``.

    ``t1[k-1, j-1]`` is the coefficient of ``f(t_{n+j})`` in ``h**k * L_n^(k)(t_n)``
    and ``t2`` the same at ``t_{n+1}``. Exact rational versions are kept in the
    ``*_exact`` tuples; the float arrays are rounded from them.
    """

    q: int
    t1: np.ndarray
    t2: np.ndarray
    r: np.ndarray
    s: np.ndarray
    r_exact: tuple[Fraction, ...]
    s_exact: tuple[Fraction, ...]

    @property
    def rs(self) -> np.ndarray:
        """Denominator weights ``r + s`` (rounded from the exact sum)."""
        return np.array([float(a + b) for a, b in zip(self.r_exact, self.s_exact)])


def _poly_mul(a: list[Fraction], b: list[Fraction]) -> list[Fraction]:
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, ai in enumerate(a):
        for j, bj in enumerate(b):
            out[i + j] += ai * bj
    return out


def _poly_derivative_at(coeffs: list[Fraction], k: int, u: int) -> Fraction:
    # coeffs in increasing powers
    total = Fraction(0)
    for p in range(k, len(coeffs)):
        total += coeffs[p] * math.perm(p, k) * Fraction(u) ** (p - k)
    return total


@lru_cache(maxsize=None)
def _exact_tables(q: int) -> tuple[tuple[tuple[Fraction, ...], ...], tuple[tuple[Fraction, ...], ...]]:
    nodes = list(range(1, q + 2))
    t1, t2 = [], []
    basis = []
    for j in nodes:
        poly = [Fraction(1)]
        denom = Fraction(1)
        for m in nodes:
            if m == j:
                continue
            poly = _poly_mul(poly, [Fraction(-m), Fraction(1)])
            denom *= j - m
        basis.append([c / denom for c in poly])
    for k in range(1, q + 1):
        t1.append(tuple(_poly_derivative_at(b, k, 0) for b in basis))
        t2.append(tuple(_poly_derivative_at(b, k, 1) for b in basis))
    return tuple(t1), tuple(t2)


def lagrange_derivative_weights(q: int, point: str = "base", exact: bool = False):
    """Coefficients of ``f(t_{n+j})`` in the scaled derivatives ``h**k * L_n^(k)``.

    The interpolant passes through the ``q + 1`` equispaced forward nodes
    ``t_{n+1}, ..., t_{n+q+1}``. ``point="base"`` evaluates at ``t_n`` and
    ``point="first_node"`` at ``t_{n+1}``.

    Returns a ``q x (q+1)`` float array, or nested tuples of
    :class:`fractions.Fraction` when ``exact`` is true. Row ``k-1`` holds the
    ``k``-th derivative.
    """
    _check_q(q)
    t1, t2 = _exact_tables(int(q))
    if point == "base":
        table = t1
    elif point == "first_node":
        table = t2
    else:
        raise ValueError(f"point must be 'base' or 'first_node', got {point!r}")
    if exact:
        return table
    return np.array([[float(c) for c in row] for row in table])


@lru_cache(maxsize=None)
def theta_weights(q: int) -> StencilWeights:
    _check_q(q)
    q = int(q)
    t1, t2 = _exact_tables(q)
    r_exact = tuple(
        sum((Fraction((-1) ** (k + 1)) * t2[k - 1][j] / math.factorial(k + 1) for k in range(1, q + 1)), Fraction(0))
        for j in range(q + 1)
    )
    s_exact = tuple(
        sum((t1[k - 1][j] / math.factorial(k + 1) for k in range(1, q + 1)), Fraction(0)) for j in range(q + 1)
    )
    arrays = [
        np.array([[float(c) for c in row] for row in t1]),
        np.array([[float(c) for c in row] for row in t2]),
        np.array([float(c) for c in r_exact]),
        np.array([float(c) for c in s_exact]),
    ]
    for a in arrays:
        a.flags.writeable = False
    return StencilWeights(q, *arrays, r_exact=r_exact, s_exact=s_exact)


def classify(sigma, rho, limits: ThetaLimits, rho_noise=0.0):
    """Vectorised validity test shared by both forms.

    ``rho_noise`` is a rounding-error bound for a computed ``rho``; values
    no larger than it are treated as zero. Returns ``(theta, valid)`` arrays;
    invalid entries carry ``theta = 0.5``.
    """
    sigma = np.asarray(sigma, dtype=float)
    rho = np.asarray(rho, dtype=float)
    nonzero = np.abs(rho) > rho_noise
    safe_rho = np.where(nonzero, rho, 1.0)
    ratio = sigma / safe_rho
    with np.errstate(divide="ignore"):
        inv_rho = np.where(nonzero, 1.0 / np.abs(safe_rho), np.inf)
    valid = nonzero & (inv_rho <= limits.l_rho) & (np.abs(ratio) <= limits.l_theta) & np.isfinite(ratio)
    theta = np.where(valid, ratio, 0.5)
    return theta, valid


def adapted_theta_sampled(samples: Sequence[float], weights: StencilWeights, limits: ThetaLimits) -> ThetaDecision:
    """Adapted theta from the forward samples ``f(t_{n+1}), ..., f(t_{n+q+1})``.

    Scalar reference path; the array paths in the solvers use :func:`classify`
    on float sums instead.
    """
    f = np.asarray(samples, dtype=float)
    if f.shape != (weights.q + 1,):
        raise ValueError(f"expected {weights.q + 1} samples, got shape {f.shape}")
    if not np.all(np.isfinite(f)):
        raise ValueError("samples must be finite")
    # exact rational sums: sigma often cancels, and one rounding keeps theta accurate
    fr = [Fraction(v) for v in f.tolist()]
    sigma_x = sum((a * b for a, b in zip(weights.r_exact, fr)), Fraction(0))
    rho_x = sum(((a + b) * c for a, b, c in zip(weights.r_exact, weights.s_exact, fr)), Fraction(0))
    rho = float(rho_x)
    ratio = float(sigma_x / rho_x) if rho_x != 0 else math.nan
    valid = rho != 0.0 and 1.0 / abs(rho) <= limits.l_rho and abs(ratio) <= limits.l_theta
    return ThetaDecision(ratio if valid else 0.5, bool(valid), rho, float(sigma_x))


def adapted_theta_exact(
    d1: Sequence[float], d2: Sequence[float], h: float, limits: ThetaLimits
) -> ThetaDecision:
    """Adapted theta from exact derivatives.

    Parameters
    ----------
    d1, d2 : sequences of length q
        ``f'(t_n), ..., f^(q)(t_n)`` and ``f'(t_{n+1}), ..., f^(q)(t_{n+1})``.
    h : float
        Step size.
    limits : ThetaLimits
    """
    d1 = np.asarray(d1, dtype=float)
    d2 = np.asarray(d2, dtype=float)
    if d1.ndim != 1 or d1.shape != d2.shape or d1.size < 1:
        raise ValueError("d1 and d2 must be 1-D with the same positive length")
    if not h > 0:
        raise ValueError(f"h must be positive, got {h!r}")
    k = np.arange(1, d1.size + 1)
    scale = np.array([h ** (kk + 1) / math.factorial(kk + 1) for kk in k])
    sign = np.where(k % 2 == 1, 1.0, -1.0)
    sigma = float(np.sum(sign * d2 * scale))
    rho = float(np.sum((d1 + sign * d2) * scale))
    theta, valid = classify(sigma, rho, limits)
    return ThetaDecision(float(theta), bool(valid), rho, sigma)
