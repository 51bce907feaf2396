"""Weighted endpoint quadrature on an equidistant partition with adapted theta."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .theta_core import ThetaDecision, ThetaLimits, classify, theta_weights

TRAILING_POLICIES = ("reflect", "cn")


@dataclass(frozen=True)
class PartitionSpec:
    a: float
    b: float
    n: int

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b) and self.a < self.b):
            raise ValueError(f"need finite a < b, got a={self.a!r}, b={self.b!r}")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"number of subintervals must be a positive integer, got {self.n!r}")

    @property
    def h(self) -> float:
        return (self.b - self.a) / self.n

    def nodes(self) -> np.ndarray:
        t = self.a + self.h * np.arange(self.n + 1)
        t[-1] = self.b
        return t


@dataclass(frozen=True)
class IntegralResult:
    value: float
    decisions: tuple[ThetaDecision, ...]

    @property
    def invalid_count(self) -> int:
        return sum(not d.valid for d in self.decisions)

    @property
    def thetas(self) -> np.ndarray:
        return np.array([d.theta for d in self.decisions])


def sample_nodes(f: Callable, part: PartitionSpec) -> np.ndarray:
    t = part.nodes()
    vals = np.array([float(f(ti)) for ti in t])
    bad = np.flatnonzero(~np.isfinite(vals))
    if bad.size:
        i = int(bad[0])
        raise FloatingPointError(f"integrand is not finite at node {i} (t={t[i]!r}): {vals[i]!r}")
    return vals


def _weighted_sum(fv: np.ndarray, theta: np.ndarray, h: float) -> float:
    # left-to-right summation keeps the result independent of vectorisation
    terms = (theta * fv[:-1] + (1.0 - theta) * fv[1:]) * h
    return math.fsum(terms)


def forward_thetas(fv: np.ndarray, q: int, limits: ThetaLimits):
    """``(sigma, rho, theta, valid)`` for subintervals ``0..N-q-1`` from forward samples."""
    w = theta_weights(q)
    n_fwd = fv.size - q - 1
    windows = np.lib.stride_tricks.sliding_window_view(fv[1:], q + 1)[:n_fwd]
    sigma = windows @ w.r
    rho = windows @ w.rs
    theta, valid = classify(sigma, rho, limits)
    return sigma, rho, theta, valid


def adapted_decisions(fv: np.ndarray, q: int, limits: ThetaLimits, trailing: str = "reflect") -> list[ThetaDecision]:
    """Per-subinterval theta decisions for node samples ``fv`` (length N+1)."""
    if trailing not in TRAILING_POLICIES:
        raise ValueError(f"trailing policy must be one of {TRAILING_POLICIES}, got {trailing!r}")
    n = fv.size - 1
    if n < q + 2:
        raise ValueError(f"adapted scheme of order {q} needs at least {q + 2} subintervals, got {n}")
    sigma, rho, theta, valid = forward_thetas(fv, q, limits)
    decisions = [ThetaDecision(float(t), bool(v), float(r), float(s)) for s, r, t, v in zip(sigma, rho, theta, valid)]
    n_fwd = len(decisions)
    if trailing == "cn":
        decisions += [ThetaDecision(0.5, False, 0.0, 0.0) for _ in range(n - n_fwd)]
        return decisions
    # Trailing subintervals: run the forward stencil on the reversed samples.
    # Subinterval m of the reversed data is subinterval N-1-m of the original,
    # with the roles of the two endpoints swapped.
    rs, rr, rt, rv = forward_thetas(fv[::-1].copy(), q, limits)
    for i in range(n_fwd, n):
        m = n - 1 - i
        if m >= n_fwd:
            # short partitions (n < 2q): neither stencil fits
            decisions.append(ThetaDecision(0.5, False, 0.0, 0.0))
            continue
        t = 1.0 - rt[m] if rv[m] else 0.5
        decisions.append(ThetaDecision(float(t), bool(rv[m]), float(rr[m]), float(rs[m])))
    return decisions


def integrate_adapted(
    f: Callable, part: PartitionSpec, q: int, limits: ThetaLimits | None = None, trailing: str = "reflect"
) -> IntegralResult:
    """Integrate ``f`` with the ``q``-th order adapted theta rule.

    ``trailing`` picks how the last ``q`` subintervals (which lack ``q + 1``
    forward samples) are handled: ``"reflect"`` applies the stencil to the
    time-reversed integrand, ``"cn"`` uses ``theta = 1/2`` there and marks
    them invalid.
    """
    limits = limits or ThetaLimits()
    theta_weights(q)  # range check before sampling
    if part.n < q + 2:
        raise ValueError(f"adapted scheme of order {q} needs at least {q + 2} subintervals, got {part.n}")
    fv = sample_nodes(f, part)
    decisions = adapted_decisions(fv, q, limits, trailing)
    theta = np.array([d.theta for d in decisions])
    return IntegralResult(_weighted_sum(fv, theta, part.h), tuple(decisions))


def integrate_fixed_theta(f: Callable, part: PartitionSpec, theta: float = 0.5) -> IntegralResult:
    fv = sample_nodes(f, part)
    value = _weighted_sum(fv, np.full(part.n, float(theta)), part.h)
    decisions = tuple(ThetaDecision(float(theta), True, math.nan, math.nan) for _ in range(part.n))
    return IntegralResult(value, decisions)


def reference_integrand(t):
    """``t**3 * exp(-(t - 1/2)**2)``; accepts scalars or arrays."""
    return t**3 * np.exp(-((t - 0.5) ** 2))


def composite_simpson(f: Callable, a: float, b: float, panels: int = 1_000_000) -> float:
    """Composite Simpson rule with an even number of panels; ``f`` must accept arrays."""
    if panels % 2:
        panels += 1
    t = np.linspace(a, b, panels + 1)
    y = np.asarray(f(t), dtype=float)
    h = (b - a) / panels
    return float(h / 3.0 * (y[0] + y[-1] + 4.0 * math.fsum(y[1:-1:2]) + 2.0 * math.fsum(y[2:-1:2])))
