"""Uniform symmetric space grid and local Lagrange interpolation on it."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._numerics import ordered_sum


@dataclass(frozen=True)
class SpaceGrid:
    """Nodes ``x_i = (i - K) * dx`` for ``i = 0..2K``; ``0`` is always a node."""

    half_width: float
    dx: float
    nodes: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return self.nodes.size

    @property
    def lo(self) -> float:
        return float(self.nodes[0])

    @property
    def hi(self) -> float:
        return float(self.nodes[-1])

    @property
    def center(self) -> int:
        return self.nodes.size // 2


@dataclass(frozen=True)
class GridFunction:
    grid: SpaceGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.nodes.shape:
            raise ValueError(f"values shape {v.shape} does not match grid of {self.grid.size} nodes")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid function values must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)


def make_grid(half_width: float, dx: float, order: int = 1) -> SpaceGrid:
    """Build a grid covering ``[-half_width, half_width]`` with spacing exactly ``dx``.

    The half-width is rounded up to a whole number ``K`` of steps, so the grid
    spans ``[-K*dx, K*dx]`` with ``2K + 1`` nodes. ``order`` is the
    interpolation order the grid has to support.
    """
    if not (math.isfinite(half_width) and half_width > 0):
        raise ValueError(f"half_width must be positive, got {half_width!r}")
    if not (math.isfinite(dx) and dx > 0):
        raise ValueError(f"dx must be positive, got {dx!r}")
    if half_width / dx < (order + 1) / 2:
        raise ValueError(f"grid too coarse for order {order}: half_width/dx = {half_width / dx:.3g}")
    # tolerance keeps exact multiples (1/0.5) from gaining an extra node
    k = math.ceil(half_width / dx - 1e-9)
    nodes = np.arange(-k, k + 1, dtype=float) * dx
    nodes.flags.writeable = False
    return SpaceGrid(float(half_width), float(dx), nodes)


def stencil_start(grid: SpaceGrid, x: np.ndarray, r: int) -> np.ndarray:
    """Index of the first of the ``r + 1`` nodes nearest each ``x`` (ties to the left)."""
    p = (x - grid.lo) / grid.dx
    start = np.ceil(p - 0.5 * (r + 1)).astype(np.int64)
    return np.clip(start, 0, grid.size - r - 1)


def lagrange_weights(grid: SpaceGrid, x: np.ndarray, start: np.ndarray, r: int) -> np.ndarray:
    nodes = grid.nodes[start[..., None] + np.arange(r + 1)]
    diff = x[..., None] - nodes
    w = np.ones(diff.shape)
    for j in range(r + 1):
        for m in range(r + 1):
            if m != j:
                w[..., j] *= diff[..., m] / (nodes[..., j] - nodes[..., m])
    return w


def interpolate(fn: GridFunction, x, r: int = 5):
    """Degree-``r`` local Lagrange interpolation of ``fn`` at ``x``.

    Queries outside the grid are clamped to the nearest end node. Accepts a
    scalar or an array of query points.
    """
    return interpolate_many(fn.grid, fn.values, x, r)


def interpolate_many(grid: SpaceGrid, values: np.ndarray, x, r: int = 5):
    """Interpolate one or several value arrays at the same query points.

    ``values`` has the grid along its last axis; leading axes are carried
    through, so stacking ``y`` and ``z`` shares the stencil work.
    """
    if r < 1:
        raise ValueError(f"interpolation order must be >= 1, got {r!r}")
    if grid.size < r + 1:
        raise ValueError(f"grid of {grid.size} nodes cannot support order {r}")
    scalar = np.ndim(x) == 0
    xq = np.clip(np.asarray(x, dtype=float), grid.lo, grid.hi)
    start = stencil_start(grid, xq, r)
    w = lagrange_weights(grid, xq, start, r)
    idx = start[..., None] + np.arange(r + 1)
    values = np.asarray(values, dtype=float)
    out = ordered_sum(values[..., idx] * w)
    if scalar and out.ndim == 0:
        return float(out)
    return out
