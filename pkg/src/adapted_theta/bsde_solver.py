"""Backward theta schemes for ``y_t = phi(W_T) + int_t^T f(s, y_s) ds - int_t^T z_s dW_s``.

The solver works on a uniform space grid for the Brownian state. Conditional
expectations over one or several time steps are Gauss-Hermite sums of the
stored grid functions, interpolated at the quadrature abscissae.

``y`` and ``z`` are advanced together: ``y`` from its implicit scalar equation
(fixed-point iteration) and ``z = grad y`` from the linear variational
equation (closed form).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from ._numerics import ordered_sum
from .expectation import HermiteRule, expect_values, gauss_hermite, gaussian_points
from .grid_interp import GridFunction, SpaceGrid, interpolate_many, make_grid
from .theta_core import StencilWeights, ThetaDecision, ThetaLimits, classify, theta_weights

log = logging.getLogger(__name__)

ADAPTED_Q = (2, 3, 4)
DIVISION_GUARD = 1e-12
# rho below this multiple of eps * sum|w_j e_j| is indistinguishable from zero
RHO_CANCELLATION = 16.0


class SolverError(RuntimeError):
    pass


class FixedPointError(SolverError):
    def __init__(self, n: int, x: float, iters: int, diff: float):
        super().__init__(f"fixed-point iteration did not converge at level n={n}, x={x:.6g} after {iters} iterations (last change {diff:.3e})")
        self.n = n
        self.x = x


class StepSizeError(SolverError):
    def __init__(self, n: int, x: float, denom: float):
        super().__init__(f"z-equation is singular at level n={n}, x={x:.6g} (1 - h*theta*f_y = {denom:.3e}); reduce the step size")
        self.n = n
        self.x = x


@dataclass(frozen=True)
class BsdeProblem:
    """Generator, terminal data and (optionally) the exact solution.

    All callables must accept numpy arrays: ``f(t, y)``, ``f_y(t, y)``,
    ``phi(x)``, ``phi_x(x)`` and, if given, ``exact = (y(t, x), z(t, x))``.
    """

    f: Callable
    f_y: Callable
    phi: Callable
    phi_x: Callable
    horizon: float = 1.0
    exact: Optional[tuple[Callable, Callable]] = None
    name: str = ""

    def __post_init__(self):
        if not (math.isfinite(self.horizon) and self.horizon > 0):
            raise ValueError(f"horizon must be positive, got {self.horizon!r}")

    def check_derivatives(self, rng=None, points: int = 8, step: float = 1e-6, tol: float = 1e-6) -> None:
        """Spot-check ``f_y`` and ``phi_x`` against central differences; raise on mismatch."""
        rng = np.random.default_rng(0) if rng is None else rng
        t = rng.uniform(0.0, self.horizon, points)
        y = rng.uniform(-1.0, 1.0, points)
        x = rng.uniform(-2.0, 2.0, points)
        fd = (self.f(t, y + step) - self.f(t, y - step)) / (2 * step)
        if not np.allclose(fd, self.f_y(t, y), rtol=tol, atol=tol):
            raise ValueError("f_y is inconsistent with f")
        fd = (self.phi(x + step) - self.phi(x - step)) / (2 * step)
        if not np.allclose(fd, self.phi_x(x), rtol=tol, atol=tol):
            raise ValueError("phi_x is inconsistent with phi")


@dataclass(frozen=True)
class SchemeConfig:
    """Scheme and discretisation settings.

    ``kind`` is ``"fixed"`` (constant ``theta``) or ``"adapted"`` (order
    ``q``). ``bootstrap`` selects how the adapted scheme's last ``q`` levels
    are produced: ``"refined"`` runs Crank-Nicolson with
    ``bootstrap_substeps`` sub-steps per coarse step (``None`` means ``N``),
    ``"exact"`` copies the analytic solution. ``domain_half_width=None``
    picks the default truncation from :func:`default_half_width` and
    ``space_step=None`` the balanced step from :func:`balanced_space_step`.
    """

    kind: str = "fixed"
    theta: float = 0.5
    q: int = 2
    limits: ThetaLimits = field(default_factory=lambda: ThetaLimits(10.0, 1e30))
    gh_points: int = 8
    interp_order: int = 5
    fixpoint_tol: float = 1e-13
    fixpoint_max_iters: int = 100
    bootstrap: str = "refined"
    bootstrap_substeps: Optional[int] = None
    domain_half_width: Optional[float] = None
    space_step: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("fixed", "adapted"):
            raise ValueError(f"kind must be 'fixed' or 'adapted', got {self.kind!r}")
        if self.kind == "adapted" and self.q not in ADAPTED_Q:
            raise ValueError(f"adapted order q must be one of {ADAPTED_Q}, got {self.q!r}")
        if self.gh_points < 2:
            raise ValueError("gh_points must be >= 2")
        if self.interp_order < 1:
            raise ValueError("interp_order must be >= 1")
        if not self.fixpoint_tol > 0 or self.fixpoint_max_iters < 1:
            raise ValueError("fixpoint_tol must be positive and fixpoint_max_iters >= 1")
        if self.bootstrap not in ("refined", "exact"):
            raise ValueError(f"bootstrap must be 'refined' or 'exact', got {self.bootstrap!r}")
        if self.bootstrap_substeps is not None and self.bootstrap_substeps < 1:
            raise ValueError("bootstrap_substeps must be >= 1")
        for name in ("domain_half_width", "space_step"):
            v = getattr(self, name)
            if v is not None and not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive, got {v!r}")

    @classmethod
    def fixed(cls, theta: float = 0.5, **kw) -> "SchemeConfig":
        return cls(kind="fixed", theta=theta, **kw)

    @classmethod
    def adapted(cls, q: int, **kw) -> "SchemeConfig":
        return cls(kind="adapted", q=q, **kw)

    @classmethod
    def from_name(cls, name: str, **kw) -> "SchemeConfig":
        """Parse ``cn``, ``ada2``..``ada4`` or ``theta:<value>``."""
        key = name.strip().lower()
        if key == "cn":
            return cls.fixed(0.5, **kw)
        if key.startswith("ada") and key[3:].isdigit():
            return cls.adapted(int(key[3:]), **kw)
        if key.startswith("theta:"):
            return cls.fixed(float(key[6:]), **kw)
        raise ValueError(f"unknown scheme {name!r} (expected cn, ada2, ada3, ada4 or theta:<value>)")

    @property
    def q_eff(self) -> int:
        return self.q if self.kind == "adapted" else 1

    @property
    def label(self) -> str:
        if self.kind == "adapted":
            return f"ada{self.q}"
        return "cn" if self.theta == 0.5 else f"theta:{self.theta:g}"


@dataclass(frozen=True)
class SolutionField:
    level: int
    y: GridFunction
    z: GridFunction

    def __post_init__(self):
        if self.y.grid is not self.z.grid:
            raise ValueError("y and z must share one grid")


@dataclass
class SolveOutput:
    fields: list[SolutionField]
    y0: float
    z0: float
    invalid_y: int
    invalid_z: int
    h: float
    grid: SpaceGrid


def balanced_space_step(h: float, q_eff: int, r: int) -> float:
    """Space step balancing interpolation error with the local time error."""
    return h ** ((q_eff + 2) / (r + 1))


def default_half_width(horizon: float, h: float, q_eff: int, rule: HermiteRule) -> float:
    return 8.0 * math.sqrt(horizon) + math.sqrt(2.0 * (q_eff + 1) * h) * float(np.max(np.abs(rule.nodes)))


def _field(level: int, grid: SpaceGrid, y: np.ndarray, z: np.ndarray) -> SolutionField:
    return SolutionField(level, GridFunction(grid, y), GridFunction(grid, z))


def terminal_level(problem: BsdeProblem, grid: SpaceGrid, level: int = 0) -> SolutionField:
    """``y = phi``, ``z = phi_x`` at every node. ``level`` is the index ``N`` stored on the field."""
    y = np.asarray(problem.phi(grid.nodes), dtype=float) * np.ones(grid.size)
    z = np.asarray(problem.phi_x(grid.nodes), dtype=float) * np.ones(grid.size)
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(z))):
        raise ValueError("terminal function is not finite on the grid")
    return _field(level, grid, y, z)


def _one_step_expectations(t_next, var, y_next, z_next, problem, grid, rule, r):
    """``E[y], E[f(y)], E[z], E[f_y(y) z]`` over a Gaussian step of variance ``var`` from every node."""
    pts = gaussian_points(grid.nodes, var, rule)
    yz = interpolate_many(grid, np.stack([y_next, z_next]), pts, r)
    ys, zs = yz[0], yz[1]
    e1 = expect_values(ys, rule)
    e2 = expect_values(np.asarray(problem.f(t_next, ys), dtype=float) * np.ones_like(ys), rule)
    e3 = expect_values(zs, rule)
    e4 = expect_values(np.asarray(problem.f_y(t_next, ys), dtype=float) * zs, rule)
    return e1, e2, e3, e4


def solve_y(e1, e2, t_n, h, theta_y, problem, tol, max_iters, level=-1, grid=None) -> np.ndarray:
    """Solve ``y = e1 + h*(theta*f(t_n, y) + (1-theta)*e2)`` node-wise by fixed-point iteration.

    Each node stops at its own first iterate within ``tol`` of the previous
    one, so the result does not depend on how nodes are batched.
    """
    e1 = np.asarray(e1, dtype=float)
    e2 = np.broadcast_to(np.asarray(e2, dtype=float), e1.shape)
    theta_y = np.broadcast_to(np.asarray(theta_y, dtype=float), e1.shape)
    y0 = e1 + h * e2
    y = y0.copy()
    active = np.arange(e1.size)
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(max_iters):
            old = y[active]
            th = theta_y[active]
            new = e1[active] + h * (th * problem.f(t_n, old) + (1.0 - th) * e2[active])
            y[active] = new
            done = np.abs(new - old) <= tol
            active = active[~done]
            if active.size == 0:
                return y
    # h*|theta*f_y| >= 1 at these nodes: the map does not contract, use Newton
    log.debug("level %d: %d nodes need Newton for the y-equation", level, active.size)
    y[active] = _newton_y(y0[active], e1[active], e2[active], t_n, h, theta_y[active], problem, tol, max_iters, level, grid, active)
    return y


def _newton_y(y, e1, e2, t_n, h, th, problem, tol, max_iters, level, grid, index):
    active = np.arange(y.size)
    diff = np.inf
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for _ in range(max_iters):
            yy = y[active]
            a = th[active]
            g = yy - e1[active] - h * (a * problem.f(t_n, yy) + (1.0 - a) * e2[active])
            dg = 1.0 - h * a * problem.f_y(t_n, yy)
            step = g / dg
            y[active] = yy - step
            d = np.abs(step)
            done = d <= tol
            active = active[~done]
            if active.size == 0:
                return y
            diff = float(np.max(d[~done]))
    i = int(index[active[0]])
    x = float(grid.nodes[i]) if grid is not None else float(i)
    raise FixedPointError(level, x, max_iters, diff)


def solve_z(e3, e4, y_n, t_n, h, theta_z, problem, level=-1, grid=None) -> np.ndarray:
    """Closed-form solution of the linear ``z`` equation."""
    denom = 1.0 - h * theta_z * problem.f_y(t_n, y_n)
    denom = np.broadcast_to(np.asarray(denom, dtype=float), np.shape(e3))
    bad = np.flatnonzero(np.abs(denom) < DIVISION_GUARD)
    if bad.size:
        i = int(bad[0])
        x = float(grid.nodes[i]) if grid is not None else float(i)
        raise StepSizeError(level, x, float(denom[i]))
    return (e3 + h * (1.0 - theta_z) * e4) / denom


def theta_step(
    level: int,
    t_n: float,
    h: float,
    nxt: SolutionField,
    problem: BsdeProblem,
    config: SchemeConfig,
    rule: HermiteRule,
    theta_y,
    theta_z,
) -> tuple[SolutionField, tuple]:
    """One step of size ``h`` from ``nxt`` (at ``t_n + h``) with the given theta values."""
    grid = nxt.y.grid
    e = _one_step_expectations(t_n + h, h, nxt.y.values, nxt.z.values, problem, grid, rule, config.interp_order)
    e1, e2, e3, e4 = e
    y = solve_y(e1, e2, t_n, h, theta_y, problem, config.fixpoint_tol, config.fixpoint_max_iters, level, grid)
    z = solve_z(e3, e4, y, t_n, h, theta_z, problem, level, grid)
    return _field(level, grid, y, z), e


def _theta_arrays(n, x, future, problem, weights, config, rule, h):
    """Vectorised sigma/rho for theta_y and theta_z at points ``x`` (array)."""
    q = weights.q
    r = config.interp_order
    shape = np.shape(x)
    ey, ez, my, mz = (np.empty(shape + (q + 1,)) for _ in range(4))
    for j in range(1, q + 2):
        fld = future[j - 1]
        t_j = (n + j) * h
        pts = gaussian_points(x, j * h, rule)
        yz = interpolate_many(fld.y.grid, np.stack([fld.y.values, fld.z.values]), pts, r)
        ys, zs = yz[0], yz[1]
        fy = np.asarray(problem.f(t_j, ys), dtype=float) * np.ones_like(ys)
        gz = np.asarray(problem.f_y(t_j, ys), dtype=float) * zs
        ey[..., j - 1] = expect_values(fy, rule)
        ez[..., j - 1] = expect_values(gz, rule)
        # magnitudes of the summands, for the cancellation test on rho
        my[..., j - 1] = expect_values(np.abs(fy), rule)
        mz[..., j - 1] = expect_values(np.abs(gz), rule)
    r_w = weights.r
    rs_w = weights.rs
    sig_y = ordered_sum(ey * r_w)
    rho_y = ordered_sum(ey * rs_w)
    sig_z = ordered_sum(ez * r_w)
    rho_z = ordered_sum(ez * rs_w)
    eps = RHO_CANCELLATION * np.finfo(float).eps
    th_y, ok_y = classify(sig_y, rho_y, config.limits, eps * ordered_sum(my * np.abs(rs_w)))
    th_z, ok_z = classify(sig_z, rho_z, config.limits, eps * ordered_sum(mz * np.abs(rs_w)))
    return (th_y, ok_y, rho_y, sig_y), (th_z, ok_z, rho_z, sig_z)


def _check_future(n: int, future: Sequence[SolutionField], count: int) -> None:
    if len(future) < count:
        raise ValueError(f"level {n} needs {count} future levels, got {len(future)}")
    for j, fld in enumerate(future[:count], start=1):
        if fld.level != n + j:
            raise ValueError(f"future field {j} has level {fld.level}, expected {n + j}")


def adapted_thetas_at(
    n: int,
    x,
    future_fields: Sequence[SolutionField],
    problem: BsdeProblem,
    weights: StencilWeights,
    config: SchemeConfig,
    h: float,
) -> tuple[ThetaDecision, ThetaDecision]:
    """Adapted ``(theta_y, theta_z)`` at level ``n`` and space point ``x``.

    ``future_fields`` are levels ``n+1..n+q+1``. Expectation ``j`` uses a
    Gaussian of variance ``j*h`` and the field at level ``n+j``.
    """
    _check_future(n, future_fields, weights.q + 1)
    rule = gauss_hermite(config.gh_points)
    dy, dz = _theta_arrays(n, np.asarray(float(x)), future_fields, problem, weights, config, rule, h)
    return (
        ThetaDecision(float(dy[0]), bool(dy[1]), float(dy[2]), float(dy[3])),
        ThetaDecision(float(dz[0]), bool(dz[1]), float(dz[2]), float(dz[3])),
    )


def backward_step(
    n: int,
    future_fields: Sequence[SolutionField],
    problem: BsdeProblem,
    config: SchemeConfig,
    h: float,
) -> tuple[SolutionField, int, int]:
    """Compute level ``n`` from the stored future levels.

    Returns the new field and the number of grid nodes where the adapted
    ``theta_y`` / ``theta_z`` fell back to 1/2 (both 0 for the fixed scheme).
    """
    rule = gauss_hermite(config.gh_points)
    if config.kind == "fixed":
        _check_future(n, future_fields, 1)
        fld, _ = theta_step(n, n * h, h, future_fields[0], problem, config, rule, config.theta, config.theta)
        return fld, 0, 0
    weights = theta_weights(config.q)
    _check_future(n, future_fields, config.q + 1)
    grid = future_fields[0].y.grid
    dy, dz = _theta_arrays(n, grid.nodes, future_fields, problem, weights, config, rule, h)
    fld, _ = theta_step(n, n * h, h, future_fields[0], problem, config, rule, dy[0], dz[0])
    return fld, int(np.count_nonzero(~dy[1])), int(np.count_nonzero(~dz[1]))


def bootstrap_levels(
    problem: BsdeProblem, grid: SpaceGrid, N: int, q: int, config: SchemeConfig, terminal: SolutionField | None = None
) -> list[SolutionField]:
    """Fields at levels ``N-q..N-1`` (returned in that order).

    ``config.bootstrap == "refined"`` runs Crank-Nicolson backward from level
    ``N`` with ``config.bootstrap_substeps`` sub-steps per coarse step
    (default ``N``); ``"exact"`` samples ``problem.exact``.
    """
    if not N > q:
        raise ValueError(f"need N > q, got N={N}, q={q}")
    h = problem.horizon / N
    if config.bootstrap == "exact":
        if problem.exact is None:
            raise ValueError("exact bootstrap requested but the problem has no exact solution")
        y_ex, z_ex = problem.exact
        out = []
        for lvl in range(N - q, N):
            t = lvl * h
            out.append(_field(lvl, grid, y_ex(t, grid.nodes) * np.ones(grid.size), z_ex(t, grid.nodes) * np.ones(grid.size)))
        return out
    substeps = config.bootstrap_substeps or N
    delta = h / substeps
    rule = gauss_hermite(config.gh_points)
    cur = terminal if terminal is not None else terminal_level(problem, grid, N)
    out = []
    for j in range(1, q + 1):
        lvl = N - j
        for i in range(substeps - 1, -1, -1):
            t = lvl * h + i * delta
            cur, _ = theta_step(lvl, t, delta, cur, problem, config, rule, 0.5, 0.5)
        out.append(cur)
    return out[::-1]


def solve_bsde(problem: BsdeProblem, N: int, config: SchemeConfig | None = None) -> SolveOutput:
    """Run the scheme on ``N`` time steps and report the values at ``(t, x) = (0, 0)``."""
    config = config or SchemeConfig()
    if int(N) != N or N < 1:
        raise ValueError(f"N must be a positive integer, got {N!r}")
    q = config.q_eff
    if config.kind == "adapted" and N <= q:
        raise ValueError(f"adapted scheme of order {q} needs N > {q}, got {N}")
    h = problem.horizon / N
    r = config.interp_order
    rule = gauss_hermite(config.gh_points)
    half_width = config.domain_half_width or default_half_width(problem.horizon, h, q, rule)
    grid = make_grid(half_width, config.space_step or balanced_space_step(h, q, r), r)
    log.debug("solve %s N=%d: %d nodes, dx=%.3e", config.label, N, grid.size, grid.dx)

    fields: list[Optional[SolutionField]] = [None] * (N + 1)
    fields[N] = terminal_level(problem, grid, N)
    start = N - 1
    if config.kind == "adapted":
        for fld in bootstrap_levels(problem, grid, N, config.q, config, fields[N]):
            fields[fld.level] = fld
        start = N - config.q - 1
    inv_y = inv_z = 0
    for n in range(start, -1, -1):
        depth = config.q + 1 if config.kind == "adapted" else 1
        fld, iy, iz = backward_step(n, fields[n + 1 : n + 1 + depth], problem, config, h)
        fields[n] = fld
        inv_y += iy
        inv_z += iz
    c = grid.center
    return SolveOutput(fields, float(fields[0].y.values[c]), float(fields[0].z.values[c]), inv_y, inv_z, h, grid)
