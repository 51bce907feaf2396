"""Built-in problems, convergence studies and report files."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .bsde_solver import BsdeProblem, SchemeConfig, SolverError, solve_bsde
from .quad1d import PartitionSpec, composite_simpson, integrate_adapted, integrate_fixed_theta, reference_integrand
from .theta_core import ThetaLimits

log = logging.getLogger(__name__)

ROUNDOFF_FLOOR = 1e-12
INTEGRAL_LIMITS = ThetaLimits(l_theta=1.0, l_rho=1e8)
INTEGRAL_INTERVAL = (-3.0, 3.0)

BSDE_COLUMNS = ("scheme", "q", "N", "h", "err_y", "err_z", "invalid_y", "invalid_z")
INTEGRAL_COLUMNS = ("scheme", "q", "N", "h", "err", "invalid")


def _logistic(u):
    return 1.0 / (1.0 + np.exp(-u))


def _example51(T: float = 1.0) -> BsdeProblem:
    def f(t, y):
        return -(y**3) + 2.5 * y**2 - 1.5 * y

    def f_y(t, y):
        return -3.0 * y**2 + 5.0 * y - 1.5

    def y_exact(t, x):
        return _logistic(np.asarray(x) + t)

    def z_exact(t, x):
        s = _logistic(np.asarray(x) + t)
        return s * (1.0 - s)

    return BsdeProblem(
        f=f,
        f_y=f_y,
        phi=lambda x: y_exact(T, x),
        phi_x=lambda x: z_exact(T, x),
        horizon=T,
        exact=(y_exact, z_exact),
        name="example51",
    )


def _zero_gen_linear(T: float = 1.0) -> BsdeProblem:
    zero = lambda t, y: np.zeros_like(np.asarray(y, dtype=float))  # noqa: E731
    return BsdeProblem(
        f=zero,
        f_y=zero,
        phi=lambda x: np.asarray(x, dtype=float),
        phi_x=lambda x: np.ones_like(np.asarray(x, dtype=float)),
        horizon=T,
        exact=(lambda t, x: np.asarray(x, dtype=float) + 0.0 * t, lambda t, x: np.ones_like(np.asarray(x, dtype=float))),
        name="zero_gen_linear",
    )


def _zero_gen_square(T: float = 1.0) -> BsdeProblem:
    zero = lambda t, y: np.zeros_like(np.asarray(y, dtype=float))  # noqa: E731
    return BsdeProblem(
        f=zero,
        f_y=zero,
        phi=lambda x: np.asarray(x, dtype=float) ** 2,
        phi_x=lambda x: 2.0 * np.asarray(x, dtype=float),
        horizon=T,
        # y(t, x) = E[(x + W_T - W_t)^2]
        exact=(lambda t, x: np.asarray(x, dtype=float) ** 2 + (T - t), lambda t, x: 2.0 * np.asarray(x, dtype=float)),
        name="zero_gen_square",
    )


PROBLEMS = {
    "example51": _example51,
    "zero_gen_linear": _zero_gen_linear,
    "zero_gen_square": _zero_gen_square,
}


def builtin_problem(problem_id: str) -> BsdeProblem:
    try:
        return PROBLEMS[problem_id]()
    except KeyError:
        raise KeyError(f"unknown problem {problem_id!r}; known: {', '.join(sorted(PROBLEMS))}") from None


def fit_convergence_rate(hs: Sequence[float], errs: Sequence[float]) -> float:
    """Least-squares slope of ``log(err)`` against ``log(h)``."""
    hs = np.asarray(hs, dtype=float)
    errs = np.asarray(errs, dtype=float)
    if hs.shape != errs.shape or hs.ndim != 1 or hs.size < 2:
        raise ValueError("need equal-length sequences with at least two entries")
    if not (np.all(np.isfinite(errs)) and np.all(errs > 0)):
        raise ValueError("errors must be positive and finite; drop round-off rows first")
    if not (np.all(np.isfinite(hs)) and np.all(hs > 0)) or np.unique(hs).size != hs.size:
        raise ValueError("step sizes must be positive and distinct")
    lh = np.log(hs)
    le = np.log(errs)
    lh_c = lh - lh.mean()
    return float(np.dot(lh_c, le - le.mean()) / np.dot(lh_c, lh_c))


@lru_cache(maxsize=None)
def integral_reference(a: float, b: float) -> float:
    return composite_simpson(reference_integrand, a, b, 1_000_000)


def parse_integral_scheme(name: str) -> tuple[str, float, int]:
    """``(label, value, q)`` for ``cn``, ``ada<q>`` or ``theta:<value>``."""
    key = name.strip().lower()
    if key == "cn":
        return "cn", 0.5, 1
    if key.startswith("ada") and key[3:].isdigit():
        return key, float("nan"), int(key[3:])
    if key.startswith("theta:"):
        return key, float(key[6:]), 1
    raise ValueError(f"unknown scheme {name!r} (expected cn, ada<q> or theta:<value>)")


@dataclass
class StudySpec:
    """One convergence study.

    ``target`` is ``"integral"`` or ``"bsde:<problem id>"``. ``schemes`` are
    names (``cn``, ``ada3``, ``theta:0.3``) or, for BSDE studies,
    :class:`SchemeConfig` objects. ``scheme_options`` are passed to
    :meth:`SchemeConfig.from_name` for named BSDE schemes.
    """

    target: str
    schemes: list[Union[str, SchemeConfig]]
    sizes: list[int]
    interval: tuple[float, float] = INTEGRAL_INTERVAL
    integral_limits: ThetaLimits = INTEGRAL_LIMITS
    scheme_options: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.schemes:
            raise ValueError("at least one scheme is required")
        sizes = [int(n) for n in self.sizes]
        if len(sizes) < 2 or any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise ValueError(f"sizes must be strictly increasing with at least two entries, got {self.sizes!r}")
        self.sizes = sizes
        if self.target != "integral" and not self.target.startswith("bsde:"):
            raise ValueError(f"target must be 'integral' or 'bsde:<id>', got {self.target!r}")

    @property
    def kind(self) -> str:
        return "integral" if self.target == "integral" else "bsde"


@dataclass
class ReportRow:
    scheme: str
    q: int
    N: int
    h: float
    err_y: float
    err_z: Optional[float] = None
    invalid_y: int = 0
    invalid_z: Optional[int] = None
    invalid_forward: Optional[int] = None
    y0: Optional[float] = None
    z0: Optional[float] = None
    error: Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.error is not None


@dataclass
class ConvergenceReport:
    kind: str
    target: str
    rows: list[ReportRow]
    rates: dict[str, dict[str, float]]

    @property
    def failures(self) -> list[ReportRow]:
        return [r for r in self.rows if r.failed]

    def errors_for(self, scheme: str, quantity: str = "y") -> tuple[np.ndarray, np.ndarray]:
        rows = [r for r in self.rows if r.scheme == scheme and not r.failed]
        attr = "err_y" if quantity in ("y", "err") else "err_z"
        return np.array([r.h for r in rows]), np.array([getattr(r, attr) for r in rows])


def fittable(err) -> bool:
    return err is not None and math.isfinite(err) and err > ROUNDOFF_FLOOR


def compute_rates(kind: str, rows: Sequence[ReportRow]) -> dict[str, dict[str, float]]:
    """Rates per scheme from the rows above the round-off floor."""
    quantities = {"y": "err_y", "z": "err_z"} if kind == "bsde" else {"err": "err_y"}
    rates: dict[str, dict[str, float]] = {}
    for scheme in sorted({r.scheme for r in rows}):
        sub = sorted((r for r in rows if r.scheme == scheme and not r.failed), key=lambda r: r.N)
        for qname, attr in quantities.items():
            pts = [(r.h, getattr(r, attr)) for r in sub if fittable(getattr(r, attr))]
            if len(pts) >= 2:
                hs, es = zip(*pts)
                rates.setdefault(scheme, {})[qname] = fit_convergence_rate(hs, es)
    return rates


def _integral_row(name: str, n: int, spec: StudySpec) -> ReportRow:
    label, value, q = parse_integral_scheme(name)
    a, b = spec.interval
    part = PartitionSpec(a, b, n)
    try:
        if label.startswith("ada"):
            res = integrate_adapted(reference_integrand, part, q, spec.integral_limits)
            forward = sum(not d.valid for d in res.decisions[: n - q])
        else:
            res = integrate_fixed_theta(reference_integrand, part, value)
            forward = 0
    except (ValueError, FloatingPointError) as exc:
        return ReportRow(label, q, n, part.h, math.nan, error=str(exc))
    err = abs(res.value - integral_reference(a, b))
    return ReportRow(label, q, n, part.h, err, invalid_y=res.invalid_count, invalid_forward=forward)


def _bsde_row(scheme: Union[str, SchemeConfig], n: int, problem: BsdeProblem, spec: StudySpec) -> ReportRow:
    config = scheme if isinstance(scheme, SchemeConfig) else SchemeConfig.from_name(scheme, **spec.scheme_options)
    h = problem.horizon / n
    try:
        out = solve_bsde(problem, n, config)
    except (SolverError, ValueError) as exc:
        log.warning("%s N=%d failed: %s", config.label, n, exc)
        return ReportRow(config.label, config.q_eff, n, h, math.nan, math.nan, 0, 0, error=str(exc))
    y_ex, z_ex = problem.exact
    return ReportRow(
        config.label,
        config.q_eff,
        n,
        h,
        abs(out.y0 - float(y_ex(0.0, 0.0))),
        abs(out.z0 - float(z_ex(0.0, 0.0))),
        out.invalid_y,
        out.invalid_z,
        y0=out.y0,
        z0=out.z0,
    )


def run_convergence_study(spec: StudySpec) -> ConvergenceReport:
    rows = []
    if spec.kind == "integral":
        for name in spec.schemes:
            for n in spec.sizes:
                rows.append(_integral_row(name, n, spec))
    else:
        problem = builtin_problem(spec.target.split(":", 1)[1])
        if problem.exact is None:
            raise ValueError(f"problem {problem.name!r} has no exact solution to measure errors against")
        for scheme in spec.schemes:
            for n in spec.sizes:
                rows.append(_bsde_row(scheme, n, problem, spec))
    rows.sort(key=lambda r: (r.scheme, r.N))
    return ConvergenceReport(spec.kind, spec.target, rows, compute_rates(spec.kind, rows))


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.5e}"


def report_csv(report: ConvergenceReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if report.kind == "bsde":
        writer.writerow(BSDE_COLUMNS)
        for r in report.rows:
            writer.writerow([r.scheme, r.q, r.N, _fmt(r.h), _fmt(r.err_y), _fmt(r.err_z), r.invalid_y, r.invalid_z])
    else:
        writer.writerow(INTEGRAL_COLUMNS)
        for r in report.rows:
            writer.writerow([r.scheme, r.q, r.N, _fmt(r.h), _fmt(r.err_y), r.invalid_y])
    return buf.getvalue()


def _json_float(v):
    if v is None or (isinstance(v, float) and not math.isfinite(v)):
        return None
    return v


def report_dict(report: ConvergenceReport) -> dict:
    rows = []
    for r in report.rows:
        d = {k: _json_float(v) for k, v in asdict(r).items()}
        if report.kind == "integral":
            d["err"] = d.pop("err_y")
            d["invalid"] = d.pop("invalid_y")
            for k in ("err_z", "invalid_z", "y0", "z0"):
                d.pop(k)
        else:
            d.pop("invalid_forward")
        d["fit_excluded"] = not r.failed and not fittable(r.err_y)
        rows.append(d)
    return {
        "kind": report.kind,
        "target": report.target,
        "roundoff_floor": ROUNDOFF_FLOOR,
        "rows": rows,
        "rates": report.rates,
    }


def emit_report(report: ConvergenceReport, fmt: str, path) -> Path:
    """Write the report as ``csv`` or ``json`` to ``path``."""
    path = Path(path)
    if fmt == "csv":
        text = report_csv(report)
    elif fmt == "json":
        text = json.dumps(report_dict(report), indent=2, sort_keys=True) + "\n"
    else:
        raise ValueError(f"format must be 'csv' or 'json', got {fmt!r}")
    try:
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc}") from exc
    return path
