"""Command line entry point: ``adapted-theta {integrate,bsde,study}``."""

from __future__ import annotations

import argparse
import logging
import sys

from .bsde_solver import SchemeConfig, SolverError, solve_bsde
from .harness import (
    INTEGRAL_INTERVAL,
    INTEGRAL_LIMITS,
    StudySpec,
    builtin_problem,
    emit_report,
    integral_reference,
    run_convergence_study,
)
from .quad1d import PartitionSpec, integrate_adapted, integrate_fixed_theta, reference_integrand
from .theta_core import ThetaLimits


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _str_list(text: str) -> list[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adapted-theta", description="Adapted theta-scheme quadrature and BSDE solver.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("integrate", help="integrate t^3 exp(-(t-1/2)^2) on [a, b]")
    p.add_argument("--q", type=int, default=2, help="adapted order (ignored with --theta)")
    p.add_argument("--n", type=int, required=True, help="number of subintervals")
    p.add_argument("--a", type=float, default=INTEGRAL_INTERVAL[0])
    p.add_argument("--b", type=float, default=INTEGRAL_INTERVAL[1])
    p.add_argument("--l-theta", type=float, default=INTEGRAL_LIMITS.l_theta)
    p.add_argument("--l-rho", type=float, default=INTEGRAL_LIMITS.l_rho)
    p.add_argument("--theta", type=float, default=None, help="use a fixed theta instead of the adapted one")
    p.add_argument("--trailing", choices=("reflect", "cn"), default="reflect", help="policy for the last q subintervals")

    p = sub.add_parser("bsde", help="solve a built-in BSDE and report the values at t=0, x=0")
    p.add_argument("--problem", default="example51")
    p.add_argument("--scheme", default="cn", help="cn, ada2, ada3, ada4 or theta:<value>")
    p.add_argument("--n", type=int, required=True, help="number of time steps")
    _add_bsde_options(p)

    p = sub.add_parser("study", help="run a convergence study and write a CSV or JSON report")
    p.add_argument("--target", default="bsde:example51", help="integral or bsde:<problem id>")
    p.add_argument("--schemes", type=_str_list, default=None, help="comma list of schemes")
    p.add_argument("--sizes", type=_int_list, default=None, help="comma list of partition sizes")
    p.add_argument("--out", required=True, help="output file")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    _add_bsde_options(p)
    return parser


def _add_bsde_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--gh-points", type=int, default=None)
    p.add_argument("--interp-order", type=int, default=None)
    p.add_argument("--half-width", type=float, default=None)
    p.add_argument("--bootstrap", choices=("refined", "exact"), default=None)
    p.add_argument("--substeps", type=int, default=None, help="refined bootstrap sub-steps per step (default N)")
    p.add_argument("--l-theta", type=float, default=None)
    p.add_argument("--l-rho", type=float, default=None)


def _scheme_options(args) -> dict:
    opts = {}
    if args.gh_points is not None:
        opts["gh_points"] = args.gh_points
    if args.interp_order is not None:
        opts["interp_order"] = args.interp_order
    if args.half_width is not None:
        opts["domain_half_width"] = args.half_width
    if args.bootstrap is not None:
        opts["bootstrap"] = args.bootstrap
    if args.substeps is not None:
        opts["bootstrap_substeps"] = args.substeps
    if args.l_theta is not None or args.l_rho is not None:
        base = SchemeConfig().limits
        opts["limits"] = ThetaLimits(
            args.l_theta if args.l_theta is not None else base.l_theta,
            args.l_rho if args.l_rho is not None else base.l_rho,
        )
    return opts


def cmd_integrate(args) -> int:
    part = PartitionSpec(args.a, args.b, args.n)
    if args.theta is not None:
        res = integrate_fixed_theta(reference_integrand, part, args.theta)
    else:
        res = integrate_adapted(reference_integrand, part, args.q, ThetaLimits(args.l_theta, args.l_rho), args.trailing)
    ref = integral_reference(args.a, args.b)
    print(f"value     {res.value:.15e}")
    print(f"reference {ref:.15e}")
    print(f"error     {abs(res.value - ref):.6e}")
    print(f"invalid   {res.invalid_count}")
    return 0


def cmd_bsde(args) -> int:
    problem = builtin_problem(args.problem)
    config = SchemeConfig.from_name(args.scheme, **_scheme_options(args))
    try:
        out = solve_bsde(problem, args.n, config)
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"y0        {out.y0:.15e}")
    print(f"z0        {out.z0:.15e}")
    if problem.exact is not None:
        y_ex, z_ex = problem.exact
        print(f"err_y     {abs(out.y0 - float(y_ex(0.0, 0.0))):.6e}")
        print(f"err_z     {abs(out.z0 - float(z_ex(0.0, 0.0))):.6e}")
    print(f"invalid   y={out.invalid_y} z={out.invalid_z}")
    print(f"grid      {out.grid.size} nodes, dx={out.grid.dx:.6e}")
    return 0


def cmd_study(args) -> int:
    if args.target == "integral":
        schemes = args.schemes or ["cn", "ada2", "ada3"]
        sizes = args.sizes or [128, 256, 512, 1024, 2048, 4096]
        spec = StudySpec(args.target, schemes, sizes)
    else:
        schemes = args.schemes or ["cn", "ada2", "ada3", "ada4"]
        sizes = args.sizes or [8, 16, 32, 64, 128]
        spec = StudySpec(args.target, schemes, sizes, scheme_options=_scheme_options(args))
    report = run_convergence_study(spec)
    emit_report(report, args.format, args.out)
    for scheme, rates in report.rates.items():
        print(scheme, " ".join(f"CR_{k}={v:.3f}" for k, v in rates.items()))
    for row in report.failures:
        print(f"failed: {row.scheme} N={row.N}: {row.error}", file=sys.stderr)
    return 1 if report.failures else 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return {"integrate": cmd_integrate, "bsde": cmd_bsde, "study": cmd_study}[args.command](args)
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
