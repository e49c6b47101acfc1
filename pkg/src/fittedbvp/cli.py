"""Command line: ``fittedbvp solve | sweep | verify``.

Exit status 0 on success, 1 when the nonlinear iteration does not converge
(or ``verify`` finds violations), 2 on configuration or input errors.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .errors import BVPError, ConfigError, ExprSyntaxError, InvalidProblemError, MeshError
from .harness import MESHES, ORACLES, SCHEMES, SolveConfig, SweepConfig, load_problem, run_single, run_sweep
from .oracle import DEFAULT_N_REF
from .problems import ExpLayerProblem, validate_exp_assumptions, validate_pow_assumptions
from .solver import SolveOptions

EXIT_OK, EXIT_NOT_CONVERGED, EXIT_CONFIG = 0, 1, 2


def _float_list(text):
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _int_list(text):
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of integers: {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _range(text):
    lo, hi = _float_list(text)[:2] if "," in text else (None, None)
    if lo is None or not lo < hi:
        raise argparse.ArgumentTypeError(f"expected LO,HI with LO < HI, got {text!r}")
    return (lo, hi)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--problem", required=True, help="problem JSON file")
    common.add_argument("-v", "--verbose", action="store_true")

    solving = argparse.ArgumentParser(add_help=False)
    solving.add_argument("--mesh", choices=MESHES, help="default: uniform (exponential), layer (power)")
    solving.add_argument("--scheme", choices=SCHEMES, default="fitted")
    solving.add_argument("--tol", type=float, default=1e-10)
    solving.add_argument("--max-iter", type=int, default=100)
    solving.add_argument("--damping", type=float, default=1.0)
    solving.add_argument("--linearization", choices=("tangent", "lagged"), default="tangent",
                         help="treatment of the nonlinear terms inside each iteration")
    solving.add_argument("--as-printed-signs", action="store_true",
                         help="debug: flip the sign of g in the exponential scheme")
    solving.add_argument("--n-ref", type=int, default=DEFAULT_N_REF,
                         help="nodes of the fine-mesh reference solution")
    solving.add_argument("--out", help="output CSV path")

    parser = argparse.ArgumentParser(prog="fittedbvp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[common, solving], help="solve once, write nodal CSV")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--eps", type=float, help="override epsilon from the problem file")
    p.add_argument("--oracle", choices=ORACLES + ("none",), default="auto",
                   help="reference for the reported error (auto: closed form when available)")

    p = sub.add_parser("sweep", parents=[common, solving], help="(eps, N) convergence sweep")
    p.add_argument("--eps", type=_float_list, required=True, help="comma-separated epsilons")
    p.add_argument("--N", type=_int_list, required=True, help="comma-separated N values")
    p.add_argument("--oracle", choices=ORACLES, default="auto")
    p.add_argument("--dense-error", action="store_true",
                   help="measure the error on a 10x finer sampling of the reconstruction")
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("verify", parents=[common], help="sample the problem's structural assumptions")
    p.add_argument("--samples", type=int, default=257, help="samples per variable")
    p.add_argument("--u-range", type=_range, help="LO,HI range for u (default from boundary data)")
    return parser


def _options(args):
    try:
        return SolveOptions(tol=args.tol, max_iter=args.max_iter, damping=args.damping)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _cmd_solve(args):
    config = SolveConfig(
        problem_path=args.problem, N=args.N, mesh=args.mesh, scheme=args.scheme,
        options=_options(args), output=args.out, epsilon=args.eps,
        linearization=args.linearization, as_printed_signs=args.as_printed_signs,
        oracle=None if args.oracle == "none" else args.oracle, n_ref=args.n_ref,
    )
    result = run_single(config)
    if args.out is None:
        sys.stdout.write(result.nodal_csv())
    print(result.summary(args.scheme), file=sys.stderr if args.out is None else sys.stdout)
    return EXIT_OK if result.stats.converged else EXIT_NOT_CONVERGED


def _cmd_sweep(args):
    config = SweepConfig(
        problem_path=args.problem, epsilons=args.eps, Ns=args.N, scheme=args.scheme,
        mesh=args.mesh, oracle=args.oracle, options=_options(args), output=args.out,
        linearization=args.linearization, as_printed_signs=args.as_printed_signs,
        dense_error=args.dense_error, n_ref=args.n_ref, jobs=args.jobs,
    )
    report = run_sweep(config)
    if args.out is None:
        sys.stdout.write(report.to_csv())
    bad = [r for r in report.rows if r.status != "ok"]
    for r in bad:
        print(f"eps={r.epsilon:g} N={r.N}: {r.status}", file=sys.stderr)
    return EXIT_OK if not bad else EXIT_NOT_CONVERGED


def _cmd_verify(args):
    problem = load_problem(args.problem)
    if isinstance(problem, ExpLayerProblem):
        report = validate_exp_assumptions(problem, args.samples, args.u_range, args.samples)
    else:
        report = validate_pow_assumptions(problem, args.samples, args.u_range, args.samples)
    print(report.summary())
    return EXIT_OK if report.passed else EXIT_NOT_CONVERGED


COMMANDS = {"solve": _cmd_solve, "sweep": _cmd_sweep, "verify": _cmd_verify}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ExprSyntaxError, InvalidProblemError, MeshError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BVPError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED


if __name__ == "__main__":
    sys.exit(main())
