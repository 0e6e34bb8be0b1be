"""Main entry point for the RPW urn toolkit.

Key features:
- argparse command line with one subcommand per service
- Dependency Injection via `core.container.Container`
- Middleware for logging and exit-code mapping
- Logs on stderr, machine-readable results on stdout or in files
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Optional, Sequence

from cli.config import SimulationMethod, settings
from cli.handlers import (
    fit_command,
    mr_check_command,
    moments_command,
    pmf_command,
    simulate_command,
)
from core.errors import UsageError
from core.middleware import EXIT_USAGE


logger = logging.getLogger(__name__)

# Worked-example parameters used as defaults by pmf / simulate / fit.
DEFAULT_PB = 1e-6
DEFAULT_RATIO = 3.0


class CLIParser(argparse.ArgumentParser):
    """ArgumentParser that raises instead of exiting on bad usage."""

    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(message)


def setup_logging() -> None:
    """Configure application logging."""

    level = getattr(logging, (settings.log_level or "INFO").upper(), logging.INFO)

    logging.basicConfig(
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        level=level,
        stream=sys.stderr,
    )

    if settings.debug:
        logging.getLogger().setLevel(logging.DEBUG)


def _add_urn_args(
    parser: argparse.ArgumentParser,
    u: Optional[int],
    v: Optional[int],
    pb: Optional[float],
    pw: Optional[float] = None,
    ratio: Optional[float] = DEFAULT_RATIO,
) -> None:
    group = parser.add_argument_group("urn parameters")
    group.add_argument("--u", type=int, default=u, required=u is None,
                       help="initial white balls")
    group.add_argument("--v", type=int, default=v, required=v is None,
                       help="initial black balls")
    group.add_argument("--pb", type=float, default=pb, required=pb is None,
                       help="black -> white switch probability p_B")
    group.add_argument("--pw", type=float, default=pw,
                       help="white -> black switch probability p_W (default pb / ratio)")
    group.add_argument("--ratio", type=float, default=ratio,
                       help="p_B / p_W used when --pw is omitted")


def _add_bin_args(parser: argparse.ArgumentParser, lo: float, hi: float) -> None:
    group = parser.add_argument_group("binning")
    group.add_argument("--lo", type=float, default=lo, help="lower edge of the R_n range")
    group.add_argument("--hi", type=float, default=hi, help="upper edge of the R_n range")
    group.add_argument("--bins", type=int, default=settings.default_bins, help="bin count")


def _add_approx_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--k", type=int, default=None,
                        help="cut step (default round(p_B^(-2/3)), clamped to [1, n-1])")
    parser.add_argument("--exact-composition", dest="exact_composition",
                        action="store_true", default=None,
                        help="start stage two from (u+x, v+k-x) instead of (x, k-x)")


def build_parser() -> argparse.ArgumentParser:
    """Build the command-line parser."""

    parser = CLIParser(
        prog="rpw",
        description="Moments, approximate PMFs, simulation and fitting for the RPW urn.",
    )
    sub = parser.add_subparsers(dest="command", parser_class=CLIParser)

    moments = sub.add_parser("moments", help="exact mean and variance of M_n")
    _add_urn_args(moments, u=None, v=None, pb=None)
    moments.add_argument("--n", type=int, required=True, help="number of steps")
    moments.set_defaults(handler=moments_command)

    pmf = sub.add_parser("pmf", help="approximate PMF of R_n with error bounds")
    _add_urn_args(pmf, u=0, v=1, pb=DEFAULT_PB)
    pmf.add_argument("--n", type=int, default=1_000_000, help="number of steps")
    _add_approx_args(pmf)
    _add_bin_args(pmf, lo=0.0, hi=0.002)
    pmf.add_argument("--t", type=float, default=10.0, help="Chebyshev multiplier")
    pmf.add_argument("--renormalize", action="store_true",
                     help="renormalize densities to the mass inside [lo, hi]")
    pmf.add_argument("--out", default="results/pmf", help="output directory")
    pmf.set_defaults(handler=pmf_command)

    simulate = sub.add_parser("simulate", help="seeded Monte Carlo histogram of R_n")
    _add_urn_args(simulate, u=0, v=1, pb=DEFAULT_PB)
    simulate.add_argument("--n", type=int, default=100_000, help="number of steps")
    simulate.add_argument("--reps", type=int, default=10_000, help="replications")
    simulate.add_argument("--seed", type=int, default=0, help="64-bit master seed")
    simulate.add_argument("--method", choices=[m.value for m in SimulationMethod],
                          default=SimulationMethod.AUTO.value)
    simulate.add_argument("--workers", type=int, default=None,
                          help="concurrent replication blocks (default RPW_SIM_WORKERS)")
    simulate.add_argument("--compare", action="store_true",
                          help="add the approximate log density on the same bins")
    _add_approx_args(simulate)
    _add_bin_args(simulate, lo=0.0, hi=0.002)
    simulate.add_argument("--out", default="results/simulate", help="output directory")
    simulate.set_defaults(handler=simulate_command)

    fit = sub.add_parser("fit", help="least-squares p_B from per-site read counts")
    fit.add_argument("--input", required=True, help="TSV of sample_id/site/depth/alt_count/strand_bias")
    fit.add_argument("--u", type=int, default=None, help="initial mutated particles")
    fit.add_argument("--v", type=int, default=None, help="initial wild-type particles")
    fit.add_argument("--ratio", type=float, default=None, help="p_B / p_W")
    fit.add_argument("--n", type=int, default=None, help="viral population size")
    fit.add_argument("--min-depth", dest="min_depth", type=int, default=None)
    fit.add_argument("--max-strand-bias", dest="max_strand_bias", type=float, default=None)
    fit.add_argument("--search-lo", dest="search_lo", type=float, default=-8.0,
                     help="lower end of the log10 p_B search")
    fit.add_argument("--search-hi", dest="search_hi", type=float, default=-4.0,
                     help="upper end of the log10 p_B search")
    fit.add_argument("--grid-points", dest="grid_points", type=int, default=None)
    fit.add_argument("--min-cell-count", dest="min_cell_count", type=int, default=None,
                     help="observations per pooled atom cell (default 5)")
    fit.add_argument("--renormalize", action="store_true", default=None,
                     help="drop out-of-range frequencies from the density total")
    _add_approx_args(fit)
    _add_bin_args(fit, lo=0.0, hi=0.002)
    fit.add_argument("--out", default="results/fit", help="output directory")
    fit.set_defaults(handler=fit_command)

    mr = sub.add_parser("mr-check", help="published Matthews-Rosenberger variance vs exact")
    _add_urn_args(mr, u=1, v=1, pb=0.5, pw=0.5)
    mr.add_argument("--n", type=int, default=25, help="number of steps")
    mr.set_defaults(handler=mr_check_command)

    return parser


def cli_dispatch(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments and run one subcommand; returns the exit status."""

    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    if not argv:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE

    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {e}", file=sys.stderr)
        return EXIT_USAGE

    if getattr(args, "handler", None) is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    return args.handler(args)


def main() -> None:
    """Run the command line."""

    setup_logging()
    sys.exit(cli_dispatch())


if __name__ == "__main__":
    main()
