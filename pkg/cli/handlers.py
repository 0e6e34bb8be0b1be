"""Subcommand handlers.

One handler per subcommand:
- moments: exact mean and variance of M_n
- pmf: approximate R_n law, binned log density and the error-bound report
- simulate: seeded ensemble histogram, optionally next to the approximation
- fit: least-squares p_B from a TSV of per-site read counts
- mr-check: published Matthews-Rosenberger variance against the exact one

Every handler takes the parsed argparse namespace and returns an exit status.
"""

from __future__ import annotations

import argparse
import asyncio
import logging
import math
from typing import Optional

import numpy as np

from cli.config import SimulationMethod, settings
from core.approx_pmf import (
    BinnedLogDensity,
    binned_masses,
    bound_factors,
    cached_approx_rn_pmf,
    chebyshev_bound,
    chebyshev_interval,
    choose_k,
    clamp_k,
    expected_early_changes,
    log_density_on_bins,
    mkstar_pmf,
    prop2_bounds_table,
    prop3_bound,
    prop3_tight_bound,
    tv_distance,
)
from core.container import Container
from core.fitting import filter_observations, fit_overlay, fit_pB, observed_frequencies
from core.martingale import moments
from core.middleware import EXIT_OK, with_middleware
from core.mr_appendix import mr_check, mr_special_case
from core.simulate import run_ensemble
from core.urn import limit_fraction
from storage.models import BinSpec, FitConfig, SimConfig, UrnParams
from storage.writers import dumps_json


logger = logging.getLogger(__name__)


def params_from_args(args: argparse.Namespace) -> UrnParams:
    """UrnParams from --u --v --pw --pb; --pw defaults to pb / ratio."""
    p_w = args.pw if args.pw is not None else args.pb / args.ratio
    return UrnParams(u=args.u, v=args.v, p_w=p_w, p_b=args.pb)


def _cut_step(args: argparse.Namespace, params: UrnParams) -> int:
    k = args.k if args.k is not None else choose_k(params)
    return clamp_k(k, args.n)


def _bins_from_args(args: argparse.Namespace) -> BinSpec:
    return BinSpec(lo=args.lo, hi=args.hi, count=args.bins)


def _on_every_bin(density: BinnedLogDensity) -> np.ndarray:
    """Spread a log density over all bins; empty bins become NaN."""
    column = np.full(density.bins.count, np.nan)
    column[density.bin_index] = density.values
    return column


@with_middleware
def moments_command(args: argparse.Namespace) -> int:
    """Print exact E[M_n], Var[M_n] and the moments of R_n as JSON."""
    params = params_from_args(args)
    mean, variance = moments(params, args.n)
    print(dumps_json({
        "params": params.model_dump(),
        "n": args.n,
        "mean": mean,
        "variance": variance,
        "mean_Rn": mean / args.n,
        "sd_Rn": math.sqrt(max(variance, 0.0)) / args.n,
        "limit_fraction": limit_fraction(params),
    }))
    return EXIT_OK


@with_middleware
def pmf_command(args: argparse.Namespace) -> int:
    """Write atoms.csv, log_density.csv and report.json."""
    params = params_from_args(args)
    k = _cut_step(args, params)
    pmf = cached_approx_rn_pmf(params, args.n, k, args.exact_composition)
    stage = mkstar_pmf(params, k)
    bins = _bins_from_args(args)
    writer = Container.get_writer(args.out)

    lower, upper = prop2_bounds_table(params, stage)
    cheb_lo, cheb_hi, _ = chebyshev_interval(pmf.locations, pmf.drift.sigma2, args.n, args.t)
    writer.write_csv("atoms.csv", {
        "x": np.arange(k + 1),
        "location": pmf.locations,
        "mass": pmf.masses,
        "mu": pmf.drift.mu,
        "sigma2": pmf.drift.sigma2,
        "mk_lower": lower,
        "mk_upper": upper,
        "chebyshev_lo": cheb_lo,
        "chebyshev_hi": cheb_hi,
    })

    density = log_density_on_bins(pmf, bins, renormalize=args.renormalize)
    writer.write_csv("log_density.csv", {
        "bin_center": density.centers,
        "log_density": density.values,
        "mass": density.weights,
    })

    factors = bound_factors(params, k)
    worst = int(np.argmax(pmf.drift.sigma2))
    worst_lo, worst_hi, prob = chebyshev_interval(
        float(pmf.locations[worst]), float(pmf.drift.sigma2[worst]), args.n, args.t
    )
    report = {
        "params": params.model_dump(),
        "n": args.n,
        "k": k,
        "exact_composition": (
            settings.exact_composition if args.exact_composition is None
            else args.exact_composition
        ),
        "expected_early_changes": expected_early_changes(params, k),
        "mk_bounds": {
            "lower_factor": factors.lower,
            "upper_factor": factors.upper,
            "additive_slack": factors.slack,
            "exact_at": factors.exact_at,
        },
        "variance_bound": {
            "prop3_bound": prop3_bound(k),
            "tight_bound": prop3_tight_bound(args.n, k),
            "max_sigma2_over_n2": float(pmf.drift.sigma2.max()) / args.n ** 2,
        },
        "chebyshev": {
            "t": args.t,
            "prob_bound": prob,
            "worst_case_radius": chebyshev_bound(args.n ** 2 * prop3_bound(k), args.n, args.t)[0],
            "widest_atom": {"x": worst, "lo": worst_lo, "hi": worst_hi},
        },
        "mass_in_range": density.inside_mass,
    }
    writer.write_json("report.json", report)
    return EXIT_OK


@with_middleware
def simulate_command(args: argparse.Namespace) -> int:
    """Write histogram.csv and summary.json for one seeded ensemble."""
    params = params_from_args(args)
    bins = _bins_from_args(args)
    config = SimConfig(
        params=params,
        n=args.n,
        replications=args.reps,
        master_seed=args.seed,
        method=SimulationMethod(args.method),
        bins=bins,
    )
    result = run_ensemble(config, workers=args.workers)
    writer = Container.get_writer(args.out)

    table = {
        "bin_lo": bins.edges[:-1],
        "bin_hi": bins.edges[1:],
        "count": result.histogram,
        "log_density": _on_every_bin(result.log_density()),
    }

    mean, variance = moments(params, args.n)
    summary = {
        "params": params.model_dump(),
        "n": args.n,
        "replications": result.replications,
        "seed": result.seed,
        "method": result.method.value,
        "sample_mean": result.sample_mean,
        "sample_var": result.sample_var,
        "mean_Rn": result.rn_mean,
        "sd_Rn": result.rn_sd,
        "exact_mean": mean,
        "exact_variance": variance,
        "out_of_range": result.out_of_range,
    }

    if args.compare:
        k = _cut_step(args, params)
        pmf = cached_approx_rn_pmf(params, args.n, k, args.exact_composition)
        approx = binned_masses(pmf.locations, pmf.masses, bins)
        table["approx_log_density"] = _on_every_bin(log_density_on_bins(pmf, bins))
        summary["k"] = k
        summary["tv_distance"] = tv_distance(result.histogram, approx)

    writer.write_csv("histogram.csv", table)
    writer.write_json("summary.json", summary)
    return EXIT_OK


def _fit_config_from_args(args: argparse.Namespace) -> FitConfig:
    overrides = {
        "ratio": args.ratio,
        "n": args.n,
        "k": args.k,
        "u": args.u,
        "v": args.v,
        "min_depth": args.min_depth,
        "max_strand_bias": args.max_strand_bias,
        "freq_range": (args.lo, args.hi),
        "bin_count": args.bins,
        "search_range": (args.search_lo, args.search_hi),
        "grid_points": args.grid_points,
        "min_cell_count": args.min_cell_count,
        "truncate_renormalize": args.renormalize,
        "exact_composition": args.exact_composition,
    }
    return FitConfig(**{k: v for k, v in overrides.items() if v is not None})


@with_middleware
def fit_command(args: argparse.Namespace) -> int:
    """Write fit.json and overlay.csv; print the fit as JSON."""
    config = _fit_config_from_args(args)
    repository = Container.get_repository(args.input)
    observations = asyncio.run(repository.load())

    result = fit_pB(observations, config)
    freqs = observed_frequencies(filter_observations(observations, config))

    writer = Container.get_writer(args.out)
    payload = result.model_dump(mode="json")
    writer.write_json("fit.json", payload)
    writer.write_csv("overlay.csv", fit_overlay(freqs, config, result.p_b_hat))
    print(dumps_json(payload))
    return EXIT_OK


@with_middleware
def mr_check_command(args: argparse.Namespace) -> int:
    """Print the published-vs-exact variance comparison as JSON."""
    params = params_from_args(args)
    comparison = mr_check(params, args.n)
    payload = {
        "params": params.model_dump(),
        "n": comparison.n,
        "mr_variance": comparison.mr_variance,
        "mr_sd_Rn": comparison.mr_sd,
        "correct_variance": comparison.correct_variance,
        "correct_sd_Rn": comparison.correct_sd,
        "excess": comparison.excess,
        "first_term": comparison.first_term,
    }
    special: Optional[float] = None
    if params.u == params.v and params.p_w == params.p_b == 0.5:
        special = mr_special_case(args.n, params.total)
    payload["special_case"] = special
    print(dumps_json(payload))
    return EXIT_OK


__all__ = [
    "params_from_args",
    "moments_command",
    "pmf_command",
    "simulate_command",
    "fit_command",
    "mr_check_command",
]
