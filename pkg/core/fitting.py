"""Least-squares mutation-rate fitting on binned log densities.

Per-site variant frequencies are pooled into one histogram over
`freq_range`. Each candidate p_B (with p_W = p_B / ratio) yields an
approximate R_n law made of atoms spaced roughly 1/k apart, so plain bins
would see the model as spikes and gaps. The comparison therefore runs on
atom cells: atom x's mass is spread evenly up to atom x+1, and a cell is
the run of bins from one atom's bin up to the next. Adjacent cells are
pooled left to right until each holds `min_cell_count` observations. The
objective is the count-weighted sum of squared log-density differences
over the pooled cells. Candidates come from a log-spaced grid followed by
golden-section refinement around the best grid point.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from core.approx_pmf import (
    ApproxRnPMF,
    BinnedLogDensity,
    cached_approx_rn_pmf,
    choose_k,
    clamp_k,
    log_density_from_masses,
    log_density_on_bins,
)
from core.errors import DomainError
from storage.models import BinSpec, FitConfig, FitResult, SiteObservation, UrnParams
from utils.helpers import round_sig


logger = logging.getLogger(__name__)

INV_PHI = (math.sqrt(5) - 1) / 2  # 1 / phi
INV_PHI_SQUARE = (3 - math.sqrt(5)) / 2  # 1 / phi^2


def filter_observations(
    obs: Sequence[SiteObservation], config: FitConfig
) -> List[SiteObservation]:
    """Keep rows with depth >= min_depth and strand_bias <= max_strand_bias."""
    kept = [
        o for o in obs
        if o.depth >= config.min_depth and o.strand_bias <= config.max_strand_bias
    ]
    logger.info(f"Filter kept {len(kept)} of {len(obs)} observations")
    return kept


def observed_frequencies(obs: Sequence[SiteObservation]) -> np.ndarray:
    """alt_count / depth for rows with at least one read."""
    return np.array(
        [o.frequency for o in obs if o.frequency is not None], dtype=float
    )


def empirical_log_density(
    freqs: Sequence[float], bins: BinSpec, truncate_renormalize: bool = False
) -> BinnedLogDensity:
    """count / (total * width) per non-empty bin.

    Samples outside [lo, hi] never enter a bin. They still count towards the
    total unless `truncate_renormalize` is set.
    """
    freqs = np.asarray(freqs, dtype=float)
    counts, _ = np.histogram(freqs, bins=bins.edges)
    inside = int(counts.sum())
    total = inside if truncate_renormalize else freqs.size
    if total == 0:
        return log_density_from_masses(np.zeros(bins.count), bins)
    return log_density_from_masses(counts.astype(float), bins, total=float(total))


def candidate_params(p_b: float, config: FitConfig) -> UrnParams:
    return UrnParams(u=config.u, v=config.v, p_w=p_b / config.ratio, p_b=p_b)


def model_pmf(p_b: float, config: FitConfig) -> ApproxRnPMF:
    """Approximate R_n law at candidate p_B, cut at config.k or the heuristic k."""
    params = candidate_params(p_b, config)
    k = config.k if config.k is not None else choose_k(params)
    k = clamp_k(k, config.n)
    return cached_approx_rn_pmf(params, config.n, k, config.exact_composition)


def model_log_density(p_b: float, config: FitConfig) -> BinnedLogDensity:
    """Approximate log density of R_n at candidate p_B, per bin."""
    pmf = model_pmf(p_b, config)
    return log_density_on_bins(pmf, config.bins, renormalize=config.truncate_renormalize)


def atom_cells(pmf: ApproxRnPMF, bins: BinSpec) -> Tuple[np.ndarray, np.ndarray]:
    """(first bin of each cell, model mass of each cell).

    Atom x's mass is spread evenly over [location_x, location_{x+1}) and
    only the share inside [lo, hi] is kept. The last atom, and atoms that
    share a location with the next one, stay points. A cell starts at the
    bin of an atom with mass in range and runs up to the next such bin;
    the first cell always starts at bin 0.
    """
    locations = np.asarray(pmf.locations, dtype=float)
    following = np.append(locations[1:], np.nan)
    span = following - locations
    start = np.maximum(locations, bins.lo)
    with np.errstate(divide="ignore", invalid="ignore"):
        share = np.clip((np.minimum(following, bins.hi) - start) / span, 0.0, 1.0)
    point = ~(span > 0.0)
    share[point] = (locations[point] >= bins.lo) & (locations[point] <= bins.hi)
    mass = np.asarray(pmf.masses, dtype=float) * share

    inside = mass > 0.0
    if not np.any(inside):
        return np.zeros(0, dtype=int), np.zeros(0)
    atom_bin = np.searchsorted(bins.edges, start[inside], side="right") - 1
    atom_bin = np.clip(atom_bin, 0, bins.count - 1)
    starts = np.unique(atom_bin)
    starts[0] = 0
    cell = np.searchsorted(starts, atom_bin, side="right") - 1
    return starts, np.bincount(cell, weights=mass[inside], minlength=starts.size)


def pool_cells(counts: Sequence[float], min_count: float) -> np.ndarray:
    """First cell of each group, pooling left to right until a group holds min_count.

    A short remainder joins the last group; with too few counts overall
    everything is one group.
    """
    firsts, acc = [0], 0.0
    for i, count in enumerate(counts):
        acc += count
        if acc >= min_count and i + 1 < len(counts):
            firsts.append(i + 1)
            acc = 0.0
    if acc < min_count and len(firsts) > 1:
        firsts.pop()
    return np.array(firsts, dtype=int)


def _group_density(
    bins: BinSpec, first_bin: np.ndarray, widths: np.ndarray, amounts: np.ndarray, total: float
) -> BinnedLogDensity:
    return BinnedLogDensity(
        bins=bins,
        bin_index=first_bin,
        centers=bins.edges[first_bin] + widths / 2,
        values=np.log(amounts / (total * widths)),
        weights=amounts,
        inside_mass=float(amounts.sum()),
    )


def cell_log_densities(
    pmf: ApproxRnPMF, bin_counts: np.ndarray, data_total: float, config: FitConfig
) -> Tuple[BinnedLogDensity, BinnedLogDensity]:
    """(model, data) log densities over the pooled atom cells of `pmf`.

    `bin_counts` is the data histogram on config.bins and `data_total` the
    sample size it is normalized by. Groups are keyed by their first bin.
    Empty when the model has no mass inside freq_range.
    """
    bins = config.bins
    starts, cell_mass = atom_cells(pmf, bins)
    if starts.size == 0:
        empty = log_density_from_masses(np.zeros(bins.count), bins)
        return empty, empty

    cell_counts = np.add.reduceat(np.asarray(bin_counts, dtype=float), starts)
    firsts = pool_cells(cell_counts, config.min_cell_count)
    first_bin = starts[firsts]
    widths = np.diff(np.append(first_bin, bins.count)) * bins.width
    model_mass = np.add.reduceat(cell_mass, firsts)
    data_count = np.add.reduceat(cell_counts, firsts)

    model_total = float(cell_mass.sum()) if config.truncate_renormalize else 1.0
    model = _group_density(bins, first_bin, widths, model_mass, model_total)
    seen = data_count > 0.0
    data = _group_density(
        bins, first_bin[seen], widths[seen], data_count[seen], data_total
    )
    return model, data


def squared_log_error(
    model: BinnedLogDensity, data: BinnedLogDensity, weighted: bool = False
) -> Tuple[float, int]:
    """(objective, shared bins); inf when no bin is non-empty in both.

    With `weighted` each squared difference counts `data.weights` times.
    """
    shared, model_pos, data_pos = np.intersect1d(
        model.bin_index, data.bin_index, assume_unique=True, return_indices=True
    )
    if shared.size == 0:
        return math.inf, 0
    diff = model.values[model_pos] - data.values[data_pos]
    weights = data.weights[data_pos] if weighted else np.ones(shared.size)
    return float(np.dot(weights, diff * diff)), int(shared.size)


def golden_section(
    f: Callable[[float], float], a: float, b: float, tol: float
) -> Tuple[float, float]:
    """Bracket [c, d] of width <= tol around a minimum of a unimodal f on [a, b]."""
    a, b = min(a, b), max(a, b)
    h = b - a
    if h <= tol:
        return a, b

    steps = int(math.ceil(math.log(tol / h) / math.log(INV_PHI)))
    c = a + INV_PHI_SQUARE * h
    d = a + INV_PHI * h
    yc = f(c)
    yd = f(d)

    for _ in range(steps - 1):
        if yc <= yd:
            b, d, yd = d, c, yc
            h = INV_PHI * h
            c = a + INV_PHI_SQUARE * h
            yc = f(c)
        else:
            a, c, yc = c, d, yd
            h = INV_PHI * h
            d = a + INV_PHI * h
            yd = f(d)

    if yc <= yd:
        return a, d
    return c, b


@dataclass
class _Objective:
    """Memoized objective over p_B for one data set."""

    bin_counts: np.ndarray
    data_total: float
    config: FitConfig
    seen: Dict[float, Tuple[float, int]]

    def at(self, p_b: float) -> Tuple[float, int]:
        if p_b not in self.seen:
            pmf = model_pmf(p_b, self.config)
            model, data = cell_log_densities(pmf, self.bin_counts, self.data_total, self.config)
            self.seen[p_b] = squared_log_error(model, data, weighted=True)
            logger.debug(f"Objective at p_B={p_b:.6g}: {self.seen[p_b][0]:.6g}")
        return self.seen[p_b]

    def of_log10(self, x: float) -> float:
        return self.at(10.0 ** x)[0]


def fit_frequencies(
    freqs: Sequence[float], config: FitConfig, filtered_count: Optional[int] = None
) -> FitResult:
    """Least-squares p_B for pooled frequencies."""
    freqs = np.asarray(freqs, dtype=float)
    bin_counts, _ = np.histogram(freqs, bins=config.bins.edges)
    inside = int(bin_counts.sum())
    if inside == 0:
        raise DomainError(
            f"no observations fall inside frequency range {config.freq_range}"
        )

    data_total = float(inside if config.truncate_renormalize else freqs.size)
    objective = _Objective(
        bin_counts=bin_counts, data_total=data_total, config=config, seen={}
    )
    lo, hi = config.search_range
    grid = np.linspace(lo, hi, config.grid_points)
    values = np.array([objective.of_log10(x) for x in grid])
    if not np.any(np.isfinite(values)):
        raise DomainError("no candidate puts approximate mass where the data lie")

    best = int(np.argmin(values))
    best_p, best_value = 10.0 ** grid[best], values[best]

    left = grid[max(best - 1, 0)]
    right = grid[min(best + 1, grid.size - 1)]
    tol = math.log10(1.0 + 10.0 ** (-config.sig_figs))
    c, d = golden_section(objective.of_log10, left, right, tol)
    refined = round_sig(10.0 ** (0.5 * (c + d)), config.sig_figs)
    if not 10.0 ** lo <= refined <= 10.0 ** hi:
        refined = 10.0 ** (0.5 * (c + d))
    refined_value = objective.at(refined)[0]
    if refined_value < best_value or (refined_value == best_value and refined < best_p):
        best_p, best_value = refined, refined_value

    warnings = []
    if best in (0, grid.size - 1):
        warnings.append(
            f"optimum at search boundary (log10 p_B = {grid[best]:g}); widen search_range"
        )
        logger.warning(warnings[-1])

    curve = sorted(
        (p, value) for p, (value, _) in objective.seen.items() if math.isfinite(value)
    )
    used_bins = objective.at(best_p)[1]
    result = FitResult(
        p_b_hat=float(best_p),
        objective_curve=[(float(p), float(v)) for p, v in curve],
        filtered_count=int(freqs.size if filtered_count is None else filtered_count),
        used_bins=used_bins,
        warnings=warnings,
    )
    logger.info(
        f"Fit finished: p_B_hat={result.p_b_hat:.6g}, objective={best_value:.6g}, "
        f"used_bins={used_bins}, evaluations={len(objective.seen)}"
    )
    return result


def fit_pB(obs: Sequence[SiteObservation], config: FitConfig) -> FitResult:
    """Filter observations, pool their frequencies and fit p_B."""
    kept = filter_observations(obs, config)
    if not kept:
        raise DomainError("no observations left after filtering")
    return fit_frequencies(observed_frequencies(kept), config, filtered_count=len(kept))


def fit_overlay(
    freqs: Sequence[float], config: FitConfig, p_b: float
) -> List[Dict[str, float]]:
    """Per-bin rows (bin_center, empirical and model log densities); NaN marks empty bins."""
    data = empirical_log_density(freqs, config.bins, config.truncate_renormalize)
    model = model_log_density(p_b, config)
    empirical = data.as_dict()
    fitted = model.as_dict()
    return [
        {
            "bin_center": float(center),
            "empirical_log_density": empirical.get(i, math.nan),
            "model_log_density": fitted.get(i, math.nan),
        }
        for i, center in enumerate(config.bins.centers)
    ]


__all__ = [
    "filter_observations",
    "observed_frequencies",
    "empirical_log_density",
    "candidate_params",
    "model_pmf",
    "model_log_density",
    "atom_cells",
    "pool_cells",
    "cell_log_densities",
    "squared_log_error",
    "golden_section",
    "fit_frequencies",
    "fit_pB",
    "fit_overlay",
]
